#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace tbp {

// Row-major cost matrix. Entries greater than the gate are forbidden.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> cost;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), cost(r * c, 0.0) {}
    double& operator()(std::size_t r, std::size_t c) { return cost[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return cost[r * cols + c]; }
};

struct Assignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
    std::vector<std::size_t> unmatched_rows;
    std::vector<std::size_t> unmatched_cols;
    double total_cost = 0.0;
};

// Among one-to-one matchings that only use entries <= gate, returns one with
// the largest number of pairs and, among those, the smallest total cost.
Assignment solve_gated_assignment(const CostMatrix& m, double gate);

// Repeatedly takes the cheapest remaining admissible entry (ties: lower row,
// then lower column). Order-dependent; kept for fidelity experiments.
Assignment solve_greedy_assignment(const CostMatrix& m, double gate);

// Dense square Hungarian algorithm (shortest augmenting path with potentials).
// Returns col_of_row.
std::vector<std::size_t> hungarian_square(const std::vector<double>& cost, std::size_t n);

}  // namespace tbp
