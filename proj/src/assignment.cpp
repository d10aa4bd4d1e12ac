#include "tbp/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace tbp {

std::vector<std::size_t> hungarian_square(const std::vector<double>& cost, std::size_t n) {
    // 1-based potentials formulation; p[j] = row matched to column j.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> col_of_row(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
    return col_of_row;
}

namespace {

Assignment finish(const CostMatrix& m, std::vector<std::pair<std::size_t, std::size_t>> pairs) {
    Assignment out;
    std::sort(pairs.begin(), pairs.end());
    std::vector<char> row_used(m.rows, 0), col_used(m.cols, 0);
    for (auto [r, c] : pairs) {
        row_used[r] = 1;
        col_used[c] = 1;
        out.total_cost += m(r, c);
    }
    out.pairs = std::move(pairs);
    for (std::size_t r = 0; r < m.rows; ++r)
        if (!row_used[r]) out.unmatched_rows.push_back(r);
    for (std::size_t c = 0; c < m.cols; ++c)
        if (!col_used[c]) out.unmatched_cols.push_back(c);
    return out;
}

}  // namespace

Assignment solve_gated_assignment(const CostMatrix& m, double gate) {
    if (m.rows == 0 || m.cols == 0) return finish(m, {});

    // Forbidden entries cost more than any complete set of admissible ones,
    // so the optimum maximises the admissible count before minimising cost.
    double admissible_sum = 0.0;
    for (double c : m.cost)
        if (c <= gate) admissible_sum += c;
    const double forbidden = 1.0 + 2.0 * admissible_sum;

    const std::size_t n = std::max(m.rows, m.cols);
    std::vector<double> sq(n * n, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) {
            const double v = m(r, c);
            sq[r * n + c] = v <= gate ? v : forbidden;
        }
    // Padding rows/columns keep cost 0.
    const auto col_of_row = hungarian_square(sq, n);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 0; r < m.rows; ++r) {
        const std::size_t c = col_of_row[r];
        if (c < m.cols && m(r, c) <= gate) pairs.emplace_back(r, c);
    }
    return finish(m, std::move(pairs));
}

Assignment solve_greedy_assignment(const CostMatrix& m, double gate) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < m.cost.size(); ++i)
        if (m.cost[i] <= gate) order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m.cost[a] < m.cost[b]; });
    std::vector<char> row_used(m.rows, 0), col_used(m.cols, 0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t idx : order) {
        const std::size_t r = idx / m.cols, c = idx % m.cols;
        if (row_used[r] || col_used[c]) continue;
        row_used[r] = col_used[c] = 1;
        pairs.emplace_back(r, c);
    }
    return finish(m, std::move(pairs));
}

}  // namespace tbp
