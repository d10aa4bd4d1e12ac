#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tbp {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

// Ordered, timestamped 2-D positions. Frames are strictly increasing.
class PointSequence {
public:
    PointSequence() = default;
    PointSequence(std::vector<Point2> points, std::vector<int> frames);

    void push_back(Point2 p, int frame);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const std::vector<Point2>& points() const { return points_; }
    const std::vector<int>& frames() const { return frames_; }
    const Point2& operator[](std::size_t i) const { return points_[i]; }
    const Point2& back() const { return points_.back(); }

    friend bool operator==(const PointSequence&, const PointSequence&) = default;

private:
    std::vector<Point2> points_;
    std::vector<int> frames_;
};

// A sequence of equal-dimension real vectors stored contiguously in time order.
class VectorSequence {
public:
    VectorSequence() = default;
    explicit VectorSequence(std::size_t dim) : dim_(dim) {}

    void push_back(std::span<const double> v);

    std::size_t dim() const { return dim_; }
    std::size_t steps() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::span<const double> step(std::size_t t) const {
        return {data_.data() + t * dim_, dim_};
    }
    // Concatenation of all steps in time order.
    std::span<const double> flat() const { return data_; }

    friend bool operator==(const VectorSequence&, const VectorSequence&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

double euclidean(Point2 a, Point2 b);

// max over a in A of min over b in B of |a - b|. Timestamps are ignored.
double directed_hausdorff(std::span<const Point2> A, std::span<const Point2> B);

// Symmetric Hausdorff distance between two point sets.
double spatial_dissimilarity(std::span<const Point2> A, std::span<const Point2> B);

inline double directed_hausdorff(const PointSequence& A, const PointSequence& B) {
    return directed_hausdorff(std::span(A.points()), std::span(B.points()));
}
inline double spatial_dissimilarity(const PointSequence& A, const PointSequence& B) {
    return spatial_dissimilarity(std::span(A.points()), std::span(B.points()));
}

// One minus the cosine similarity of the time-flattened sequences, in [0, 2].
double context_dissimilarity(const VectorSequence& U, const VectorSequence& V);

}  // namespace tbp
