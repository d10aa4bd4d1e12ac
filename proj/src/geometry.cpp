#include "tbp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tbp/error.hpp"
#include "tbp/simd.hpp"

namespace tbp {

PointSequence::PointSequence(std::vector<Point2> points, std::vector<int> frames)
    : points_(std::move(points)), frames_(std::move(frames)) {
    if (points_.size() != frames_.size())
        throw DimensionMismatch("PointSequence: points and frames differ in length");
    for (std::size_t i = 1; i < frames_.size(); ++i)
        if (frames_[i] <= frames_[i - 1])
            throw Error("PointSequence: frames must be strictly increasing");
}

void PointSequence::push_back(Point2 p, int frame) {
    if (!frames_.empty() && frame <= frames_.back())
        throw Error("PointSequence: frame " + std::to_string(frame) +
                    " does not follow " + std::to_string(frames_.back()));
    points_.push_back(p);
    frames_.push_back(frame);
}

void VectorSequence::push_back(std::span<const double> v) {
    if (v.size() != dim_)
        throw DimensionMismatch("VectorSequence: step dimension " + std::to_string(v.size()) +
                                " != " + std::to_string(dim_));
    data_.insert(data_.end(), v.begin(), v.end());
}

double euclidean(Point2 a, Point2 b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

double directed_hausdorff(std::span<const Point2> A, std::span<const Point2> B) {
    if (A.empty() || B.empty()) throw EmptySequence();
    std::vector<double> xs(B.size()), ys(B.size());
    for (std::size_t i = 0; i < B.size(); ++i) {
        xs[i] = B[i].x;
        ys[i] = B[i].y;
    }
    const auto& k = simd::kernels();
    double worst = 0.0;
    for (const Point2& a : A)
        worst = std::max(worst, k.min_sq_dist(a.x, a.y, xs.data(), ys.data(), B.size()));
    // sqrt is monotone and correctly rounded, so taking it last is exact.
    return std::sqrt(worst);
}

double spatial_dissimilarity(std::span<const Point2> A, std::span<const Point2> B) {
    return std::max(directed_hausdorff(A, B), directed_hausdorff(B, A));
}

double context_dissimilarity(const VectorSequence& U, const VectorSequence& V) {
    if (U.dim() != V.dim() || U.steps() != V.steps())
        throw DimensionMismatch("context_dissimilarity: sequences differ in shape");
    const auto u = U.flat();
    const auto v = V.flat();
    const auto& k = simd::kernels();
    const double uu = k.dot(u.data(), u.data(), u.size());
    const double vv = k.dot(v.data(), v.data(), v.size());
    if (uu == 0.0 || vv == 0.0) throw ZeroNorm();
    const double cosine = k.dot(u.data(), v.data(), u.size()) / (std::sqrt(uu) * std::sqrt(vv));
    return std::clamp(1.0 - cosine, 0.0, 2.0);
}

}  // namespace tbp
