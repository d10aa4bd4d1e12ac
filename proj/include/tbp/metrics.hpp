#pragma once

// CLEAR-MOT tracking metrics and framewise detection metrics on centroids.

#include <string>
#include <vector>

#include "tbp/scene.hpp"

namespace tbp::metrics {

struct FrameMatch {
    int frame = 0;
    int gt_id = 0;
    int hyp_id = 0;
    double distance = 0.0;
    bool switched = false;
};

struct EvalReport {
    double mota = 0.0;
    double motp = 0.0;        // mean matched distance, scene units
    double mt_percent = 0.0;  // targets tracked for >= 80% of their frames
    double ml_percent = 0.0;  // targets tracked for <= 20% of their frames
    std::size_t targets = 0;
    std::size_t mostly_tracked = 0;
    std::size_t mostly_lost = 0;
    std::size_t gt_objects = 0;  // sum over frames of ground-truth objects
    std::size_t matches = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t ids = 0;
    std::size_t frag = 0;
    double moda = 0.0;
    double modp = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::vector<FrameMatch> log;
};

// Per frame: keep last known GT -> hypothesis correspondences that are still
// within `threshold`, then match the rest by a minimum-cost gated assignment.
EvalReport evaluate_tracking(const TrackSet& ground_truth, const TrackSet& hypotheses, double threshold);

// Pools the counts of independent sequences (e.g. the scenes of a suite)
// and recomputes the ratios; match logs are concatenated.
EvalReport combine(const std::vector<EvalReport>& parts);

struct DetectionReport {
    double moda = 0.0;
    double modp = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t gt_objects = 0;
};

DetectionReport evaluate_detection(const TrackSet& ground_truth, const DetectionStream& detections,
                                   double threshold);

// Fixed-width table and key=value lines.
std::string format_table(const EvalReport& r, const std::string& label = "");
std::string format_table_header();
std::string format_key_values(const EvalReport& r);

}  // namespace tbp::metrics
