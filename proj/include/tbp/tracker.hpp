#pragma once

// Tracking by prediction. Live tracks sit in an object pool; every frame runs
// associate -> spawn -> merge_pass -> terminate -> refresh_predictions.
//
// Detections are gated against each track's short-horizon prediction. Tracks
// whose long-horizon predictions agree both spatially (Hausdorff distance)
// and in attention context (cosine dissimilarity) are merged into the elder.
// In the long-term modes an unassociated track coasts along its long-horizon
// prediction; coasted points that end up between two observations stay in
// the output, trailing ones are dropped.

#include <string_view>
#include <vector>

#include "tbp/assignment.hpp"
#include "tbp/predictor.hpp"
#include "tbp/scene.hpp"

namespace tbp::tracking {

// T1: association only. T2: + spatial merge. T3: + context merge.
// T4: + merge on both (default).
enum class Mode { T1, T2, T3, T4 };
std::string_view mode_name(Mode m);
Mode parse_mode(std::string_view s);

enum class Association { Hungarian, Greedy };
std::string_view association_name(Association a);
Association parse_association(std::string_view s);

struct TrackerConfig {
    double assoc_gate = 0.03;    // normalised units
    double sd_threshold = 0.01;  // normalised units
    double cd_threshold = 0.001;
    int termination_age = 10;
    Mode mode = Mode::T4;
    Association association = Association::Hungarian;
    predictor::PredictorConfig predictor;

    bool uses_long_term() const { return mode != Mode::T1; }
    bool merge_on_sd() const { return mode == Mode::T2 || mode == Mode::T4; }
    bool merge_on_cd() const { return mode == Mode::T3 || mode == Mode::T4; }
    void validate() const;

    friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

struct Track {
    int id = 0;
    int birth_frame = 0;
    PointSequence history;        // normalised positions
    std::vector<bool> predicted;  // per history point: coasted, not observed
    predictor::PredictionResult short_pred;
    predictor::PredictionResult long_pred;
    bool has_predictions = false;
    int last_update_frame = 0;
    int frames_since_update = 0;
    bool terminated = false;
};

struct ObjectPool {
    std::vector<Track> live;     // ascending id
    std::vector<Track> archive;  // append-only
    int next_id = 1;
};

struct MatchedPair {
    int track_id = 0;
    std::size_t detection = 0;
    double cost = 0.0;
};

struct AssociationResult {
    std::vector<MatchedPair> pairs;
    std::vector<std::size_t> unmatched_detections;
    std::vector<int> unmatched_tracks;
};

struct FrameReport {
    int frame = 0;
    std::size_t live_before = 0;
    std::size_t live_after = 0;
    std::size_t spawned = 0;
    std::size_t merged = 0;
    std::size_t terminated = 0;
    AssociationResult association;
};

class Tracker {
public:
    Tracker(TrackerConfig config, predictor::Predictor short_model, predictor::Predictor long_model);

    // Individual stages; `step` composes them. Detection coordinates are in
    // scene units and normalised with the configured bounds.
    void initialise(const DetectionFrame& frame);
    AssociationResult associate(const DetectionFrame& frame);
    std::size_t spawn(const DetectionFrame& frame, const std::vector<std::size_t>& detections);
    std::size_t merge_pass();
    std::size_t terminate();
    void refresh_predictions();

    FrameReport step(const DetectionFrame& frame);

    // Archive plus live tracks in scene units, trailing coasted points removed.
    TrackSet finish() const;

    const ObjectPool& pool() const { return pool_; }
    ObjectPool& pool() { return pool_; }
    const TrackerConfig& config() const { return config_; }
    int current_frame() const { return frame_; }

    // Position a track is gated against at `frame` (normalised).
    Point2 gating_position(const Track& t, int frame) const;
    // Other live tracks within the neighbour radius, by last position.
    std::vector<int> neighbours_of(const Track& t) const;

private:
    void predict_track(Track& t) const;
    void coast(Track& t) const;

    TrackerConfig config_;
    predictor::Predictor short_;
    predictor::Predictor long_;
    ObjectPool pool_;
    int frame_ = 0;
};

// Frames must be strictly increasing; missing frames count as empty.
TrackSet run(const DetectionStream& stream, const TrackerConfig& config,
             const predictor::Predictor& short_model, const predictor::Predictor& long_model,
             std::vector<FrameReport>* reports = nullptr);

}  // namespace tbp::tracking
