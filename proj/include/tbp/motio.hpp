#pragma once

// MOTChallenge text files and the key = value run configuration.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tbp/predictor.hpp"
#include "tbp/scene.hpp"
#include "tbp/simulator.hpp"
#include "tbp/tracker.hpp"

namespace tbp::io {

// frame, id, bb_left, bb_top, bb_width, bb_height, conf, x, y, z.
// id is -1 for raw detections; x, y, z are -1 when absent.
struct MotRecord {
    int frame = 1;
    int id = -1;
    double bb_left = 0.0;
    double bb_top = 0.0;
    double bb_width = 0.0;
    double bb_height = 0.0;
    double conf = 1.0;
    double x = -1.0;
    double y = -1.0;
    double z = -1.0;

    Point2 centroid() const { return {bb_left + bb_width / 2.0, bb_top + bb_height / 2.0}; }
    friend bool operator==(const MotRecord&, const MotRecord&) = default;
};

// Records in file order. Blank lines are skipped; any other line must hold
// exactly ten comma-separated numbers, otherwise ParseError with its line.
std::vector<MotRecord> parse_mot(std::string_view text);
std::vector<MotRecord> parse_mot(std::istream& in);
std::vector<MotRecord> read_mot_file(const std::string& path);

// Ordered by (frame, id), numbers to 6 significant digits.
std::string write_mot(std::span<const MotRecord> records);
void write_mot_file(const std::string& path, std::span<const MotRecord> records);

// Conversions. Detection records are grouped by frame in ascending order;
// track records must not repeat an (id, frame) pair.
DetectionStream to_detections(std::span<const MotRecord> records);
std::vector<MotRecord> from_detections(const DetectionStream& stream);
TrackSet to_tracks(std::span<const MotRecord> records);
// Boxes of the given size centred on each track point.
std::vector<MotRecord> from_tracks(const TrackSet& tracks, double box_width, double box_height);

// Axis-aligned extent of the points grown by `margin` of its size on every
// side. Degenerate extents are widened to one scene unit.
predictor::SceneBounds infer_bounds(std::span<const Point2> points, double margin = 0.05);

struct TrainSettings {
    std::size_t epochs = 12;
    std::size_t batch_size = 32;
    double learning_rate = 2e-3;
    double grad_clip = 5.0;
    std::size_t stride = 2;
    std::uint64_t seed = 1;

    friend bool operator==(const TrainSettings&, const TrainSettings&) = default;
};

struct RunConfig {
    tracking::TrackerConfig tracker;  // includes the predictor settings
    sim::SceneConfig scene;
    TrainSettings train;
    double eval_threshold = 1.0;
    double box_width = 0.5;
    double box_height = 0.5;
    // Set when predictor.bounds is given; otherwise bounds come from the data
    // (training) or from the checkpoint (tracking).
    bool bounds_explicit = false;

    void validate() const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Applies `key = value` lines ('#' starts a comment). Unknown keys raise
// ConfigError in strict mode; otherwise a warning is appended. The repeatable
// keys scene.agent and scene.occlusion append; the value `none` clears them.
void apply_config_text(RunConfig& cfg, std::string_view text, bool strict, std::vector<std::string>* warnings,
                       const std::string& source = "config");
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, bool strict,
                   std::vector<std::string>* warnings);
// "key=value" strings, e.g. from repeated --set flags.
void apply_overrides(RunConfig& cfg, std::span<const std::string> overrides, bool strict,
                     std::vector<std::string>* warnings);

// Defaults, then the file; validated. Missing or unreadable file raises.
RunConfig load_config(const std::string& path, bool strict = true, std::vector<std::string>* warnings = nullptr);

// Explicit path if given, else $TBP_CONFIG if set, else none.
std::optional<std::string> resolve_config_path(const std::optional<std::string>& explicit_path);

// Every key with its effective value, in the format load_config reads.
std::string dump_config(const RunConfig& cfg);

}  // namespace tbp::io
