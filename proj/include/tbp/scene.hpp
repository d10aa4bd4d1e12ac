#pragma once

// Frame-indexed containers shared by the simulator, tracker, metrics and
// file I/O. Coordinates are scene units (metres in the synthetic suite).

#include <map>
#include <vector>

#include "tbp/geometry.hpp"

namespace tbp {

struct Detection {
    Point2 centroid;
    double width = 0.5;
    double height = 0.5;
    double confidence = 1.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectionFrame {
    int frame = 1;
    std::vector<Detection> detections;

    friend bool operator==(const DetectionFrame&, const DetectionFrame&) = default;
};

// Frames strictly increasing; frames without detections may be omitted.
using DetectionStream = std::vector<DetectionFrame>;

// Identity -> timestamped positions. Used for ground truth and tracker output.
using TrackSet = std::map<int, PointSequence>;

struct LabelledPoint {
    int id = 0;
    Point2 p;
};

// Regroups a track set by frame: frame -> (id, position) sorted by id.
std::map<int, std::vector<LabelledPoint>> by_frame(const TrackSet& tracks);

}  // namespace tbp
