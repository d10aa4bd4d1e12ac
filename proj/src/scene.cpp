#include "tbp/scene.hpp"

namespace tbp {

std::map<int, std::vector<LabelledPoint>> by_frame(const TrackSet& tracks) {
    std::map<int, std::vector<LabelledPoint>> out;
    for (const auto& [id, seq] : tracks)
        for (std::size_t i = 0; i < seq.size(); ++i) out[seq.frames()[i]].push_back({id, seq[i]});
    return out;
}

}  // namespace tbp
