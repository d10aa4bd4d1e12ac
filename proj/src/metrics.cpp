#include "tbp/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "tbp/assignment.hpp"
#include "tbp/error.hpp"

namespace tbp::metrics {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double localisation(double d, double threshold) { return std::clamp(1.0 - d / threshold, 0.0, 1.0); }

}  // namespace

EvalReport evaluate_tracking(const TrackSet& gt, const TrackSet& hyp, double threshold) {
    if (!(threshold > 0.0)) throw Error("evaluate: threshold must be > 0");
    if (gt.empty()) throw Error("evaluate: ground truth is empty");
    const auto gt_frames = by_frame(gt);
    const auto hyp_frames = by_frame(hyp);
    std::set<int> frames;
    for (const auto& [f, v] : gt_frames) frames.insert(f);
    for (const auto& [f, v] : hyp_frames) frames.insert(f);

    EvalReport r;
    std::map<int, int> last_match;                    // gt id -> hypothesis id
    std::map<int, std::vector<std::pair<int, bool>>> status;  // gt id -> (frame, tracked)
    double dist_sum = 0.0, loc_sum = 0.0;
    static const std::vector<LabelledPoint> none;

    for (int f : frames) {
        auto gi = gt_frames.find(f);
        auto hi = hyp_frames.find(f);
        const auto& G = gi == gt_frames.end() ? none : gi->second;
        const auto& H = hi == hyp_frames.end() ? none : hi->second;

        std::vector<int> hyp_of(G.size(), -1);
        std::vector<bool> hyp_used(H.size(), false);
        std::vector<double> dist(G.size(), 0.0);

        // Correspondences carried over from earlier frames.
        for (std::size_t g = 0; g < G.size(); ++g) {
            auto it = last_match.find(G[g].id);
            if (it == last_match.end()) continue;
            for (std::size_t h = 0; h < H.size(); ++h) {
                if (hyp_used[h] || H[h].id != it->second) continue;
                const double d = euclidean(G[g].p, H[h].p);
                if (d <= threshold) {
                    hyp_of[g] = static_cast<int>(h);
                    hyp_used[h] = true;
                    dist[g] = d;
                }
                break;
            }
        }

        // Remaining objects: minimum-cost gated matching.
        std::vector<std::size_t> rows, cols;
        for (std::size_t g = 0; g < G.size(); ++g)
            if (hyp_of[g] < 0) rows.push_back(g);
        for (std::size_t h = 0; h < H.size(); ++h)
            if (!hyp_used[h]) cols.push_back(h);
        CostMatrix m(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) m(i, j) = euclidean(G[rows[i]].p, H[cols[j]].p);
        const auto a = solve_gated_assignment(m, threshold);
        std::vector<bool> fresh(G.size(), false);
        for (auto [i, j] : a.pairs) {
            hyp_of[rows[i]] = static_cast<int>(cols[j]);
            dist[rows[i]] = m(i, j);
            fresh[rows[i]] = true;
        }

        std::size_t matched = 0;
        for (std::size_t g = 0; g < G.size(); ++g) {
            const bool tracked = hyp_of[g] >= 0;
            status[G[g].id].push_back({f, tracked});
            if (!tracked) continue;
            ++matched;
            const int hid = H[static_cast<std::size_t>(hyp_of[g])].id;
            bool switched = false;
            if (fresh[g]) {
                auto it = last_match.find(G[g].id);
                switched = it != last_match.end() && it->second != hid;
                if (switched) ++r.ids;
            }
            last_match[G[g].id] = hid;
            dist_sum += dist[g];
            loc_sum += localisation(dist[g], threshold);
            r.log.push_back({f, G[g].id, hid, dist[g], switched});
        }
        r.matches += matched;
        r.gt_objects += G.size();
        r.fn += G.size() - matched;
        r.fp += H.size() - matched;
    }

    r.targets = status.size();
    for (const auto& [id, st] : status) {
        std::size_t tracked = 0;
        for (const auto& s : st) tracked += s.second ? 1 : 0;
        const double frac = ratio(static_cast<double>(tracked), static_cast<double>(st.size()));
        if (frac >= 0.8) ++r.mostly_tracked;
        if (frac <= 0.2) ++r.mostly_lost;
        // Interruptions: tracked -> missed transitions with tracking resuming later.
        std::size_t first = st.size(), last = 0;
        for (std::size_t i = 0; i < st.size(); ++i)
            if (st[i].second) {
                first = std::min(first, i);
                last = i;
            }
        for (std::size_t i = first + 1; i <= last && first < st.size(); ++i)
            if (st[i - 1].second && !st[i].second) ++r.frag;
    }

    const double n = static_cast<double>(r.gt_objects);
    r.mota = 1.0 - static_cast<double>(r.fp + r.fn + r.ids) / n;
    r.motp = ratio(dist_sum, static_cast<double>(r.matches));
    r.mt_percent = 100.0 * ratio(static_cast<double>(r.mostly_tracked), static_cast<double>(r.targets));
    r.ml_percent = 100.0 * ratio(static_cast<double>(r.mostly_lost), static_cast<double>(r.targets));
    r.moda = 1.0 - static_cast<double>(r.fp + r.fn) / n;
    r.modp = ratio(loc_sum, static_cast<double>(r.matches));
    r.precision = ratio(static_cast<double>(r.matches), static_cast<double>(r.matches + r.fp));
    r.recall = ratio(static_cast<double>(r.matches), n);
    return r;
}

EvalReport combine(const std::vector<EvalReport>& parts) {
    EvalReport r;
    double dist_sum = 0.0, loc_sum = 0.0;
    for (const auto& p : parts) {
        r.targets += p.targets;
        r.mostly_tracked += p.mostly_tracked;
        r.mostly_lost += p.mostly_lost;
        r.gt_objects += p.gt_objects;
        r.matches += p.matches;
        r.fp += p.fp;
        r.fn += p.fn;
        r.ids += p.ids;
        r.frag += p.frag;
        dist_sum += p.motp * static_cast<double>(p.matches);
        loc_sum += p.modp * static_cast<double>(p.matches);
        r.log.insert(r.log.end(), p.log.begin(), p.log.end());
    }
    if (r.gt_objects == 0) throw Error("combine: no ground truth objects");
    const double n = static_cast<double>(r.gt_objects);
    r.mota = 1.0 - static_cast<double>(r.fp + r.fn + r.ids) / n;
    r.motp = ratio(dist_sum, static_cast<double>(r.matches));
    r.mt_percent = 100.0 * ratio(static_cast<double>(r.mostly_tracked), static_cast<double>(r.targets));
    r.ml_percent = 100.0 * ratio(static_cast<double>(r.mostly_lost), static_cast<double>(r.targets));
    r.moda = 1.0 - static_cast<double>(r.fp + r.fn) / n;
    r.modp = ratio(loc_sum, static_cast<double>(r.matches));
    r.precision = ratio(static_cast<double>(r.matches), static_cast<double>(r.matches + r.fp));
    r.recall = ratio(static_cast<double>(r.matches), n);
    return r;
}

DetectionReport evaluate_detection(const TrackSet& gt, const DetectionStream& detections, double threshold) {
    if (!(threshold > 0.0)) throw Error("evaluate: threshold must be > 0");
    if (gt.empty()) throw Error("evaluate: ground truth is empty");
    const auto gt_frames = by_frame(gt);
    std::map<int, const DetectionFrame*> det_frames;
    for (const auto& df : detections) det_frames[df.frame] = &df;
    std::set<int> frames;
    for (const auto& [f, v] : gt_frames) frames.insert(f);
    for (const auto& [f, v] : det_frames) frames.insert(f);

    DetectionReport r;
    double loc_sum = 0.0;
    for (int f : frames) {
        auto gi = gt_frames.find(f);
        auto di = det_frames.find(f);
        const std::size_t ng = gi == gt_frames.end() ? 0 : gi->second.size();
        const std::size_t nd = di == det_frames.end() ? 0 : di->second->detections.size();
        CostMatrix m(ng, nd);
        for (std::size_t i = 0; i < ng; ++i)
            for (std::size_t j = 0; j < nd; ++j)
                m(i, j) = euclidean(gi->second[i].p, di->second->detections[j].centroid);
        const auto a = solve_gated_assignment(m, threshold);
        for (auto [i, j] : a.pairs) loc_sum += localisation(m(i, j), threshold);
        r.tp += a.pairs.size();
        r.fp += nd - a.pairs.size();
        r.fn += ng - a.pairs.size();
        r.gt_objects += ng;
    }
    const double n = static_cast<double>(r.gt_objects);
    r.moda = 1.0 - static_cast<double>(r.fp + r.fn) / n;
    r.modp = ratio(loc_sum, static_cast<double>(r.tp));
    r.precision = ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
    r.recall = ratio(static_cast<double>(r.tp), n);
    return r;
}

std::string format_table_header() {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %7s %7s %6s %6s %6s %6s %5s %5s %7s %7s %6s %6s\n", "run", "MOTA",
                  "MOTP", "MT%", "ML%", "FP", "FN", "IDS", "Frag", "MODA", "MODP", "Prec", "Rec");
    return buf;
}

std::string format_table(const EvalReport& r, const std::string& label) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %7.2f %7.3f %6.1f %6.1f %6zu %6zu %5zu %5zu %7.2f %7.3f %6.3f %6.3f\n",
                  label.empty() ? "-" : label.c_str(), 100.0 * r.mota, r.motp, r.mt_percent, r.ml_percent, r.fp,
                  r.fn, r.ids, r.frag, 100.0 * r.moda, r.modp, r.precision, r.recall);
    return buf;
}

std::string format_key_values(const EvalReport& r) {
    std::string out;
    auto put = [&](const char* k, double v) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s=%.10g\n", k, v);
        out += buf;
    };
    put("mota", r.mota);
    put("motp", r.motp);
    put("mt_percent", r.mt_percent);
    put("ml_percent", r.ml_percent);
    put("targets", static_cast<double>(r.targets));
    put("gt_objects", static_cast<double>(r.gt_objects));
    put("matches", static_cast<double>(r.matches));
    put("fp", static_cast<double>(r.fp));
    put("fn", static_cast<double>(r.fn));
    put("ids", static_cast<double>(r.ids));
    put("frag", static_cast<double>(r.frag));
    put("moda", r.moda);
    put("modp", r.modp);
    put("precision", r.precision);
    put("recall", r.recall);
    return out;
}

}  // namespace tbp::metrics
