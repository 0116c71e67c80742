#include "nadsnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace nadsnet {

using nlohmann::json;

std::optional<double> BeltConfusion::sensitivity() const {
    if (tp + fn == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::optional<double> BeltConfusion::specificity() const {
    if (tn + fp == 0) return std::nullopt;
    return static_cast<double>(tn) / static_cast<double>(tn + fp);
}

std::optional<double> BeltConfusion::precision() const {
    if (tp + fp == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

std::optional<double> BeltConfusion::f1() const {
    if (2 * tp + fp + fn == 0) return std::nullopt;
    return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

std::optional<double> BeltConfusion::iou() const {
    if (tp + fp + fn == 0) return 1.0;  // both masks empty
    return static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
}

BeltConfusion confusion_counts(const Tensor& pred_mask, const Tensor& gt_mask) {
    if (!pred_mask.same_shape(gt_mask)) {
        throw ShapeError("confusion_counts: mask shapes differ, " + pred_mask.shape_str() +
                         " vs " + gt_mask.shape_str());
    }
    BeltConfusion c;
    for (std::size_t i = 0; i < pred_mask.data.size(); ++i) {
        const bool p = pred_mask.data[i] != 0.0f;
        const bool g = gt_mask.data[i] != 0.0f;
        if (p && g) ++c.tp;
        else if (p && !g) ++c.fp;
        else if (!p && g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

SegMetrics segmentation_metrics(const Tensor& pred_mask, const Tensor& gt_mask) {
    const BeltConfusion c = confusion_counts(pred_mask, gt_mask);
    return {c.sensitivity(), c.specificity(), c.precision(), c.f1(), c.iou()};
}

namespace {

std::vector<std::pair<int, int>> mask_pixels(const Tensor& mask) {
    std::vector<std::pair<int, int>> px;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(y, x, 0) != 0.0f) px.emplace_back(x, y);
        }
    }
    return px;
}

double mean_nearest_distance(const std::vector<std::pair<int, int>>& from,
                             const std::vector<std::pair<int, int>>& to) {
    double sum = 0.0;
    for (const auto& [fx, fy] : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [tx, ty] : to) {
            const double dx = fx - tx;
            const double dy = fy - ty;
            best = std::min(best, dx * dx + dy * dy);
        }
        sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
}

}  // namespace

std::optional<double> curve_distance(const Tensor& pred_mask, const Tensor& gt_mask) {
    const auto pred_px = mask_pixels(skeletonize_mask(pred_mask));
    const auto gt_px = mask_pixels(skeletonize_mask(gt_mask));
    if (pred_px.empty() || gt_px.empty()) return std::nullopt;
    return 0.5 * (mean_nearest_distance(pred_px, gt_px) + mean_nearest_distance(gt_px, pred_px));
}

PckhTally mpckh_tally(const std::vector<PersonSkeleton>& preds,
                      const std::vector<PersonAnnotation>& gt, double reference,
                      const SkeletonTopology& topology, const MetricConfig& cfg) {
    cfg.validate();
    if (!(reference > 0.0)) throw ArgumentError("mpckh: reference must be > 0");

    const int joints = topology.joint_count();
    const int neck = topology.find_joint("neck");
    PckhTally tally;
    tally.per_joint.assign(joints, {});
    tally.gt_persons = static_cast<int>(gt.size());

    // Greedy assignment by neck distance; entries without a neck stay
    // unmatched.
    struct PairDist {
        double d;
        int pred;
        int gti;
    };
    std::vector<PairDist> pairs;
    for (std::size_t p = 0; p < preds.size(); ++p) {
        if (neck < 0 || !preds[p].joints[neck]) continue;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (!gt[g].joints[neck]) continue;
            const double dx = preds[p].joints[neck]->x - gt[g].joints[neck]->x;
            const double dy = preds[p].joints[neck]->y - gt[g].joints[neck]->y;
            pairs.push_back({std::hypot(dx, dy), static_cast<int>(p), static_cast<int>(g)});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const PairDist& a, const PairDist& b) {
        if (a.d != b.d) return a.d < b.d;
        if (a.pred != b.pred) return a.pred < b.pred;
        return a.gti < b.gti;
    });
    std::vector<int> gt_match(gt.size(), -1);
    std::vector<char> pred_used(preds.size(), 0);
    for (const PairDist& pd : pairs) {
        if (pred_used[pd.pred] || gt_match[pd.gti] >= 0) continue;
        pred_used[pd.pred] = 1;
        gt_match[pd.gti] = pd.pred;
        ++tally.matched_persons;
    }
    for (std::size_t p = 0; p < preds.size(); ++p) {
        if (!pred_used[p]) ++tally.false_positive_skeletons;
    }

    const double tolerance = cfg.alpha * reference;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        const int p = gt_match[g];
        for (int j = 0; j < joints; ++j) {
            if (!gt[g].joints[j]) continue;
            ++tally.per_joint[j].annotated;
            if (p < 0 || !preds[p].joints[j]) continue;
            const double dx = preds[p].joints[j]->x - gt[g].joints[j]->x;
            const double dy = preds[p].joints[j]->y - gt[g].joints[j]->y;
            if (std::hypot(dx, dy) <= tolerance) ++tally.per_joint[j].correct;
        }
    }
    return tally;
}

MpckhResult mpckh(const std::vector<PersonSkeleton>& preds,
                  const std::vector<PersonAnnotation>& gt, double reference,
                  const SkeletonTopology& topology, const MetricConfig& cfg) {
    const PckhTally tally = mpckh_tally(preds, gt, reference, topology, cfg);
    MpckhResult result;
    long long correct = 0, annotated = 0;
    for (const JointTally& t : tally.per_joint) {
        if (t.annotated == 0) {
            result.per_joint.push_back(std::nullopt);
        } else {
            result.per_joint.push_back(static_cast<double>(t.correct) /
                                       static_cast<double>(t.annotated));
        }
        correct += t.correct;
        annotated += t.annotated;
    }
    if (annotated > 0) {
        result.overall = static_cast<double>(correct) / static_cast<double>(annotated);
    }
    return result;
}

FrameEvalStats evaluate_frame(const FrameDetections& det, const FrameAnnotation& ann,
                              const SkeletonTopology& topology, const MetricConfig& cfg,
                              const TargetConfig& target_cfg) {
    if (det.image_id != ann.image_id) {
        throw ArgumentError("evaluate_frame: detection '" + det.image_id +
                            "' paired with annotation '" + ann.image_id + "'");
    }

    // Predictions move to annotation pixel space.
    std::vector<PersonSkeleton> preds = det.skeletons;
    for (PersonSkeleton& s : preds) {
        for (auto& j : s.joints) {
            if (j) {
                j->x *= det.stride;
                j->y *= det.stride;
            }
        }
    }

    FrameEvalStats stats;
    stats.image_id = ann.image_id;
    const PckhTally tally =
        mpckh_tally(preds, ann.persons, ann.headrest_or_default(), topology, cfg);
    stats.per_joint = tally.per_joint;
    stats.false_positive_skeletons = tally.false_positive_skeletons;
    stats.gt_persons = tally.gt_persons;
    stats.matched_persons = tally.matched_persons;

    TargetConfig gt_cfg = target_cfg;
    gt_cfg.stride = det.stride;
    const Tensor gt_mask = render_seatbelt_mask(ann, gt_cfg);
    if (gt_mask.height != det.belt_mask.height || gt_mask.width != det.belt_mask.width) {
        throw ArgumentError("evaluate_frame: image " + ann.image_id + " renders a " +
                            gt_mask.shape_str() + " belt mask but detections carry " +
                            det.belt_mask.shape_str());
    }
    stats.belt = confusion_counts(det.belt_mask, gt_mask);
    stats.curve_dist = curve_distance(det.belt_mask, gt_mask);
    return stats;
}

MetricReport aggregate_report(const std::vector<FrameEvalStats>& frames,
                              const SkeletonTopology& topology) {
    const int joints = topology.joint_count();
    MetricReport report;
    report.joint_names = topology.joint_names;
    report.frame_count = static_cast<int>(frames.size());

    std::vector<JointTally> pooled(joints);
    BeltConfusion belt;
    double curve_sum = 0.0;
    int curve_n = 0;
    for (const FrameEvalStats& f : frames) {
        for (int j = 0; j < joints; ++j) {
            pooled[j].correct += f.per_joint[j].correct;
            pooled[j].annotated += f.per_joint[j].annotated;
        }
        belt += f.belt;
        report.false_positive_skeletons += f.false_positive_skeletons;
        if (f.curve_dist) {
            curve_sum += *f.curve_dist;
            ++curve_n;
        }
    }

    long long correct = 0, annotated = 0;
    for (int j = 0; j < joints; ++j) {
        if (pooled[j].annotated == 0) {
            report.per_joint_mpckh.push_back(std::nullopt);
        } else {
            report.per_joint_mpckh.push_back(static_cast<double>(pooled[j].correct) /
                                             static_cast<double>(pooled[j].annotated));
        }
        correct += pooled[j].correct;
        annotated += pooled[j].annotated;
    }
    if (annotated > 0) {
        report.overall_mpckh = static_cast<double>(correct) / static_cast<double>(annotated);
    }
    report.belt = {belt.sensitivity(), belt.specificity(), belt.precision(), belt.f1(),
                   belt.iou()};
    if (curve_n > 0) report.curve_distance_mean = curve_sum / curve_n;
    return report;
}

std::vector<std::pair<std::string, MetricReport>> breakdown(
    const std::vector<FrameEvalStats>& frames, const std::vector<FrameAnnotation>& annotations,
    const std::string& attribute_key, const SkeletonTopology& topology) {
    if (frames.empty()) return {};

    std::map<std::string, const FrameAnnotation*> by_id;
    for (const FrameAnnotation& a : annotations) by_id[a.image_id] = &a;

    bool key_seen = false;
    std::map<std::string, std::vector<FrameEvalStats>> groups;
    for (const FrameEvalStats& f : frames) {
        const auto it = by_id.find(f.image_id);
        if (it == by_id.end()) {
            throw ArgumentError("breakdown: no annotation for image '" + f.image_id + "'");
        }
        const auto& attrs = it->second->attributes;
        const auto attr = attrs.find(attribute_key);
        if (attr != attrs.end()) {
            key_seen = true;
            groups[attr->second].push_back(f);
        } else {
            groups["(unset)"].push_back(f);
        }
    }
    if (!key_seen) {
        std::map<std::string, int> available;
        for (const FrameAnnotation& a : annotations) {
            for (const auto& [k, v] : a.attributes) ++available[k];
        }
        std::string keys;
        for (const auto& [k, n] : available) keys += (keys.empty() ? "" : ", ") + k;
        throw ArgumentError("breakdown: attribute '" + attribute_key +
                            "' not present in any frame (available: " + keys + ")");
    }

    std::vector<std::pair<std::string, MetricReport>> rows;
    for (const auto& [value, group] : groups) {
        rows.emplace_back(value, aggregate_report(group, topology));
    }
    return rows;
}

namespace {

std::string pct(const std::optional<double>& v) {
    if (!v) return "absent";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", *v * 100.0);
    return buf;
}

}  // namespace

std::string format_report(const MetricReport& report) {
    std::ostringstream os;
    os << "frames evaluated: " << report.frame_count << "\n";
    os << "mPCKh per joint:\n";
    for (std::size_t j = 0; j < report.joint_names.size(); ++j) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "  %-16s %s\n", report.joint_names[j].c_str(),
                      pct(report.per_joint_mpckh[j]).c_str());
        os << buf;
    }
    os << "overall mPCKh: " << pct(report.overall_mpckh) << "\n";
    os << "seat belt: sensitivity " << pct(report.belt.sensitivity) << ", specificity "
       << pct(report.belt.specificity) << ", precision " << pct(report.belt.precision) << ", F1 "
       << pct(report.belt.f1) << ", IOU " << pct(report.belt.iou) << "\n";
    if (report.curve_distance_mean) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "belt curve distance: %.3f px\n",
                      *report.curve_distance_mean);
        os << buf;
    } else {
        os << "belt curve distance: absent\n";
    }
    os << "false-positive skeletons: " << report.false_positive_skeletons << "\n";
    return os.str();
}

std::string report_to_json(const MetricReport& report) {
    json j;
    j["frame_count"] = report.frame_count;
    json per_joint = json::object();
    for (std::size_t i = 0; i < report.joint_names.size(); ++i) {
        if (report.per_joint_mpckh[i]) {
            per_joint[report.joint_names[i]] = *report.per_joint_mpckh[i];
        } else {
            per_joint[report.joint_names[i]] = nullptr;
        }
    }
    j["per_joint_mpckh"] = per_joint;
    j["overall_mpckh"] = report.overall_mpckh ? json(*report.overall_mpckh) : json(nullptr);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    j["belt"] = {{"sensitivity", opt(report.belt.sensitivity)},
                 {"specificity", opt(report.belt.specificity)},
                 {"precision", opt(report.belt.precision)},
                 {"f1", opt(report.belt.f1)},
                 {"iou", opt(report.belt.iou)}};
    j["curve_distance"] = opt(report.curve_distance_mean);
    j["false_positive_skeletons"] = report.false_positive_skeletons;
    return j.dump(2);
}

}  // namespace nadsnet
