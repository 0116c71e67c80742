#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nadsnet/annotation.hpp"
#include "nadsnet/paf_parser.hpp"
#include "nadsnet/target_gen.hpp"

namespace nadsnet {

enum class MatchStrategy { greedy_by_neck_distance };

struct MetricConfig {
    double alpha = 0.5;                // PCK tolerance fraction
    double default_reference = 170.0;  // headrest diagonal, pixels
    MatchStrategy match_strategy = MatchStrategy::greedy_by_neck_distance;

    void validate() const {
        if (!(alpha > 0.0)) throw ArgumentError("metric config: alpha must be > 0");
        if (!(default_reference > 0.0)) {
            throw ArgumentError("metric config: default_reference must be > 0");
        }
    }
};

struct JointTally {
    long long correct = 0;
    long long annotated = 0;
};

// Does not inspect pixels, only the four counts; ratios that lose their
// denominator are reported absent rather than zero (IOU of two empty masks
// is 1 by convention).
struct BeltConfusion {
    long long tp = 0;
    long long fp = 0;
    long long tn = 0;
    long long fn = 0;

    BeltConfusion& operator+=(const BeltConfusion& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }

    std::optional<double> sensitivity() const;
    std::optional<double> specificity() const;
    std::optional<double> precision() const;
    std::optional<double> f1() const;
    std::optional<double> iou() const;
};

struct SegMetrics {
    std::optional<double> sensitivity, specificity, precision, f1, iou;
};

BeltConfusion confusion_counts(const Tensor& pred_mask, const Tensor& gt_mask);
SegMetrics segmentation_metrics(const Tensor& pred_mask, const Tensor& gt_mask);

// Symmetric mean nearest-neighbor distance between the thinned centerlines
// of the two masks; absent when either skeleton is empty.
std::optional<double> curve_distance(const Tensor& pred_mask, const Tensor& gt_mask);

// Greedy neck-proximity matching; unmatched ground-truth joints count as
// incorrect, unmatched predictions are tallied separately.
struct PckhTally {
    std::vector<JointTally> per_joint;  // indexed by joint type
    int false_positive_skeletons = 0;
    int gt_persons = 0;
    int matched_persons = 0;
};

// `preds` joints must be in the same pixel space as the annotations.
PckhTally mpckh_tally(const std::vector<PersonSkeleton>& preds,
                      const std::vector<PersonAnnotation>& gt, double reference,
                      const SkeletonTopology& topology, const MetricConfig& cfg);

struct MpckhResult {
    std::vector<std::optional<double>> per_joint;  // absent when never annotated
    std::optional<double> overall;
};

MpckhResult mpckh(const std::vector<PersonSkeleton>& preds,
                  const std::vector<PersonAnnotation>& gt, double reference,
                  const SkeletonTopology& topology, const MetricConfig& cfg);

// One frame's raw counts; aggregation is a fold over these.
struct FrameEvalStats {
    std::string image_id;
    std::vector<JointTally> per_joint;
    int false_positive_skeletons = 0;
    int gt_persons = 0;
    int matched_persons = 0;
    BeltConfusion belt;
    std::optional<double> curve_dist;
};

struct MetricReport {
    std::vector<std::string> joint_names;
    std::vector<std::optional<double>> per_joint_mpckh;
    std::optional<double> overall_mpckh;
    SegMetrics belt;
    std::optional<double> curve_distance_mean;  // mean over frames where defined
    long long false_positive_skeletons = 0;
    int frame_count = 0;
};

// Evaluates parsed detections against one annotated frame. Prediction joints
// are rescaled by the detection stride; the ground-truth belt mask is
// rendered from the polylines at the detection resolution. The frame's
// headrest diagonal (or the config default) sets the mPCKh reference.
FrameEvalStats evaluate_frame(const FrameDetections& det, const FrameAnnotation& ann,
                              const SkeletonTopology& topology, const MetricConfig& cfg,
                              const TargetConfig& target_cfg);

MetricReport aggregate_report(const std::vector<FrameEvalStats>& frames,
                              const SkeletonTopology& topology);

// Micro-averaged per-attribute-value rows; frames missing the key fall under
// "(unset)". Empty input yields an empty table; a key no frame carries is an
// argument error.
std::vector<std::pair<std::string, MetricReport>> breakdown(
    const std::vector<FrameEvalStats>& frames, const std::vector<FrameAnnotation>& annotations,
    const std::string& attribute_key, const SkeletonTopology& topology);

std::string format_report(const MetricReport& report);
std::string report_to_json(const MetricReport& report);

}  // namespace nadsnet
