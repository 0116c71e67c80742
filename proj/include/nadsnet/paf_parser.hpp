#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nadsnet/graph.hpp"
#include "nadsnet/tensor.hpp"
#include "nadsnet/topology.hpp"

namespace nadsnet {

struct ParseConfig {
    float nms_threshold = 0.1f;       // min peak confidence
    int nms_window = 3;               // neighborhood width, pixels
    int integral_samples = 10;        // samples along each candidate segment
    float paf_point_threshold = 0.05f;
    float paf_fraction_required = 0.8f;
    int min_parts = 4;
    float min_mean_score = 0.2f;
    float belt_threshold = 0.5f;
    int belt_min_area = 20;

    void validate() const {
        if (nms_window < 1 || nms_window % 2 == 0) {
            throw ConfigError("parse config: nms_window must be odd and >= 1");
        }
        if (integral_samples < 2) {
            throw ConfigError("parse config: integral_samples must be >= 2");
        }
        if (paf_fraction_required < 0.0f || paf_fraction_required > 1.0f) {
            throw ConfigError("parse config: paf_fraction_required must be in [0, 1]");
        }
        if (belt_threshold < 0.0f || belt_threshold > 1.0f) {
            throw ConfigError("parse config: belt_threshold must be in [0, 1]");
        }
        if (min_parts < 1 || belt_min_area < 0) {
            throw ConfigError("parse config: min_parts/belt_min_area out of range");
        }
    }
};

struct PartCandidate {
    int joint_type = 0;
    int x = 0;  // heatmap pixels
    int y = 0;
    float score = 0.0f;
    int id = 0;  // unique within one frame parse
};

struct LimbConnection {
    int limb_type = 0;
    int candidate_a = 0;  // candidate ids
    int candidate_b = 0;
    float paf_score = 0.0f;
};

struct SkeletonJoint {
    double x = 0.0;  // heatmap pixels
    double y = 0.0;
    float score = 0.0f;
};

struct PersonSkeleton {
    std::vector<std::optional<SkeletonJoint>> joints;  // indexed by joint type
    double total_score = 0.0;  // joint scores plus connection PAF scores
    int part_count = 0;
    std::string role;  // "driver"/"front_passenger" by neck half, heuristic

    std::optional<SkeletonJoint> neck(const SkeletonTopology& topology) const {
        const int idx = topology.find_joint("neck");
        if (idx < 0 || !joints[idx]) return std::nullopt;
        return joints[idx];
    }
};

struct BeltInstance {
    std::vector<std::pair<int, int>> pixels;  // (x, y), raster order
    int area = 0;
    std::array<int, 4> bbox{0, 0, 0, 0};  // x0, y0, x1, y1 inclusive
};

struct FrameDetections {
    std::string image_id;
    int map_height = 0;
    int map_width = 0;
    int stride = 4;
    std::vector<PersonSkeleton> skeletons;
    Tensor belt_mask;  // binary S x S x 1
    std::vector<BeltInstance> belt_instances;
};

// Strict local maxima of one heatmap channel, >= nms_threshold, ties broken
// by raster order. Sorted by descending score (then ascending id); ids start
// at id_start in raster order.
std::vector<PartCandidate> nms_peaks(const Tensor& maps, int channel, const ParseConfig& cfg,
                                     int id_start = 0);

// Mean dot product between the limb's PAF and the segment direction over
// integral_samples evenly spaced samples; valid when enough samples exceed
// paf_point_threshold.
struct ConnectionScore {
    float paf_score = 0.0f;
    bool valid = false;
};
ConnectionScore score_connection(const Tensor& paf_maps, int limb_type, double ax, double ay,
                                 double bx, double by, const ParseConfig& cfg);

// Greedy matching on an explicit candidate-pair score list: accept in
// descending score order (ties: lower a-id, then lower b-id), each endpoint
// at most once.
struct ScoredPair {
    int index_a = 0;
    int index_b = 0;
    float score = 0.0f;
};
std::vector<ScoredPair> greedy_select(std::vector<ScoredPair> pairs, int count_a, int count_b);

std::vector<LimbConnection> match_limbs(const std::vector<PartCandidate>& cands_a,
                                        const std::vector<PartCandidate>& cands_b,
                                        const Tensor& paf_maps, int limb_type,
                                        const SkeletonTopology& topology,
                                        const ParseConfig& cfg);

std::vector<PersonSkeleton> assemble_skeletons(const std::vector<LimbConnection>& connections,
                                               const std::vector<PartCandidate>& candidates,
                                               const SkeletonTopology& topology,
                                               const ParseConfig& cfg);

Tensor threshold_seatbelt(const Tensor& seatbelt_map, const ParseConfig& cfg);

// 8-connected components with area >= belt_min_area, largest first.
std::vector<BeltInstance> extract_belt_instances(const Tensor& mask, const ParseConfig& cfg);

// Zhang-Suen thinning to 1-px-wide centerlines; output is a subset of the
// input and keeps each component 8-connected.
Tensor skeletonize_mask(const Tensor& mask);

FrameDetections parse_frame(const HeadOutputs& heads, const SkeletonTopology& topology,
                            const ParseConfig& cfg);

// JSON Lines, mirroring the annotation notation; skeleton joints are stored
// at input-pixel scale (heatmap coordinates times stride).
std::vector<FrameDetections> load_detections(const std::filesystem::path& path,
                                             const SkeletonTopology& topology);
void save_detections(const std::filesystem::path& path,
                     const std::vector<FrameDetections>& detections,
                     const SkeletonTopology& topology);

}  // namespace nadsnet
