#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nadsnet/topology.hpp"

namespace nadsnet {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Per-person joint annotations; entry i maps to topology joint i and is
// empty when the joint is invisible.
struct PersonAnnotation {
    std::vector<std::optional<Point>> joints;

    int visible_count() const {
        int n = 0;
        for (const auto& j : joints) n += j.has_value() ? 1 : 0;
        return n;
    }
};

struct SeatbeltPolyline {
    std::vector<Point> points;  // ordered, >= 2
    double width = 0.0;         // pixels at annotation resolution
    std::optional<bool> includes_buckle;  // carried through, no semantics
};

inline constexpr double kDefaultHeadrestDiagonal = 170.0;

struct FrameAnnotation {
    std::string image_id;
    int image_height = 0;
    int image_width = 0;
    std::vector<PersonAnnotation> persons;
    std::vector<SeatbeltPolyline> seatbelts;
    std::optional<double> headrest_diagonal;  // defaults to 170 when absent
    std::map<std::string, std::string> attributes;

    double headrest_or_default() const {
        return headrest_diagonal.value_or(kDefaultHeadrestDiagonal);
    }
};

// JSON Lines, one frame per line; schema in docs/annotation_schema.json.
// Every record is validated: coordinates are half-open pixel indices in
// [0, W) x [0, H), joint names must exist in the topology.
std::vector<FrameAnnotation> load_annotations(const std::filesystem::path& path,
                                              const SkeletonTopology& topology);
void save_annotations(const std::filesystem::path& path,
                      const std::vector<FrameAnnotation>& frames,
                      const SkeletonTopology& topology);

void validate_annotation(const FrameAnnotation& frame, const SkeletonTopology& topology);

// Counts per attribute key and value over a frame set.
using AttributeHistogram = std::map<std::string, std::map<std::string, int>>;
AttributeHistogram dataset_stats(const std::vector<FrameAnnotation>& frames);

std::string format_dataset_stats(const AttributeHistogram& stats);

}  // namespace nadsnet
