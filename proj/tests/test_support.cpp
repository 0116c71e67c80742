#include "test_support.hpp"

#include <algorithm>
#include <cmath>

namespace nadsnet::testing {

namespace {

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Nominal upper-body joint offsets relative to the neck, input pixels.
// Indexed per SkeletonTopology::upper_body9 joint order.
constexpr double kLayout[9][2] = {
    {0, -34},    // nose
    {0, 0},      // neck
    {44, 10},    // right_shoulder
    {58, 72},    // right_elbow
    {50, 130},   // right_wrist
    {-44, 10},   // left_shoulder
    {-58, 72},   // left_elbow
    {-50, 130},  // left_wrist
    {0, -66},    // head_top
};

}  // namespace

FrameAnnotation make_synthetic_frame(std::mt19937& rng, const SyntheticOptions& options,
                                     const SkeletonTopology& topology, const std::string& id) {
    const int size = options.image_size;
    FrameAnnotation frame;
    frame.image_id = id;
    frame.image_height = size;
    frame.image_width = size;
    frame.headrest_diagonal = 170.0 * size / 384.0;

    std::uniform_real_distribution<double> jitter(-8.0, 8.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double s = size / 384.0;

    std::vector<Point> placed;
    for (int p = 0; p < options.person_count; ++p) {
        // One person per image half so limbs never cross between persons.
        const double half_lo = p == 0 ? 0.18 : 0.68;
        const double neck_x = (half_lo + 0.12 * unit(rng)) * size;
        const double neck_y = (0.42 + 0.10 * unit(rng)) * size;

        for (int attempt = 0; attempt < 64; ++attempt) {
            PersonAnnotation person;
            person.joints.assign(topology.joint_count(), std::nullopt);
            std::vector<Point> points;
            bool ok = true;
            for (int j = 0; j < topology.joint_count() && ok; ++j) {
                Point pt{neck_x + kLayout[j][0] * s + jitter(rng) * s,
                         neck_y + kLayout[j][1] * s + jitter(rng) * s};
                pt.x = std::clamp(pt.x, 2.0, size - 3.0);
                pt.y = std::clamp(pt.y, 2.0, size - 3.0);
                for (const Point& q : points) ok = ok && dist(pt, q) >= options.min_separation;
                for (const Point& q : placed) ok = ok && dist(pt, q) >= options.min_separation;
                points.push_back(pt);
                person.joints[j] = pt;
            }
            if (ok) {
                frame.persons.push_back(std::move(person));
                placed.insert(placed.end(), points.begin(), points.end());
                break;
            }
        }
    }

    if (options.with_belt) {
        SeatbeltPolyline belt;
        const PersonAnnotation& anchor = frame.persons.front();
        const Point neck = *anchor.joints[1];
        belt.points = {Point{neck.x - 40.0 * s, neck.y - 10.0 * s},
                       Point{neck.x + 10.0 * s, neck.y + 70.0 * s},
                       Point{neck.x + 36.0 * s, neck.y + 150.0 * s}};
        for (Point& pt : belt.points) {
            pt.x = std::clamp(pt.x, 1.0, size - 2.0);
            pt.y = std::clamp(pt.y, 1.0, size - 2.0);
        }
        belt.width = 16.0 * s;
        frame.seatbelts.push_back(std::move(belt));
    }

    frame.attributes["illumination"] = unit(rng) < 0.5 ? "daytime" : "nighttime";
    frame.attributes["role"] = "driver";
    return frame;
}

}  // namespace nadsnet::testing
