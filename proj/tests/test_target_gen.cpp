#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nadsnet/target_gen.hpp"
#include "test_support.hpp"

using namespace nadsnet;

namespace {

FrameAnnotation frame_with_joints(const SkeletonTopology& topology,
                                  const std::vector<std::vector<std::optional<Point>>>& persons,
                                  int size = 384) {
    FrameAnnotation f;
    f.image_id = "t";
    f.image_height = size;
    f.image_width = size;
    for (const auto& joints : persons) {
        PersonAnnotation p;
        p.joints.assign(topology.joint_count(), std::nullopt);
        for (std::size_t j = 0; j < joints.size(); ++j) p.joints[j] = joints[j];
        f.persons.push_back(p);
    }
    return f;
}

double point_segment_dist(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len_sq = vx * vx + vy * vy;
    double t = len_sq == 0.0 ? 0.0 : ((px - ax) * vx + (py - ay) * vy) / len_sq;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

}  // namespace

TEST_CASE("keypoint heatmap peaks at the stride-mapped joint") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    const TargetConfig cfg;
    const auto frame = frame_with_joints(topology, {{Point{40.0, 80.0}}});
    const Tensor maps = render_keypoint_heatmaps(frame, topology, cfg);
    REQUIRE(maps.height == 96);
    REQUIRE(maps.channels == 10);
    CHECK(maps.at(20, 10, 0) == 1.0f);  // (x=40,y=80) -> (x=10,y=20)
    // Background dips to zero exactly at the peak.
    CHECK(maps.at(20, 10, 9) == 0.0f);
}

TEST_CASE("heatmap follows the closed-form Gaussian falloff") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    TargetConfig cfg;
    cfg.sigma = 2.0;
    const auto frame = frame_with_joints(topology, {{Point{40.0, 80.0}}});
    const Tensor maps = render_keypoint_heatmaps(frame, topology, cfg);
    for (const auto& [dx, dy] : {std::pair{3, 0}, {0, 4}, {2, 2}, {5, 1}}) {
        const double d2 = dx * dx + dy * dy;
        const float expect = static_cast<float>(std::exp(-d2 / (2.0 * cfg.sigma * cfg.sigma)));
        CHECK(maps.at(20 + dy, 10 + dx, 0) == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("two nearby persons take the pixelwise max, per-pixel oracle") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    TargetConfig cfg;
    const auto frame =
        frame_with_joints(topology, {{Point{100.0, 100.0}}, {Point{120.0, 108.0}}});
    const Tensor maps = render_keypoint_heatmaps(frame, topology, cfg);
    const double denom = 2.0 * cfg.sigma * cfg.sigma;
    for (int y = 0; y < maps.height; ++y) {
        for (int x = 0; x < maps.width; ++x) {
            const double g1 =
                std::exp(-(std::pow(x - 25.0, 2) + std::pow(y - 25.0, 2)) / denom);
            const double g2 =
                std::exp(-(std::pow(x - 30.0, 2) + std::pow(y - 27.0, 2)) / denom);
            CHECK(maps.at(y, x, 0) == doctest::Approx(std::max(g1, g2)).epsilon(1e-5));
            // Background complements the per-pixel joint max exactly.
            float peak = 0.0f;
            for (int j = 0; j < 9; ++j) peak = std::max(peak, maps.at(y, x, j));
            CHECK(maps.at(y, x, 9) == 1.0f - peak);
        }
    }
}

TEST_CASE("heatmap values stay in [0,1] and renders are deterministic") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    std::mt19937 rng(4);
    testing::SyntheticOptions options;
    options.person_count = 2;
    const FrameAnnotation frame =
        testing::make_synthetic_frame(rng, options, topology, "inv");
    const TargetConfig cfg;
    const Tensor a = render_keypoint_heatmaps(frame, topology, cfg);
    const Tensor b = render_keypoint_heatmaps(frame, topology, cfg);
    CHECK(a.data == b.data);
    for (const float v : a.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("PAF carries the unit direction on a horizontal limb") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    const TargetConfig cfg;
    // Limb 2 is neck -> right_shoulder; lay it horizontally.
    auto frame = frame_with_joints(
        topology, {{std::nullopt, Point{80.0, 120.0}, Point{160.0, 120.0}}});
    const Tensor paf = render_paf(frame, topology, cfg);
    REQUIRE(paf.channels == 16);
    // On-segment pixel (heatmap x in [20,40], y=30).
    CHECK(paf.at(30, 28, 4) == doctest::Approx(1.0f));
    CHECK(paf.at(30, 28, 5) == doctest::Approx(0.0f));
    // Beyond limb_width: nothing.
    CHECK(paf.at(34, 28, 4) == 0.0f);
    CHECK(paf.at(34, 28, 5) == 0.0f);
}

TEST_CASE("PAF matches a per-pixel membership-and-average oracle") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    TargetConfig cfg;
    cfg.limb_width = 2.0;
    // Two persons with antiparallel neck->nose limbs overlapping in space.
    const auto frame = frame_with_joints(topology, {{Point{100.0, 200.0}, Point{100.0, 120.0}},
                                                    {Point{104.0, 120.0}, Point{104.0, 200.0}}});
    const Tensor paf = render_paf(frame, topology, cfg);

    struct Seg {
        double ax, ay, bx, by;
    };
    // Limb 0 is neck -> nose; joints arrive as (nose, neck) per person, so
    // person 1 points down (+y) and person 2 up (-y) at heatmap scale.
    const Seg segs[2] = {{25.0, 30.0, 25.0, 50.0}, {26.0, 50.0, 26.0, 30.0}};
    for (int y = 0; y < paf.height; ++y) {
        for (int x = 0; x < paf.width; ++x) {
            double sx = 0.0, sy = 0.0;
            int n = 0;
            for (const Seg& s : segs) {
                if (point_segment_dist(x, y, s.ax, s.ay, s.bx, s.by) <= cfg.limb_width) {
                    const double len = std::hypot(s.bx - s.ax, s.by - s.ay);
                    sx += (s.bx - s.ax) / len;
                    sy += (s.by - s.ay) / len;
                    ++n;
                }
            }
            const float ex = n ? static_cast<float>(sx / n) : 0.0f;
            const float ey = n ? static_cast<float>(sy / n) : 0.0f;
            CHECK(paf.at(y, x, 0) == doctest::Approx(ex).epsilon(1e-5));
            CHECK(paf.at(y, x, 1) == doctest::Approx(ey).epsilon(1e-5));
        }
    }
}

TEST_CASE("every PAF vector has norm at most 1") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    std::mt19937 rng(9);
    testing::SyntheticOptions options;
    options.person_count = 2;
    const FrameAnnotation frame = testing::make_synthetic_frame(rng, options, topology, "paf");
    const Tensor paf = render_paf(frame, topology, TargetConfig{});
    for (int y = 0; y < paf.height; ++y) {
        for (int x = 0; x < paf.width; ++x) {
            for (int l = 0; l < topology.limb_count(); ++l) {
                const float vx = paf.at(y, x, 2 * l);
                const float vy = paf.at(y, x, 2 * l + 1);
                CHECK(vx * vx + vy * vy <= 1.0f + 1e-6f);
            }
        }
    }
}

TEST_CASE("limbs with an invisible endpoint render nothing") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    const auto frame = frame_with_joints(topology, {{Point{100.0, 100.0}}});  // nose only
    const Tensor paf = render_paf(frame, topology, TargetConfig{});
    for (const float v : paf.data) CHECK(v == 0.0f);
}

TEST_CASE("empty seatbelt list renders an all-zero mask") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    const auto frame = frame_with_joints(topology, {});
    const Tensor mask = render_seatbelt_mask(frame, TargetConfig{});
    for (const float v : mask.data) CHECK(v == 0.0f);
}

TEST_CASE("straight belt matches the point-to-segment distance oracle") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    FrameAnnotation frame = frame_with_joints(topology, {});
    SeatbeltPolyline belt;
    belt.points = {Point{40.0, 100.0}, Point{340.0, 100.0}};
    belt.width = 4.0;  // 1 heatmap px wide at stride 4
    frame.seatbelts.push_back(belt);
    const TargetConfig cfg;
    const Tensor mask = render_seatbelt_mask(frame, cfg);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const double d = point_segment_dist(x, y, 10.0, 25.0, 85.0, 25.0);
            const float expect = d <= 0.5 ? 1.0f : 0.0f;
            CHECK(mask.at(y, x, 0) == expect);
        }
    }
}

TEST_CASE("masks are binary and diagonal belts are reflection-symmetric") {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    FrameAnnotation frame = frame_with_joints(topology, {});
    SeatbeltPolyline belt;
    belt.points = {Point{0.0, 0.0}, Point{383.0, 383.0}};
    belt.width = 20.0;
    frame.seatbelts.push_back(belt);
    const Tensor mask = render_seatbelt_mask(frame, TargetConfig{});
    for (const float v : mask.data) CHECK((v == 0.0f || v == 1.0f));
    // The main diagonal fixes the polyline, so the mask is symmetric in (x,y).
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            CHECK(mask.at(y, x, 0) == mask.at(x, y, 0));
        }
    }
}
