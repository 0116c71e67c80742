#include "nadsnet/target_gen.hpp"

#include <algorithm>
#include <cmath>

namespace nadsnet {

namespace {

int map_extent(int pixels, int stride) { return (pixels + stride - 1) / stride; }

double dist_sq(double ax, double ay, double bx, double by) {
    const double dx = ax - bx;
    const double dy = ay - by;
    return dx * dx + dy * dy;
}

// Squared distance from p to segment [a, b].
double point_segment_dist_sq(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax;
    const double vy = by - ay;
    const double len_sq = vx * vx + vy * vy;
    if (len_sq == 0.0) return dist_sq(px, py, ax, ay);
    double t = ((px - ax) * vx + (py - ay) * vy) / len_sq;
    t = std::clamp(t, 0.0, 1.0);
    return dist_sq(px, py, ax + t * vx, ay + t * vy);
}

}  // namespace

Tensor render_keypoint_heatmaps(const FrameAnnotation& frame, const SkeletonTopology& topology,
                                const TargetConfig& cfg) {
    cfg.validate();
    const int h = map_extent(frame.image_height, cfg.stride);
    const int w = map_extent(frame.image_width, cfg.stride);
    const int joints = topology.joint_count();
    Tensor maps(h, w, joints + 1);

    const double denom = 2.0 * cfg.sigma * cfg.sigma;
    for (const PersonAnnotation& person : frame.persons) {
        for (int j = 0; j < joints; ++j) {
            if (!person.joints[j]) continue;
            const double cx = person.joints[j]->x / cfg.stride;
            const double cy = person.joints[j]->y / cfg.stride;
            // Gaussians fall below 1e-9 past ~6.5 sigma; render a window only.
            const double reach = cfg.sigma * 7.0;
            const int y0 = std::max(static_cast<int>(std::floor(cy - reach)), 0);
            const int y1 = std::min(static_cast<int>(std::ceil(cy + reach)), h - 1);
            const int x0 = std::max(static_cast<int>(std::floor(cx - reach)), 0);
            const int x1 = std::min(static_cast<int>(std::ceil(cx + reach)), w - 1);
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double g = std::exp(-dist_sq(x, y, cx, cy) / denom);
                    float& cell = maps.at(y, x, j);
                    cell = std::max(cell, static_cast<float>(g));
                }
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float peak = 0.0f;
            for (int j = 0; j < joints; ++j) peak = std::max(peak, maps.at(y, x, j));
            maps.at(y, x, joints) = 1.0f - peak;
        }
    }
    return maps;
}

Tensor render_paf(const FrameAnnotation& frame, const SkeletonTopology& topology,
                  const TargetConfig& cfg) {
    cfg.validate();
    const int h = map_extent(frame.image_height, cfg.stride);
    const int w = map_extent(frame.image_width, cfg.stride);
    const int limbs = topology.limb_count();
    Tensor maps(h, w, 2 * limbs);
    std::vector<int> hits(static_cast<std::size_t>(h) * w);

    for (int l = 0; l < limbs; ++l) {
        const auto [ja, jb] = topology.limbs[l];
        std::fill(hits.begin(), hits.end(), 0);
        for (const PersonAnnotation& person : frame.persons) {
            if (!person.joints[ja] || !person.joints[jb]) continue;
            const double ax = person.joints[ja]->x / cfg.stride;
            const double ay = person.joints[ja]->y / cfg.stride;
            const double bx = person.joints[jb]->x / cfg.stride;
            const double by = person.joints[jb]->y / cfg.stride;
            const double len = std::sqrt(dist_sq(ax, ay, bx, by));
            if (len == 0.0) continue;  // coincident endpoints carry no direction
            const double ux = (bx - ax) / len;
            const double uy = (by - ay) / len;

            const double pad = cfg.limb_width + 1.0;
            const int y0 = std::max(static_cast<int>(std::floor(std::min(ay, by) - pad)), 0);
            const int y1 = std::min(static_cast<int>(std::ceil(std::max(ay, by) + pad)), h - 1);
            const int x0 = std::max(static_cast<int>(std::floor(std::min(ax, bx) - pad)), 0);
            const int x1 = std::min(static_cast<int>(std::ceil(std::max(ax, bx) + pad)), w - 1);
            const double width_sq = cfg.limb_width * cfg.limb_width;
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    if (point_segment_dist_sq(x, y, ax, ay, bx, by) > width_sq) continue;
                    maps.at(y, x, 2 * l) += static_cast<float>(ux);
                    maps.at(y, x, 2 * l + 1) += static_cast<float>(uy);
                    ++hits[static_cast<std::size_t>(y) * w + x];
                }
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int n = hits[static_cast<std::size_t>(y) * w + x];
                if (n > 1) {
                    maps.at(y, x, 2 * l) /= static_cast<float>(n);
                    maps.at(y, x, 2 * l + 1) /= static_cast<float>(n);
                }
            }
        }
    }
    return maps;
}

Tensor render_seatbelt_mask(const FrameAnnotation& frame, const TargetConfig& cfg) {
    cfg.validate();
    const int h = map_extent(frame.image_height, cfg.stride);
    const int w = map_extent(frame.image_width, cfg.stride);
    Tensor mask(h, w, 1);

    for (const SeatbeltPolyline& belt : frame.seatbelts) {
        const double raster_width =
            cfg.belt_raster_width > 0.0 ? cfg.belt_raster_width : belt.width / cfg.stride;
        const double radius = raster_width / 2.0;
        const double radius_sq = radius * radius;
        for (std::size_t i = 0; i + 1 < belt.points.size(); ++i) {
            const double ax = belt.points[i].x / cfg.stride;
            const double ay = belt.points[i].y / cfg.stride;
            const double bx = belt.points[i + 1].x / cfg.stride;
            const double by = belt.points[i + 1].y / cfg.stride;
            const double pad = radius + 1.0;
            const int y0 = std::max(static_cast<int>(std::floor(std::min(ay, by) - pad)), 0);
            const int y1 = std::min(static_cast<int>(std::ceil(std::max(ay, by) + pad)), h - 1);
            const int x0 = std::max(static_cast<int>(std::floor(std::min(ax, bx) - pad)), 0);
            const int x1 = std::min(static_cast<int>(std::ceil(std::max(ax, bx) + pad)), w - 1);
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    if (point_segment_dist_sq(x, y, ax, ay, bx, by) <= radius_sq) {
                        mask.at(y, x, 0) = 1.0f;
                    }
                }
            }
        }
    }
    return mask;
}

}  // namespace nadsnet
