#include "nadsnet/paf_parser.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

namespace nadsnet {

using nlohmann::json;

std::vector<PartCandidate> nms_peaks(const Tensor& maps, int channel, const ParseConfig& cfg,
                                     int id_start) {
    cfg.validate();
    if (channel < 0 || channel >= maps.channels) {
        throw ShapeError("nms_peaks: channel " + std::to_string(channel) + " out of range for " +
                         maps.shape_str());
    }
    const int radius = cfg.nms_window / 2;
    std::vector<PartCandidate> peaks;
    for (int y = 0; y < maps.height; ++y) {
        for (int x = 0; x < maps.width; ++x) {
            const float v = maps.at(y, x, channel);
            if (v < cfg.nms_threshold) continue;
            bool is_peak = true;
            for (int dy = -radius; dy <= radius && is_peak; ++dy) {
                const int ny = y + dy;
                if (ny < 0 || ny >= maps.height) continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int nx = x + dx;
                    if (nx < 0 || nx >= maps.width) continue;
                    const float nv = maps.at(ny, nx, channel);
                    // Ties go to the earlier pixel in raster order.
                    if (nv > v || (nv == v && (ny < y || (ny == y && nx < x)))) {
                        is_peak = false;
                        break;
                    }
                }
            }
            if (is_peak) {
                PartCandidate c;
                c.joint_type = channel;
                c.x = x;
                c.y = y;
                c.score = v;
                peaks.push_back(c);
            }
        }
    }
    // Raster order fixes ids; report sorted by descending score.
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        peaks[i].id = id_start + static_cast<int>(i);
    }
    std::stable_sort(peaks.begin(), peaks.end(), [](const PartCandidate& a, const PartCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return peaks;
}

ConnectionScore score_connection(const Tensor& paf_maps, int limb_type, double ax, double ay,
                                 double bx, double by, const ParseConfig& cfg) {
    cfg.validate();
    if (ax == bx && ay == by) {
        throw ArgumentError("score_connection: degenerate segment (a == b)");
    }
    const int cx = 2 * limb_type;
    const int cy = 2 * limb_type + 1;
    if (cy >= paf_maps.channels) {
        throw ShapeError("score_connection: limb " + std::to_string(limb_type) +
                         " out of range for " + paf_maps.shape_str());
    }
    const double len = std::hypot(bx - ax, by - ay);
    const double ux = (bx - ax) / len;
    const double uy = (by - ay) / len;

    const int n = cfg.integral_samples;
    double sum = 0.0;
    int above = 0;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        // Nearest-pixel PAF lookup at the sample position.
        const int px = std::clamp(static_cast<int>(std::lround(ax + t * (bx - ax))), 0,
                                  paf_maps.width - 1);
        const int py = std::clamp(static_cast<int>(std::lround(ay + t * (by - ay))), 0,
                                  paf_maps.height - 1);
        const double dot = paf_maps.at(py, px, cx) * ux + paf_maps.at(py, px, cy) * uy;
        sum += dot;
        if (dot > cfg.paf_point_threshold) ++above;
    }
    ConnectionScore result;
    result.paf_score = static_cast<float>(sum / n);
    result.valid = above >= static_cast<int>(std::ceil(cfg.paf_fraction_required * n - 1e-9));
    return result;
}

std::vector<ScoredPair> greedy_select(std::vector<ScoredPair> pairs, int count_a, int count_b) {
    std::sort(pairs.begin(), pairs.end(), [](const ScoredPair& p, const ScoredPair& q) {
        if (p.score != q.score) return p.score > q.score;
        if (p.index_a != q.index_a) return p.index_a < q.index_a;
        return p.index_b < q.index_b;
    });
    std::vector<char> used_a(count_a, 0), used_b(count_b, 0);
    std::vector<ScoredPair> chosen;
    for (const ScoredPair& p : pairs) {
        if (used_a[p.index_a] || used_b[p.index_b]) continue;
        used_a[p.index_a] = 1;
        used_b[p.index_b] = 1;
        chosen.push_back(p);
    }
    return chosen;
}

std::vector<LimbConnection> match_limbs(const std::vector<PartCandidate>& cands_a,
                                        const std::vector<PartCandidate>& cands_b,
                                        const Tensor& paf_maps, int limb_type,
                                        const SkeletonTopology& topology,
                                        const ParseConfig& cfg) {
    const auto [ja, jb] = topology.limbs[limb_type];
    for (const PartCandidate& c : cands_a) {
        if (c.joint_type != ja) {
            throw ArgumentError("match_limbs: candidate joint type " +
                                std::to_string(c.joint_type) + " != limb endpoint " +
                                std::to_string(ja));
        }
    }
    for (const PartCandidate& c : cands_b) {
        if (c.joint_type != jb) {
            throw ArgumentError("match_limbs: candidate joint type " +
                                std::to_string(c.joint_type) + " != limb endpoint " +
                                std::to_string(jb));
        }
    }

    std::vector<ScoredPair> pairs;
    for (std::size_t i = 0; i < cands_a.size(); ++i) {
        for (std::size_t k = 0; k < cands_b.size(); ++k) {
            const PartCandidate& a = cands_a[i];
            const PartCandidate& b = cands_b[k];
            if (a.x == b.x && a.y == b.y) continue;  // same pixel, no direction
            const ConnectionScore s =
                score_connection(paf_maps, limb_type, a.x, a.y, b.x, b.y, cfg);
            if (!s.valid) continue;
            pairs.push_back({static_cast<int>(i), static_cast<int>(k), s.paf_score});
        }
    }
    // greedy_select ties break on list indices; candidate lists arrive sorted
    // by score with id as the tiebreaker, so index order == id order.
    const auto chosen = greedy_select(std::move(pairs), static_cast<int>(cands_a.size()),
                                      static_cast<int>(cands_b.size()));
    std::vector<LimbConnection> connections;
    connections.reserve(chosen.size());
    for (const ScoredPair& p : chosen) {
        LimbConnection c;
        c.limb_type = limb_type;
        c.candidate_a = cands_a[p.index_a].id;
        c.candidate_b = cands_b[p.index_b].id;
        c.paf_score = p.score;
        connections.push_back(c);
    }
    return connections;
}

namespace {

struct WorkingSkeleton {
    std::vector<int> joint_candidate;  // candidate id per joint type, -1 empty
    double score = 0.0;
    int parts = 0;
    bool alive = true;
};

}  // namespace

std::vector<PersonSkeleton> assemble_skeletons(const std::vector<LimbConnection>& connections,
                                               const std::vector<PartCandidate>& candidates,
                                               const SkeletonTopology& topology,
                                               const ParseConfig& cfg) {
    cfg.validate();
    std::map<int, const PartCandidate*> by_id;
    for (const PartCandidate& c : candidates) by_id[c.id] = &c;

    const int joints = topology.joint_count();
    std::vector<WorkingSkeleton> partial;
    std::map<int, int> owner;  // candidate id -> skeleton index

    auto place = [&](WorkingSkeleton& s, int joint, int cand_id) {
        s.joint_candidate[joint] = cand_id;
        s.score += by_id.at(cand_id)->score;
        s.parts += 1;
    };

    // Connections arrive grouped by limb in topology order; preserve order.
    for (const LimbConnection& conn : connections) {
        const auto [ja, jb] = topology.limbs[conn.limb_type];
        const auto ita = owner.find(conn.candidate_a);
        const auto itb = owner.find(conn.candidate_b);
        const int sa = ita == owner.end() ? -1 : ita->second;
        const int sb = itb == owner.end() ? -1 : itb->second;

        if (sa < 0 && sb < 0) {
            WorkingSkeleton s;
            s.joint_candidate.assign(joints, -1);
            place(s, ja, conn.candidate_a);
            place(s, jb, conn.candidate_b);
            s.score += conn.paf_score;
            partial.push_back(std::move(s));
            owner[conn.candidate_a] = static_cast<int>(partial.size()) - 1;
            owner[conn.candidate_b] = static_cast<int>(partial.size()) - 1;
        } else if (sa >= 0 && sb < 0) {
            WorkingSkeleton& s = partial[sa];
            if (s.joint_candidate[jb] == -1) {
                place(s, jb, conn.candidate_b);
                s.score += conn.paf_score;
                owner[conn.candidate_b] = sa;
            }
        } else if (sa < 0 && sb >= 0) {
            WorkingSkeleton& s = partial[sb];
            if (s.joint_candidate[ja] == -1) {
                place(s, ja, conn.candidate_a);
                s.score += conn.paf_score;
                owner[conn.candidate_a] = sb;
            }
        } else if (sa == sb) {
            partial[sa].score += conn.paf_score;  // reinforcing link
        } else {
            // Merge only when the two partials occupy disjoint joint slots.
            WorkingSkeleton& a = partial[sa];
            WorkingSkeleton& b = partial[sb];
            bool disjoint = true;
            for (int j = 0; j < joints && disjoint; ++j) {
                disjoint = a.joint_candidate[j] == -1 || b.joint_candidate[j] == -1;
            }
            if (disjoint) {
                for (int j = 0; j < joints; ++j) {
                    if (b.joint_candidate[j] != -1) {
                        a.joint_candidate[j] = b.joint_candidate[j];
                        owner[b.joint_candidate[j]] = sa;
                    }
                }
                a.score += b.score + conn.paf_score;
                a.parts += b.parts;
                b.alive = false;
            }
        }
    }

    std::vector<PersonSkeleton> out;
    for (const WorkingSkeleton& s : partial) {
        if (!s.alive || s.parts < cfg.min_parts) continue;
        if (s.score / s.parts < cfg.min_mean_score) continue;
        PersonSkeleton person;
        person.joints.assign(joints, std::nullopt);
        for (int j = 0; j < joints; ++j) {
            if (s.joint_candidate[j] == -1) continue;
            const PartCandidate* c = by_id.at(s.joint_candidate[j]);
            person.joints[j] = SkeletonJoint{static_cast<double>(c->x),
                                             static_cast<double>(c->y), c->score};
        }
        person.total_score = s.score;
        person.part_count = s.parts;
        out.push_back(std::move(person));
    }
    return out;
}

Tensor threshold_seatbelt(const Tensor& seatbelt_map, const ParseConfig& cfg) {
    cfg.validate();
    Tensor mask(seatbelt_map.height, seatbelt_map.width, seatbelt_map.channels);
    for (std::size_t i = 0; i < seatbelt_map.data.size(); ++i) {
        mask.data[i] = seatbelt_map.data[i] >= cfg.belt_threshold ? 1.0f : 0.0f;
    }
    return mask;
}

std::vector<BeltInstance> extract_belt_instances(const Tensor& mask, const ParseConfig& cfg) {
    cfg.validate();
    const int h = mask.height;
    const int w = mask.width;
    std::vector<char> seen(static_cast<std::size_t>(h) * w, 0);
    std::vector<BeltInstance> instances;

    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            const std::size_t si = static_cast<std::size_t>(sy) * w + sx;
            if (seen[si] || mask.at(sy, sx, 0) == 0.0f) continue;
            BeltInstance inst;
            inst.bbox = {sx, sy, sx, sy};
            std::deque<std::pair<int, int>> queue{{sx, sy}};
            seen[si] = 1;
            while (!queue.empty()) {
                const auto [x, y] = queue.front();
                queue.pop_front();
                inst.pixels.emplace_back(x, y);
                inst.bbox[0] = std::min(inst.bbox[0], x);
                inst.bbox[1] = std::min(inst.bbox[1], y);
                inst.bbox[2] = std::max(inst.bbox[2], x);
                inst.bbox[3] = std::max(inst.bbox[3], y);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (seen[ni] || mask.at(ny, nx, 0) == 0.0f) continue;
                        seen[ni] = 1;
                        queue.emplace_back(nx, ny);
                    }
                }
            }
            inst.area = static_cast<int>(inst.pixels.size());
            if (inst.area >= cfg.belt_min_area) {
                std::sort(inst.pixels.begin(), inst.pixels.end(),
                          [](const auto& a, const auto& b) {
                              return a.second != b.second ? a.second < b.second : a.first < b.first;
                          });
                instances.push_back(std::move(inst));
            }
        }
    }
    std::stable_sort(instances.begin(), instances.end(),
                     [](const BeltInstance& a, const BeltInstance& b) { return a.area > b.area; });
    return instances;
}

Tensor skeletonize_mask(const Tensor& mask) {
    const int h = mask.height;
    const int w = mask.width;
    std::vector<char> img(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img[static_cast<std::size_t>(y) * w + x] = mask.at(y, x, 0) != 0.0f;
        }
    }
    auto px = [&](int x, int y) -> int {
        if (x < 0 || x >= w || y < 0 || y >= h) return 0;
        return img[static_cast<std::size_t>(y) * w + x];
    };

    // Zhang-Suen: alternate the two sub-iterations until stable.
    std::vector<std::pair<int, int>> to_clear;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            to_clear.clear();
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (!px(x, y)) continue;
                    const int p2 = px(x, y - 1), p3 = px(x + 1, y - 1), p4 = px(x + 1, y);
                    const int p5 = px(x + 1, y + 1), p6 = px(x, y + 1), p7 = px(x - 1, y + 1);
                    const int p8 = px(x - 1, y), p9 = px(x - 1, y - 1);
                    const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;
                    const int a = (p2 == 0 && p3 == 1) + (p3 == 0 && p4 == 1) +
                                  (p4 == 0 && p5 == 1) + (p5 == 0 && p6 == 1) +
                                  (p6 == 0 && p7 == 1) + (p7 == 0 && p8 == 1) +
                                  (p8 == 0 && p9 == 1) + (p9 == 0 && p2 == 1);
                    if (a != 1) continue;
                    const bool ok = pass == 0 ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0)
                                              : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0);
                    if (ok) to_clear.emplace_back(x, y);
                }
            }
            for (const auto& [x, y] : to_clear) {
                img[static_cast<std::size_t>(y) * w + x] = 0;
            }
            changed = changed || !to_clear.empty();
        }
    }

    Tensor out(h, w, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.at(y, x, 0) = img[static_cast<std::size_t>(y) * w + x] ? 1.0f : 0.0f;
        }
    }
    return out;
}

FrameDetections parse_frame(const HeadOutputs& heads, const SkeletonTopology& topology,
                            const ParseConfig& cfg) {
    cfg.validate();
    const int joints = topology.joint_count();
    const int limbs = topology.limb_count();
    if (heads.keypoint_maps.channels != joints + 1) {
        throw ShapeError("parse_frame: keypoint maps have " +
                         std::to_string(heads.keypoint_maps.channels) + " channels, topology needs " +
                         std::to_string(joints + 1));
    }
    if (heads.paf_maps.channels != 2 * limbs) {
        throw ShapeError("parse_frame: PAF maps have " + std::to_string(heads.paf_maps.channels) +
                         " channels, topology needs " + std::to_string(2 * limbs));
    }
    if (heads.paf_maps.height != heads.keypoint_maps.height ||
        heads.paf_maps.width != heads.keypoint_maps.width ||
        heads.seatbelt_map.height != heads.keypoint_maps.height ||
        heads.seatbelt_map.width != heads.keypoint_maps.width || heads.seatbelt_map.channels != 1) {
        throw ShapeError("parse_frame: head shapes disagree: " + heads.keypoint_maps.shape_str() +
                         " / " + heads.paf_maps.shape_str() + " / " +
                         heads.seatbelt_map.shape_str());
    }

    std::vector<std::vector<PartCandidate>> per_joint(joints);
    std::vector<PartCandidate> all;
    int next_id = 0;
    for (int j = 0; j < joints; ++j) {
        per_joint[j] = nms_peaks(heads.keypoint_maps, j, cfg, next_id);
        next_id += static_cast<int>(per_joint[j].size());
        all.insert(all.end(), per_joint[j].begin(), per_joint[j].end());
    }

    std::vector<LimbConnection> connections;
    for (int l = 0; l < limbs; ++l) {
        const auto [ja, jb] = topology.limbs[l];
        const auto conns =
            match_limbs(per_joint[ja], per_joint[jb], heads.paf_maps, l, topology, cfg);
        connections.insert(connections.end(), conns.begin(), conns.end());
    }

    FrameDetections det;
    det.map_height = heads.keypoint_maps.height;
    det.map_width = heads.keypoint_maps.width;
    det.skeletons = assemble_skeletons(connections, all, topology, cfg);
    det.belt_mask = threshold_seatbelt(heads.seatbelt_map, cfg);
    det.belt_instances = extract_belt_instances(det.belt_mask, cfg);

    // Driver/passenger labeling is a left/right-half heuristic on the neck.
    for (PersonSkeleton& s : det.skeletons) {
        const auto neck = s.neck(topology);
        if (neck) {
            s.role = neck->x < det.map_width / 2.0 ? "driver" : "front_passenger";
        }
    }
    return det;
}

namespace {

json mask_to_rle(const Tensor& mask) {
    // Alternating run lengths over the row-major raster, zero run first.
    json runs = json::array();
    std::int64_t run = 0;
    float current = 0.0f;
    for (const float v : mask.data) {
        const float bit = v != 0.0f ? 1.0f : 0.0f;
        if (bit == current) {
            ++run;
        } else {
            runs.push_back(run);
            current = bit;
            run = 1;
        }
    }
    runs.push_back(run);
    return runs;
}

Tensor mask_from_rle(const json& runs, int h, int w, const std::string& where) {
    Tensor mask(h, w, 1);
    std::size_t pos = 0;
    float bit = 0.0f;
    for (const json& r : runs) {
        const std::int64_t n = r.get<std::int64_t>();
        if (n < 0 || pos + n > mask.data.size()) {
            throw FormatError(where + ": RLE runs exceed mask size");
        }
        for (std::int64_t i = 0; i < n; ++i) mask.data[pos++] = bit;
        bit = bit == 0.0f ? 1.0f : 0.0f;
    }
    if (pos != mask.data.size()) throw FormatError(where + ": RLE runs shorter than mask");
    return mask;
}

}  // namespace

void save_detections(const std::filesystem::path& path,
                     const std::vector<FrameDetections>& detections,
                     const SkeletonTopology& topology) {
    std::ofstream out(path);
    if (!out) throw FormatError("save_detections: cannot open " + path.string());
    for (const FrameDetections& det : detections) {
        json j;
        j["image_id"] = det.image_id;
        j["map_size"] = {det.map_height, det.map_width};
        j["stride"] = det.stride;
        j["skeletons"] = json::array();
        for (const PersonSkeleton& s : det.skeletons) {
            json joints = json::object();
            json scores = json::object();
            for (int i = 0; i < topology.joint_count(); ++i) {
                if (!s.joints[i]) continue;
                // Export at input-pixel scale.
                joints[topology.joint_names[i]] = {s.joints[i]->x * det.stride,
                                                   s.joints[i]->y * det.stride};
                scores[topology.joint_names[i]] = s.joints[i]->score;
            }
            json sj;
            sj["joints"] = joints;
            sj["joint_scores"] = scores;
            sj["total_score"] = s.total_score;
            sj["part_count"] = s.part_count;
            if (!s.role.empty()) sj["role"] = s.role;
            j["skeletons"].push_back(sj);
        }
        j["belt_mask"] = {{"size", {det.belt_mask.height, det.belt_mask.width}},
                          {"runs", mask_to_rle(det.belt_mask)}};
        j["belt_instances"] = json::array();
        for (const BeltInstance& inst : det.belt_instances) {
            j["belt_instances"].push_back(
                {{"area", inst.area}, {"bbox", {inst.bbox[0], inst.bbox[1], inst.bbox[2], inst.bbox[3]}}});
        }
        out << j.dump() << "\n";
    }
    if (!out) throw FormatError("save_detections: write failed for " + path.string());
}

std::vector<FrameDetections> load_detections(const std::filesystem::path& path,
                                             const SkeletonTopology& topology) {
    std::ifstream in(path);
    if (!in) throw FormatError("load_detections: cannot open " + path.string());
    std::vector<FrameDetections> detections;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + " line " + std::to_string(line_number);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(where + ": " + e.what());
        }
        FrameDetections det;
        det.image_id = j.at("image_id").get<std::string>();
        det.map_height = j.at("map_size")[0].get<int>();
        det.map_width = j.at("map_size")[1].get<int>();
        det.stride = j.at("stride").get<int>();
        if (det.stride < 1) throw FormatError(where + ": bad stride");
        for (const json& sj : j.at("skeletons")) {
            PersonSkeleton s;
            s.joints.assign(topology.joint_count(), std::nullopt);
            const json& joints = sj.at("joints");
            const json& scores = sj.at("joint_scores");
            for (auto it = joints.begin(); it != joints.end(); ++it) {
                const int idx = topology.find_joint(it.key());
                if (idx < 0) throw FormatError(where + ": unknown joint '" + it.key() + "'");
                SkeletonJoint joint;
                joint.x = it.value()[0].get<double>() / det.stride;
                joint.y = it.value()[1].get<double>() / det.stride;
                joint.score = scores.contains(it.key()) ? scores.at(it.key()).get<float>() : 0.0f;
                s.joints[idx] = joint;
            }
            s.total_score = sj.at("total_score").get<double>();
            s.part_count = sj.at("part_count").get<int>();
            if (sj.contains("role")) s.role = sj.at("role").get<std::string>();
            det.skeletons.push_back(std::move(s));
        }
        const json& mask = j.at("belt_mask");
        det.belt_mask = mask_from_rle(mask.at("runs"), mask.at("size")[0].get<int>(),
                                      mask.at("size")[1].get<int>(), where);
        if (j.contains("belt_instances")) {
            for (const json& ij : j.at("belt_instances")) {
                BeltInstance inst;
                inst.area = ij.at("area").get<int>();
                const json& bb = ij.at("bbox");
                inst.bbox = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(),
                             bb[3].get<int>()};
                det.belt_instances.push_back(std::move(inst));
            }
        }
        detections.push_back(std::move(det));
    }
    return detections;
}

}  // namespace nadsnet
