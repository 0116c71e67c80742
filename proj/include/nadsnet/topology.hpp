#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nadsnet/errors.hpp"

namespace nadsnet {

// Joint names plus the ordered limb list. Limbs are (parent, child) joint
// index pairs; the PAF for limb l occupies map channels 2l (x) and 2l+1 (y).
struct SkeletonTopology {
    std::vector<std::string> joint_names;
    std::vector<std::pair<int, int>> limbs;

    int joint_count() const { return static_cast<int>(joint_names.size()); }
    int limb_count() const { return static_cast<int>(limbs.size()); }

    int find_joint(std::string_view name) const {
        for (int i = 0; i < joint_count(); ++i) {
            if (joint_names[i] == name) return i;
        }
        return -1;
    }

    void validate() const {
        if (joint_names.empty()) throw ConfigError("topology: no joints");
        for (const auto& [a, b] : limbs) {
            if (a < 0 || a >= joint_count() || b < 0 || b >= joint_count() || a == b) {
                throw ConfigError("topology: limb (" + std::to_string(a) + "," +
                                  std::to_string(b) + ") references invalid joints");
            }
        }
    }

    // The nine upper-body joints visible from an in-cabin camera, with limbs
    // fanning out from the neck.
    static SkeletonTopology upper_body9() {
        SkeletonTopology t;
        t.joint_names = {"nose",          "neck",       "right_shoulder",
                         "right_elbow",   "right_wrist", "left_shoulder",
                         "left_elbow",    "left_wrist",  "head_top"};
        t.limbs = {{1, 0}, {0, 8}, {1, 2}, {2, 3}, {3, 4}, {1, 5}, {5, 6}, {6, 7}};
        return t;
    }
};

}  // namespace nadsnet
