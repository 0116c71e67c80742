#include "nadsnet/annotation.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nadsnet {

using nlohmann::json;

namespace {

json point_to_json(const Point& p) { return json::array({p.x, p.y}); }

Point point_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw FormatError(where + ": expected [x, y] pair");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

json frame_to_json(const FrameAnnotation& f, const SkeletonTopology& topology) {
    json j;
    j["image_id"] = f.image_id;
    j["image_size"] = {f.image_height, f.image_width};
    j["persons"] = json::array();
    for (const PersonAnnotation& p : f.persons) {
        json joints = json::object();
        for (int i = 0; i < topology.joint_count(); ++i) {
            if (i < static_cast<int>(p.joints.size()) && p.joints[i]) {
                joints[topology.joint_names[i]] = point_to_json(*p.joints[i]);
            }
        }
        j["persons"].push_back({{"joints", joints}});
    }
    j["seatbelts"] = json::array();
    for (const SeatbeltPolyline& belt : f.seatbelts) {
        json b;
        b["points"] = json::array();
        for (const Point& p : belt.points) b["points"].push_back(point_to_json(p));
        b["width"] = belt.width;
        if (belt.includes_buckle) b["includes_buckle"] = *belt.includes_buckle;
        j["seatbelts"].push_back(b);
    }
    if (f.headrest_diagonal) j["headrest_diagonal"] = *f.headrest_diagonal;
    j["attributes"] = f.attributes;
    return j;
}

FrameAnnotation frame_from_json(const json& j, const SkeletonTopology& topology,
                                int line_number) {
    const std::string where = "line " + std::to_string(line_number);
    auto need = [&](const char* field) -> const json& {
        if (!j.contains(field)) throw FormatError(where + ": missing field '" + field + "'");
        return j.at(field);
    };

    FrameAnnotation f;
    f.image_id = need("image_id").get<std::string>();
    const json& size = need("image_size");
    if (!size.is_array() || size.size() != 2) {
        throw FormatError(where + ": image_size must be [H, W]");
    }
    f.image_height = size[0].get<int>();
    f.image_width = size[1].get<int>();

    for (const json& pj : need("persons")) {
        PersonAnnotation person;
        person.joints.assign(topology.joint_count(), std::nullopt);
        const json& joints = pj.contains("joints") ? pj.at("joints") : json::object();
        for (auto it = joints.begin(); it != joints.end(); ++it) {
            const int idx = topology.find_joint(it.key());
            if (idx < 0) {
                throw ValidationError("image " + f.image_id + ": unknown joint '" + it.key() +
                                      "'");
            }
            person.joints[idx] = point_from_json(it.value(), where + " joint " + it.key());
        }
        f.persons.push_back(std::move(person));
    }

    for (const json& bj : need("seatbelts")) {
        SeatbeltPolyline belt;
        for (const json& pj : bj.at("points")) {
            belt.points.push_back(point_from_json(pj, where + " seatbelt point"));
        }
        belt.width = bj.at("width").get<double>();
        if (bj.contains("includes_buckle")) {
            belt.includes_buckle = bj.at("includes_buckle").get<bool>();
        }
        f.seatbelts.push_back(std::move(belt));
    }

    if (j.contains("headrest_diagonal")) f.headrest_diagonal = j.at("headrest_diagonal").get<double>();
    if (j.contains("attributes")) {
        for (auto it = j.at("attributes").begin(); it != j.at("attributes").end(); ++it) {
            f.attributes[it.key()] = it.value().get<std::string>();
        }
    }
    return f;
}

void check_point_bounds(const Point& p, const FrameAnnotation& f, const std::string& field) {
    if (p.x < 0.0 || p.x >= f.image_width || p.y < 0.0 || p.y >= f.image_height) {
        std::ostringstream os;
        os << "image " << f.image_id << ": " << field << " (" << p.x << ", " << p.y
           << ") outside [0," << f.image_width << ")x[0," << f.image_height << ")";
        throw ValidationError(os.str());
    }
}

}  // namespace

void validate_annotation(const FrameAnnotation& f, const SkeletonTopology& topology) {
    if (f.image_id.empty()) throw ValidationError("frame with empty image_id");
    if (f.image_height <= 0 || f.image_width <= 0) {
        throw ValidationError("image " + f.image_id + ": non-positive image_size");
    }
    for (std::size_t pi = 0; pi < f.persons.size(); ++pi) {
        const PersonAnnotation& person = f.persons[pi];
        if (static_cast<int>(person.joints.size()) != topology.joint_count()) {
            throw ValidationError("image " + f.image_id + ": persons[" + std::to_string(pi) +
                                  "] has " + std::to_string(person.joints.size()) +
                                  " joint slots, topology has " +
                                  std::to_string(topology.joint_count()));
        }
        for (int ji = 0; ji < topology.joint_count(); ++ji) {
            if (person.joints[ji]) {
                check_point_bounds(*person.joints[ji], f,
                                   "persons[" + std::to_string(pi) + "].joints." +
                                       topology.joint_names[ji]);
            }
        }
    }
    for (std::size_t bi = 0; bi < f.seatbelts.size(); ++bi) {
        const SeatbeltPolyline& belt = f.seatbelts[bi];
        if (belt.points.size() < 2) {
            throw ValidationError("image " + f.image_id + ": seatbelts[" + std::to_string(bi) +
                                  "] needs at least 2 points");
        }
        if (!(belt.width > 0.0)) {
            throw ValidationError("image " + f.image_id + ": seatbelts[" + std::to_string(bi) +
                                  "].width must be > 0");
        }
        for (std::size_t qi = 0; qi < belt.points.size(); ++qi) {
            check_point_bounds(belt.points[qi], f,
                               "seatbelts[" + std::to_string(bi) + "].points[" +
                                   std::to_string(qi) + "]");
        }
    }
    if (f.headrest_diagonal && !(*f.headrest_diagonal > 0.0)) {
        throw ValidationError("image " + f.image_id + ": headrest_diagonal must be > 0");
    }
}

std::vector<FrameAnnotation> load_annotations(const std::filesystem::path& path,
                                              const SkeletonTopology& topology) {
    std::ifstream in(path);
    if (!in) throw FormatError("load_annotations: cannot open " + path.string());

    std::vector<FrameAnnotation> frames;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(path.string() + " line " + std::to_string(line_number) + ": " +
                              e.what());
        }
        FrameAnnotation frame = frame_from_json(j, topology, line_number);
        validate_annotation(frame, topology);
        frames.push_back(std::move(frame));
    }
    return frames;
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<FrameAnnotation>& frames,
                      const SkeletonTopology& topology) {
    std::ofstream out(path);
    if (!out) throw FormatError("save_annotations: cannot open " + path.string());
    for (const FrameAnnotation& f : frames) {
        out << frame_to_json(f, topology).dump() << "\n";
    }
    if (!out) throw FormatError("save_annotations: write failed for " + path.string());
}

AttributeHistogram dataset_stats(const std::vector<FrameAnnotation>& frames) {
    AttributeHistogram stats;
    for (const FrameAnnotation& f : frames) {
        for (const auto& [key, value] : f.attributes) ++stats[key][value];
    }
    return stats;
}

std::string format_dataset_stats(const AttributeHistogram& stats) {
    std::ostringstream os;
    for (const auto& [key, values] : stats) {
        os << key << ":\n";
        for (const auto& [value, count] : values) {
            os << "  " << value << ": " << count << "\n";
        }
    }
    return os.str();
}

}  // namespace nadsnet
