#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "nadsnet/annotation.hpp"
#include "nadsnet/paf_parser.hpp"
#include "nadsnet/tensor_io.hpp"
#include "test_support.hpp"

using namespace nadsnet;
namespace fs = std::filesystem;
using nlohmann::json;

#ifndef NADSNET_BIN_PATH
#error "NADSNET_BIN_PATH must point at the CLI binary"
#endif

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& workdir) {
    const fs::path out_file = workdir / "cli_stdout.txt";
    const fs::path err_file = workdir / "cli_stderr.txt";
    const std::string cmd = "cd " + workdir.string() + " && " + std::string(NADSNET_BIN_PATH) +
                            " " + args + " > " + out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
    result.out = slurp(out_file);
    result.err = slurp(err_file);
    return result;
}

struct Sandbox {
    fs::path dir;
    Sandbox() {
        dir = fs::temp_directory_path() /
              ("nadsnet_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }
    fs::path operator/(const std::string& name) const { return dir / name; }
};

void write_annotations(const fs::path& file, int frames, int persons, unsigned seed = 7) {
    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    std::mt19937 rng(seed);
    std::vector<FrameAnnotation> list;
    for (int i = 0; i < frames; ++i) {
        testing::SyntheticOptions options;
        options.person_count = persons;
        FrameAnnotation f = testing::make_synthetic_frame(rng, options, topology,
                                                          "frame_" + std::to_string(i));
        f.attributes["illumination"] = i % 2 == 0 ? "daytime" : "nighttime";
        list.push_back(std::move(f));
    }
    save_annotations(file, list, topology);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("summarize prints totals and the ratio line") {
    Sandbox sandbox;
    const RunResult r = run_cli("summarize --arch nads-net --channel-scale 0.125", sandbox.dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("nads-net parameters:") != std::string::npos);
    CHECK(r.out.find("ratio nads/baseline:") != std::string::npos);

    // Scale 1/8 must report strictly fewer parameters than full scale.
    auto total_of = [&](const std::string& args) {
        const RunResult rr = run_cli(args, sandbox.dir);
        REQUIRE(rr.exit_code == 0);
        const auto pos = rr.out.find("nads-net parameters:");
        REQUIRE(pos != std::string::npos);
        return std::stoll(rr.out.substr(pos + 21));
    };
    CHECK(total_of("summarize --arch nads-net --channel-scale 0.125") <
          total_of("summarize --arch nads-net"));
}

TEST_CASE("summarize rejects a bad config with exit code 2") {
    Sandbox sandbox;
    const RunResult r = run_cli("summarize --input-size 100", sandbox.dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("input_size") != std::string::npos);
}

TEST_CASE("gen-targets on an empty annotation file writes nothing and exits 0") {
    Sandbox sandbox;
    const fs::path ann = sandbox / "empty.jsonl";
    std::ofstream(ann).close();
    const fs::path out_dir = sandbox / "targets";
    const RunResult r = run_cli(
        "gen-targets --annotations " + ann.string() + " --out-dir " + out_dir.string(),
        sandbox.dir);
    CHECK(r.exit_code == 0);
    int ndt_files = 0;
    for (const auto& e : fs::directory_iterator(out_dir)) {
        if (e.path().extension() == ".ndt") ++ndt_files;
    }
    CHECK(ndt_files == 0);
    CHECK(fs::exists(out_dir / "run_manifest.json"));
}

TEST_CASE("gen-targets renders head-shaped tensors and reruns bit-identically") {
    Sandbox sandbox;
    const fs::path ann = sandbox / "one.jsonl";
    write_annotations(ann, 1, 1);
    const fs::path out_dir = sandbox / "targets";
    const std::string cmd =
        "gen-targets --annotations " + ann.string() + " --out-dir " + out_dir.string();
    REQUIRE(run_cli(cmd, sandbox.dir).exit_code == 0);

    const Tensor kp = load_tensor(out_dir / "frame_0_keypoints.ndt");
    CHECK(kp.height == 96);
    CHECK(kp.width == 96);
    CHECK(kp.channels == 10);
    const Tensor paf = load_tensor(out_dir / "frame_0_paf.ndt");
    CHECK(paf.channels == 16);
    const Tensor belt = load_tensor(out_dir / "frame_0_seatbelt.ndt");
    CHECK(belt.channels == 1);

    const std::string first = read_file(out_dir / "frame_0_keypoints.ndt");
    REQUIRE(run_cli(cmd, sandbox.dir).exit_code == 0);
    CHECK(read_file(out_dir / "frame_0_keypoints.ndt") == first);
}

TEST_CASE("gen-targets with an unreadable input exits 2") {
    Sandbox sandbox;
    const RunResult r = run_cli("gen-targets --annotations /nonexistent/x.jsonl --out-dir " +
                                    (sandbox / "t").string(),
                                sandbox.dir);
    CHECK(r.exit_code == 2);
}

TEST_CASE("parse recovers the annotated person from rendered targets") {
    Sandbox sandbox;
    const fs::path ann = sandbox / "ann.jsonl";
    write_annotations(ann, 2, 1);
    const fs::path targets = sandbox / "targets";
    REQUIRE(run_cli("gen-targets --annotations " + ann.string() + " --out-dir " +
                        targets.string(),
                    sandbox.dir)
                .exit_code == 0);
    const fs::path det = sandbox / "det.jsonl";
    const RunResult r = run_cli(
        "parse --heads-dir " + targets.string() + " --out " + det.string(), sandbox.dir);
    REQUIRE(r.exit_code == 0);

    const SkeletonTopology topology = SkeletonTopology::upper_body9();
    const auto detections = load_detections(det, topology);
    REQUIRE(detections.size() == 2);
    for (const FrameDetections& d : detections) {
        CHECK(d.skeletons.size() == 1);
        CHECK(d.skeletons[0].part_count == 9);
    }
    CHECK(fs::exists(sandbox / "det.jsonl.manifest.json"));
}

TEST_CASE("parse without inputs yields an empty detections file") {
    Sandbox sandbox;
    const fs::path empty_dir = sandbox / "empty";
    fs::create_directories(empty_dir);
    const fs::path det = sandbox / "det.jsonl";
    const RunResult r = run_cli(
        "parse --heads-dir " + empty_dir.string() + " --out " + det.string(), sandbox.dir);
    CHECK(r.exit_code == 0);
    CHECK(load_detections(det, SkeletonTopology::upper_body9()).empty());
}

TEST_CASE("parse on a malformed NDT1 file exits 2") {
    Sandbox sandbox;
    const fs::path dir = sandbox / "heads";
    fs::create_directories(dir);
    std::ofstream(dir / "x_keypoints.ndt") << "not a tensor";
    std::ofstream(dir / "x_paf.ndt") << "not a tensor";
    std::ofstream(dir / "x_seatbelt.ndt") << "not a tensor";
    const RunResult r = run_cli(
        "parse --heads-dir " + dir.string() + " --out " + (sandbox / "d.jsonl").string(),
        sandbox.dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("magic") != std::string::npos);
}

TEST_CASE("parse --forward runs the network on input tensors") {
    Sandbox sandbox;
    const fs::path inputs = sandbox / "inputs";
    fs::create_directories(inputs);
    std::mt19937 rng(5);
    save_tensor(inputs / "clip_a.ndt", testing::random_tensor(rng, 64, 64, 3, 0.0f, 1.0f));
    const fs::path det = sandbox / "det.jsonl";
    const RunResult r = run_cli("parse --forward --inputs-dir " + inputs.string() +
                                    " --arch nads-net --input-size 64 --channel-scale 0.125" +
                                    " --seed 3 --out " + det.string(),
                                sandbox.dir);
    REQUIRE(r.exit_code == 0);
    const auto detections = load_detections(det, SkeletonTopology::upper_body9());
    REQUIRE(detections.size() == 1);
    CHECK(detections[0].image_id == "clip_a");
    CHECK(detections[0].belt_mask.height == 16);
}

TEST_CASE("eval of a render-parse round trip reports 100% and IOU 1") {
    Sandbox sandbox;
    const fs::path ann = sandbox / "ann.jsonl";
    write_annotations(ann, 4, 2);
    const fs::path targets = sandbox / "targets";
    REQUIRE(run_cli("gen-targets --annotations " + ann.string() + " --out-dir " +
                        targets.string(),
                    sandbox.dir)
                .exit_code == 0);
    const fs::path det = sandbox / "det.jsonl";
    REQUIRE(run_cli("parse --heads-dir " + targets.string() + " --out " + det.string(),
                    sandbox.dir)
                .exit_code == 0);
    const fs::path report = sandbox / "report.json";
    const RunResult r = run_cli("eval --detections " + det.string() + " --annotations " +
                                    ann.string() + " --out " + report.string(),
                                sandbox.dir);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(read_file(report));
    CHECK(j.at("overall_mpckh").get<double>() == 1.0);
    CHECK(j.at("belt").at("iou").get<double>() == 1.0);
    CHECK(j.at("false_positive_skeletons").get<int>() == 0);
}

TEST_CASE("breakdown by illumination produces one row per value") {
    Sandbox sandbox;
    const fs::path ann = sandbox / "ann.jsonl";
    write_annotations(ann, 4, 1);
    const fs::path targets = sandbox / "targets";
    REQUIRE(run_cli("gen-targets --annotations " + ann.string() + " --out-dir " +
                        targets.string(),
                    sandbox.dir)
                .exit_code == 0);
    const fs::path det = sandbox / "det.jsonl";
    REQUIRE(run_cli("parse --heads-dir " + targets.string() + " --out " + det.string(),
                    sandbox.dir)
                .exit_code == 0);
    const fs::path report = sandbox / "rows.json";
    const RunResult r = run_cli("breakdown --detections " + det.string() + " --annotations " +
                                    ann.string() + " --by illumination --out " + report.string(),
                                sandbox.dir);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(read_file(report));
    CHECK(j.size() == 2);
    CHECK(j.contains("daytime"));
    CHECK(j.contains("nighttime"));

    const RunResult bad = run_cli("breakdown --detections " + det.string() + " --annotations " +
                                      ann.string() + " --by shoe_size",
                                  sandbox.dir);
    CHECK(bad.exit_code == 2);
}

TEST_CASE("eval exits 2 and lists ids when files disagree") {
    Sandbox sandbox;
    const fs::path ann = sandbox / "ann.jsonl";
    write_annotations(ann, 2, 1);
    const fs::path targets = sandbox / "targets";
    REQUIRE(run_cli("gen-targets --annotations " + ann.string() + " --out-dir " +
                        targets.string(),
                    sandbox.dir)
                .exit_code == 0);
    const fs::path det = sandbox / "det.jsonl";
    REQUIRE(run_cli("parse --heads-dir " + targets.string() + " --out " + det.string(),
                    sandbox.dir)
                .exit_code == 0);

    const fs::path short_ann = sandbox / "short.jsonl";
    write_annotations(short_ann, 1, 1);
    const RunResult r = run_cli(
        "eval --detections " + det.string() + " --annotations " + short_ann.string(),
        sandbox.dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("frame_1") != std::string::npos);
}

TEST_CASE("bench with one frame reports stats for both architectures") {
    Sandbox sandbox;
    const fs::path out = sandbox / "bench.json";
    const RunResult r = run_cli(
        "bench --input-size 64 --channel-scale 0.125 --frames 1 --seed 2 --out " + out.string(),
        sandbox.dir);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(read_file(out));
    CHECK(j.at("nads_net").at("frames").get<int>() == 1);
    CHECK(j.at("baseline").at("median_ms").get<double>() > 0.0);
    CHECK(fs::exists(sandbox / "bench.json.manifest.json"));
}
