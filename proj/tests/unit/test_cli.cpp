#include "core/image_io.hpp"
#include "core/mask_ops.hpp"

#include "support/cli_runner.hpp"
#include "support/test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace retouch;
using namespace retouch::testing;
using nlohmann::json;

namespace {

// Small and quick: mock backend, 15 steps, every entity above the floor.
const std::vector<std::string> kFast = {"--T", "15", "--floor", "-1"};

std::vector<std::string> with(std::vector<std::string> args, const std::vector<std::string>& extra) {
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

std::string input_image(const TempDir& dir, std::uint64_t seed, std::size_t w = 12, std::size_t h = 10) {
    std::mt19937_64 rng(seed);
    const auto path = dir / ("in-" + std::to_string(seed) + ".png");
    write_image(random_quantized_image(rng, w, h), path);
    return path.string();
}

} // namespace

TEST_CASE("help and version") {
    TempDir dir("cli");
    CHECK(run_cli({"--help"}, dir.path()).exit_code == 0);
    const auto v = run_cli({"--version"}, dir.path());
    CHECK(v.exit_code == 0);
    CHECK(!v.out.empty());
}

TEST_CASE("usage errors exit with 2") {
    TempDir dir("cli");
    const std::string img = input_image(dir, 1);
    CHECK(run_cli({}, dir.path()).exit_code == 2);
    CHECK(run_cli({"paint"}, dir.path()).exit_code == 2);
    CHECK(run_cli({"run", "--image", img, "--query", "cup"}, dir.path()).exit_code == 2);
    CHECK(run_cli({"mask", "--image", img, "--query", "cup", "--out", (dir / "m.png").string(), "--floor", "3"},
                  dir.path())
              .exit_code == 2);
    const auto missing = run_cli(
        {"mask", "--image", (dir / "absent.png").string(), "--query", "cup", "--out", (dir / "m.png").string()},
        dir.path());
    CHECK(missing.exit_code == 2);
    CHECK(missing.err.find("retouch: error:") != std::string::npos);
    std::ofstream(dir / "bad.json") << "[{\"query\": \"cup\"}]";
    CHECK(run_cli({"eval", "--manifest", (dir / "bad.json").string()}, dir.path()).exit_code == 2);
    CHECK(run_cli(with({"run", "--image", img, "--query", "cup", "--text", "x", "--out-dir", (dir / "o").string(),
                        "--backend", "quantum"},
                       kFast),
                  dir.path())
              .exit_code == 2);
}

TEST_CASE("an unreachable backend exits with 4") {
    TempDir dir("cli");
    const std::string img = input_image(dir, 2);
    const auto r = run_cli(with({"run", "--image", img, "--query", "cup", "--text", "x", "--out-dir",
                                 (dir / "o").string(), "--backend", "tcp://127.0.0.1:1"},
                                kFast),
                           dir.path());
    CHECK(r.exit_code == 4);
}

TEST_CASE("mask writes the region and a report") {
    TempDir dir("cli");
    const std::string img = input_image(dir, 3);
    const auto out = dir / "m.png";
    const auto r = run_cli({"mask", "--image", img, "--query", "cup", "--out", out.string(), "--floor", "-1"},
                           dir.path());
    REQUIRE(r.exit_code == 0);
    const json report = json::parse(r.out);
    CHECK(report.at("backend").at("kind") == "mock");
    CHECK(report.at("mask_path") == out.string());
    const BinaryMask m = read_mask(out);
    CHECK(m.width() == 12);
    CHECK(m.any());

    const auto none = run_cli(
        {"mask", "--image", img, "--query", "cup", "--out", (dir / "n.png").string(), "--fixed-tau", "2"},
        dir.path());
    CHECK(none.exit_code == 3);
    CHECK(!std::filesystem::exists(dir / "n.png"));
    CHECK(json::parse(none.out).at("mask_path").is_null());
}

TEST_CASE("run writes every artifact") {
    TempDir dir("cli");
    const std::string img = input_image(dir, 4);
    const auto out = dir / "run";
    const auto r = run_cli(with({"run", "--image", img, "--query", "cup", "--text", "a red cup", "--out-dir",
                                 out.string()},
                                kFast),
                           dir.path());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const json report = json::parse(slurp(out / "report.json"));
    CHECK(report.at("matched") == true);
    CHECK(report.at("artifacts").size() == 7);
    for (const auto& a : report.at("artifacts")) {
        CHECK(std::filesystem::exists(out / a.get<std::string>()));
    }
    const std::size_t chosen = report.at("selected").get<std::size_t>();
    CHECK(slurp(out / "selected.png") == slurp(out / "proposals" / ("proposal_" + std::to_string(chosen) + ".png")));

    // Outside the mask every proposal equals the input.
    const Image input = read_image(img);
    const BinaryMask outside = read_mask(out / "mask.png").inverted();
    for (int k = 0; k < 4; ++k) {
        const Image p = read_image(out / "proposals" / ("proposal_" + std::to_string(k) + ".png"));
        CHECK(apply_mask(p, outside) == apply_mask(input, outside));
    }
}

TEST_CASE("run without a match writes only the report") {
    TempDir dir("cli");
    const std::string img = input_image(dir, 5);
    const auto out = dir / "run";
    const auto r = run_cli({"run", "--image", img, "--query", "cup", "--text", "x", "--out-dir", out.string(),
                            "--T", "5", "--fixed-tau", "2"},
                           dir.path());
    CHECK(r.exit_code == 3);
    CHECK(tree_contents(out).size() == 1);
    CHECK(json::parse(slurp(out / "report.json")).at("matched") == false);
}

TEST_CASE("run artifacts do not depend on jobs") {
    TempDir dir("cli");
    const std::string img = input_image(dir, 6, 16, 16);
    std::vector<std::map<std::string, std::string>> trees;
    for (const char* jobs : {"1", "3", "8"}) {
        const auto out = dir / (std::string("run-") + jobs);
        const auto r = run_cli(with({"run", "--image", img, "--query", "cup", "--text", "a red cup", "--out-dir",
                                     out.string(), "--seed", "11", "--jobs", jobs},
                                    kFast),
                               dir.path());
        REQUIRE(r.exit_code == 0);
        trees.push_back(tree_contents(out));
    }
    CHECK(trees[0].size() == 7);
    CHECK(trees[0] == trees[1]);
    CHECK(trees[0] == trees[2]);
}

TEST_CASE("config file and flag precedence") {
    TempDir dir("cli");
    const std::string img = input_image(dir, 7);
    std::ofstream(dir / "c.json") << R"({"m": 2, "T": 9, "alpha": 2.5, "seeds": [5, 8]})";
    const auto out = dir / "run";
    const auto r = run_cli({"run", "--image", img, "--query", "cup", "--text", "x", "--out-dir", out.string(),
                            "--config", (dir / "c.json").string(), "--T", "6", "--floor", "-1"},
                           dir.path());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const json cfg = json::parse(slurp(out / "report.json")).at("config");
    CHECK(cfg.at("retouch").at("m") == 2);
    CHECK(cfg.at("retouch").at("T") == 6);
    CHECK(cfg.at("retouch").at("seeds") == json::array({5, 8}));
    CHECK(cfg.at("assessment").at("alpha") == 2.5);
}

TEST_CASE("assess ranks a directory of proposals") {
    TempDir dir("cli");
    const std::string img = input_image(dir, 8);
    std::filesystem::create_directories(dir / "props");
    std::mt19937_64 rng(9);
    for (int k = 0; k < 3; ++k) {
        write_image(random_quantized_image(rng, 12, 10), dir / "props" / ("p" + std::to_string(k) + ".png"));
    }
    const auto r = run_cli({"assess", "--original", img, "--proposals", (dir / "props").string(), "--text", "a cup",
                            "--no-cma"},
                           dir.path());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const json doc = json::parse(r.out);
    double lowest = 1e300;
    std::size_t arg = 0;
    for (const auto& s : doc.at("scores")) {
        if (s.at("iqa").get<double>() < lowest) {
            lowest = s.at("iqa").get<double>();
            arg = s.at("index").get<std::size_t>();
        }
    }
    CHECK(doc.at("chosen") == arg);
    CHECK(doc.at("chosen_file") == "p" + std::to_string(arg) + ".png");
    CHECK(run_cli({"assess", "--original", img, "--proposals", (dir / "empty").string(), "--text", "x"}, dir.path())
              .exit_code == 2);
}

TEST_CASE("eval emits the four variants and a csv") {
    TempDir dir("cli");
    json manifest = json::array();
    for (int i = 0; i < 3; ++i) {
        manifest.push_back({{"image_path", input_image(dir, 20 + i, 12, 12)}, {"query", "cup"}, {"conditional_text", "tea"}});
    }
    std::ofstream(dir / "m.json") << manifest.dump();
    const auto r = run_cli(with({"eval", "--manifest", (dir / "m.json").string(), "--out", (dir / "r.json").string(),
                                 "--csv", (dir / "r.csv").string(), "--jobs", "2"},
                                kFast),
                           dir.path());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const json report = json::parse(slurp(dir / "r.json"));
    REQUIRE(report.at("variants").size() == 4);
    std::vector<std::string> names;
    for (const auto& v : report.at("variants")) {
        names.push_back(v.at("variant").get<std::string>());
        CHECK(v.at("rows").size() == 3);
    }
    CHECK(names == std::vector<std::string>{"none", "cma", "iqa", "cma+iqa"});
    const std::string csv = slurp(dir / "r.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}
