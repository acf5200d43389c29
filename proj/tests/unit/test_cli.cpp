#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "sgd/errors.hpp"
#include "sgd/pgm.hpp"
#include "sgd/run_config.hpp"
#include "sgd_cli/commands.hpp"

namespace fs = std::filesystem;
using namespace sgd;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("sgd_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small world and short schedule so a generate run takes well under a second.
constexpr const char* kConfig = R"({
  "world": {"resolution": 16, "sigma_major": 3.0, "sigma_minor": 1.0,
            "orientations_deg": [0, 60, 120], "center_grid": 2, "center_spacing": 3.0},
  "guidance": {"agg_resolutions": [4, 8, 16], "agg_weights": [4, 8, 16], "k1": 2, "k2": 6},
  "schedule": {"steps": 10},
  "seeds": [0, 1]
})";

constexpr const char* kScribbles = R"({
  "width": 16, "height": 16,
  "scribbles": [{"tokens": ["blob"], "points": [[4, 7], [11, 8]]}]
})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("run config defaults and validation") {
    const RunConfig c = parse_run_config("{}");
    CHECK(c.world.resolution == 32);
    CHECK(c.guidance.lambda1 == 0.6);
    CHECK(c.schedule.inference_steps == 50);
    CHECK(c.seeds == std::vector<std::uint64_t>{0});
    CHECK_FALSE(c.target_template.has_value());
    CHECK_THROWS_AS(parse_run_config(R"({"wrld": {}})"), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"guidance": {"lamda1": 1}})"), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"guidance": {"centroid_units": "px"}})"), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"guidance": {"k1": 9, "k2": 3}})"), InputError);
    CHECK_THROWS_AS(parse_run_config("[1, 2"), InputError);
    CHECK(parse_run_config(R"({"seeds": 7})").seeds == std::vector<std::uint64_t>{7});
  }

  TEST_CASE("resolved config round trips") {
    RunConfig c = parse_run_config(kConfig);
    c.target_template = 3;
    const std::string text = resolved_config_json(c);
    CHECK(resolved_config_json(parse_run_config(text)) == text);
  }

  TEST_CASE("pgm encoding") {
    Grid2D g(3, 1, std::vector<double>{-1.0, 0.5, 2.0});
    const std::string pgm = encode_pgm(g);
    const std::string header = "P5\n3 1\n255\n";
    REQUIRE(pgm.size() == header.size() + 3);
    CHECK(pgm.substr(0, header.size()) == header);
    CHECK(static_cast<unsigned char>(pgm[header.size()]) == 0);
    CHECK(static_cast<unsigned char>(pgm[header.size() + 1]) == 128);
    CHECK(static_cast<unsigned char>(pgm[header.size() + 2]) == 255);
  }

  TEST_CASE("generate is reproducible and writes every artifact") {
    TempDir tmp("generate");
    write(tmp.path / "config.json", kConfig);
    write(tmp.path / "scribbles.json", kScribbles);
    std::ostringstream log;
    cli::GenerateArgs args{tmp.path / "config.json", tmp.path / "scribbles.json", tmp.path / "a"};
    REQUIRE(cli::run_generate(args, log) == cli::kOk);
    args.out = tmp.path / "b";
    REQUIRE(cli::run_generate(args, log) == cli::kOk);
    for (const char* seed : {"seed_0", "seed_1"}) {
      for (const char* f : {"image.pgm", "decoded.pgm", "diagnostics.json", "metrics.json"}) {
        CHECK(fs::exists(tmp.path / "a" / seed / f));
        CHECK(slurp(tmp.path / "a" / seed / f) == slurp(tmp.path / "b" / seed / f));
      }
    }
    CHECK(fs::exists(tmp.path / "a" / "resolved_config.json"));
    CHECK(fs::exists(tmp.path / "a" / "summary.json"));
    const json m = json::parse(slurp(tmp.path / "a" / "seed_0" / "metrics.json"));
    for (const char* key : {"scribble_ratio", "miou", "orientation_error_deg", "per_scribble"}) {
      CHECK(m.contains(key));
    }
    const json d = json::parse(slurp(tmp.path / "a" / "seed_0" / "diagnostics.json"));
    CHECK(d.at("steps").size() == 10);
  }

  TEST_CASE("generate input errors map to exit code 2") {
    TempDir tmp("generate_bad");
    write(tmp.path / "config.json", R"({"world": {"resolution": 16, "colour": 1}})");
    write(tmp.path / "scribbles.json", kScribbles);
    std::ostringstream log;
    cli::GenerateArgs args{tmp.path / "config.json", tmp.path / "scribbles.json", tmp.path / "o"};
    CHECK(cli::guarded(log, [&] { return cli::run_generate(args, log); }) == cli::kInputError);
    args.config = tmp.path / "missing.json";
    CHECK(cli::guarded(log, [&] { return cli::run_generate(args, log); }) == cli::kInputError);
  }

  TEST_CASE("evaluate aggregates and compares") {
    TempDir tmp("evaluate");
    auto report = [](double ratio) {
      json j{{"scribble_ratio", ratio},
             {"scribble_ratio_mean", ratio},
             {"miou", 0.5},
             {"orientation_error_deg", 10.0},
             {"per_scribble", json::array()}};
      return j.dump();
    };
    write(tmp.path / "one" / "s0" / "metrics.json", report(0.4));
    std::ostringstream single;
    REQUIRE(cli::run_evaluate({tmp.path / "one"}, single) == cli::kOk);
    CHECK(json::parse(single.str()).at("count") == 1);

    write(tmp.path / "two" / "s0" / "metrics.json", report(0.4));
    write(tmp.path / "two" / "s1" / "metrics.json", report(0.8));
    std::ostringstream both;
    REQUIRE(cli::run_evaluate({tmp.path / "one", tmp.path / "two"}, both) == cli::kOk);
    const json cmp = json::parse(both.str());
    CHECK(cmp.at("b").at("scribble_ratio").at("mean").get<double>() == doctest::Approx(0.6));
    CHECK(cmp.at("delta_mean_b_minus_a").at("scribble_ratio").get<double>() == doctest::Approx(0.2));

    write(tmp.path / "mixed" / "s0" / "metrics.json", report(0.4));
    write(tmp.path / "mixed" / "s1" / "metrics.json", R"({"ratio": 1})");
    std::ostringstream err;
    CHECK(cli::guarded(err, [&] { return cli::run_evaluate({tmp.path / "mixed"}, err); }) ==
          cli::kInputError);
    CHECK(err.str().find("s1") != std::string::npos);

    fs::create_directories(tmp.path / "empty");
    CHECK_THROWS_AS(cli::run_evaluate({tmp.path / "empty"}, err), InputError);
  }

  TEST_CASE("gradcheck passes and catches a corrupted gradient") {
    TempDir tmp("gradcheck");
    write(tmp.path / "config.json", kConfig);
    std::ostringstream out;
    cli::GradcheckArgs args;
    args.config = tmp.path / "config.json";
    args.cases = 4;
    CHECK(cli::run_gradcheck(args, out) == cli::kOk);
    args.corrupt_gradient = true;
    CHECK(cli::run_gradcheck(args, out) == cli::kCheckFailed);
  }
}
