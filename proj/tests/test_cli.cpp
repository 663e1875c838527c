#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cli.hpp"
#include "io.hpp"

#include "emi/errors.hpp"
#include "emi/forward.hpp"
#include "emi/synthdata.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace emi;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run emi_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(EMI_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string without_timestamp(const std::string& text) {
  std::istringstream is(text);
  std::string line, kept;
  while (std::getline(is, line))
    if (line.find("\"timestamp\"") == std::string::npos) kept += line + '\n';
  return kept;
}

}  // namespace

TEST_CASE("double formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
  CHECK_THROWS_AS(io::parse_double("1.5x", 4), ParseError);
  CHECK_THROWS_AS(io::parse_double("", 1), ParseError);
  CHECK_THROWS_AS(io::parse_double("nan", 1), ParseError);
  try {
    io::parse_double("abc", 7);
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
  }
}

TEST_CASE("model file round trip") {
  const auto m = LayeredEarthModel::uniform(5, 2.0, std::vector<double>{0.1, 0.2, 1.0 / 3.0, 4.0, 0.0});
  std::stringstream ss;
  io::write_model(ss, m);
  const auto back = io::read_model(ss);
  CHECK(std::equal(back.depths().begin(), back.depths().end(), m.depths().begin()));
  CHECK(std::equal(back.sigma().begin(), back.sigma().end(), m.sigma().begin()));

  std::istringstream bad("# emi-model v1\ntop_depth,sigma\n0,0.1\n1,oops\n");
  try {
    io::read_model(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  std::istringstream nonmono("# emi-model v1\ntop_depth,sigma\n0,0.1\n0,0.2\n");
  CHECK_THROWS(io::read_model(nonmono));
}

TEST_CASE("device json round trip") {
  const DeviceConfig d({1.0, 2.5}, {0.3}, {5e3, 1e4}, {Orientation::Horizontal});
  CHECK(io::device_from_json(io::device_to_json(d)) == d);
  CHECK_THROWS(io::device_from_json(nlohmann::json::parse(R"({"spacings": [1]})")));
  CHECK_THROWS(io::device_from_json(nlohmann::json::parse(
      R"({"spacings": [1], "heights": [1], "frequencies": [1e4], "orientations": ["diagonal"]})")));
}

TEST_CASE("survey round trip keeps readings, elevation and metadata") {
  io::Survey s{cmd_explorer({Orientation::Vertical}), {{"delta", "0.001"}, {"note", "x"}}, {}};
  const DataVector b = forward_response(LayeredEarthModel::uniform(3, 3.5, 0.4), s.config);
  s.records.push_back({"0", 12.5, b});
  s.records.push_back({"1.5", std::nullopt, add_noise(b, 0.01, 1)});
  std::stringstream ss;
  io::write_survey(ss, s);
  const io::Survey back = io::read_survey(ss);
  CHECK(back.config == s.config);
  CHECK(back.metadata.at("note") == "x");
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].elevation == 12.5);
  CHECK_FALSE(back.records[1].elevation);
  CHECK(back.records[0].readings == b);
  CHECK(back.records[1].position == "1.5");
}

TEST_CASE("malformed surveys") {
  std::istringstream no_header("position,re_0,im_0\n0,1,2\n");
  CHECK_THROWS_AS(io::read_survey(no_header), ParseError);
  std::istringstream short_row(
      "# emi-survey v1\norientations: vertical\nheights: 1\nspacings: 1\nfrequencies: 10000\n"
      "position,re_0,im_0\n0,1\n");
  CHECK_THROWS_AS(io::read_survey(short_row), ParseError);
}

TEST_CASE("display conversions") {
  CHECK(io::to_ppt(0.0012) == doctest::Approx(1.2));
  const double omega = 2 * std::numbers::pi * 1e4;
  CHECK(io::lin_apparent_conductivity(Complex(0.0, kMu0 * omega * 4.0 / 4.0 * 0.05), omega, 2.0) ==
        doctest::Approx(0.05));
  CHECK(io::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(io::fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("usage errors exit with 2") {
  CHECK(emi_run({}).code == cli::kParseError);
  CHECK(emi_run({"frobnicate"}).code == cli::kParseError);
  CHECK(emi_run({"synth", "nonsense"}).code == cli::kParseError);
  CHECK(emi_run({"invert", "missing.survey"}).code == cli::kParseError);
  CHECK(emi_run({"invert", "x", "--reg", "l3"}).code == cli::kParseError);
  CHECK(emi_run({"invert", "x", "--mode", "inphase"}).code == cli::kParseError);
  CHECK(emi_run({"doi", "nothing.json"}).code == cli::kParseError);
  CHECK(emi_run({"--help"}).code == cli::kSuccess);
}

TEST_CASE("forward command writes the readings of a model") {
  const fs::path dir = scratch("forward");
  const DeviceConfig dev = cmd_explorer();
  io::write_device((dir / "device.json").string(), dev);
  const auto m = discretize_profile(profile_gaussian, 20, 3.5);
  {
    std::ofstream os(dir / "model.csv");
    io::write_model(os, m);
  }
  const Run r = emi_run({"forward", "--config", (dir / "device.json").string(), "--model",
                         (dir / "model.csv").string(), "--out-dir", dir.string()});
  REQUIRE(r.code == cli::kSuccess);
  const io::Survey s = io::read_survey((dir / "readings.survey").string());
  REQUIRE(s.records.size() == 1);
  CHECK(s.records[0].readings == forward_response(m, dev));
  CHECK(slurp(dir / "readings.csv").rfind("index,orientation,height,spacing,frequency", 0) == 0);
}

TEST_CASE("synth, invert and doi pipeline") {
  const fs::path dir = scratch("pipeline");
  REQUIRE(emi_run({"synth", "gaussian", "--delta", "1e-3", "--seed", "4", "--out-dir",
                   dir.string()})
              .code == cli::kSuccess);
  const io::Survey s = io::read_survey((dir / "survey.txt").string());
  CHECK(s.records.size() == 1);
  CHECK(s.config.size() == 12);
  CHECK(s.metadata.at("seed") == "4");

  const std::string survey = (dir / "survey.txt").string();
  const Run inv = emi_run({"invert", survey, "--reg", "d2", "--param", "disc", "--layers", "30",
                           "--out-dir", (dir / "complex").string()});
  CHECK(inv.code == cli::kSuccess);
  const auto j = nlohmann::json::parse(slurp(dir / "complex" / "result.json"));
  CHECK(j["active_rows"] == 24);
  CHECK(j["seed"] == 4);
  CHECK(j["soundings"][0]["ok"] == true);
  CHECK(j["soundings"][0]["sigma"].size() == 30);
  // delta from the header is turned into the expected noise norm
  CHECK(j["options"]["delta"].get<double>() == doctest::Approx(1e-3 * std::sqrt(2.0)));
  for (const char* f : {"sigma.csv", "doi.csv", "residuals.csv", "summary.txt"})
    CHECK(fs::exists(dir / "complex" / f));

  const Run q = emi_run({"invert", survey, "--mode", "quadrature", "--layers", "30", "--out-dir",
                         (dir / "quad").string()});
  CHECK(q.code == cli::kSuccess);
  CHECK(nlohmann::json::parse(slurp(dir / "quad" / "result.json"))["active_rows"] == 12);

  const Run d = emi_run({"doi", (dir / "complex" / "result.json").string(), "--eta", "0.05",
                         "--out-dir", (dir / "doi").string()});
  CHECK(d.code == cli::kSuccess);
  CHECK(fs::exists(dir / "doi" / "doi.csv"));

  // iteration cap too small to converge
  CHECK(emi_run({"invert", survey, "--param", "fixed", "--ell", "8", "--max-iter", "1",
                 "--layers", "30", "--out-dir", (dir / "capped").string()})
            .code == cli::kConvergenceFailure);

  // sensitivity profile missing
  auto broken = j;
  broken["soundings"][0].erase("sensitivity");
  {
    std::ofstream os(dir / "broken.json");
    os << broken.dump();
  }
  CHECK(emi_run({"doi", (dir / "broken.json").string()}).code == cli::kParseError);
}

TEST_CASE("json options file, flags take precedence") {
  const fs::path dir = scratch("options");
  REQUIRE(emi_run({"synth", "gaussian", "--out-dir", dir.string()}).code == cli::kSuccess);
  {
    std::ofstream os(dir / "opts.json");
    os << R"({"reg": "mgs", "tau": 0.05, "param": "lcurve", "layers": 20})";
  }
  const Run r = emi_run({"invert", (dir / "survey.txt").string(), "--config",
                         (dir / "opts.json").string(), "--layers", "25", "--out-dir", dir.string()});
  CHECK(r.code == cli::kSuccess);
  const auto j = nlohmann::json::parse(slurp(dir / "result.json"));
  CHECK(j["options"]["reg"] == "mgs");
  CHECK(j["options"]["tau"] == 0.05);
  CHECK(j["soundings"][0]["sigma"].size() == 25);
  {
    std::ofstream os(dir / "bad.json");
    os << R"({"regularizer": "mgs"})";
  }
  CHECK(emi_run({"invert", (dir / "survey.txt").string(), "--config", (dir / "bad.json").string()})
            .code == cli::kParseError);
}

TEST_CASE("repeated runs give identical files apart from the timestamp") {
  const fs::path dir = scratch("determinism");
  for (const char* sub : {"a", "b"}) {
    REQUIRE(emi_run({"synth", "pseudo2d", "--seed", "11", "--layers", "20", "--out-dir",
                     (dir / sub).string()})
                .code == cli::kSuccess);
  }
  CHECK(slurp(dir / "a" / "survey.txt") == slurp(dir / "b" / "survey.txt"));

  std::vector<std::string> base = {"invert", (dir / "a" / "survey.txt").string(), "--reg", "mgs",
                                   "--param", "disc", "--layers", "20"};
  auto with_out = [&](const std::string& o) {
    auto v = base;
    v.push_back("--out-dir");
    v.push_back((dir / o).string());
    return v;
  };
  ::setenv("EMI_THREADS", "1", 1);
  const int c1 = emi_run(with_out("r1")).code;
  ::setenv("EMI_THREADS", "3", 1);
  const int c2 = emi_run(with_out("r2")).code;
  ::unsetenv("EMI_THREADS");
  CHECK(c1 == c2);
  CHECK(without_timestamp(slurp(dir / "r1" / "result.json")) ==
        without_timestamp(slurp(dir / "r2" / "result.json")));
  for (const char* f : {"sigma.csv", "doi.csv", "residuals.csv", "summary.txt"})
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));

  ::setenv("EMI_THREADS", "zero", 1);
  CHECK(emi_run(with_out("r3")).code == cli::kParseError);
  ::unsetenv("EMI_THREADS");
}
