#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "cmj/config.hpp"

using namespace cmj;
namespace fs = std::filesystem;

namespace {

const char* kGw13 = R"({
  "command": "verify",
  "law": {"atoms": [{"prob": 0.5, "births": {"1": 1}}, {"prob": 0.5, "births": {"1": 3}}]}
})";

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cmj_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("minimal config") {
  const auto c = parse_config(kGw13);
  CHECK(c.command == "verify");
  CHECK(c.experiment.law.max_age() == 1);
  CHECK(c.experiment.law.atoms().size() == 2);
  CHECK(c.experiment.seed == 0);
  CHECK(c.experiment.quadrature_points == 4096);
  CHECK(c.experiment.cap == std::uint64_t{1} << 62);
  CHECK(c.output_dir == ".");
}

TEST_CASE("diagnostics name the problem") {
  const auto sum = error_of(R"({"law": {"atoms": [{"prob": 0.5, "births": {"1": 2}}, {"prob": 0.4, "births": {"1": 3}}]}})");
  CHECK(sum.find("law.atoms") != std::string::npos);
  CHECK(sum.find("0.9") != std::string::npos);

  const auto lengths = error_of(R"({"law": {"atoms": [
      {"prob": 0.5, "births": {"1": 2}, "char": [1, 0]},
      {"prob": 0.5, "births": {"1": 3}, "char": [1, 0, 0]}]}})");
  CHECK(lengths.find("law.atoms[1].char") != std::string::npos);
  CHECK(lengths.find("atom 1") != std::string::npos);

  const auto missing = error_of(R"({"law": {"atoms": [
      {"prob": 0.5, "births": {"1": 2}, "char": [1]},
      {"prob": 0.5, "births": {"1": 3}}]}})");
  CHECK(missing.find("law.atoms[1].char") != std::string::npos);

  CHECK(error_of(R"({"law": {"atoms": [{"prob": 1, "births": {"1": 2}}]}, "horizn": 4})").find("horizn: unknown key") !=
        std::string::npos);
  CHECK(error_of(R"({"law": {"atoms": [{"prob": 1, "births": {"1": 2}, "weight": 3}]}})")
            .find("law.atoms[0].weight") != std::string::npos);
  CHECK(error_of(R"({"law": {"atoms": [{"prob": 1, "births": {"0": 2}}]}})").find("law.atoms[0].births") !=
        std::string::npos);
  CHECK(error_of(R"({"law": {"atoms": [{"prob": 1, "births": {"1": 1}}]}})").find("A1") != std::string::npos);
  CHECK(error_of(R"({"law": )").find("syntax error") != std::string::npos);
  CHECK(error_of(R"({"law": {"atoms": [{"prob": 1, "births": {"1": 2}}]}, "replicates": 10})")
            .find("replicates") != std::string::npos);
  CHECK_FALSE(error_of(R"({"horizon": 4})").empty());
}

TEST_CASE("serialization round-trips") {
  for (const auto& entry : fs::directory_iterator(CMJ_CONFIG_DIR)) {
    CAPTURE(entry.path().string());
    const auto c = load_config(entry.path().string());
    CHECK(parse_config(serialize(c)) == c);
    CHECK(config_hash(parse_config(serialize(c))) == config_hash(c));
  }
  auto c = parse_config(kGw13);
  c.experiment.tol.variance = 0.2;
  c.experiment.ells = {1, 3};
  c.characteristic_name = "x";
  CHECK(parse_config(serialize(c)) == c);

  auto d = c;
  d.experiment.seed = 9;
  CHECK(config_hash(d) != config_hash(c));
  d = c;
  d.experiment.threads = 3;
  d.output_dir = "elsewhere";
  CHECK(config_hash(d) == config_hash(c));
}

TEST_CASE("dispatch writes artifacts with provenance") {
  auto c = load_config(std::string(CMJ_CONFIG_DIR) + "/e2b.json");
  c.command = "analyze";
  c.output_dir = scratch("analyze").string();
  std::ostringstream out, err;
  CHECK(dispatch(c, out, err) == 0);
  CHECK(out.str().find("regime       II") != std::string::npos);
  CHECK(out.str().find("critical     -0.5  derivative -6") != std::string::npos);
  for (const char* name : {"spectral_report.txt", "roots.csv"}) {
    const auto text = slurp(fs::path(c.output_dir) / name);
    CHECK(text.rfind("# cmj ", 0) == 0);
    CHECK(text.find("# config_hash ") != std::string::npos);
    CHECK(text.find("# seed 2") != std::string::npos);
  }
}

TEST_CASE("identical configs give identical files") {
  auto c = load_config(std::string(CMJ_CONFIG_DIR) + "/e2a.json");
  std::string first;
  for (const char* command : {"simulate", "limits"})
    for (int pass = 0; pass < 2; ++pass) {
      c.command = command;
      c.output_dir = scratch(std::string(command) + std::to_string(pass)).string();
      std::ostringstream out, err;
      REQUIRE(dispatch(c, out, err) == 0);
      const auto file = fs::path(c.output_dir) / (c.command == "simulate" ? "trace.csv" : "variance.csv");
      if (pass == 0)
        first = slurp(file);
      else
        CHECK(slurp(file) == first);
    }
}

TEST_CASE("exit codes") {
  std::ostringstream out, err;
  auto c = load_config(std::string(CMJ_CONFIG_DIR) + "/double_root.json");
  c.output_dir = scratch("double").string();
  CHECK(dispatch(c, out, err) == 2);
  CHECK(err.str().find("non-simple critical root") != std::string::npos);

  auto e = load_config(std::string(CMJ_CONFIG_DIR) + "/e2c.json");
  e.command = "predict";
  e.output_dir = scratch("predict").string();
  CHECK(dispatch(e, out, err) == 2);

  e.command = "";
  CHECK(dispatch(e, out, err) == 1);
}
