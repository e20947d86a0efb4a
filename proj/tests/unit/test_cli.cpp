#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "loadcycle/cli/cli.hpp"

namespace fs = std::filesystem;
using loadcycle::cli::kExitOk;
using loadcycle::cli::kExitRuntime;
using loadcycle::cli::kExitUsage;

namespace {

struct Run {
  int rc = -1;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.rc = loadcycle::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("loadcycle_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// .lcs files of a directory, by name.
std::map<std::string, std::string> cycles_in(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".lcs") files[e.path().filename().string()] = slurp(e.path());
  return files;
}

}  // namespace

TEST_CASE("gen is deterministic in the seed") {
  const auto a = scratch("gen_a"), b = scratch("gen_b"), c = scratch("gen_c");
  REQUIRE(cli({"gen", "--preset", "target", "--cycles", "3", "--seed", "7", "--out", a.string()}).rc == kExitOk);
  REQUIRE(cli({"--seed", "7", "gen", "--cycles", "3", "--preset", "target", "--out", b.string()}).rc == kExitOk);
  REQUIRE(cli({"gen", "--preset", "target", "--cycles", "3", "--seed", "8", "--out", c.string()}).rc == kExitOk);
  const auto fa = cycles_in(a);
  CHECK(fa.size() == 3);
  CHECK(fa == cycles_in(b));
  CHECK(fa != cycles_in(c));
}

TEST_CASE("the manifest reruns the same command") {
  const auto a = scratch("manifest_a"), b = scratch("manifest_b");
  REQUIRE(cli({"gen", "--preset", "source", "--cycles", "2", "--seed", "21", "--out", a.string()}).rc == kExitOk);
  const auto manifest = slurp(a / "manifest.ini");
  CHECK(manifest.find("seed=21") != std::string::npos);
  CHECK(manifest.find("[gen]") != std::string::npos);
  CHECK(manifest.find("[train]") == std::string::npos);
  REQUIRE(cli({"--config", (a / "manifest.ini").string(), "--out", b.string()}).rc == kExitOk);
  CHECK(cycles_in(a) == cycles_in(b));
  CHECK(cycles_in(a).size() == 2);
}

TEST_CASE("usage errors exit with 2") {
  const auto d = scratch("usage");
  CHECK(cli({}).rc == kExitUsage);
  CHECK(cli({"gen", "--bogus"}).rc == kExitUsage);
  CHECK(cli({"frobnicate"}).rc == kExitUsage);
  CHECK(cli({"transfer", "--mode", "ftf", "--out", d.string()}).rc == kExitUsage);
  CHECK(cli({"transfer", "--mode", "otf", "--out", d.string()}).rc == kExitUsage);
  CHECK(cli({"gradcheck", "--order", "3", "--out", d.string()}).rc == kExitUsage);
  const auto even = cli({"train", "--ws", "14", "--epochs", "1", "--data", "synth:target", "--out", d.string()});
  CHECK(even.rc == kExitUsage);
  CHECK_FALSE(even.err.empty());
  CHECK(cli({"eval", "--out", d.string()}).rc == kExitUsage);
  CHECK(cli({"--help"}).rc == kExitOk);
}

TEST_CASE("runtime failures exit with 1") {
  const auto d = scratch("runtime");
  const auto r = cli({"eval", "--model", (d / "missing.lcm").string(), "--data", "synth:target", "--out", d.string()});
  CHECK(r.rc == kExitRuntime);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("train, transfer and eval chain through files") {
  const auto data = scratch("chain_data"), base = scratch("chain_base"), ftf = scratch("chain_ftf"),
             ev = scratch("chain_eval");
  REQUIRE(cli({"gen", "--preset", "target", "--cycles", "3", "--seed", "4", "--out", data.string()}).rc == kExitOk);

  const auto t = cli({"train", "--data", "synth:source", "--epochs", "2", "--out", base.string(), "--seed", "2",
                      "--test-data", data.string()});
  REQUIRE(t.rc == kExitOk);
  CHECK(t.out.find("16295 trainable parameters") != std::string::npos);
  CHECK(fs::exists(base / "model.lcm"));
  CHECK(slurp(base / "train.log").rfind("# loadcycle-report-v1", 0) == 0);
  const auto summary = nlohmann::json::parse(slurp(base / "train.json"));
  CHECK(summary["trainable_params"] == 16295);
  CHECK(nlohmann::json::parse(slurp(base / "test.json")).contains("micro_f1"));

  const auto x = cli({"transfer", "--mode", "ftf", "--base", (base / "model.lcm").string(), "--data", data.string(),
                      "--epochs", "2", "--out", ftf.string()});
  REQUIRE(x.rc == kExitOk);
  CHECK(x.out.find("2211 trainable parameters") != std::string::npos);

  const auto mismatch = cli({"transfer", "--mode", "otf", "--base", (base / "model.lcm").string(), "--ws", "9",
                             "--data", data.string(), "--epochs", "1", "--out", ftf.string()});
  CHECK(mismatch.rc == kExitUsage);

  const auto e = cli({"eval", "--model", (ftf / "model.lcm").string(), "--data", data.string(), "--out", ev.string()});
  REQUIRE(e.rc == kExitOk);
  const auto m = nlohmann::json::parse(slurp(ev / "eval.json"));
  std::size_t total = 0;
  for (const auto& row : m["confusion"])
    for (const auto& v : row) total += v.get<std::size_t>();
  CHECK(total > 0);
  CHECK(m["micro_f1"].get<double>() >= 0.0);
}

TEST_CASE("bench reports the parameter count") {
  const auto d = scratch("bench");
  const auto r = cli({"bench", "--ws", "15", "--variant", "crdnn_2lstm", "--cycles", "6", "--epochs", "1", "--out",
                      d.string()});
  REQUIRE(r.rc == kExitOk);
  const auto rows = nlohmann::json::parse(slurp(d / "bench.json"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0]["variant"] == "crdnn_2lstm");
  CHECK(rows[0]["ws"] == 15);
  CHECK(rows[0]["trainable_params"] == 16295);
}

TEST_CASE("gradcheck exit code follows the threshold") {
  const auto d = scratch("gradcheck");
  CHECK(cli({"gradcheck", "--variant", "linear_softmax", "--ws", "5", "--seeds", "1", "--out", d.string()}).rc ==
        kExitOk);
  CHECK(cli({"gradcheck", "--variant", "crdnn_1lstm", "--ws", "5", "--seeds", "1", "--threshold", "1e-30", "--out",
             d.string()})
            .rc == kExitRuntime);
}
