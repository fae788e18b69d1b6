#include "doctest.h"

#include "derids/cli.hpp"
#include "derids/csv_io.hpp"
#include "scratch.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace derids;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Noiseless clean data with 100%-magnitude poisoning and evasion.
fs::path fixtures(const std::string& name) {
  const auto dir = scratch::dir(name);
  const auto r = run_cli({"generate", "--n1", "300", "--n2", "100", "--poison-frac", "0.3", "--poison-mag", "1.0",
                          "--evasion-mag", "1.0", "--clean-noise", "0", "--seed", "7", "--out", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  return dir;
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_text_file(path)); }

}  // namespace

TEST_CASE("generate writes four datasets and the index file, deterministically") {
  const auto dir = scratch::dir("generate");
  const std::vector<std::string> args{"generate", "--n1", "1000", "--n2", "200", "--poison-frac", "0.1",
                                      "--poison-mag", "0.4", "--seed", "7", "--out", (dir / "a").string()};
  const auto r = run_cli(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("seed 7") != std::string::npos);
  for (auto f : {"d1_clean.csv", "d1.csv", "d2.csv", "d2_test.csv", "d1_poisoned_idx.csv"})
    CHECK(fs::exists(dir / "a" / f));
  CHECK(load_dataset(dir / "a" / "d1.csv").size() == 1000);
  CHECK(load_dataset(dir / "a" / "d2.csv").size() == 200);
  CHECK(load_index_set(dir / "a" / "d1_poisoned_idx.csv").size() == 100);

  auto again = args;
  again.back() = (dir / "b").string();
  REQUIRE(run_cli(again).code == 0);
  for (auto f : {"d1_clean.csv", "d1.csv", "d2.csv", "d2_test.csv", "d1_poisoned_idx.csv"})
    CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));
}

TEST_CASE("usage errors exit 2") {
  const auto dir = scratch::dir("usage");
  CHECK(run_cli({"generate", "--poison-frac", "1.5", "--out", dir.string()}).code == 2);
  CHECK(run_cli({"generate"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"bogus"}).code == 2);
  CHECK(run_cli({"train", "--d1", "x.csv"}).code == 2);
  CHECK(run_cli({"generate", "--n1", "10", "--n2", "20", "--out", dir.string()}).code == 2);
}

TEST_CASE("train: proposed model file has finite alpha, tau > 0, lambda and convention") {
  const auto dir = fixtures("train");
  const auto r = run_cli({"train", "--d1", (dir / "d1.csv").string(), "--d2", (dir / "d2.csv").string(), "--trace",
                          (dir / "trace.csv").string(), "--seed", "7", "--out", (dir / "model.json").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = read_json(dir / "model.json");
  CHECK(j["alpha"].size() == 4);
  for (double a : j["alpha"]) CHECK(std::isfinite(a));
  CHECK(j["tau"].get<double>() > 0.0);
  CHECK(j["lambda"].get<double>() > 0.0);
  CHECK(j["method"] == "proposed");
  CHECK(j["eq6_convention"] == "unscaled");
  CHECK(j["seed_provenance"]["seed"] == 7);
  CHECK(read_text_file(dir / "trace.csv").rfind("k,lambda,tau,", 0) == 0);
}

TEST_CASE("train: baseline model omits lambda") {
  const auto dir = fixtures("baseline");
  const auto r = run_cli({"train", "--method", "baseline", "--d1", (dir / "d1.csv").string(), "--d2",
                          (dir / "d2.csv").string(), "--out", (dir / "model.json").string()});
  REQUIRE(r.code == 0);
  const auto j = read_json(dir / "model.json");
  CHECK_FALSE(j.contains("lambda"));
  CHECK(j["method"] == "baseline");
  CHECK(j["eq6_convention"].is_null());
  CHECK(j["seed_provenance"]["seed"].is_null());
}

TEST_CASE("train: K = 0 returns the initialization") {
  const auto dir = fixtures("k0");
  const auto r = run_cli({"train", "--K", "0", "--tau-init", "2.5", "--lambda-init", "0.75", "--d1",
                          (dir / "d1.csv").string(), "--d2", (dir / "d2.csv").string(), "--out",
                          (dir / "model.json").string()});
  REQUIRE(r.code == 0);
  const auto j = read_json(dir / "model.json");
  CHECK(j["tau"].get<double>() == 2.5);
  CHECK(j["lambda"].get<double>() == 0.75);
}

TEST_CASE("train: inner non-convergence exits 1, writes the partial trace") {
  const auto dir = fixtures("nonconv");
  const auto r = run_cli({"train", "--inner-max-iter", "0", "--d1", (dir / "d1.csv").string(), "--d2",
                          (dir / "d2.csv").string(), "--trace", (dir / "trace.csv").string(), "--out",
                          (dir / "model.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("did not converge") != std::string::npos);
  CHECK(fs::exists(dir / "trace.csv"));
  CHECK_FALSE(fs::exists(dir / "model.json"));
}

TEST_CASE("train: labeled D1 is rejected as a usage error") {
  const auto dir = fixtures("labeled_d1");
  const auto r = run_cli({"train", "--d1", (dir / "d2.csv").string(), "--d2", (dir / "d2.csv").string(), "--out",
                          (dir / "model.json").string()});
  CHECK(r.code == 2);
}

TEST_CASE("detect: clean data exits 0, attacked data exits 3, missing model exits 2") {
  const auto dir = fixtures("detect");
  REQUIRE(run_cli({"train", "--d1", (dir / "d1.csv").string(), "--d2", (dir / "d2.csv").string(), "--out",
                   (dir / "model.json").string()})
              .code == 0);
  const auto clean = run_cli({"detect", "--model", (dir / "model.json").string(), "--data",
                              (dir / "d1_clean.csv").string(), "--out", (dir / "clean_verdicts.csv").string()});
  CHECK_MESSAGE(clean.code == 0, clean.out);
  CHECK(read_text_file(dir / "clean_verdicts.csv").rfind("idx,residual,verdict,truth\n", 0) == 0);

  const auto attacked = run_cli({"detect", "--model", (dir / "model.json").string(), "--data",
                                 (dir / "d2_test.csv").string()});
  CHECK(attacked.code == 3);

  CHECK(run_cli({"detect", "--model", (dir / "nope.json").string(), "--data", (dir / "d2.csv").string()}).code == 2);
}

TEST_CASE("detect: dimension mismatch is an error") {
  const auto dir = fixtures("mismatch");
  std::ofstream(dir / "model.json") << R"({"alpha":[1,2,3],"tau":1.0,"method":"baseline"})";
  CHECK(run_cli({"detect", "--model", (dir / "model.json").string(), "--data", (dir / "d2.csv").string()}).code == 2);
}

TEST_CASE("evaluate prints metrics JSON") {
  const auto dir = fixtures("evaluate");
  REQUIRE(run_cli({"train", "--method", "baseline", "--d1", (dir / "d1.csv").string(), "--d2",
                   (dir / "d2.csv").string(), "--out", (dir / "model.json").string()})
              .code == 0);
  const auto r = run_cli({"evaluate", "--model", (dir / "model.json").string(), "--data",
                          (dir / "d2_test.csv").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["tp"].get<int>() + j["tn"].get<int>() + j["fp"].get<int>() + j["fn"].get<int>() == 100);
  CHECK(j["accuracy"].get<double>() >= 0.0);
}

TEST_CASE("config overlay: file values apply, flags win, unknown keys rejected") {
  const auto dir = scratch::dir("config");
  std::ofstream(dir / "ok.cfg") << "# overlay\nn1 = 150\nn2 = 50\npoison-frac = 0.2\n";
  auto r = run_cli({"generate", "--config", (dir / "ok.cfg").string(), "--n2", "40", "--out", (dir / "a").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(load_dataset(dir / "a" / "d1.csv").size() == 150);
  CHECK(load_dataset(dir / "a" / "d2.csv").size() == 40);
  CHECK(load_index_set(dir / "a" / "d1_poisoned_idx.csv").size() == 30);

  std::ofstream(dir / "bad.cfg") << "not-a-flag = 3\n";
  r = run_cli({"generate", "--config", (dir / "bad.cfg").string(), "--out", (dir / "b").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("not-a-flag") != std::string::npos);
}

TEST_CASE("reproduce smoke mode writes tables, report and trace") {
  const auto dir = scratch::dir("reproduce");
  const auto r = run_cli({"reproduce", "--runs", "2", "--n1", "200", "--seed", "7", "--jobs", "2", "--out",
                          dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (auto f : {"table1.txt", "table2.txt", "report.json", "detection_trace.csv"}) CHECK(fs::exists(dir / f));
  const auto j = read_json(dir / "report.json");
  CHECK(j["cells"].size() == 36);
}
