#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dln/experiment.hpp"

using namespace dln;
namespace fs = std::filesystem;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

TrajectoryRecord record(double t, std::initializer_list<double> sigma) {
  TrajectoryRecord r;
  r.t = t;
  r.sigma = vec(sigma);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dln_test_experiment_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_completion() {
  return parse_config(
      "[experiment]\nkind = complete\nd = 2\nN = 3\nseed = 5\n"
      "[flow]\nlevel = reduced\ndt = 0.01\nt_end = 100\nrecord_every = 100\n"
      "stop_tolerance = 1e-9\n[init]\nscale = 0.1\n[complete]\npaths = 4\n");
}

}  // namespace

TEST_CASE("effective rank") {
  CHECK(effective_rank(vec({3, 2, 1}), 1e-6) == 3);
  CHECK(effective_rank(vec({1, 1e-9}), 1e-6) == 1);
  CHECK(effective_rank(vec({0, 0}), 1e-6) == 0);
  CHECK(effective_rank(vec({2, 1e-3}), 1e-3) == 1);
}

TEST_CASE("rank events: drops and anomalies") {
  const std::vector<TrajectoryRecord> recs = {
      record(0, {1, 0.5, 0.2}), record(1, {1, 0.5, 1e-8}), record(2, {1, 0.5, 1e-9}),
      record(3, {1, 1e-7, 1e-9}), record(4, {1, 1e-2, 1e-9})};
  const RankTrace tr = detect_rank_events(recs, 1e-6);
  REQUIRE(tr.events.size() == 2);
  CHECK(tr.events[0].t == 1);
  CHECK(tr.events[0].oldRank == 3);
  CHECK(tr.events[0].newRank == 2);
  CHECK(tr.events[0].sigmaAtDrop == 1e-8);
  CHECK(tr.events[1].newRank == 1);
  CHECK(tr.events[1].sigmaAtDrop == 1e-7);
  REQUIRE(tr.anomalies.size() == 1);
  CHECK(tr.anomalies[0].newRank == 2);
  CHECK(detect_rank_events({}, 1e-6).events.empty());
}

TEST_CASE("completion fixed points") {
  const LossSpec loss = LossSpec::unit_diagonal(2);
  FlowConfig cfg;
  cfg.dt = 1e-2;
  cfg.tEnd = 1.0;
  for (const Matrix& w : {Matrix(Matrix::Ones(2, 2)), Matrix((Matrix(2, 2) << 1, 5, 0, 1).finished())}) {
    CHECK(loss_value(loss, w) == 0.0);
    CHECK(reduced_field(w, loss, 3).norm() == 0.0);
    const auto r = integrate_reduced(w, loss, 3, cfg);
    CHECK((r.finalState - w).norm() == 0.0);
  }
}

TEST_CASE("path seeds differ and are stable") {
  CHECK(path_init_seed(1, 0) != path_init_seed(1, 1));
  CHECK(path_init_seed(1, 0) != path_init_seed(2, 0));
  CHECK(path_init_seed(7, 3) == path_init_seed(7, 3));
}

TEST_CASE("small completion ensemble") {
  const CompletionReport rep = completion_ensemble(small_completion());
  REQUIRE(rep.paths.size() == 4);
  CHECK(rep.nonFinite == 0);
  CHECK(rep.rankAnomalies == 0);
  for (const CompletionPath& p : rep.paths) {
    CHECK(p.energy < 1e-6);
    CHECK(!p.records.empty());
  }
  CHECK(rep.successFraction == doctest::Approx(rep.successes / 4.0));
}

TEST_CASE("run writes the documented files and reruns byte-identically") {
  ExperimentConfig c = small_completion();
  const fs::path a = scratch("a");
  const fs::path b = scratch("b");
  std::ostringstream log;
  RunOptions opt;
  opt.quiet = true;
  opt.outDir = a.string();
  REQUIRE(run(c, opt, log).exitCode == 0);
  for (const char* f : {"config.echo", "trajectory.csv", "summary.json", "events.csv",
                        "paths.csv", "manifest.json"})
    CHECK(fs::exists(a / f));
  ExperimentConfig again = load_config((a / "config.echo").string());
  opt.outDir = b.string();
  REQUIRE(run(again, opt, log).exitCode == 0);
  for (const auto& entry : fs::directory_iterator(a))
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["files"].size() == 5);
  CHECK(manifest["files"][0]["fnv1a64"] == file_digest((a / "config.echo").string()));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("run reports config errors with exit code 2") {
  ExperimentConfig c = small_completion();
  c.completion.paths = 0;
  std::ostringstream log;
  const RunReport r = run(c, RunOptions{scratch("bad").string(), true}, log);
  CHECK(r.exitCode == 2);
}

TEST_CASE("numerical abort leaves partial outputs and an error manifest") {
  ExperimentConfig c = parse_config(
      "[experiment]\nkind = flow\nd = 2\nN = 2\n[loss]\ntype = quadratic\n"
      "[flow]\nmethod = euler\ndt = 10\nt_end = 1000\n[init]\nmode = gaussian\nscale = 3\n");
  const fs::path dir = scratch("abort");
  std::ostringstream log;
  const RunReport r = run(c, RunOptions{dir.string(), true}, log);
  CHECK(r.exitCode == 3);
  CHECK(r.status == "numerical-abort");
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["exit_code"] == 3);
  CHECK(manifest.contains("error"));
  CHECK(fs::exists(dir / "trajectory.csv"));
  fs::remove_all(dir);
}

TEST_CASE("audit battery passes") {
  const nlohmann::json checks = run_audit(0);
  CHECK(checks.size() >= 13);
  for (const auto& c : checks) {
    INFO(c.dump());
    CHECK(c["passed"].get<bool>());
  }
}

TEST_CASE("file digest") {
  const fs::path p = scratch("digest.txt");
  { std::ofstream(p, std::ios::binary) << "a"; }
  CHECK(file_digest(p.string()) == "af63dc4c8601ec8c");
  fs::remove(p);
}
