#include "dln/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dln/stochastic.hpp"
#include "dln/thermo.hpp"

namespace dln {

namespace fs = std::filesystem;

int effective_rank(const Vector& sigma, double relTol) {
  if (sigma.size() == 0) return 0;
  const double top = sigma.maxCoeff();
  if (!(top > 0.0)) return 0;
  int r = 0;
  for (Index k = 0; k < sigma.size(); ++k)
    if (sigma(k) > relTol * top) ++r;
  return r;
}

RankTrace detect_rank_events(const std::vector<TrajectoryRecord>& records, double relTol) {
  RankTrace out;
  if (records.empty()) return out;
  int rank = effective_rank(records.front().sigma, relTol);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const TrajectoryRecord& rec = records[i];
    const int r = effective_rank(rec.sigma, relTol);
    if (r == rank) continue;
    RankEvent e;
    e.t = rec.t;
    e.oldRank = rank;
    e.newRank = r;
    const Index crossing = std::min<Index>(std::min(r, rank), rec.sigma.size() - 1);
    e.sigmaAtDrop = rec.sigma(crossing);
    (r < rank ? out.events : out.anomalies).push_back(e);
    rank = r;
  }
  return out;
}

std::uint64_t path_init_seed(std::uint64_t seed, int path) {
  return splitmix64(splitmix64(seed) + static_cast<std::uint64_t>(path));
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

const char* status_name(IntegrationStatus s) {
  switch (s) {
    case IntegrationStatus::kCompleted: return "completed";
    case IntegrationStatus::kConverged: return "converged";
    case IntegrationStatus::kNonFinite: return "non-finite";
  }
  return "unknown";
}

}  // namespace

CompletionReport completion_ensemble(const ExperimentConfig& config, bool keepRecords) {
  config.validate();
  CompletionReport report;
  report.paths.resize(static_cast<std::size_t>(config.completion.paths));
  for_each_path(config.completion.paths, config.seed, [&](int p, Rng&) {
    const NetworkState s0 = init_random(config.d, config.depth, config.init.scale,
                                        config.init.mode, path_init_seed(config.seed, p));
    CompletionPath& out = report.paths[static_cast<std::size_t>(p)];
    out.path = p;
    Matrix w;
    std::vector<TrajectoryRecord> records;
    if (config.init.mode == InitMode::kBalanced) {
      auto r = integrate_reduced(end_to_end(s0), config.loss, config.depth, config.flow);
      w = r.finalState;
      out.status = r.status;
      out.steps = r.steps;
      records = std::move(r.records);
    } else {
      auto r = integrate_full(s0, config.loss, config.flow);
      w = end_to_end(r.finalState);
      out.status = r.status;
      out.steps = r.steps;
      records = std::move(r.records);
    }
    out.energy = loss_value(config.loss, w);
    out.det = w.determinant();
    out.w12 = w.cols() > 1 ? w(0, 1) : 0.0;
    out.w21 = w.rows() > 1 ? w(1, 0) : 0.0;
    out.lowRankSolution = out.status != IntegrationStatus::kNonFinite &&
                          out.energy < config.completion.energyThreshold &&
                          std::abs(out.det) < config.completion.detThreshold;
    out.ranks = detect_rank_events(records, config.rankRelTol);
    if (keepRecords) out.records = std::move(records);
  });
  std::vector<double> absW12;
  for (const CompletionPath& p : report.paths) {
    if (p.lowRankSolution) ++report.successes;
    if (!p.ranks.events.empty()) ++report.pathsWithRankDrops;
    report.rankAnomalies += static_cast<int>(p.ranks.anomalies.size());
    if (p.status == IntegrationStatus::kNonFinite) ++report.nonFinite;
    absW12.push_back(std::abs(p.w12));
  }
  report.successFraction = static_cast<double>(report.successes) / config.completion.paths;
  report.medianAbsW12 = quantile(absW12, 0.5);
  report.q25AbsW12 = quantile(absW12, 0.25);
  report.q75AbsW12 = quantile(absW12, 0.75);
  return report;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputDir {
  fs::path root;
  std::vector<std::string> files;

  std::ofstream open(const std::string& name) {
    files.push_back(name);
    std::ofstream os(root / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (root / name).string());
    return os;
  }
  void write(const std::string& name, const std::string& text) { open(name) << text; }
};

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return format_double(x);
}

// JSON numbers for summaries; non-finite values become strings.
nlohmann::json jnum(double x) {
  if (std::isfinite(x)) return x;
  return num(x);
}

nlohmann::json jvec(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(jnum(v(i)));
  return out;
}

void write_path_row(std::ostream& os, int path, const TrajectoryRecord& rec) {
  os << path << ',';
  write_trajectory_row(os, rec);
}

void write_events(OutputDir& out, const std::vector<std::pair<int, RankTrace>>& traces,
                  bool withPath) {
  std::ofstream os = out.open("events.csv");
  os << (withPath ? "path_id," : "") << "t,old_rank,new_rank,sigma_at_drop,kind\n";
  for (const auto& [path, trace] : traces) {
    auto emit = [&](const RankEvent& e, const char* kind) {
      if (withPath) os << path << ',';
      os << num(e.t) << ',' << e.oldRank << ',' << e.newRank << ',' << num(e.sigmaAtDrop) << ','
         << kind << '\n';
    };
    for (const RankEvent& e : trace.events) emit(e, "drop");
    for (const RankEvent& e : trace.anomalies) emit(e, "increase");
  }
}

nlohmann::json record_json(const TrajectoryRecord& rec) {
  return {{"t", jnum(rec.t)},
          {"E", jnum(rec.energy)},
          {"S", jnum(rec.entropy)},
          {"F", jnum(rec.freeEnergy)},
          {"sigma", jvec(rec.sigma)},
          {"balance_residual", jnum(rec.balanceResidual)},
          {"g_drift", jnum(rec.gDrift)},
          {"det_w", jnum(rec.detW)}};
}

TrajectoryRecord describe_matrix(const Matrix& w, double t, const LossSpec& loss, int depth,
                                 double beta) {
  TrajectoryRecord rec;
  rec.t = t;
  const SvdTriple svd = svd_ordered(w);
  rec.sigma = svd.sigma;
  rec.endToEnd = w;
  rec.energy = loss_value(loss, w);
  rec.entropy = entropy_unchecked(svd.sigma, depth);
  rec.freeEnergy = std::isinf(beta) ? rec.energy : rec.energy - rec.entropy / beta;
  rec.detW = w.determinant();
  return rec;
}

long step_count(double tEnd, double dt) { return std::lround(tEnd / dt); }

nlohmann::json run_flow(const ExperimentConfig& c, OutputDir& out) {
  const NetworkState s0 = init_random(c.d, c.depth, c.init.scale, c.init.mode, c.init.seed);
  std::ofstream traj = out.open("trajectory.csv");
  traj << trajectory_csv_header(c.d) << '\n';
  const RecordSink sink = [&](const TrajectoryRecord& rec) { write_trajectory_row(traj, rec); };
  std::vector<TrajectoryRecord> records;
  IntegrationStatus status;
  std::string message;
  long steps = 0;
  double maxBalance = 0.0;
  double maxDrift = 0.0;
  if (c.flowLevel == FlowLevel::kFull) {
    auto r = integrate_full(s0, c.loss, c.flow, sink);
    records = std::move(r.records);
    status = r.status;
    message = r.message;
    steps = r.steps;
  } else {
    auto r = integrate_reduced(end_to_end(s0), c.loss, c.depth, c.flow, sink);
    records = std::move(r.records);
    status = r.status;
    message = r.message;
    steps = r.steps;
  }
  traj.close();
  for (const auto& rec : records) {
    maxBalance = std::max(maxBalance, rec.balanceResidual);
    maxDrift = std::max(maxDrift, rec.gDrift);
  }
  const RankTrace ranks = detect_rank_events(records, c.rankRelTol);
  write_events(out, {{0, ranks}}, false);
  const std::vector<double> res = energy_decay_residuals(records);
  nlohmann::json s;
  s["status"] = status_name(status);
  s["message"] = message;
  s["steps"] = steps;
  s["initial"] = record_json(records.front());
  s["final"] = record_json(records.back());
  s["max_energy_decay_residual"] = jnum(res.empty() ? 0.0 : *std::max_element(res.begin(), res.end()));
  s["max_balance_residual"] = jnum(maxBalance);
  s["max_g_drift"] = jnum(maxDrift);
  s["rank_drops"] = ranks.events.size();
  s["rank_anomalies"] = ranks.anomalies.size();
  s["final_effective_rank"] = effective_rank(records.back().sigma, c.rankRelTol);
  if (status == IntegrationStatus::kNonFinite) throw NumericalAbort(message);
  return s;
}

nlohmann::json run_rle(const ExperimentConfig& c, OutputDir& out) {
  const int paths = c.sde.paths;
  const long steps = step_count(c.sde.tEnd, c.sde.dt);
  std::vector<std::vector<TrajectoryRecord>> recs(static_cast<std::size_t>(paths));
  for_each_path(paths, c.seed, [&](int p, Rng& rng) {
    const NetworkState s0 =
        init_random(c.d, c.depth, c.init.scale, c.init.mode, path_init_seed(c.init.seed, p));
    auto& rows = recs[static_cast<std::size_t>(p)];
    if (c.rleLevel == RleLevel::kDown) {
      Matrix w = end_to_end(s0);
      for (long k = 0;; ++k) {
        if (k % c.sdeRecordEvery == 0 || k == steps)
          rows.push_back(describe_matrix(w, k * c.sde.dt, c.loss, c.depth, c.sde.beta));
        if (k == steps) break;
        w = rle_step_down(w, c.loss, c.depth, c.sde, rng.normal_matrix(c.d, c.d));
      }
    } else {
      NetworkState s = s0;
      for (long k = 0;; ++k) {
        if (k % c.sdeRecordEvery == 0 || k == steps) {
          TrajectoryRecord rec =
              describe_matrix(end_to_end(s), k * c.sde.dt, c.loss, c.depth, c.sde.beta);
          rec.balanceResidual = balance_residual(s);
          rows.push_back(std::move(rec));
        }
        if (k == steps) break;
        std::vector<Matrix> noise;
        for (int i = 0; i < c.depth; ++i) noise.push_back(rng.normal_matrix(c.d, c.d));
        s = rle_step_up(s, c.loss, c.sde, noise);
      }
    }
  });
  std::ofstream traj = out.open("trajectory.csv");
  traj << "path_id," << trajectory_csv_header(c.d) << '\n';
  double meanE = 0.0;
  double meanF = 0.0;
  Vector meanSigma = Vector::Zero(c.d);
  for (int p = 0; p < paths; ++p) {
    for (const auto& rec : recs[static_cast<std::size_t>(p)]) write_path_row(traj, p, rec);
    const auto& last = recs[static_cast<std::size_t>(p)].back();
    meanE += last.energy / paths;
    meanF += last.freeEnergy / paths;
    meanSigma += last.sigma / paths;
  }
  nlohmann::json s;
  s["status"] = "completed";
  s["paths"] = paths;
  s["steps"] = steps;
  s["level"] = c.rleLevel == RleLevel::kDown ? "down" : "up";
  s["final_mean_E"] = jnum(meanE);
  s["final_mean_F"] = jnum(meanF);
  s["final_mean_sigma"] = jvec(meanSigma);
  return s;
}

Vector dyson_start(const ExperimentConfig& c) {
  if (c.dyson.initial.size() > 0) return c.dyson.initial;
  Vector x(c.d);
  for (Index i = 0; i < c.d; ++i) x(i) = 2.0 * static_cast<double>(i) - static_cast<double>(c.d - 1);
  return x;
}

nlohmann::json run_dyson(const ExperimentConfig& c, OutputDir& out) {
  const int paths = c.sde.paths;
  const long steps = step_count(c.sde.tEnd, c.sde.dt);
  const Vector x0 = dyson_start(c);
  struct Row {
    double t;
    Vector x;
  };
  std::vector<std::vector<Row>> rows(static_cast<std::size_t>(paths));
  std::vector<int> halvings(static_cast<std::size_t>(paths), 0);
  for_each_path(paths, c.seed, [&](int p, Rng& rng) {
    auto& mine = rows[static_cast<std::size_t>(p)];
    if (c.dyson.form == DysonForm::kParticle) {
      DysonState x{x0};
      for (long k = 0;; ++k) {
        if (k % c.sdeRecordEvery == 0 || k == steps) mine.push_back({k * c.sde.dt, x.x});
        if (k == steps) break;
        const DysonAdvance adv =
            dyson_particle_advance(x, c.sde.beta, c.sde.dt, rng.normal_vector(c.d), rng);
        halvings[static_cast<std::size_t>(p)] =
            std::max(halvings[static_cast<std::size_t>(p)], adv.halvings);
        x = adv.state;
      }
    } else {
      HermitianMatrix m = x0.cast<std::complex<double>>().asDiagonal();
      for (long k = 0;; ++k) {
        if (k % c.sdeRecordEvery == 0 || k == steps)
          mine.push_back({k * c.sde.dt, hermitian_eigenvalues(m)});
        if (k == steps) break;
        m = dyson_matrix_step(m, c.sde.beta, c.sde.dt, hermitian_noise(c.d, rng));
      }
    }
  });
  std::ofstream traj = out.open("trajectory.csv");
  traj << "path_id,t";
  for (Index i = 1; i <= c.d; ++i) traj << ",x_" << i;
  traj << '\n';
  Vector meanFinal = Vector::Zero(c.d);
  double meanGap = 0.0;
  for (int p = 0; p < paths; ++p) {
    for (const Row& r : rows[static_cast<std::size_t>(p)]) {
      traj << p << ',' << num(r.t);
      for (Index i = 0; i < c.d; ++i) traj << ',' << num(r.x(i));
      traj << '\n';
    }
    const Vector& xf = rows[static_cast<std::size_t>(p)].back().x;
    meanFinal += xf / paths;
    if (c.d > 1) meanGap += (xf(c.d - 1) - xf(0)) / (c.d - 1) / paths;
  }
  nlohmann::json s;
  s["status"] = "completed";
  s["form"] = c.dyson.form == DysonForm::kParticle ? "particle" : "matrix";
  s["paths"] = paths;
  s["steps"] = steps;
  s["final_mean_x"] = jvec(meanFinal);
  s["final_mean_gap"] = jnum(meanGap);
  s["max_halvings"] = *std::max_element(halvings.begin(), halvings.end());
  if (c.d == 2 && c.sde.noiseless() && c.dyson.form == DysonForm::kParticle) {
    const double g0 = x0(1) - x0(0);
    const double exact = std::sqrt(g0 * g0 + 4.0 * steps * c.sde.dt);
    s["analytic_gap"] = jnum(exact);
    s["gap_error"] = jnum(std::abs(meanGap - exact));
  }
  return s;
}

nlohmann::json run_sphere(const ExperimentConfig& c, OutputDir& out) {
  const int paths = c.sde.paths;
  const long steps = step_count(c.sde.tEnd, c.sde.dt);
  const double r0 = c.sphere.radius;
  std::vector<std::vector<std::pair<double, double>>> rows(static_cast<std::size_t>(paths));
  for_each_path(paths, c.seed, [&](int p, Rng& rng) {
    Vector m = Vector::Zero(c.d);
    m(0) = r0;
    auto& mine = rows[static_cast<std::size_t>(p)];
    for (long k = 0;; ++k) {
      if (k % c.sdeRecordEvery == 0 || k == steps) mine.emplace_back(k * c.sde.dt, m.norm());
      if (k == steps) break;
      m = sphere_step(m, c.sde.dt, rng.normal_vector(c.d));
    }
  });
  std::ofstream traj = out.open("trajectory.csv");
  traj << "path_id,t,r\n";
  const double t = steps * c.sde.dt;
  std::vector<double> stat;
  for (int p = 0; p < paths; ++p) {
    for (const auto& [tt, r] : rows[static_cast<std::size_t>(p)])
      traj << p << ',' << num(tt) << ',' << num(r) << '\n';
    const double rf = rows[static_cast<std::size_t>(p)].back().second;
    stat.push_back(rf * rf - r0 * r0 - (c.d - 1.0) * t);
  }
  double mean = 0.0;
  for (double x : stat) mean += x / paths;
  double var = 0.0;
  for (double x : stat) var += (x - mean) * (x - mean);
  const double se = paths > 1 ? std::sqrt(var / (paths - 1) / paths) : 0.0;
  nlohmann::json s;
  s["status"] = "completed";
  s["paths"] = paths;
  s["steps"] = steps;
  s["t"] = jnum(t);
  s["mean_r2_minus_ito"] = jnum(mean);
  s["standard_error"] = jnum(se);
  s["z_score"] = jnum(se > 0 ? mean / se : 0.0);
  return s;
}

nlohmann::json run_complete(const ExperimentConfig& c, OutputDir& out) {
  const CompletionReport rep = completion_ensemble(c, true);
  {
    std::ofstream traj = out.open("trajectory.csv");
    traj << "path_id," << trajectory_csv_header(c.d) << '\n';
    for (const CompletionPath& p : rep.paths)
      for (const auto& rec : p.records) write_path_row(traj, p.path, rec);
  }
  {
    std::ofstream os = out.open("paths.csv");
    os << "path_id,status,steps,E_final,det_final,w12_final,w21_final,low_rank,rank_drops\n";
    for (const CompletionPath& p : rep.paths)
      os << p.path << ',' << status_name(p.status) << ',' << p.steps << ',' << num(p.energy)
         << ',' << num(p.det) << ',' << num(p.w12) << ',' << num(p.w21) << ','
         << (p.lowRankSolution ? 1 : 0) << ',' << p.ranks.events.size() << '\n';
  }
  std::vector<std::pair<int, RankTrace>> traces;
  for (const CompletionPath& p : rep.paths) traces.emplace_back(p.path, p.ranks);
  write_events(out, traces, true);
  nlohmann::json s;
  s["status"] = "completed";
  s["paths"] = rep.paths.size();
  s["low_rank_solutions"] = rep.successes;
  s["low_rank_fraction"] = jnum(rep.successFraction);
  s["median_abs_w12"] = jnum(rep.medianAbsW12);
  s["q25_abs_w12"] = jnum(rep.q25AbsW12);
  s["q75_abs_w12"] = jnum(rep.q75AbsW12);
  s["paths_with_rank_drops"] = rep.pathsWithRankDrops;
  s["rank_anomalies"] = rep.rankAnomalies;
  s["non_finite_paths"] = rep.nonFinite;
  s["energy_threshold"] = jnum(c.completion.energyThreshold);
  s["det_threshold"] = jnum(c.completion.detThreshold);
  return s;
}

nlohmann::json run_entropy_map(const ExperimentConfig& c, OutputDir& out) {
  const EntropyMapSpec& m = c.entropyMap;
  std::ofstream os = out.open("entropy_map.csv");
  for (Index i = 1; i <= c.d; ++i) os << "sigma_" << i << ',';
  os << "E,S,S_inf,F\n";
  long total = 1;
  for (Index i = 0; i < c.d; ++i) total *= m.points;
  double bestF = std::numeric_limits<double>::infinity();
  Vector best;
  for (long idx = 0; idx < total; ++idx) {
    Vector sigma(c.d);
    long rest = idx;
    for (Index i = 0; i < c.d; ++i) {
      const long j = rest % m.points;
      rest /= m.points;
      sigma(i) = m.sigmaMin + (m.sigmaMax - m.sigmaMin) * static_cast<double>(j) / (m.points - 1);
    }
    const Matrix w = sigma.asDiagonal();
    Vector sorted = sigma;
    std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<double>());
    const double e = loss_value(c.loss, w);
    const double s = entropy(sorted, c.depth);
    const double sinf = entropy_infty(sorted);
    const double f = e - s / m.beta;
    for (Index i = 0; i < c.d; ++i) os << num(sigma(i)) << ',';
    os << num(e) << ',' << num(s) << ',' << num(sinf) << ',' << num(f) << '\n';
    if (f < bestF) {
      bestF = f;
      best = sigma;
    }
  }
  nlohmann::json s;
  s["status"] = "completed";
  s["grid_points"] = total;
  s["min_F"] = jnum(bestF);
  s["argmin_sigma"] = jvec(best);
  return s;
}

fs::path default_out_dir(ExperimentKind kind) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%dT%H%M%SZ") << '-' << kind_name(kind);
  return fs::path("runs") / os.str();
}

}  // namespace

RunReport run(const ExperimentConfig& config, const RunOptions& options, std::ostream& log) {
  RunReport report;
  try {
    config.validate();
  } catch (const ConfigError& e) {
    report.exitCode = 2;
    report.status = "config-error";
    report.message = e.what();
    return report;
  }
  OutputDir out;
  out.root = !options.outDir.empty()      ? fs::path(options.outDir)
             : !config.outputDir.empty() ? fs::path(config.outputDir)
                                         : default_out_dir(config.kind);
  std::error_code ec;
  fs::create_directories(out.root, ec);
  if (ec) {
    report.exitCode = 2;
    report.status = "config-error";
    report.message = "cannot create output directory " + out.root.string() + ": " + ec.message();
    return report;
  }
  report.outDir = out.root.string();
  out.write("config.echo", echo_config(config));

  nlohmann::json summary;
  try {
    switch (config.kind) {
      case ExperimentKind::kFlow: summary = run_flow(config, out); break;
      case ExperimentKind::kRle: summary = run_rle(config, out); break;
      case ExperimentKind::kDyson: summary = run_dyson(config, out); break;
      case ExperimentKind::kSphere: summary = run_sphere(config, out); break;
      case ExperimentKind::kComplete: summary = run_complete(config, out); break;
      case ExperimentKind::kEntropyMap: summary = run_entropy_map(config, out); break;
      case ExperimentKind::kAudit: {
        const nlohmann::json checks = run_audit(config.seed);
        int failed = 0;
        for (const auto& c : checks)
          if (!c["passed"].get<bool>()) ++failed;
        summary["status"] = failed == 0 ? "passed" : "failed";
        summary["failed"] = failed;
        summary["checks"] = checks;
        if (failed > 0) {
          report.exitCode = 3;
          report.message = std::to_string(failed) + " audit checks failed";
        }
        break;
      }
    }
    report.status = report.exitCode == 0 ? "ok" : "audit-failed";
  } catch (const NumericalAbort& e) {
    report.exitCode = 3;
    report.status = "numerical-abort";
    report.message = e.what();
  } catch (const DomainError& e) {
    report.exitCode = 3;
    report.status = "numerical-abort";
    report.message = e.what();
  } catch (const DimensionError& e) {
    report.exitCode = 2;
    report.status = "config-error";
    report.message = e.what();
  }
  if (summary.is_null()) summary = nlohmann::json::object();
  summary["kind"] = kind_name(config.kind);
  if (report.exitCode != 0) summary["error"] = report.message;
  out.write("summary.json", summary.dump(2) + "\n");

  nlohmann::json manifest;
  manifest["tool"] = kToolName;
  manifest["version"] = kToolVersion;
  manifest["kind"] = kind_name(config.kind);
  manifest["seed"] = config.seed;
  manifest["rank_rel_tol"] = config.rankRelTol;
  manifest["config"] = "config.echo";
  manifest["rerun"] = std::string(kToolName) + " " + kind_name(config.kind) +
                      " --config config.echo --out <dir>";
  manifest["status"] = report.status;
  manifest["exit_code"] = report.exitCode;
  if (report.exitCode != 0) manifest["error"] = report.message;
  nlohmann::json files = nlohmann::json::array();
  for (const std::string& name : out.files) {
    const fs::path p = out.root / name;
    files.push_back({{"name", name},
                     {"bytes", static_cast<std::uint64_t>(fs::file_size(p))},
                     {"fnv1a64", file_digest(p.string())}});
  }
  manifest["files"] = files;
  {
    std::ofstream os(out.root / "manifest.json", std::ios::binary);
    os << manifest.dump(2) << "\n";
  }
  if (!options.quiet) {
    log << kind_name(config.kind) << ": " << report.status;
    if (!report.message.empty()) log << " (" << report.message << ")";
    log << " -> " << report.outDir << "\n";
  }
  return report;
}

}  // namespace dln
