#ifndef DLN_EXPERIMENT_HPP
#define DLN_EXPERIMENT_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dln/config.hpp"
#include "dln/flows.hpp"

namespace dln {

inline constexpr const char* kToolName = "dlnlab";
inline constexpr const char* kToolVersion = "0.1.0";

/// Number of sigma_k > relTol * sigma_1; 0 when sigma_1 == 0.
int effective_rank(const Vector& sigma, double relTol);

struct RankEvent {
  double t = 0.0;
  int oldRank = 0;
  int newRank = 0;
  double sigmaAtDrop = 0.0;  // sigma_{newRank+1} at the first record of the new rank
};

struct RankTrace {
  std::vector<RankEvent> events;     // drops
  std::vector<RankEvent> anomalies;  // increases, logged but not asserted against
};

RankTrace detect_rank_events(const std::vector<TrajectoryRecord>& records, double relTol);

struct CompletionPath {
  int path = 0;
  double energy = 0.0;
  double det = 0.0;
  double w12 = 0.0;
  double w21 = 0.0;
  long steps = 0;
  IntegrationStatus status = IntegrationStatus::kCompleted;
  bool lowRankSolution = false;  // E < energy threshold and |det W| < det threshold
  RankTrace ranks;
  std::vector<TrajectoryRecord> records;
};

struct CompletionReport {
  std::vector<CompletionPath> paths;
  int successes = 0;
  double successFraction = 0.0;
  double medianAbsW12 = 0.0;
  double q25AbsW12 = 0.0;
  double q75AbsW12 = 0.0;
  int pathsWithRankDrops = 0;
  int rankAnomalies = 0;
  int nonFinite = 0;
};

/// Seed of the initial state of ensemble path `path`.
std::uint64_t path_init_seed(std::uint64_t seed, int path);

/// Runs the end-to-end flow (reduced for balanced starts, full upstairs
/// flow for Gaussian starts) from one random start per path and summarises
/// where the paths end up.
CompletionReport completion_ensemble(const ExperimentConfig& config, bool keepRecords = true);

/// Audit battery: one entry per check with name, passed, value, tolerance.
nlohmann::json run_audit(std::uint64_t seed);

struct RunOptions {
  std::string outDir;  // overrides config.outputDir
  bool quiet = false;
};

struct RunReport {
  int exitCode = 0;  // 0 ok, 2 config error, 3 numerical abort or failed audit
  std::string status;
  std::string message;
  std::string outDir;
};

/// Runs one experiment and writes config.echo, the kind's CSV outputs,
/// summary.json and manifest.json into the output directory. Outputs contain
/// no timestamps or paths, so a rerun from config.echo is byte-identical.
RunReport run(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace dln

#endif  // DLN_EXPERIMENT_HPP
