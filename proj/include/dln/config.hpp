#ifndef DLN_CONFIG_HPP
#define DLN_CONFIG_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dln/flows.hpp"
#include "dln/network.hpp"
#include "dln/stochastic.hpp"

namespace dln {

/// Invalid or incomplete experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { kFlow, kRle, kDyson, kSphere, kComplete, kAudit, kEntropyMap };

std::string kind_name(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& name);

enum class FlowLevel { kFull, kReduced };
enum class RleLevel { kDown, kUp };
enum class DysonForm { kParticle, kMatrix };

struct InitSpec {
  InitMode mode = InitMode::kBalanced;
  double scale = 0.5;
  std::uint64_t seed = 0;
};

struct DysonSpec {
  DysonForm form = DysonForm::kParticle;
  Vector initial;  // empty: 2i - (d - 1), i = 0..d-1
};

struct SphereSpec {
  double radius = 1.0;
};

struct EntropyMapSpec {
  double sigmaMin = 0.1;
  double sigmaMax = 3.0;
  int points = 30;
  double beta = 1.0;
};

struct CompletionSpec {
  int paths = 200;
  double energyThreshold = 1e-6;
  double detThreshold = 1e-3;
};

/// Every experiment is described by one INI file:
///
///   [experiment] kind, d, N, seed
///   [loss]       type = completion | quadratic | zero; entries = "i,j,a; ..." (1-based)
///   [flow]       level = full | reduced, method = rk4 | euler, dt, t_end,
///                record_every, beta, stop_tolerance, stop_window
///   [sde]        level = down | up, beta, kappa, dt, t_end, paths, record_every
///   [init]       mode = balanced | gaussian, scale
///   [dyson]      form = particle | matrix, initial = "x_1, ..., x_d"
///   [sphere]     radius
///   [entropy_map] sigma_min, sigma_max, points, beta
///   [complete]   paths, energy_threshold, det_threshold
///   [output]     dir, rank_rel_tol
///
/// Missing keys take the defaults below; unknown sections or keys are
/// rejected so typos do not pass silently. `inf` is accepted for beta.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kFlow;
  Index d = 2;
  int depth = 3;
  std::uint64_t seed = 0;
  LossSpec loss = LossSpec::unit_diagonal(2);
  FlowLevel flowLevel = FlowLevel::kFull;
  FlowConfig flow;
  RleLevel rleLevel = RleLevel::kDown;
  SdeConfig sde;
  int sdeRecordEvery = 100;
  InitSpec init;
  DysonSpec dyson;
  SphereSpec sphere;
  EntropyMapSpec entropyMap;
  CompletionSpec completion;
  std::string outputDir;
  double rankRelTol = 1e-6;

  /// Kind-specific checks; throws ConfigError.
  void validate() const;
  /// Applies a new master seed to every seeded component.
  void set_seed(std::uint64_t s);
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical INI text with every field explicit; parse_config(echo) gives
/// back the same configuration.
std::string echo_config(const ExperimentConfig& config);

}  // namespace dln

#endif  // DLN_CONFIG_HPP
