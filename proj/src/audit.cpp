#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "dln/experiment.hpp"
#include "dln/geometry.hpp"
#include "dln/oracle.hpp"
#include "dln/stochastic.hpp"
#include "dln/thermo.hpp"

namespace dln {

namespace {

struct Audit {
  nlohmann::json checks = nlohmann::json::array();

  void add(const std::string& name, double value, double tolerance) {
    const bool ok = std::isfinite(value) && value <= tolerance;
    checks.push_back({{"name", name},
                      {"passed", ok},
                      {"value", std::isfinite(value) ? nlohmann::json(value)
                                                     : nlohmann::json(format_double(value))},
                      {"tolerance", tolerance}});
  }

  // Runs `body`; an exception counts as a failed check.
  void guarded(const std::string& name, double tolerance, const std::function<double()>& body) {
    try {
      add(name, body(), tolerance);
    } catch (const std::exception& e) {
      checks.push_back(
          {{"name", name}, {"passed", false}, {"tolerance", tolerance}, {"error", e.what()}});
    }
  }
};

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

LossSpec audit_loss() { return LossSpec::completion({{0, 0, 1.0}, {1, 1, 1.0}, {0, 1, -0.5}}); }

}  // namespace

nlohmann::json run_audit(std::uint64_t seed) {
  Audit a;
  const LossSpec loss = audit_loss();

  a.guarded("imbalance_invariance", 1e-8, [&] {
    const NetworkState s0 = init_random(2, 3, 0.6, InitMode::kGaussian, seed);
    FlowConfig cfg;
    cfg.dt = 1e-3;
    cfg.tEnd = 1.0;
    cfg.recordEvery = 100;
    double drift = 0.0;
    for (const auto& rec : integrate_full(s0, loss, cfg).records) drift = std::max(drift, rec.gDrift);
    return drift;
  });

  a.guarded("balanced_reduction", 1e-10, [&] {
    Rng rng(seed, 1);
    double worst = 0.0;
    for (int n = 1; n <= 4; ++n) {
      const NetworkState s = from_balanced_coords(oracle::random_coords(3, n, rng));
      const Matrix lhs = end_to_end_field_general(s, loss);
      const Matrix rhs = reduced_field(end_to_end(s), loss, n);
      worst = std::max(worst, max_abs(lhs - rhs) / std::max(1.0, max_abs(rhs)));
    }
    return worst;
  });

  a.guarded("operator_power_sum", 1e-10, [&] {
    Rng rng(seed, 2);
    double worst = 0.0;
    for (int n = 1; n <= 5; ++n) {
      const Matrix w = oracle::random_full_rank(3, rng);
      const Matrix z = rng.normal_matrix(3, 3);
      const Matrix ref = oracle::power_sum_A(w, z, n);
      worst = std::max(worst, max_abs(apply_A(w, z, n) - ref) / std::max(1.0, max_abs(ref)));
    }
    return worst;
  });

  a.guarded("energy_decay", 1e-4, [&] {
    const NetworkState s0 = init_random(2, 3, 0.6, InitMode::kBalanced, seed);
    FlowConfig cfg;
    cfg.dt = 1e-3;
    cfg.tEnd = 1.0;
    const auto res = energy_decay_residuals(
        integrate_reduced(end_to_end(s0), loss, 3, cfg).records);
    return res.empty() ? 0.0 : *std::max_element(res.begin(), res.end());
  });

  // d = 2, N = 2 balanced states lie on the cone |W_1|^2 = |W_2|^2.
  a.guarded("simons_cone", 1e-10, [&] {
    Rng rng(seed, 10);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const NetworkState s = from_balanced_coords(oracle::random_coords(2, 2, rng));
      worst = std::max(worst, std::abs(s.layer(1).squaredNorm() - s.layer(2).squaredNorm()));
    }
    return worst;
  });

  a.guarded("tangent_basis_orthonormal", 1e-10, [&] {
    Rng rng(seed, 3);
    const BasisAtlas atlas = tangent_basis(oracle::random_coords(3, 3, rng));
    const Matrix g = oracle::gram(atlas.all());
    return max_abs(g - Matrix::Identity(g.rows(), g.cols()));
  });

  a.guarded("pullback_metric", 1e-10, [&] {
    Rng rng(seed, 4);
    const BalancedCoords c = oracle::random_coords(3, 3, rng);
    const Matrix ref = oracle::numeric_pullback_gram(c);
    return max_abs(pullback_metric(c).assemble() - ref) / std::max(1.0, max_abs(ref));
  });

  a.guarded("submersion", 0.0, [&] {
    Rng rng(seed, 5);
    double failures = 0.0;
    for (int n = 1; n <= 4; ++n)
      failures += static_cast<double>(
          submersion_check(oracle::random_coords(2, n, rng), loss).failures.size());
    return failures;
  });

  a.guarded("entropy_orbit_volume", 1e-6, [&] {
    Rng rng(seed, 6);
    double lo = 1e300;
    double hi = -1e300;
    for (int trial = 0; trial < 6; ++trial) {
      const BalancedCoords c = oracle::random_coords(3, 3, rng);
      const double diff = entropy(c.lambda.array().pow(3).matrix(), 3) -
                          oracle::group_gram_log_volume(c);
      lo = std::min(lo, diff);
      hi = std::max(hi, diff);
    }
    return hi - lo;
  });

  a.guarded("entropy_gradient", 1e-5, [&] {
    Rng rng(seed, 7);
    const Matrix w = oracle::random_full_rank(3, rng, 0.4, 2.0);
    const auto s = [](const Matrix& m) { return entropy_unchecked(svd_ordered(m).sigma, 3); };
    const Matrix fd = oracle::fd_gradient(s, w, 1e-6);
    return max_abs(apply_A(w, fd, 3) - entropy_gradient(svd_ordered(w), 3));
  });

  a.guarded("bm_scale_continuity", 1e-6, [&] {
    const Vector below = (Vector(2) << 1.3, 1.3 * (1.0 - 0.99e-9)).finished();
    const Vector above = (Vector(2) << 1.3, 1.3 * (1.0 - 1.01e-9)).finished();
    return max_abs(bm_gN_scales(below, 3) - bm_gN_scales(above, 3));
  });

  a.guarded("dyson_gap", 1e-3, [&] {
    DysonState x{(Vector(2) << -1.0, 1.0).finished()};
    const double dt = 1e-4;
    const long steps = 30000;
    Rng rng(seed, 8);
    for (long k = 0; k < steps; ++k)
      x = dyson_particle_advance(x, std::numeric_limits<double>::infinity(), dt, Vector::Zero(2),
                                 rng)
              .state;
    const double exact = std::sqrt(4.0 + 4.0 * steps * dt);
    return std::abs(x.x(1) - x.x(0) - exact);
  });

  // |z| of the Ito correction E|m_t|^2 - |m_0|^2 - (d - 1) t over 2000 paths.
  a.guarded("sphere_ito", 4.0, [&] {
    const int paths = 2000;
    const int d = 3;
    const double dt = 1e-3;
    const long steps = 200;
    std::vector<double> stat(paths);
    for_each_path(paths, seed, [&](int p, Rng& rng) {
      Vector m = Vector::Unit(d, 0);
      for (long k = 0; k < steps; ++k) m = sphere_step(m, dt, rng.normal_vector(d));
      stat[static_cast<std::size_t>(p)] = m.squaredNorm() - 1.0 - (d - 1.0) * steps * dt;
    });
    double mean = 0.0;
    for (double v : stat) mean += v / paths;
    double var = 0.0;
    for (double v : stat) var += (v - mean) * (v - mean) / (paths - 1);
    return std::abs(mean) / std::sqrt(var / paths);
  });

  // ||A_N / N - A_inf|| / ||A_inf Z|| shrinks like 1/N: ratio between N = 100 and 1000.
  a.guarded("large_depth_decay", 0.05, [&] {
    Rng rng(seed, 9);
    const Matrix w = oracle::random_full_rank(3, rng, 0.5, 2.0);
    const Matrix z = rng.normal_matrix(3, 3);
    const Matrix limit = apply_A_infty(w, z);
    const auto err = [&](int n) { return (apply_A(w, z, n) / n - limit).norm() / limit.norm(); };
    return std::abs(err(100) / err(1000) / 10.0 - 1.0);
  });

  return a.checks;
}

}  // namespace dln
