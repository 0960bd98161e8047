#include "doctest.h"

#include <cmath>
#include <limits>

#include "dln/geometry.hpp"
#include "dln/oracle.hpp"
#include "dln/stochastic.hpp"
#include "dln/thermo.hpp"

using namespace dln;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Matrix scalar(double x) { return Matrix::Constant(1, 1, x); }

std::vector<Matrix> normal_stack(int n, Index d, Rng& rng) {
  std::vector<Matrix> out;
  for (int p = 0; p < n; ++p) out.push_back(rng.normal_matrix(d, d));
  return out;
}

}  // namespace

TEST_CASE("Brownian motion step, scalar cases") {
  // N = 1: plain Brownian motion.
  CHECK(bm_gN_step(scalar(0.7), 2.0, 1, 0.01, scalar(1.5))(0, 0) ==
        doctest::Approx(0.7 + std::sqrt(2.0 * 0.01 / 2.0) * 1.5).epsilon(1e-14));
  // N = 2 at lambda = 1: coefficient sqrt(2/beta) sqrt(2), drift 1/beta.
  const double beta = 4.0;
  const double dt = 1e-2;
  CHECK(bm_gN_step(scalar(1.0), beta, 2, dt, scalar(0.0))(0, 0) ==
        doctest::Approx(1.0 + dt / beta).epsilon(1e-14));
  CHECK(bm_gN_step(scalar(1.0), beta, 2, dt, scalar(1.0))(0, 0) ==
        doctest::Approx(1.0 + std::sqrt(2.0 / beta) * std::sqrt(2.0) * std::sqrt(dt) + dt / beta)
            .epsilon(1e-14));
  CHECK(bm_gN_step(scalar(1.0), kInf, 2, dt, scalar(1.0))(0, 0) == 1.0);
  CHECK_THROWS_AS(bm_gN_step(Matrix::Zero(2, 2), 1.0, 2, dt, Matrix::Zero(2, 2)),
                  SingularOperatorError);
}

TEST_CASE("Brownian motion scales are continuous across the coincidence threshold") {
  for (int n : {2, 3, 7}) {
    const double s = 1.3;
    Vector a(2);
    Vector b(2);
    a << s, s * (1.0 - 0.99e-9);
    b << s, s * (1.0 - 1.01e-9);
    const double ca = bm_gN_scales(a, n)(0, 1);
    const double cb = bm_gN_scales(b, n)(0, 1);
    CHECK(std::abs(ca - cb) / ca <= 1e-6);
    // Series limit: (l_k^{2N} - l_l^{2N}) / (l_k^2 - l_l^2) -> N l^{2N-2}.
    CHECK(ca == doctest::Approx(std::sqrt(n * std::pow(s, 2.0 - 2.0 / n))).epsilon(1e-6));
  }
}

TEST_CASE("quadratic variation of the scalar Brownian motion") {
  const int n = 3;
  const double beta = 2.0;
  const double dt = 1e-5;
  Rng rng(5);
  Matrix x = scalar(1.0);
  double qv = 0.0;
  double predicted = 0.0;
  for (int step = 0; step < 100000; ++step) {
    const double lambda = std::pow(std::abs(x(0, 0)), 1.0 / n);
    predicted += (2.0 / beta) * n * std::pow(lambda, 2.0 * (n - 1)) * dt;
    const Matrix next = bm_gN_step(x, beta, n, dt, rng.normal_matrix(1, 1));
    qv += std::pow(next(0, 0) - x(0, 0), 2);
    x = next;
  }
  CHECK(std::abs(qv / predicted - 1.0) <= 0.05);
}

TEST_CASE("downstairs RLE reductions") {
  Matrix w(2, 2);
  w << 1.1, 0.3, -0.2, 0.6;
  const LossSpec loss = LossSpec::unit_diagonal(2);
  SdeConfig cfg;
  cfg.kappa = 0.0;
  cfg.beta = kInf;
  cfg.dt = 1e-3;
  const Matrix noise = Matrix::Constant(2, 2, 3.0);
  const Matrix expected = w + cfg.dt * reduced_field(w, loss, 3);
  CHECK((rle_step_down(w, loss, 3, cfg, noise) - expected).norm() <= 1e-15);

  // kappa = 0 with finite beta is deterministic free-energy descent.
  cfg.beta = 3.0;
  Matrix x = w;
  double f = free_energy(svd_ordered(x).sigma, 3, loss, x, cfg.beta);
  for (int step = 0; step < 2000; ++step) {
    x = rle_step_down(x, loss, 3, cfg, noise);
    const double next = free_energy(svd_ordered(x).sigma, 3, loss, x, cfg.beta);
    CHECK(next <= f + 1e-12);
    f = next;
  }
}

TEST_CASE("stationary law of the scalar downstairs RLE") {
  // With E = x^2/2 and d = 1 the Gibbs measure of (R, g^N) has Lebesgue
  // density proportional to exp(-beta x^2/2) |x|^{-(N-1)/N}.
  const int n = 2;
  SdeConfig cfg;
  cfg.beta = 1.0;
  cfg.kappa = 1.0;
  cfg.dt = 2e-3;
  const LossSpec quad = LossSpec::frobenius_quadratic();
  const int paths = 400;
  const int steps = 6000;
  const int burn = 1000;
  std::vector<double> m1(paths, 0.0);
  std::vector<double> m2(paths, 0.0);
  for_each_path(paths, 17, [&](int path, Rng& rng) {
    Matrix x = scalar(1.0);
    for (int step = 0; step < steps; ++step) {
      x = rle_step_down(x, quad, n, cfg, rng.normal_matrix(1, 1));
      if (step >= burn) {
        m1[path] += std::abs(x(0, 0));
        m2[path] += x(0, 0) * x(0, 0);
      }
    }
  });
  double e1 = 0.0;
  double e2 = 0.0;
  for (int p = 0; p < paths; ++p) {
    e1 += m1[p];
    e2 += m2[p];
  }
  e1 /= double(paths) * (steps - burn);
  e2 /= double(paths) * (steps - burn);
  const double g = (n - 1.0) / n;
  const double b = cfg.beta;
  const double norm = std::tgamma((1.0 - g) / 2.0);
  const double exact1 = std::sqrt(2.0 / b) * std::tgamma((2.0 - g) / 2.0) / norm;
  const double exact2 = (2.0 / b) * std::tgamma((3.0 - g) / 2.0) / norm;
  CHECK(std::abs(e1 / exact1 - 1.0) <= 0.05);
  CHECK(std::abs(e2 / exact2 - 1.0) <= 0.05);
}

TEST_CASE("upstairs RLE without noise is an Euler step of the full flow") {
  Rng rng(3);
  const BalancedCoords c = oracle::random_coords(2, 3, rng);
  const NetworkState s = from_balanced_coords(c);
  const LossSpec loss = LossSpec::unit_diagonal(2);
  SdeConfig cfg;
  cfg.beta = 2.0;
  cfg.kappa = 1.0;
  cfg.dt = 1e-3;
  const std::vector<Matrix> zero(3, Matrix::Zero(2, 2));
  const NetworkState field = full_flow_field(s, loss);
  const NetworkState stepped = rle_step_up(s, loss, cfg, zero, {false});
  for (int p = 1; p <= 3; ++p)
    CHECK((stepped.layer(p) - (s.layer(p) + cfg.dt * field.layer(p))).norm() <= 1e-15);

  NetworkState unbalanced = s;
  unbalanced.layer(1) *= 1.5;
  CHECK_THROWS_AS(rle_step_up(unbalanced, loss, cfg, zero), DomainError);
}

TEST_CASE("upstairs RLE stays balanced") {
  Rng rng(4);
  const BalancedCoords c = oracle::random_coords(2, 3, rng);
  NetworkState s = from_balanced_coords(c);
  const LossSpec loss = LossSpec::unit_diagonal(2);
  SdeConfig cfg;
  cfg.beta = 10.0;
  cfg.kappa = 0.5;
  cfg.dt = 1e-3;
  double driftOff = 0.0;
  for (int step = 0; step < 100; ++step) {
    const std::vector<Matrix> noise = normal_stack(3, 2, rng);
    driftOff = std::max(driftOff, balance_residual(rle_step_up(s, loss, cfg, noise, {false})));
    s = rle_step_up(s, loss, cfg, noise);
    CHECK(balance_residual(s) <= 1e-8);
  }
  // Without re-projection the tangent step leaves the manifold at O(dt).
  CHECK(driftOff > 1e-7);
  CHECK(driftOff < 50.0 * cfg.dt);
}

TEST_CASE("re-projection recovers a balanced stack") {
  Rng rng(8);
  const BalancedCoords c = oracle::random_coords(3, 4, rng);
  const NetworkState s = from_balanced_coords(c);
  BalancedCoords start = c;
  start.lambda *= 1.0 + 1e-3;
  const Matrix id = Matrix::Identity(3, 3);
  for (auto& q : start.frames) {
    const Matrix g = rng.normal_matrix(3, 3);
    const Matrix a = 1e-3 * (g - g.transpose());
    q = (id - 0.5 * a).inverse() * (id + 0.5 * a) * q;
  }
  const BalancedCoords back = reproject_balanced(start, s);
  const NetworkState again = from_balanced_coords(back);
  for (std::size_t i = 0; i < s.weights.size(); ++i)
    CHECK((again.weights[i] - s.weights[i]).norm() <= 1e-10);
}

TEST_CASE("group noise alone drives the end-to-end matrix by the entropy gradient") {
  // kappa = 0, E = 0: the mean one-step increment of phi(w) over dt equals
  // -grad F_beta = beta^{-1} Q_N Sigma' Q_0^T.
  Rng rng(11);
  const BalancedCoords c = oracle::random_coords(2, 3, rng, 0.8, 1.6, 0.3);
  const NetworkState s = from_balanced_coords(c);
  const Matrix w = end_to_end(s);
  SdeConfig cfg;
  cfg.beta = 1.0;
  cfg.kappa = 0.0;
  cfg.dt = 1e-4;
  const int samples = 20000;
  std::vector<Matrix> incr(samples);
  for_each_path(samples, 29, [&](int i, Rng& r) {
    incr[i] = (end_to_end(rle_step_up(s, LossSpec::zero(), cfg, normal_stack(3, 2, r))) - w) /
              cfg.dt;
  });
  Matrix mean = Matrix::Zero(2, 2);
  Matrix sq = Matrix::Zero(2, 2);
  for (const Matrix& m : incr) {
    mean += m;
    sq += m.cwiseProduct(m);
  }
  mean /= samples;
  const Matrix se = ((sq / samples - mean.cwiseProduct(mean)) / samples).cwiseSqrt();
  const Matrix expected = -grad_free_energy(w, LossSpec::zero(), 3, cfg.beta);
  MESSAGE("mean drift " << mean << "\nexpected " << expected);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j)
      CHECK(std::abs(mean(i, j) - expected(i, j)) <= 4.0 * se(i, j) + 2e-2 * expected.norm());
}

TEST_CASE("quasistatic upstairs RLE tracks the downstairs free-energy flow") {
  // kappa = 0: phi(w_t) follows dW/dt = -grad F_beta(W) up to an O(sqrt(dt))
  // per-path error.
  Rng rng(12);
  const BalancedCoords c = oracle::random_coords(2, 3, rng, 0.8, 1.6, 0.3);
  const NetworkState s0 = from_balanced_coords(c);
  const LossSpec loss = LossSpec::unit_diagonal(2);
  const double beta = 2.0;
  const double t = 0.2;
  FlowConfig ode;
  ode.dt = 1e-4;
  ode.tEnd = t;
  ode.recordEvery = 100000;
  const Matrix target =
      integrate_matrix_field(
          end_to_end(s0),
          [&](const Matrix& m) { return Matrix(-grad_free_energy(m, loss, 3, beta)); }, loss, 3,
          ode)
          .finalState;
  auto deviation = [&](double dt) {
    SdeConfig cfg;
    cfg.beta = beta;
    cfg.kappa = 0.0;
    cfg.dt = dt;
    const int paths = 16;
    std::vector<double> dev(paths);
    for_each_path(paths, 77, [&](int p, Rng& r) {
      NetworkState s = s0;
      const long steps = std::lround(t / dt);
      for (long k = 0; k < steps; ++k) s = rle_step_up(s, loss, cfg, normal_stack(3, 2, r));
      dev[p] = (end_to_end(s) - target).norm();
    });
    double sum = 0.0;
    for (double x : dev) sum += x;
    return sum / paths;
  };
  const double coarse = deviation(4e-3);
  const double fine = deviation(1e-3);
  MESSAGE("deviation " << coarse << " -> " << fine);
  CHECK(fine < 0.05);
  CHECK(coarse / fine > 1.5);
  CHECK(coarse / fine < 4.5);
}

TEST_CASE("Dyson particles: deterministic gap") {
  DysonState x{Vector(2)};
  x.x << -1.0, 1.0;
  const double dt = 1e-4;
  for (int step = 0; step < 30000; ++step) {
    x = dyson_particle_step(x, kInf, dt, Vector::Zero(2));
    CHECK(std::abs(x.x.sum()) <= 1e-12);
  }
  CHECK(x.x(1) - x.x(0) == doctest::Approx(4.0).epsilon(1e-4 / 4.0));
}

TEST_CASE("Dyson drift is half the gradient of 2 log van") {
  Vector x(4);
  x << -1.3, -0.2, 0.5, 2.0;
  const Vector drift = dyson_drift(x);
  for (Index i = 0; i < 4; ++i) {
    Vector plus = x;
    Vector minus = x;
    plus(i) += 1e-6;
    minus(i) -= 1e-6;
    const double grad = (2.0 * std::log(std::abs(vandermonde(plus))) -
                         2.0 * std::log(std::abs(vandermonde(minus)))) / 2e-6;
    CHECK(drift(i) == doctest::Approx(0.5 * grad).epsilon(1e-7));
  }
  CHECK(dyson_drift(Vector::Constant(1, 0.3))(0) == 0.0);
  DysonState one{Vector::Constant(1, 0.3)};
  CHECK(dyson_particle_step(one, 2.0, 0.01, Vector::Constant(1, 1.0)).x(0) ==
        doctest::Approx(0.3 + 0.1));
}

TEST_CASE("Dyson collisions are rejected and refined") {
  DysonState x{Vector(2)};
  x.x << 0.0, 0.1;
  Vector push(2);
  push << 3.0, -3.0;
  CHECK_THROWS_AS(dyson_particle_step(x, 1.0, 0.01, push), CollisionError);
  Rng rng(2);
  const DysonAdvance adv = dyson_particle_advance(x, 1.0, 0.01, push, rng);
  CHECK(adv.halvings >= 1);
  CHECK(adv.state.x(1) > adv.state.x(0));

  // Hopeless step: the pair is pushed through each other at every scale.
  DysonState tight{Vector(2)};
  tight.x << 0.0, 1.0;
  Vector huge(2);
  huge << 1e6, -1e6;
  CHECK_THROWS_AS(dyson_particle_advance(tight, 1.0, 1.0, huge, rng), CollisionError);
}

TEST_CASE("matrix Dyson: trivial cases") {
  HermitianMatrix m = HermitianMatrix::Zero(3, 3);
  m(0, 0) = -1.0;
  m(1, 1) = 0.5;
  m(2, 2) = 2.0;
  m(0, 1) = {0.1, 0.2};
  m(1, 0) = std::conj(m(0, 1));
  CHECK((dyson_matrix_step(m, 1.0, 0.01, HermitianMatrix::Zero(3, 3)) - m).norm() <= 1e-14);
  HermitianMatrix bad = HermitianMatrix::Identity(2, 2);
  CHECK_THROWS_AS(dyson_matrix_step(bad, 1.0, 0.01, HermitianMatrix::Zero(2, 2)),
                  CollisionError);
}

TEST_CASE("matrix Dyson at beta = inf: mean eigenvalue drift is the Coulomb term") {
  HermitianMatrix m = HermitianMatrix::Zero(3, 3);
  Rng setup(1);
  const HermitianMatrix g = hermitian_noise(3, setup);
  m = g + g.adjoint();
  const Vector x = hermitian_eigenvalues(m);
  const double dt = 1e-5;
  const int samples = 40000;
  std::vector<Vector> incr(samples);
  for_each_path(samples, 3, [&](int i, Rng& rng) {
    incr[i] = (hermitian_eigenvalues(dyson_matrix_step(m, kInf, dt, hermitian_noise(3, rng))) - x) /
              dt;
  });
  Vector mean = Vector::Zero(3);
  for (const Vector& v : incr) mean += v;
  mean /= samples;
  const Vector expected = dyson_drift(x);
  MESSAGE("mean " << mean.transpose() << " expected " << expected.transpose());
  CHECK((mean - expected).norm() <= 0.05 * expected.norm());
}

TEST_CASE("matrix Dyson with a loss follows the free-energy drift") {
  // kappa = 0: the eigenvalues follow dx = -grad F_beta(x) dt with
  // F_beta = E - S/beta and S = 2 log van, i.e. -E'(x) + (2/beta) Coulomb.
  HermitianMatrix m = HermitianMatrix::Zero(2, 2);
  m(0, 0) = -0.5;
  m(1, 1) = 0.7;
  const double beta = 2.0;
  const double dt = 1e-5;
  const EigenLossGradient quad = [](const Vector& x) { return Vector(x); };
  const int samples = 40000;
  std::vector<Vector> incr(samples);
  const Vector x = hermitian_eigenvalues(m);
  for_each_path(samples, 5, [&](int i, Rng& rng) {
    incr[i] = (hermitian_eigenvalues(
                   dyson_matrix_step(m, beta, 0.0, dt, hermitian_noise(2, rng), quad)) -
               x) /
              dt;
  });
  Vector mean = Vector::Zero(2);
  for (const Vector& v : incr) mean += v;
  mean /= samples;
  const Vector expected = -x + (2.0 / beta) * dyson_drift(x);
  MESSAGE("mean " << mean.transpose() << " expected " << expected.transpose());
  CHECK((mean - expected).norm() <= 0.05 * expected.norm());
}

TEST_CASE("sphere step") {
  Vector m(3);
  m << 1.0, -2.0, 0.5;
  CHECK((sphere_step(m, 0.01, Vector::Zero(3)) - m).norm() == 0.0);
  CHECK(sphere_step(Vector::Constant(1, 2.0), 0.01, Vector::Constant(1, 5.0))(0) == 2.0);
  CHECK_THROWS_AS(sphere_step(Vector::Zero(3), 0.01, Vector::Ones(3)), DomainError);
  Vector noise(3);
  noise << 0.3, 0.1, -0.7;
  const Vector next = sphere_step(m, 0.01, noise);
  CHECK(std::abs((next - m).dot(m)) <= 1e-15);
}

TEST_CASE("sphere radius: weak order one") {
  // E[r_t^2] = r_0^2 + (d - 1) t exactly, but E[r_t] carries an O(dt) bias.
  const int d = 3;
  const double t = 0.5;
  auto mean_radius = [&](double dt) {
    const int paths = 20000;
    const int steps = static_cast<int>(std::lround(t / dt));
    std::vector<double> r(paths);
    for_each_path(paths, 41, [&](int p, Rng& rng) {
      Vector m = Vector::Zero(d);
      m(0) = 0.5;
      for (int s = 0; s < steps; ++s) m = sphere_step(m, dt, rng.normal_vector(d));
      r[p] = m.norm();
    });
    double sum = 0.0;
    for (double x : r) sum += x;
    return sum / paths;
  };
  const double coarse = mean_radius(0.05);
  const double fine = mean_radius(0.025);
  const double finest = mean_radius(0.0125);
  const double ratio = (coarse - fine) / (fine - finest);
  MESSAGE("bias ratio " << ratio);
  CHECK(ratio > 1.4);
  CHECK(ratio < 2.8);
}

TEST_CASE("path ensembles do not depend on scheduling") {
  auto run = [](int threads) {
    std::vector<double> out(64);
    for_each_path(64, 9, [&](int p, Rng& rng) { out[p] = rng.normal() + p; }, threads);
    return out;
  };
  CHECK(run(1) == run(4));
  CHECK(run(1) == run(0));
}

TEST_CASE("two-sample KS test") {
  const KsResult disjoint = ks_two_sample({1, 2, 3}, {4, 5, 6});
  CHECK(disjoint.statistic == 1.0);
  Rng rng(6);
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;
  for (int i = 0; i < 2000; ++i) {
    a.push_back(rng.normal());
    b.push_back(rng.normal());
    c.push_back(rng.normal() + 0.3);
  }
  CHECK(ks_two_sample(a, b).pValue > 0.01);
  CHECK(ks_two_sample(a, c).pValue < 1e-6);
  std::vector<double> x(2000);
  for (int i = 0; i < 2000; ++i) x[i] = i;
  CHECK(ks_two_sample(x, x).statistic == 0.0);
  CHECK(ks_two_sample(x, x).pValue == 1.0);
}
