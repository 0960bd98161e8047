#include "doctest.h"

#include <cmath>

#include <nlohmann/json.hpp>

#include "dln/network.hpp"
#include "dln/oracle.hpp"

using namespace dln;

TEST_CASE("end-to-end product") {
  NetworkState id({Matrix::Identity(3, 3), Matrix::Identity(3, 3)});
  CHECK((end_to_end(id) - Matrix::Identity(3, 3)).norm() == 0.0);

  NetworkState scalar({Matrix::Constant(1, 1, 4.0), Matrix::Constant(1, 1, 3.0),
                       Matrix::Constant(1, 1, 2.0)});
  CHECK(end_to_end(scalar)(0, 0) == 24.0);

  Rng rng(1);
  NetworkState s({rng.normal_matrix(3, 3), rng.normal_matrix(3, 3),
                  rng.normal_matrix(3, 3), rng.normal_matrix(3, 3)});
  const Matrix other_order =
      (s.weights[0] * s.weights[1]) * (s.weights[2] * s.weights[3]);
  CHECK((end_to_end(s) - other_order).norm() <= 1e-13 * std::max(1.0, other_order.norm()));
}

TEST_CASE("imbalance of a scalar stack") {
  NetworkState s({Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0)});
  const ImbalanceG g = imbalance(s);
  CHECK(g.count() == 1);
  CHECK(g.g(1)(0, 0) == -3.0);
  CHECK(balance_residual(s) == 3.0);
}

TEST_CASE("balanced coordinates build balanced stacks") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const BalancedCoords c = oracle::random_coords(3, 5, rng);
    const NetworkState s = from_balanced_coords(c);
    CHECK(balance_residual(s) <= 1e-12);
    Matrix expected = c.frame(5) * c.lambda.array().pow(5.0).matrix().asDiagonal() *
                      c.frame(0).transpose();
    CHECK((end_to_end(s) - expected).norm() <= 1e-11);
  }
}

TEST_CASE("trivial balanced coordinates") {
  BalancedCoords c{Vector::Ones(2), {Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                     Matrix::Identity(2, 2)}};
  for (const auto& w : from_balanced_coords(c).weights)
    CHECK((w - Matrix::Identity(2, 2)).norm() == 0.0);

  // d = 1 with sign frames.
  BalancedCoords one{Vector::Constant(1, 1.5),
                     {Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0),
                      Matrix::Constant(1, 1, -1.0)}};
  const NetworkState s = from_balanced_coords(one);
  CHECK(s.layer(2)(0, 0) == -1.5);
  CHECK(s.layer(1)(0, 0) == -1.5);
  CHECK(end_to_end(s)(0, 0) == doctest::Approx(1.5 * 1.5));
}

TEST_CASE("Simons cone for d = 2, N = 2 balanced states") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const NetworkState s = from_balanced_coords(oracle::random_coords(2, 2, rng));
    CHECK(std::abs(s.layer(1).squaredNorm() - s.layer(2).squaredNorm()) <= 1e-12);
  }
}

TEST_CASE("coordinates recovered from a balanced state") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const BalancedCoords c = oracle::random_coords(3, 4, rng);
    const NetworkState s = from_balanced_coords(c);
    const BalancedCoords back = balanced_coords_from_state(s);
    CHECK((back.lambda - c.lambda).norm() < 1e-12);
    const NetworkState again = from_balanced_coords(back);
    for (std::size_t i = 0; i < s.weights.size(); ++i)
      CHECK((again.weights[i] - s.weights[i]).norm() < 1e-11);
  }
}

TEST_CASE("polar recursion with zero imbalance reproduces a balanced stack") {
  Rng rng(4);
  const BalancedCoords c = oracle::random_coords(3, 4, rng);
  const NetworkState s = from_balanced_coords(c);
  ImbalanceG g;
  g.entries.assign(3, Matrix::Zero(3, 3));
  // W_{p+1} = Q_{p+1} P_{p+1} with Q_{p+1} the left polar factor of W_{p+1}.
  std::vector<Matrix> frames;
  for (int p = 4; p >= 2; --p) frames.push_back(polar_left(s.layer(p)).orthogonal);
  const NetworkState rebuilt = from_polar_params(g, s.layer(1), frames);
  CHECK(balance_residual(rebuilt) <= 1e-10);
  for (std::size_t i = 0; i < s.weights.size(); ++i)
    CHECK((rebuilt.weights[i] - s.weights[i]).norm() < 1e-10);
}

TEST_CASE("polar recursion hits prescribed imbalances") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4;
    ImbalanceG g;
    for (int p = 0; p < n - 1; ++p) {
      const Matrix a = rng.normal_matrix(3, 3);
      g.entries.push_back(a * a.transpose() + 0.1 * Matrix::Identity(3, 3));
    }
    std::vector<Matrix> frames;
    for (int p = 0; p < n - 1; ++p) frames.push_back(haar_orthogonal(3, rng));
    const NetworkState s = from_polar_params(g, rng.normal_matrix(3, 3), frames);
    CHECK(imbalance_distance(imbalance(s), g) <= 1e-10 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("polar recursion reports the failing layer") {
  ImbalanceG g;
  g.entries = {Matrix::Zero(2, 2), -10.0 * Matrix::Identity(2, 2)};  // G_2, G_1
  std::vector<Matrix> frames{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  try {
    from_polar_params(g, Matrix::Identity(2, 2), frames);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("G_1") != std::string::npos);
  }
}

TEST_CASE("scalar hyperbola recursion") {
  // w_{p+1} = v_{p+1} sqrt(w_p^2 + g_p)
  ImbalanceG g;
  g.entries = {Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 2.0)};
  std::vector<Matrix> frames{Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, -1.0)};
  const NetworkState s = from_polar_params(g, Matrix::Constant(1, 1, 1.0), frames);
  const double w2 = -std::sqrt(1.0 + 2.0);
  const double w3 = std::sqrt(w2 * w2 + 0.5);
  CHECK(s.layer(2)(0, 0) == doctest::Approx(w2));
  CHECK(s.layer(3)(0, 0) == doctest::Approx(w3));
}

TEST_CASE("transpose-reverse maps G to minus G reversed") {
  Rng rng(10);
  NetworkState s({rng.normal_matrix(2, 2), rng.normal_matrix(2, 2), rng.normal_matrix(2, 2)});
  const ImbalanceG g = imbalance(s);
  const ImbalanceG h = imbalance(transpose_reverse(s));
  CHECK((h.g(1) + g.g(2)).norm() < 1e-13);
  CHECK((h.g(2) + g.g(1)).norm() < 1e-13);
  CHECK((end_to_end(transpose_reverse(s)) - end_to_end(s).transpose()).norm() < 1e-13);
}

TEST_CASE("equal layer spectra iff balanced") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const NetworkState balanced = from_balanced_coords(oracle::random_coords(3, 3, rng));
    const NetworkState random = init_random(3, 3, 1.0, InitMode::kGaussian, 100 + trial);
    auto spread = [](const NetworkState& s) {
      double worst = 0.0;
      const Vector ref = svd_ordered(s.layer(1)).sigma;
      for (int p = 2; p <= s.depth(); ++p)
        worst = std::max(worst, (svd_ordered(s.layer(p)).sigma - ref).norm());
      return worst;
    };
    CHECK(spread(balanced) < 1e-12);
    CHECK(balance_residual(balanced) < 1e-12);
    CHECK(spread(random) > 1e-3);
    CHECK(balance_residual(random) > 1e-3);
  }
}

TEST_CASE("random initialisation") {
  const NetworkState a = init_random(3, 4, 0.5, InitMode::kBalanced, 77);
  const NetworkState b = init_random(3, 4, 0.5, InitMode::kBalanced, 77);
  CHECK(balance_residual(a) <= 1e-11);
  for (std::size_t i = 0; i < a.weights.size(); ++i) CHECK(a.weights[i] == b.weights[i]);

  const NetworkState small = init_random(2, 3, 0.01, InitMode::kGaussian, 5);
  CHECK(imbalance(small).norm() < 1e-3);
  CHECK_THROWS_AS(init_random(2, 2, 0.0, InitMode::kGaussian, 1), DomainError);
}

TEST_CASE("Haar frames average to zero") {
  // E[Q] = 0 for Haar Q and Q^T Q = I always; check the first moment
  // entrywise against 3 standard errors (each entry has variance 1/d).
  Rng rng(21);
  const int samples = 10000;
  const Index d = 3;
  Matrix mean = Matrix::Zero(d, d);
  Matrix gram = Matrix::Zero(d, d);
  for (int i = 0; i < samples; ++i) {
    const Matrix q = haar_orthogonal(d, rng);
    mean += q;
    gram += q.transpose() * q;
  }
  mean /= samples;
  gram /= samples;
  const double se = std::sqrt(1.0 / d / samples);
  CHECK(mean.cwiseAbs().maxCoeff() < 3.0 * se + 1e-3);
  CHECK((gram - Matrix::Identity(d, d)).norm() < 1e-12);
}

TEST_CASE("checkpoint round trip") {
  const NetworkState s = init_random(2, 3, 0.7, InitMode::kGaussian, 3);
  const NetworkState back = network_from_json(nlohmann::json::parse(checkpoint_text(s)));
  for (std::size_t i = 0; i < s.weights.size(); ++i) CHECK(back.weights[i] == s.weights[i]);

  Rng rng(3);
  const BalancedCoords c = oracle::random_coords(2, 3, rng);
  const BalancedCoords cb = coords_from_json(nlohmann::json::parse(checkpoint_text(c)));
  CHECK(cb.lambda == c.lambda);
  for (std::size_t i = 0; i < c.frames.size(); ++i) CHECK(cb.frames[i] == c.frames[i]);

  auto doc = nlohmann::json::parse(checkpoint_text(s));
  doc["depths"] = {1, 2, 3};
  CHECK_THROWS_AS(network_from_json(doc), DimensionError);
}
