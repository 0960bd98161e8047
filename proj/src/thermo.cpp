#include "dln/thermo.hpp"

#include <cmath>
#include <sstream>

namespace dln {

void ThermoState::validate() const {
  if (!(beta > 0.0)) throw DomainError("beta must be positive or infinite");
}

namespace {

void require_positive(const Vector& sigma, const char* what) {
  for (Index k = 0; k < sigma.size(); ++k) {
    if (!(sigma(k) > 0.0) || !std::isfinite(sigma(k))) {
      std::ostringstream os;
      os << what << ": singular value " << k + 1 << " is not positive";
      throw DomainError(os.str());
    }
  }
}

double gap_tolerance(double a, double b) {
  return default_tolerances().coincident_gap * std::max(std::abs(a), std::abs(b));
}

}  // namespace

double entropy_unchecked(const Vector& sigma, int depth) {
  if (depth < 1) throw DomainError("entropy: depth must be >= 1");
  double total = 0.0;
  for (Index i = 0; i < sigma.size(); ++i)
    for (Index j = i + 1; j < sigma.size(); ++j)
      total += std::log(a_eigenvalue(sigma(i), sigma(j), depth));
  return 0.5 * total;
}

double entropy(const Vector& sigma, int depth) {
  require_positive(sigma, "entropy");
  return entropy_unchecked(sigma, depth);
}

double entropy_infty(const Vector& sigma) {
  require_positive(sigma, "entropy_infty");
  double total = 0.0;
  for (Index k = 0; k < sigma.size(); ++k) {
    for (Index l = k + 1; l < sigma.size(); ++l) {
      const double hi = std::max(sigma(k), sigma(l));
      const double lo = std::min(sigma(k), sigma(l));
      // (hi^2 - lo^2) / (2 log(hi/lo)) = hi^2 expm1(L) / L, L = 2 log(lo/hi)
      const double el = 2.0 * std::log(lo / hi);
      const double mean = el == 0.0 ? hi * hi : hi * hi * std::expm1(el) / el;
      total += std::log(mean);
    }
  }
  return total;
}

Vector sigma_prime(const Vector& sigma, int depth) {
  require_positive(sigma, "sigma_prime");
  if (depth < 1) throw DomainError("sigma_prime: depth must be >= 1");
  const double n = static_cast<double>(depth);
  const Index d = sigma.size();
  Vector lambda(d);
  for (Index k = 0; k < d; ++k) lambda(k) = std::pow(sigma(k), 1.0 / n);
  Vector out = Vector::Zero(d);
  if (depth == 1) return out;
  for (Index k = 0; k < d; ++k) {
    double sum = 0.0;
    for (Index l = 0; l < d; ++l) {
      if (l == k) continue;
      if (std::abs(sigma(k) - sigma(l)) < gap_tolerance(sigma(k), sigma(l))) {
        std::ostringstream os;
        os << "sigma_prime: singular values " << std::min(k, l) + 1 << " and "
           << std::max(k, l) + 1 << " coincide";
        throw DomainError(os.str());
      }
      const double lk = lambda(k);
      const double ll = lambda(l);
      sum += n * std::pow(lk, 2.0 * n - 1.0) / (sigma(k) * sigma(k) - sigma(l) * sigma(l)) -
             lk / (lk * lk - ll * ll);
    }
    out(k) = sum * std::pow(lambda(k), n - 1.0);
  }
  return out;
}

Vector sigma_double_prime(const Vector& sigma, int depth) {
  require_positive(sigma, "sigma_double_prime");
  if (depth < 1) throw DomainError("sigma_double_prime: depth must be >= 1");
  const double n = static_cast<double>(depth);
  Vector out(sigma.size());
  for (Index k = 0; k < sigma.size(); ++k) {
    out(k) = (n - 1.0) * std::pow(sigma(k), (n - 2.0) / n);
  }
  return out;
}

double free_energy(const Vector& sigma, int depth, const LossSpec& loss,
                   const Matrix& w, double beta) {
  if (!(beta > 0.0)) throw DomainError("free_energy: beta must be positive");
  const double e = loss_value(loss, w);
  if (std::isinf(beta)) return e;
  return e - entropy(sigma, depth) / beta;
}

Matrix entropy_gradient(const SvdTriple& svd, int depth) {
  return svd.qLeft * sigma_prime(svd.sigma, depth).asDiagonal() *
         svd.qRight.transpose();
}

Matrix grad_free_energy(const Matrix& w, const LossSpec& loss, int depth,
                        double beta) {
  if (!(beta > 0.0)) throw DomainError("grad_free_energy: beta must be positive");
  const SvdTriple svd = svd_ordered(w);
  Matrix g = apply_A(svd, loss_gradient(loss, w), depth);
  if (!std::isinf(beta)) g -= entropy_gradient(svd, depth) / beta;
  return g;
}

}  // namespace dln
