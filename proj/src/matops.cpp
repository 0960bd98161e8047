#include "dln/matops.hpp"

#include <cmath>
#include <sstream>

namespace dln {

const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

Matrix SvdTriple::reconstruct() const {
  return qLeft * sigma.asDiagonal() * qRight.transpose();
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows()
       << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite entry");
  }
}

SvdTriple svd_ordered(const Matrix& w) {
  require_square(w, "svd_ordered");
  require_finite(w, "svd_ordered");
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdTriple out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  // JacobiSVD already sorts in decreasing order; fix the sign gauge.
  const Index d = out.sigma.size();
  for (Index k = 0; k < d; ++k) {
    for (Index i = 0; i < d; ++i) {
      const double entry = out.qLeft(i, k);
      if (std::abs(entry) > 1e-14) {
        if (entry < 0.0) {
          out.qLeft.col(k) *= -1.0;
          out.qRight.col(k) *= -1.0;
        }
        break;
      }
    }
  }
  return out;
}

namespace {

bool rank_deficient(const Vector& sigma) {
  return sigma.size() > 0 &&
         sigma(sigma.size() - 1) <= default_tolerances().full_rank *
                                        std::max(1.0, sigma(0));
}

}  // namespace

PolarPair polar_left(const Matrix& w) {
  const SvdTriple s = svd_ordered(w);
  PolarPair out;
  out.orthogonal = s.qLeft * s.qRight.transpose();
  out.psd = symmetrize(s.qRight * s.sigma.asDiagonal() * s.qRight.transpose());
  out.rankDeficient = rank_deficient(s.sigma);
  return out;
}

PolarPair polar_right(const Matrix& w) {
  const SvdTriple s = svd_ordered(w);
  PolarPair out;
  out.orthogonal = s.qRight * s.qLeft.transpose();
  out.psd = symmetrize(s.qLeft * s.sigma.asDiagonal() * s.qLeft.transpose());
  out.rankDeficient = rank_deficient(s.sigma);
  return out;
}

Matrix psd_sqrt(const Matrix& s, double tol) {
  require_square(s, "psd_sqrt");
  require_finite(s, "psd_sqrt");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(s));
  Vector ev = eig.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol * scale) {
      std::ostringstream os;
      os << "psd_sqrt: eigenvalue " << ev(i) << " is negative";
      throw DomainError(os.str());
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  const Matrix& v = eig.eigenvectors();
  return symmetrize(v * ev.asDiagonal() * v.transpose());
}

Matrix psd_power(const Matrix& s, double exponent) {
  require_square(s, "psd_power");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(s));
  Vector ev = eig.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i) {
    const double lambda = std::max(ev(i), 0.0);
    ev(i) = (exponent == 0.0) ? 1.0 : std::pow(lambda, exponent);
  }
  const Matrix& v = eig.eigenvectors();
  return symmetrize(v * ev.asDiagonal() * v.transpose());
}

double vandermonde(const Vector& values) {
  double prod = 1.0;
  for (Index j = 0; j < values.size(); ++j) {
    for (Index k = j + 1; k < values.size(); ++k) {
      prod *= values(k) - values(j);
    }
  }
  return prod;
}

double orthogonality_residual(const Matrix& q) {
  return (q * q.transpose() - Matrix::Identity(q.rows(), q.cols())).norm();
}

double power_divided_difference(double x, double y, double n) {
  const double hi = std::max(x, y);
  const double lo = std::min(x, y);
  if (hi <= 0.0) return n == 1.0 ? 1.0 : 0.0;
  const double lead = std::pow(hi, 2.0 - 2.0 / n);
  if (lo <= 0.0) return lead;
  const double l = (2.0 / n) * std::log(lo / hi);
  if (l == 0.0) return n * lead;
  return lead * std::expm1(n * l) / std::expm1(l);
}

}  // namespace dln
