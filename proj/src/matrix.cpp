#include "kfgrad/matrix.hpp"

#include <cmath>
#include <string>

namespace kfgrad {

namespace {

thread_local OpCounts tls_counts;

void count(Index n) noexcept { tls_counts.multiplies += static_cast<std::uint64_t>(n); }

void require_dims(bool ok, const char* op, Index ar, Index ac, Index br, Index bc) {
  if (!ok) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + std::to_string(ar) + "x" +
                         std::to_string(ac) + " and " + std::to_string(br) + "x" +
                         std::to_string(bc));
  }
}

}  // namespace

OpCounts& op_counts() noexcept { return tls_counts; }
void reset_op_counts() noexcept { tls_counts = OpCounts{}; }

Mat SpdFactor::reconstruct() const { return multiply_nt(lower_, lower_); }

Mat multiply(const Mat& a, const Mat& b) {
  require_dims(a.cols() == b.rows(), "multiply", a.rows(), a.cols(), b.rows(), b.cols());
  count(a.rows() * a.cols() * b.cols());
  Mat r(a.rows(), b.cols());
  r.noalias() = a * b;
  return r;
}

Mat multiply_tn(const Mat& a, const Mat& b) {
  require_dims(a.rows() == b.rows(), "multiply_tn", a.rows(), a.cols(), b.rows(), b.cols());
  count(a.cols() * a.rows() * b.cols());
  Mat r(a.cols(), b.cols());
  r.noalias() = a.transpose() * b;
  return r;
}

Mat multiply_nt(const Mat& a, const Mat& b) {
  require_dims(a.cols() == b.cols(), "multiply_nt", a.rows(), a.cols(), b.rows(), b.cols());
  count(a.rows() * a.cols() * b.rows());
  Mat r(a.rows(), b.rows());
  r.noalias() = a * b.transpose();
  return r;
}

Vec multiply(const Mat& a, const Vec& x) {
  require_dims(a.cols() == x.size(), "multiply", a.rows(), a.cols(), x.size(), 1);
  count(a.rows() * a.cols());
  Vec r(a.rows());
  r.noalias() = a * x;
  return r;
}

Vec multiply_tn(const Mat& a, const Vec& x) {
  require_dims(a.rows() == x.size(), "multiply_tn", a.rows(), a.cols(), x.size(), 1);
  count(a.rows() * a.cols());
  Vec r(a.cols());
  r.noalias() = a.transpose() * x;
  return r;
}

Mat outer(const Vec& x, const Vec& y) {
  count(x.size() * y.size());
  return x * y.transpose();
}

double dot(const Vec& x, const Vec& y) {
  require_dims(x.size() == y.size(), "dot", x.size(), 1, y.size(), 1);
  count(x.size());
  return x.dot(y);
}

double frobenius_inner(const Mat& a, const Mat& b) {
  require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "frobenius_inner", a.rows(),
               a.cols(), b.rows(), b.cols());
  count(a.size());
  return a.cwiseProduct(b).sum();
}

SpdFactor cholesky(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw InvalidArgument("cholesky: matrix is " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + ", expected square");
  }
  const double scale = a.norm();
  if ((a - a.transpose()).norm() > kSymmetryTolerance * scale) {
    throw InvalidArgument("cholesky: matrix is not symmetric");
  }
  const Mat s = symmetrize(a);
  const Index n = s.rows();
  Mat l = Mat::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double pivot = s(j, j);
    for (Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) throw NotPositiveDefinite(static_cast<std::size_t>(j));
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / ljj;
    }
  }
  ++tls_counts.factorizations;
  count(n * n * n / 6 + n);
  return SpdFactor(std::move(l));
}

Mat solve_spd(const SpdFactor& f, const Mat& b) {
  require_dims(f.dim() == b.rows(), "solve_spd", f.dim(), f.dim(), b.rows(), b.cols());
  ++tls_counts.solves;
  count(f.dim() * f.dim() * b.cols());
  const auto l = f.lower().triangularView<Eigen::Lower>();
  Mat x = l.solve(b);
  l.transpose().solveInPlace(x);
  return x;
}

Vec solve_spd(const SpdFactor& f, const Vec& b) {
  require_dims(f.dim() == b.size(), "solve_spd", f.dim(), f.dim(), b.size(), 1);
  ++tls_counts.solves;
  count(f.dim() * f.dim());
  const auto l = f.lower().triangularView<Eigen::Lower>();
  Vec x = l.solve(b);
  l.transpose().solveInPlace(x);
  return x;
}

Mat solve_spd_right(const Mat& b, const SpdFactor& f) {
  require_dims(b.cols() == f.dim(), "solve_spd_right", b.rows(), b.cols(), f.dim(), f.dim());
  // X·A = b  <=>  A·Xᵀ = bᵀ for symmetric A.
  Mat bt = b.transpose();
  return solve_spd(f, bt).transpose();
}

Mat inverse(const SpdFactor& f) { return symmetrize(solve_spd(f, Mat(Mat::Identity(f.dim(), f.dim())))); }

double logdet(const SpdFactor& f) { return 2.0 * f.lower().diagonal().array().log().sum(); }

Mat symmetrize(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("symmetrize: matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", expected square");
  }
  const Index n = a.rows();
  Mat r(n, n);
  for (Index i = 0; i < n; ++i) {
    r(i, i) = a(i, i);
    for (Index j = 0; j < i; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

Mat psd_sqrt_lower(const Mat& a, double tol) {
  if (a.rows() != a.cols()) throw DimensionError("psd_sqrt_lower: expected square matrix");
  const Mat s = symmetrize(a);
  const Index n = s.rows();
  const double floor = tol * std::max(1.0, s.diagonal().cwiseAbs().maxCoeff());
  Mat l = Mat::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double pivot = s(j, j);
    for (Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (pivot < -floor * 1e6) throw NotPositiveDefinite(static_cast<std::size_t>(j));
    if (pivot <= floor) continue;
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / ljj;
    }
  }
  return l;
}

void require_finite(const Mat& a, const char* what) {
  if (!a.allFinite()) throw NumericalError(std::string(what) + " contains NaN or Inf");
}

bool is_lower_triangular(const Mat& a) {
  if (a.rows() != a.cols()) return false;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = i + 1; j < a.cols(); ++j)
      if (a(i, j) != 0.0) return false;
  return true;
}

}  // namespace kfgrad
