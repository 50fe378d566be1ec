#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kfgrad::testing {

Mat naive_multiply(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("naive_multiply: shape");
  Mat c = Mat::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Mat gauss_jordan_inverse(const Mat& a) {
  const Index n = a.rows();
  Mat w(n, 2 * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      w(i, j) = a(i, j);
      w(i, n + j) = i == j ? 1.0 : 0.0;
    }
  for (Index c = 0; c < n; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < n; ++r)
      if (std::abs(w(r, c)) > std::abs(w(piv, c))) piv = r;
    if (w(piv, c) == 0.0) throw std::runtime_error("gauss_jordan_inverse: singular");
    for (Index j = 0; j < 2 * n; ++j) std::swap(w(c, j), w(piv, j));
    const double p = w(c, c);
    for (Index j = 0; j < 2 * n; ++j) w(c, j) /= p;
    for (Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = w(r, c);
      for (Index j = 0; j < 2 * n; ++j) w(r, j) -= f * w(c, j);
    }
  }
  Mat inv(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) inv(i, j) = w(i, n + j);
  return inv;
}

double lu_logdet(const Mat& a) {
  Mat w = a;
  const Index n = w.rows();
  double s = 0.0;
  for (Index c = 0; c < n; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < n; ++r)
      if (std::abs(w(r, c)) > std::abs(w(piv, c))) piv = r;
    if (w(piv, c) == 0.0) throw std::runtime_error("lu_logdet: singular");
    for (Index j = 0; j < n; ++j) std::swap(w(c, j), w(piv, j));
    s += std::log(std::abs(w(c, c)));
    for (Index r = c + 1; r < n; ++r) {
      const double f = w(r, c) / w(c, c);
      for (Index j = c; j < n; ++j) w(r, j) -= f * w(c, j);
    }
  }
  return s;
}

double joint_gaussian_nll(const FilterModel& model, std::span<const Vec> ys) {
  const std::size_t n = ys.size();
  const Index d = model.state_dim();
  const Index m = model.meas_dim();
  // Means and marginal covariances of x₁..x_N.
  std::vector<Vec> mu(n);
  std::vector<Mat> cov(n);
  Vec x = model.x0;
  Mat c = model.P0;
  for (std::size_t k = 0; k < n; ++k) {
    const Mat& f = model.F.at(k);
    x = naive_multiply(f, x);
    if (model.has_inputs()) x += naive_multiply(model.B.at(k), model.u[k]);
    c = naive_multiply(naive_multiply(f, c), f.transpose()) + model.Q.at(k);
    mu[k] = x;
    cov[k] = c;
  }
  // Cov(x_j, x_i) = F_j ⋯ F_{i+1} Cov(x_i) for j ≥ i.
  Mat sigma = Mat::Zero(static_cast<Index>(n) * m, static_cast<Index>(n) * m);
  Vec resid(static_cast<Index>(n) * m);
  for (std::size_t i = 0; i < n; ++i) {
    Mat cross = cov[i];
    for (std::size_t j = i; j < n; ++j) {
      if (j > i) cross = naive_multiply(model.F.at(j), cross);
      Mat block = naive_multiply(naive_multiply(model.H.at(j), cross), model.H.at(i).transpose());
      if (j == i) block += model.R.at(i);
      const Index rj = static_cast<Index>(j) * m, ri = static_cast<Index>(i) * m;
      sigma.block(rj, ri, m, m) = block;
      sigma.block(ri, rj, m, m) = block.transpose();
    }
    resid.segment(static_cast<Index>(i) * m, m) = ys[i] - naive_multiply(model.H.at(i), mu[i]);
  }
  (void)d;
  const Mat inv = gauss_jordan_inverse(sigma);
  const double quad = (resid.transpose() * naive_multiply(inv, resid))(0, 0);
  return lu_logdet(sigma) + quad;
}

std::vector<Vec> textbook_posterior_means(const FilterModel& model, std::span<const Vec> ys) {
  std::vector<Vec> out;
  Vec x = model.x0;
  Mat p = model.P0;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const Mat& f = model.F.at(k);
    const Mat& h = model.H.at(k);
    x = naive_multiply(f, x);
    if (model.has_inputs()) x += naive_multiply(model.B.at(k), model.u[k]);
    p = naive_multiply(naive_multiply(f, p), f.transpose()) + model.Q.at(k);
    const Mat s = naive_multiply(naive_multiply(h, p), h.transpose()) + model.R.at(k);
    const Mat gain = naive_multiply(naive_multiply(p, h.transpose()), gauss_jordan_inverse(s));
    x = x + naive_multiply(gain, ys[k] - naive_multiply(h, x));
    p = p - naive_multiply(naive_multiply(gain, h), p);
    out.push_back(x);
  }
  return out;
}

}  // namespace kfgrad::testing

namespace kfgrad::testing {

bool within_ulps(double a, double b, int k) {
  return std::abs(a - b) <= k * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(b));
}

}  // namespace kfgrad::testing
