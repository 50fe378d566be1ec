#pragma once

// Dense linear-algebra kernel shared by every module.
//
// Products go through the free functions below rather than Eigen's operator*
// so that every scalar multiplication is tallied in a thread-local counter.
// The backward pass's cost audit relies on that counter.

#include <cstdint>

#include <Eigen/Dense>

#include "kfgrad/error.hpp"

namespace kfgrad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

struct OpCounts {
  std::uint64_t multiplies = 0;      // scalar multiplications in products and solves
  std::uint64_t factorizations = 0;  // Cholesky factorizations
  std::uint64_t solves = 0;          // triangular solve pairs against a factor
};

// Per-thread counters. Work done inside OpenMP worker threads lands in those
// threads' counters, so audits must use serial execution.
OpCounts& op_counts() noexcept;
void reset_op_counts() noexcept;

// Lower Cholesky factor L of an SPD matrix A = L·Lᵀ. Only cholesky() creates one.
class SpdFactor {
 public:
  const Mat& lower() const noexcept { return lower_; }
  Index dim() const noexcept { return lower_.rows(); }
  Mat reconstruct() const;

 private:
  friend SpdFactor cholesky(const Mat& a);
  explicit SpdFactor(Mat lower) : lower_(std::move(lower)) {}
  Mat lower_;
};

Mat multiply(const Mat& a, const Mat& b);
Mat multiply_tn(const Mat& a, const Mat& b);  // aᵀ·b
Mat multiply_nt(const Mat& a, const Mat& b);  // a·bᵀ
Vec multiply(const Mat& a, const Vec& x);
Vec multiply_tn(const Mat& a, const Vec& x);  // aᵀ·x
Mat outer(const Vec& x, const Vec& y);         // x·yᵀ
double dot(const Vec& x, const Vec& y);
double frobenius_inner(const Mat& a, const Mat& b);  // Σᵢⱼ aᵢⱼ bᵢⱼ

// Symmetric-input relative tolerance for cholesky().
inline constexpr double kSymmetryTolerance = 1e-10;

// Factors symmetrize(a). Throws InvalidArgument when `a` is not square or is
// asymmetric beyond kSymmetryTolerance (relative, Frobenius), and
// NotPositiveDefinite naming the first non-positive pivot.
SpdFactor cholesky(const Mat& a);

// X with (L·Lᵀ)·X = b.
Mat solve_spd(const SpdFactor& f, const Mat& b);
Vec solve_spd(const SpdFactor& f, const Vec& b);
// X with X·(L·Lᵀ) = b.
Mat solve_spd_right(const Mat& b, const SpdFactor& f);
// (L·Lᵀ)⁻¹, for the places where the inverse itself is an output term.
Mat inverse(const SpdFactor& f);

double logdet(const SpdFactor& f);

// (a + aᵀ)/2; the result equals its transpose bit for bit.
Mat symmetrize(const Mat& a);

// Lower-triangular L with L·Lᵀ = a for symmetric PSD `a`; pivots at or below
// `tol`·max diag are treated as zero and their column is dropped. Used for
// sampling from possibly singular covariances.
Mat psd_sqrt_lower(const Mat& a, double tol = 1e-14);

// Throws NumericalError when any entry is NaN or infinite.
void require_finite(const Mat& a, const char* what);

bool is_lower_triangular(const Mat& a);

}  // namespace kfgrad
