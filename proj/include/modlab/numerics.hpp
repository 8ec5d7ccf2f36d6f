#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace modlab {

// Dense row-major 64-bit matrix. Every weight tensor, embedding table and
// logit matrix in the library is one of these.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

bool all_finite(const Matrix& m);

double mean_of(std::span<const double> values);
// Population standard deviation (divides by n).
double stddev_of(std::span<const double> values);

struct PcaResult {
  // One unit-norm component per row, ordered by descending singular value.
  Matrix components;
  Vector singular_values;
  // Row i holds input row i (after centering) in component coordinates.
  Matrix projections;
  // Row mean subtracted before the decomposition.
  Vector mean;
};

struct SvdResult {
  Matrix u;       // rows x r, orthonormal columns (zero columns for null directions)
  Vector sigma;   // r, descending
  Matrix v;       // cols x r, orthonormal columns
};

// Thin SVD by one-sided Jacobi rotations, r = min(rows, cols).
SvdResult jacobi_svd(const Matrix& a);

// Top-n principal components of the row-mean-centered input.
PcaResult principal_components(const Matrix& x, Index n);

// 2 |sum_j v_j exp(2 pi i j k / p)|^2 / (p sum_j v_j^2), p = v.size().
double fourier_power_fraction(std::span<const double> v, int k);

struct LogisticFit {
  double w_x = 0.0;
  double w_y = 0.0;
  double bias = 0.0;
  bool converged = false;
  int iterations = 0;

  double decision(double x, double y) const { return w_x * x + w_y * y + bias; }
  int predict(double x, double y) const { return decision(x, y) > 0.0 ? 1 : 0; }
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr int kLogisticIterationCap = 10000;
inline constexpr double kLogisticGradientTolerance = 1e-6;

// Unregularized maximum-likelihood logistic regression on two features.
LogisticFit fit_logistic_2d(std::span<const Point2> points, std::span<const int> labels);

}  // namespace modlab
