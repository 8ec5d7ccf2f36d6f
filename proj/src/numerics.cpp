#include "modlab/numerics.hpp"

#include "modlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace modlab {

bool all_finite(const Matrix& m) { return m.allFinite(); }

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double m = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

SvdResult jacobi_svd(const Matrix& a) {
  // Orthogonalize the columns of A*V by plane rotations. Working on the
  // transpose when cols > rows keeps the rotation count at r^2.
  const bool transposed = a.cols() > a.rows();
  Eigen::MatrixXd work = transposed ? Eigen::MatrixXd(a.transpose()) : Eigen::MatrixXd(a);
  const Index n = work.cols();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  constexpr int kMaxSweeps = 80;
  constexpr double kEps = 1e-15;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Index i = 0; i < n - 1; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double alpha = work.col(i).squaredNorm();
        const double beta = work.col(j).squaredNorm();
        const double gamma = work.col(i).dot(work.col(j));
        if (std::abs(gamma) <= kEps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index r = 0; r < work.rows(); ++r) {
          const double wi = work(r, i);
          const double wj = work(r, j);
          work(r, i) = c * wi - s * wj;
          work(r, j) = s * wi + c * wj;
        }
        for (Index r = 0; r < n; ++r) {
          const double vi = v(r, i);
          const double vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Vector norms(n);
  for (Index i = 0; i < n; ++i) norms(i) = work.col(i).norm();
  std::stable_sort(order.begin(), order.end(), [&](Index l, Index r) { return norms(l) > norms(r); });

  // work = U * Sigma, v = V for the (possibly transposed) input.
  Eigen::MatrixXd left(work.rows(), n);
  Eigen::MatrixXd right(n, n);
  Vector sigma(n);
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    sigma(k) = norms(src);
    left.col(k) = sigma(k) > 0.0 ? Eigen::VectorXd(work.col(src) / sigma(k))
                                 : Eigen::VectorXd::Zero(work.rows());
    right.col(k) = v.col(src);
  }

  SvdResult out;
  out.sigma = sigma;
  if (transposed) {
    out.u = right;
    out.v = left;
  } else {
    out.u = left;
    out.v = right;
  }
  return out;
}

PcaResult principal_components(const Matrix& x, Index n) {
  if (n < 0 || n > std::min(x.rows(), x.cols())) {
    fail_usage("principal_components: requested " + std::to_string(n) + " components from a " +
               std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " matrix");
  }
  if (!x.allFinite()) fail_numeric("principal_components: non-finite input");

  PcaResult out;
  out.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - out.mean.transpose();
  const SvdResult svd = jacobi_svd(centered);

  out.components.resize(n, x.cols());
  out.singular_values = svd.sigma.head(n);
  for (Index k = 0; k < n; ++k) {
    Vector dir = svd.v.col(k);
    // Right singular vectors for zero singular values may be zero when the
    // input was transposed; complete them to an orthonormal set.
    if (dir.squaredNorm() < 0.5) {
      dir = Vector::Zero(x.cols());
      for (Index e = 0; e < x.cols() && dir.squaredNorm() < 0.5; ++e) {
        Vector cand = Vector::Unit(x.cols(), e);
        for (Index prev = 0; prev < k; ++prev) {
          cand -= cand.dot(out.components.row(prev).transpose()) * out.components.row(prev).transpose();
        }
        if (cand.norm() > 1e-6) dir = cand.normalized();
      }
    }
    // Deterministic sign: largest-magnitude entry positive.
    Index arg = 0;
    dir.cwiseAbs().maxCoeff(&arg);
    if (dir(arg) < 0.0) dir = -dir;
    out.components.row(k) = dir.transpose();
  }
  out.projections = centered * out.components.transpose();
  return out;
}

double fourier_power_fraction(std::span<const double> v, int k) {
  const auto p = static_cast<int>(v.size());
  if (k < 1 || k > p - 1) {
    fail_usage("fourier_power_fraction: frequency " + std::to_string(k) + " outside [1, " +
               std::to_string(p - 1) + "]");
  }
  double energy = 0.0;
  for (double x : v) energy += x * x;
  if (!(energy > 0.0)) fail_numeric("fourier_power_fraction: zero vector");

  double re = 0.0;
  double im = 0.0;
  for (int j = 0; j < p; ++j) {
    // Reduce jk mod p before scaling so the phase stays exact for large j*k.
    const double phase = 2.0 * std::numbers::pi * static_cast<double>((static_cast<long long>(j) * k) % p) / p;
    re += v[static_cast<std::size_t>(j)] * std::cos(phase);
    im += v[static_cast<std::size_t>(j)] * std::sin(phase);
  }
  return 2.0 * (re * re + im * im) / (static_cast<double>(p) * energy);
}

LogisticFit fit_logistic_2d(std::span<const Point2> points, std::span<const int> labels) {
  if (points.size() != labels.size()) fail_usage("fit_logistic_2d: points and labels differ in length");
  const auto n = static_cast<double>(points.size());
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (points.empty() || positives == 0 || positives == static_cast<long>(points.size())) {
    // No finite maximizer; weights would diverge.
    LogisticFit flagged;
    flagged.converged = false;
    if (!points.empty()) flagged.bias = positives == 0 ? -1.0 : 1.0;
    return flagged;
  }

  // Fit in standardized coordinates, then map back; the fitted boundary is
  // therefore equivariant under affine rescaling of either feature.
  double mx = 0.0, my = 0.0;
  for (const auto& q : points) {
    mx += q.x;
    my += q.y;
  }
  mx /= n;
  my /= n;
  double sx = 0.0, sy = 0.0;
  for (const auto& q : points) {
    sx += (q.x - mx) * (q.x - mx);
    sy += (q.y - my) * (q.y - my);
  }
  sx = std::sqrt(sx / n);
  sy = std::sqrt(sy / n);
  const bool use_x = sx > 0.0;
  const bool use_y = sy > 0.0;
  if (!use_x && !use_y) {
    LogisticFit flagged;
    flagged.converged = false;
    return flagged;
  }

  std::vector<Eigen::Vector3d> features;
  features.reserve(points.size());
  for (const auto& q : points) {
    features.emplace_back(use_x ? (q.x - mx) / sx : 0.0, use_y ? (q.y - my) / sy : 0.0, 1.0);
  }
  // Gradient of the mean log-likelihood is Lipschitz with constant
  // lambda_max(X^T X / n) / 4; a step of 1/L ascends monotonically.
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  for (const auto& f : features) gram += f * f.transpose();
  gram /= n;
  const double lipschitz = 0.25 * Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(gram).eigenvalues().maxCoeff();
  const double step = 1.0 / lipschitz;

  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  LogisticFit fit;
  for (int it = 1; it <= kLogisticIterationCap; ++it) {
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double z = w.dot(features[i]);
      const double prob = 1.0 / (1.0 + std::exp(-z));
      grad += (static_cast<double>(labels[i]) - prob) * features[i];
    }
    grad /= n;
    fit.iterations = it;
    if (grad.norm() < kLogisticGradientTolerance) {
      fit.converged = true;
      break;
    }
    w += step * grad;
  }

  fit.w_x = use_x ? w(0) / sx : 0.0;
  fit.w_y = use_y ? w(1) / sy : 0.0;
  fit.bias = w(2) - fit.w_x * mx - fit.w_y * my;
  return fit;
}

}  // namespace modlab
