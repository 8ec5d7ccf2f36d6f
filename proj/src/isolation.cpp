#include "modlab/isolation.hpp"

#include "modlab/error.hpp"
#include "modlab/oracles.hpp"
#include "modlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <string>

namespace modlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<int> targets_all_pairs(int p) {
  std::vector<int> t;
  t.reserve(static_cast<std::size_t>(p) * p);
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) t.push_back((a + b) % p);
  }
  return t;
}

std::optional<double> fve_against(const Matrix& logits, const std::vector<double>& formula) {
  return fve(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())), formula);
}

double mean_cross_entropy(const Matrix& logits, std::span<const int> targets) {
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, targets[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(logits.rows());
}

void require_linear(const ModelParams& model, std::initializer_list<Family> allowed, const char* what) {
  if (std::find(allowed.begin(), allowed.end(), model.arch.family) == allowed.end()) {
    fail_usage(std::string(what) + ": unsupported family " + std::string(to_string(model.arch.family)));
  }
}

}  // namespace

ModelParams isolate_components(const ModelParams& model, std::span<const int> components, bool keep_mean) {
  const int p = model.arch.p;
  const Matrix emb = model.number_embeddings();
  const Index available = std::min(emb.rows(), emb.cols());
  int highest = -1;
  for (int c : components) {
    if (c < 0 || c >= available) {
      fail_usage("isolate: component " + std::to_string(c) + " outside [0, " + std::to_string(available) + ")");
    }
    highest = std::max(highest, c);
  }
  const PcaResult pca = principal_components(emb, highest + 1);
  Matrix rebuilt = Matrix::Zero(p, emb.cols());
  for (int c : components) rebuilt += pca.projections.col(c) * pca.components.row(c);
  if (keep_mean) rebuilt.rowwise() += pca.mean.transpose();
  ModelParams out = model;
  out.at(model.embedding_name()).topRows(p) = rebuilt;
  return out;
}

ModelParams isolate_circle(const ModelParams& model, std::pair<int, int> pc_pair, bool keep_mean) {
  const int c[] = {pc_pair.first, pc_pair.second};
  return isolate_components(model, c, keep_mean);
}

double accuracy_all_pairs(const ModelParams& model) {
  const int p = model.arch.p;
  return accuracy_of(logits_for(model, all_pairs(p)), targets_all_pairs(p));
}

FrequencyEstimate estimate_k(const Matrix& points) {
  if (points.cols() != 2) fail_usage("estimate_k: points must be p x 2");
  const auto p = static_cast<int>(points.rows());
  if (p < 3) fail_usage("estimate_k: need at least three points");
  if (!all_finite(points)) fail_numeric("estimate_k: non-finite points");
  const Eigen::RowVector2d centre = points.colwise().mean();
  std::vector<double> theta(static_cast<std::size_t>(p));
  for (int t = 0; t < p; ++t) {
    theta[static_cast<std::size_t>(t)] = std::atan2(points(t, 1) - centre(1), points(t, 0) - centre(0));
  }
  FrequencyEstimate best;
  double best_r = -1.0;
  for (int k = 1; k < p; ++k) {
    std::complex<double> z = 0.0;
    for (int t = 0; t < p; ++t) {
      const double step = kTwoPi * static_cast<double>((static_cast<long>(k) * t) % p) / p;
      z += std::polar(1.0, theta[static_cast<std::size_t>(t)] - step);
    }
    const double r = std::abs(z) / p;
    if (r > best_r + 1e-12) {
      best_r = r;
      best.k = k;
    }
  }
  best.k_mirror = p - best.k;
  best.misfit = std::max(0.0, 1.0 - best_r);
  best.circular = best.misfit <= kCircleMisfitThreshold;
  return best;
}

int modular_inverse(int k, int p) {
  long r0 = p, r1 = ((k % p) + p) % p, t0 = 0, t1 = 1;
  while (r1 != 0) {
    const long q = r0 / r1;
    std::tie(r0, r1) = std::pair{r1, r0 - q * r1};
    std::tie(t0, t1) = std::pair{t1, t0 - q * t1};
  }
  if (r0 != 1) fail_usage("modular_inverse: " + std::to_string(k) + " has no inverse mod " + std::to_string(p));
  return static_cast<int>(((t0 % p) + p) % p);
}

int circle_gap(int k, int p) {
  const int g = modular_inverse(k, p);
  return std::min(g, p - g);
}

std::vector<CircleReport> isolation_report(const ModelParams& model, const IsolationOptions& options) {
  const int p = model.arch.p;
  if (options.n_pairs < 1) fail_usage("isolation_report: n_pairs must be positive");
  const Matrix emb = model.number_embeddings();
  const int needed = 2 * options.n_pairs;
  if (needed > std::min(emb.rows(), emb.cols())) {
    fail_usage("isolation_report: " + std::to_string(options.n_pairs) + " pairs exceed the embedding rank bound");
  }
  const PcaResult pca = principal_components(emb, needed);

  std::vector<CircleReport> out;
  for (int i = 0; i < options.n_pairs; ++i) {
    CircleReport r;
    r.pc_pair = {2 * i, 2 * i + 1};
    Matrix pts(p, 2);
    pts.col(0) = pca.projections.col(2 * i);
    pts.col(1) = pca.projections.col(2 * i + 1);
    const FrequencyEstimate est = estimate_k(pts);
    r.k = est.k;
    r.k_mirror = est.k_mirror;
    r.misfit = est.misfit;
    r.circular = est.circular;
    r.w_k = CircleSpec{p, est.k}.w();
    r.gap = circle_gap(est.k, p);

    const ModelParams iso = isolate_circle(model, r.pc_pair, options.keep_mean);
    const Matrix logits = logits_for(iso, all_pairs(p));
    r.isolated_accuracy = accuracy_of(logits, targets_all_pairs(p));
    if (r.circular && options.compute_fve) {
      const CircleSpec own{p, est.k};
      r.fve_clock = fve_against(logits, clock_logit_tensor(own));
      r.fve_pizza = fve_against(logits, pizza_logit_tensor(own));
      // As an accompanying circle this one runs at twice the frequency of
      // the circle it serves.
      const CircleSpec served{p, static_cast<int>((static_cast<long>(est.k) * modular_inverse(2, p)) % p)};
      r.fve_accompanying = fve_against(logits, accompanying_logit_tensor(served));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::pair<int, int>> detect_accompanying(std::vector<CircleReport>& reports, int p) {
  std::vector<std::pair<int, int>> pairs;
  std::vector<bool> used(reports.size(), false);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i].circular || used[i]) continue;
    for (std::size_t j = 0; j < reports.size(); ++j) {
      if (i == j || used[j] || !reports[j].circular) continue;
      const long gi = reports[i].gap, gj = reports[j].gap;
      if ((gi - 2 * gj) % p == 0 || (gi + 2 * gj) % p == 0) {
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        used[i] = used[j] = true;
        reports[j].is_accompanying = true;
        reports[j].partner = static_cast<int>(i);
        reports[i].partner = static_cast<int>(j);
        break;
      }
    }
  }
  return pairs;
}

IsolationSummary isolation_summary(const ModelParams& model, const IsolationOptions& options) {
  IsolationSummary s;
  s.circles = isolation_report(model, options);
  s.accompanying_pairs = detect_accompanying(s.circles, model.arch.p);
  std::vector<int> leading(static_cast<std::size_t>(2 * options.n_pairs));
  std::iota(leading.begin(), leading.end(), 0);
  s.leading_accuracy = accuracy_all_pairs(isolate_components(model, leading, options.keep_mean));
  if (!s.accompanying_pairs.empty()) {
    std::vector<int> accompanied, accompanying;
    for (const auto& [i, j] : s.accompanying_pairs) {
      for (int c : {s.circles[i].pc_pair.first, s.circles[i].pc_pair.second}) accompanied.push_back(c);
      for (int c : {s.circles[j].pc_pair.first, s.circles[j].pc_pair.second}) accompanying.push_back(c);
    }
    s.accompanied_accuracy = accuracy_all_pairs(isolate_components(model, accompanied, options.keep_mean));
    s.accompanying_accuracy = accuracy_all_pairs(isolate_components(model, accompanying, options.keep_mean));
  }
  return s;
}

ReluRemoval relu_removal_check(const ModelParams& model) {
  require_linear(model, {Family::linear_beta, Family::linear_gamma}, "relu_removal_check");
  const int p = model.arch.p;
  const auto pairs = all_pairs(p);
  const auto targets = targets_all_pairs(p);
  GraphOptions dropped;
  dropped.drop_outer_relu = true;
  const Matrix before = logits_for(model, pairs);
  const Matrix after = logits_for(model, pairs, dropped);
  ReluRemoval r;
  r.accuracy_before = accuracy_of(before, targets);
  r.accuracy_after = accuracy_of(after, targets);
  r.accuracy_delta = r.accuracy_after - r.accuracy_before;
  r.loss_before = mean_cross_entropy(before, targets);
  r.loss_after = mean_cross_entropy(after, targets);
  return r;
}

double domino_score(const Matrix& aligned) {
  const Index pairs = aligned.rows() / 2;
  if (pairs < 1) fail_usage("domino_score: need at least one principal pair");
  const double scale = aligned.cwiseAbs2().colwise().sum().maxCoeff();
  double total = 0.0;
  int live = 0;
  for (Index h = 0; h < aligned.cols(); ++h) {
    const double power = aligned.col(h).squaredNorm();
    if (!(power > 1e-12 * scale)) continue;
    double best = 0.0;
    for (Index q = 0; q < pairs; ++q) best = std::max(best, aligned.col(h).segment(2 * q, 2).squaredNorm());
    total += best / power;
    ++live;
  }
  if (live == 0) fail_numeric("domino_score: every hidden unit is dead");
  return total / live;
}

AlignedWeights align_weights(const ModelParams& model, int n_pcs) {
  require_linear(model, {Family::linear_alpha, Family::linear_beta, Family::linear_gamma}, "align_weights");
  if (n_pcs < 2 || n_pcs % 2 != 0) fail_usage("align_weights: n_pcs must be a positive even count");
  const int p = model.arch.p;
  const Matrix emb = model.number_embeddings();
  const Matrix& w1 = model.at("L1.W");
  const bool two_layer = model.has("L2.W");
  const Matrix w2 = two_layer ? model.at("L2.W") : Matrix(Matrix::Identity(w1.cols(), w1.cols()));
  const Matrix& wu = model.at("W_U");
  if (n_pcs > std::min<Index>(p, emb.cols()) || n_pcs > std::min<Index>(p, wu.rows())) {
    fail_usage("align_weights: " + std::to_string(n_pcs) + " components exceed the matrix rank bound");
  }
  const PcaResult pe = principal_components(emb, n_pcs);
  const PcaResult pu = principal_components(wu.transpose(), n_pcs);
  if (!(pe.singular_values(n_pcs - 1) > 0.0) || !(pu.singular_values(n_pcs - 1) > 0.0)) {
    fail_numeric("align_weights: degenerate principal components");
  }
  AlignedWeights out;
  out.embedding_components = pe.components;
  out.unembedding_components = pu.components;
  out.w1 = pe.components * w1;
  out.w2 = w2 * pu.components.transpose();
  out.domino_score = domino_score(out.w1);
  out.domino_score_w2 = domino_score(out.w2.transpose());
  return out;
}

CircleResponse circle_response(const ModelParams& model, std::pair<int, int> embedding_pair, int unembedding_component) {
  const int highest = std::max({embedding_pair.first, embedding_pair.second, unembedding_component});
  const int n = highest + 1 + (highest % 2 == 0 ? 1 : 0);
  const AlignedWeights aligned = align_weights(model, n);
  CircleResponse r;
  r.slice.resize(2, aligned.w1.cols());
  r.slice.row(0) = aligned.w1.row(embedding_pair.first);
  r.slice.row(1) = aligned.w1.row(embedding_pair.second);
  r.bias = model.at("L1.b").row(0).transpose();
  r.out = aligned.w2.col(unembedding_component);
  return r;
}

UnitCircleFit fit_unit_circle_response(const Matrix& slice, const Vector& bias, const Vector& out, int grid) {
  if (slice.rows() != 2 || slice.cols() != bias.size() || slice.cols() != out.size()) {
    fail_usage("fit_unit_circle_response: slice must be 2 x h with matching bias and output");
  }
  if (grid < 16) fail_usage("fit_unit_circle_response: grid too small");
  Vector f(grid);
  for (int i = 0; i < grid; ++i) {
    const double t = kTwoPi * i / grid;
    const Vector pre = (std::cos(t) * slice.row(0) + std::sin(t) * slice.row(1)).transpose() + bias;
    f(i) = out.dot(pre.cwiseMax(0.0));
  }
  const double mean = f.mean();
  const double variance = (f.array() - mean).square().mean();
  if (!(variance > 1e-24)) fail_numeric("fit_unit_circle_response: constant response");

  // On a uniform grid the harmonics are orthogonal, so each fit is a
  // projection.
  auto harmonic = [&](int m) {
    double c = 0.0, s = 0.0;
    for (int i = 0; i < grid; ++i) {
      const double t = kTwoPi * i / grid;
      c += (f(i) - mean) * std::cos(m * t);
      s += (f(i) - mean) * std::sin(m * t);
    }
    return std::pair{2.0 * c / grid, 2.0 * s / grid};
  };
  UnitCircleFit fit;
  fit.offset = mean;
  double best_power = -1.0;
  for (int m = 1; m <= 4; ++m) {
    const auto [c, s] = harmonic(m);
    const double power = c * c + s * s;
    if (power > best_power) {
      best_power = power;
      fit.best_frequency = m;
    }
    if (m == 2) {
      // c cos 2t + s sin 2t = A cos(2t + phi) with A cos phi = c, A sin phi = -s.
      fit.amplitude = std::hypot(c, s);
      fit.phase = std::atan2(-s, c);
      fit.residual_fraction = std::max(0.0, 1.0 - 0.5 * power / variance);
    }
  }
  return fit;
}

}  // namespace modlab
