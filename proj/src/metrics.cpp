#include "modlab/metrics.hpp"

#include "modlab/error.hpp"
#include "modlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace modlab {

namespace {

constexpr std::uint64_t kTripleStream = 3;
constexpr std::size_t kGradientChunk = 2048;

double population_std(const std::vector<double>& v) { return stddev_of(v); }

}  // namespace

CorrectLogitMatrix correct_logits(const ModelParams& model) {
  const int p = model.arch.p;
  const auto pairs = all_pairs(p);
  const Matrix logits = logits_for(model, pairs);
  CorrectLogitMatrix out{p, Matrix(p, p)};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [a, b] = pairs[i];
    out.values(a, b) = logits(static_cast<Index>(i), (a + b) % p);
  }
  return out;
}

Matrix reindex_a_minus_b(const CorrectLogitMatrix& l) {
  const int p = l.p;
  if (p % 2 == 0) fail_usage("reindex_a_minus_b: p must be odd");
  Matrix out(p, p);
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) out(((a - b) % p + p) % p, (a + b) % p) = l.values(a, b);
  }
  return out;
}

std::vector<Triple> exhaustive_triples(int p) {
  std::vector<Triple> out;
  out.reserve(static_cast<std::size_t>(p) * p * p);
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      for (int c = 0; c < p; ++c) out.push_back({a, b, c});
    }
  }
  return out;
}

std::vector<Triple> random_triples(int p, int n, std::uint64_t seed) {
  if (n < 1) fail_usage("random_triples: sample count must be positive");
  SeededRng rng(seed, kTripleStream);
  std::vector<Triple> out(static_cast<std::size_t>(n));
  const auto bound = static_cast<std::uint64_t>(p);
  for (auto& t : out) {
    t.a = static_cast<int>(rng.below(bound));
    t.b = static_cast<int>(rng.below(bound));
    t.c = static_cast<int>(rng.below(bound));
  }
  return out;
}

SymmetricityResult gradient_symmetricity(const ModelParams& model, std::span<const Triple> triples) {
  if (triples.empty()) fail_usage("gradient_symmetricity: empty sample set");
  SymmetricityResult out;
  double total = 0.0;
  for (std::size_t start = 0; start < triples.size(); start += kGradientChunk) {
    const auto chunk = triples.subspan(start, std::min(kGradientChunk, triples.size() - start));
    for (const auto& g : grad_logit_wrt_embeddings(model, chunk)) {
      const double na = g.wrt_a.norm(), nb = g.wrt_b.norm();
      if (na < kDegenerateGradientNorm || nb < kDegenerateGradientNorm) {
        ++out.skipped;
        continue;
      }
      total += g.wrt_a.dot(g.wrt_b) / (na * nb);
      ++out.samples;
    }
  }
  if (out.samples > 0) out.value = total / out.samples;
  return out;
}

std::optional<double> distance_irrelevance(const CorrectLogitMatrix& l) {
  const int p = l.p;
  if (l.values.rows() != p || l.values.cols() != p) fail_usage("distance_irrelevance: matrix is not p x p");
  if (!all_finite(l.values)) fail_numeric("distance_irrelevance: non-finite logits");
  const std::vector<double> all(l.values.data(), l.values.data() + l.values.size());
  const double overall = population_std(all);
  if (!(overall > 1e-9)) return std::nullopt;
  double sum = 0.0;
  std::vector<double> diag(static_cast<std::size_t>(p));
  for (int d = 0; d < p; ++d) {
    for (int i = 0; i < p; ++i) diag[static_cast<std::size_t>(i)] = l.values(i, (i + d) % p);
    sum += population_std(diag);
  }
  return sum / p / overall;
}

std::optional<double> circularity(const Matrix& embeddings, int p) {
  if (embeddings.rows() < p) fail_usage("circularity: fewer embedding rows than p");
  if (p < 5 || embeddings.cols() < 4) fail_usage("circularity: need at least four principal components");
  const Matrix rows = embeddings.topRows(p);
  const PcaResult pca = principal_components(rows, 4);
  const double scale = std::max(1.0, pca.singular_values(0));
  double sum = 0.0;
  for (Index l = 0; l < 4; ++l) {
    if (!(pca.singular_values(l) > 1e-12 * scale)) return std::nullopt;
    const Vector col = pca.projections.col(l);
    const std::span<const double> wave(col.data(), static_cast<std::size_t>(col.size()));
    double best = 0.0;
    for (int k = 1; k < p; ++k) best = std::max(best, fourier_power_fraction(wave, k));
    sum += best;
  }
  return sum / 4.0;
}

std::vector<ProjectedGradient> gradient_projection_figure(const ModelParams& model,
                                                          std::span<const Triple> samples) {
  const Matrix emb = model.number_embeddings();
  if (std::min(emb.rows(), emb.cols()) < 6) fail_usage("gradient_projection_figure: fewer than six components");
  const PcaResult pca = principal_components(emb, 6);
  const auto grads = grad_logit_wrt_embeddings(model, samples);
  std::vector<ProjectedGradient> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i].triple = samples[i];
    for (Index c = 0; c < 6; ++c) {
      out[i].wrt_a[static_cast<std::size_t>(c)] = pca.components.row(c).dot(grads[i].wrt_a);
      out[i].wrt_b[static_cast<std::size_t>(c)] = pca.components.row(c).dot(grads[i].wrt_b);
    }
  }
  return out;
}

std::string projection_csv(std::span<const ProjectedGradient> rows) {
  std::ostringstream os;
  os.precision(17);
  os << "a,b,c,component,grad_a,grad_b\n";
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < 6; ++c) {
      os << r.triple.a << ',' << r.triple.b << ',' << r.triple.c << ',' << c + 1 << ',' << r.wrt_a[c] << ','
         << r.wrt_b[c] << '\n';
    }
  }
  return os.str();
}

MetricReport compute_metrics(const ModelParams& model, double val_accuracy, const MetricOptions& options) {
  const int p = model.arch.p;
  MetricReport r;
  r.val_accuracy = val_accuracy;
  std::vector<Triple> triples;
  if (options.exhaustive) {
    triples = exhaustive_triples(p);
    r.sample_set = "exhaustive";
  } else {
    triples = random_triples(p, options.samples, options.seed);
    r.sample_set = "random:" + std::to_string(options.samples) + ":" + std::to_string(options.seed);
  }
  const SymmetricityResult s = gradient_symmetricity(model, triples);
  r.gradient_symmetricity = s.value;
  r.symmetricity_samples = s.samples;
  r.symmetricity_skipped = s.skipped;
  r.distance_irrelevance = distance_irrelevance(correct_logits(model));
  const Matrix emb = model.number_embeddings();
  if (emb.cols() >= 4 && p >= 5) r.circularity = circularity(emb, p);
  return r;
}

}  // namespace modlab
