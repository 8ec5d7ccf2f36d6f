#include "modlab/svg.hpp"

#include "modlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace modlab {

namespace {

// Locale-independent fixed formatting keeps the output byte-stable.
std::string fx(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string diverging(double t) {
  // t in [-1, 1]: -1 blue, 0 white, 1 red.
  t = std::clamp(t, -1.0, 1.0);
  int r = 255, g = 255, b = 255;
  if (t >= 0) {
    g = b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  } else {
    r = g = static_cast<int>(std::lround(255.0 * (1.0 + t)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

const char* label_colour(const RunRecord& r) {
  if (!r.classification) return "#9e9e9e";
  switch (r.classification->label) {
    case Label::pizza: return "#d62728";
    case Label::clock: return "#1f77b4";
    case Label::non_circular: return "#2ca02c";
    case Label::ambiguous: return "#7f7f7f";
  }
  return "#7f7f7f";
}

std::string header(int w, int h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string render_heatmap(const CorrectLogitMatrix& l, HeatmapLayout layout) {
  const Matrix m = layout == HeatmapLayout::a_minus_b ? reindex_a_minus_b(l) : l.values;
  if (!all_finite(m)) fail_numeric("render_heatmap: non-finite logits");
  const double mean = m.mean();
  const double spread = (m.array() - mean).abs().maxCoeff();
  const int n = static_cast<int>(m.rows());
  const int side = n * kHeatmapCell;
  std::ostringstream os;
  os << header(side + 2 * kHeatmapMargin, side + 2 * kHeatmapMargin);
  const bool reindexed = layout == HeatmapLayout::a_minus_b;
  os << "<text x=\"" << kHeatmapMargin << "\" y=\"" << kHeatmapMargin - 12 << "\" font-size=\"12\">"
     << (reindexed ? "rows a-b, columns a+b" : "rows a, columns b") << "</text>\n";
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double t = spread > 0 ? (m(r, c) - mean) / spread : 0.0;
      os << "<rect x=\"" << kHeatmapMargin + c * kHeatmapCell << "\" y=\"" << kHeatmapMargin + r * kHeatmapCell
         << "\" width=\"" << kHeatmapCell << "\" height=\"" << kHeatmapCell << "\" fill=\"" << diverging(t)
         << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_circle(const Matrix& points, const std::vector<std::string>& labels) {
  if (points.cols() != 2) fail_usage("render_circle: points must be n x 2");
  if (static_cast<Index>(labels.size()) != points.rows()) fail_usage("render_circle: one label per point");
  if (!all_finite(points)) fail_numeric("render_circle: non-finite points");
  constexpr int size = 480, margin = 40;
  const double extent = points.size() ? points.cwiseAbs().maxCoeff() : 0.0;
  const double scale = extent > 0 ? (size / 2.0 - margin) / extent : 0.0;
  std::ostringstream os;
  os << header(size, size);
  os << "<line x1=\"0\" y1=\"" << size / 2 << "\" x2=\"" << size << "\" y2=\"" << size / 2
     << "\" stroke=\"#dddddd\"/>\n<line x1=\"" << size / 2 << "\" y1=\"0\" x2=\"" << size / 2 << "\" y2=\"" << size
     << "\" stroke=\"#dddddd\"/>\n";
  for (Index i = 0; i < points.rows(); ++i) {
    const double x = size / 2.0 + scale * points(i, 0);
    const double y = size / 2.0 - scale * points(i, 1);
    os << "<circle cx=\"" << fx(x) << "\" cy=\"" << fx(y) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    os << "<text x=\"" << fx(x + 4) << "\" y=\"" << fx(y - 4) << "\" font-size=\"9\">"
       << escape(labels[static_cast<std::size_t>(i)]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_phase(const std::vector<RunRecord>& records) {
  constexpr int panel = 320, margin = 50, gap = 40;
  const int width = 2 * panel + 2 * margin + gap;
  const int height = panel + 2 * margin;
  std::ostringstream os;
  os << header(width, height);
  const char* titles[] = {"distance irrelevance", "gradient symmetricity"};
  for (int k = 0; k < 2; ++k) {
    const int x0 = margin + k * (panel + gap);
    os << "<rect x=\"" << x0 << "\" y=\"" << margin << "\" width=\"" << panel << "\" height=\"" << panel
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x0 << "\" y=\"" << margin - 10 << "\" font-size=\"12\">" << titles[k]
       << " vs attention rate</text>\n";
    os << "<text x=\"" << x0 << "\" y=\"" << margin + panel + 16 << "\" font-size=\"10\">0</text>\n";
    os << "<text x=\"" << x0 + panel - 6 << "\" y=\"" << margin + panel + 16 << "\" font-size=\"10\">1</text>\n";
    // Symmetricity lives in [-1, 1]; distance irrelevance in [0, 1].
    const double lo = k == 0 ? 0.0 : -1.0;
    for (const auto& r : records) {
      if (!r.metrics) continue;
      const auto& v = k == 0 ? r.metrics->distance_irrelevance : r.metrics->gradient_symmetricity;
      if (!v) continue;
      const double x = x0 + panel * std::clamp(r.config.attention_rate, 0.0, 1.0);
      const double y = margin + panel * (1.0 - (std::clamp(*v, lo, 1.0) - lo) / (1.0 - lo));
      os << "<circle cx=\"" << fx(x) << "\" cy=\"" << fx(y) << "\" r=\"4\" fill=\"" << label_colour(r)
         << "\" fill-opacity=\"0.8\"/>\n";
    }
  }
  const char* legend[][2] = {{"pizza", "#d62728"}, {"clock", "#1f77b4"}, {"non_circular", "#2ca02c"},
                             {"ambiguous", "#7f7f7f"}};
  for (int i = 0; i < 4; ++i) {
    const int x = margin + i * 110;
    os << "<circle cx=\"" << x << "\" cy=\"" << height - 14 << "\" r=\"4\" fill=\"" << legend[i][1] << "\"/>\n";
    os << "<text x=\"" << x + 8 << "\" y=\"" << height - 10 << "\" font-size=\"10\">" << legend[i][0]
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace modlab
