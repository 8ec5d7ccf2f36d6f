#pragma once

#include "modlab/metrics.hpp"
#include "modlab/record.hpp"

#include <string>
#include <vector>

namespace modlab {

enum class HeatmapLayout { raw, a_minus_b };

// Cell size and the diverging scale: blue below the matrix mean, white at
// it, red above, saturating at the largest deviation from the mean.
inline constexpr int kHeatmapCell = 8;
inline constexpr int kHeatmapMargin = 40;

// Byte-identical output for identical input.
std::string render_heatmap(const CorrectLogitMatrix& l, HeatmapLayout layout);

// p x 2 points, one label per point.
std::string render_circle(const Matrix& points, const std::vector<std::string>& labels);

// Two panels, (attention rate, distance irrelevance) and (attention rate,
// gradient symmetricity), points coloured by label.
std::string render_phase(const std::vector<RunRecord>& records);

}  // namespace modlab
