#include <doctest.h>

#include "modlab/error.hpp"
#include "modlab/oracles.hpp"
#include "modlab/svg.hpp"

#include <cmath>
#include <numbers>
#include <regex>
#include <set>

using namespace modlab;

namespace {

std::vector<std::string> fills(const std::string& svg) {
  std::vector<std::string> out;
  const std::regex cell(R"re(<rect x="\d+" y="\d+" width="\d+" height="\d+" fill="(#[0-9a-f]{6})")re");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), cell); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1]);
  }
  return out;
}

CorrectLogitMatrix pizza_matrix(int p, int k) {
  CorrectLogitMatrix l{p, Matrix(p, p)};
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) l.values(a, b) = pizza_logit({p, k}, a, b, (a + b) % p);
  return l;
}

}  // namespace

TEST_CASE("Constant matrix renders a single colour") {
  const CorrectLogitMatrix l{9, Matrix::Constant(9, 9, 2.5)};
  const auto f = fills(render_heatmap(l, HeatmapLayout::raw));
  REQUIRE(f.size() == 81);
  CHECK(std::set<std::string>(f.begin(), f.end()) == std::set<std::string>{"#ffffff"});
}

TEST_CASE("Pizza matrix bands horizontally by difference") {
  const int p = 13;
  const auto f = fills(render_heatmap(pizza_matrix(p, 1), HeatmapLayout::a_minus_b));
  REQUIRE(f.size() == static_cast<std::size_t>(p * p));
  std::set<std::string> row_colours;
  for (int r = 0; r < p; ++r) {
    for (int c = 1; c < p; ++c) CHECK(f[static_cast<std::size_t>(r * p + c)] == f[static_cast<std::size_t>(r * p)]);
    row_colours.insert(f[static_cast<std::size_t>(r * p)]);
  }
  CHECK(row_colours.size() > 3);
  // The raw layout does not band by rows.
  const auto raw = fills(render_heatmap(pizza_matrix(p, 1), HeatmapLayout::raw));
  CHECK(raw[0] != raw[1]);
}

TEST_CASE("Heatmaps are byte-identical across calls") {
  const auto l = pizza_matrix(11, 2);
  CHECK(render_heatmap(l, HeatmapLayout::raw) == render_heatmap(l, HeatmapLayout::raw));
  CHECK(render_heatmap(l, HeatmapLayout::a_minus_b) == render_heatmap(l, HeatmapLayout::a_minus_b));
  CorrectLogitMatrix bad = l;
  bad.values(0, 0) = std::nan("");
  CHECK_THROWS_AS(render_heatmap(bad, HeatmapLayout::raw), Error);
}

TEST_CASE("Circle plot labels a ring") {
  const int p = 59, k = 17;
  Matrix pts(p, 2);
  std::vector<std::string> labels;
  for (int t = 0; t < p; ++t) {
    const double angle = 2.0 * std::numbers::pi * k * t / p;
    pts(t, 0) = std::cos(angle);
    pts(t, 1) = std::sin(angle);
    labels.push_back(std::to_string(t));
  }
  const std::string svg = render_circle(pts, labels);
  CHECK(svg == render_circle(pts, labels));
  const std::regex dot(R"re(<circle cx="([0-9.]+)" cy="([0-9.]+)")re");
  int count = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), dot); it != std::sregex_iterator(); ++it) {
    const double x = std::stod((*it)[1]) - 240.0, y = std::stod((*it)[2]) - 240.0;
    CHECK(std::hypot(x, y) == doctest::Approx(200.0).epsilon(1e-4));
    ++count;
  }
  CHECK(count == p);
  CHECK(svg.find(">58</text>") != std::string::npos);
}

TEST_CASE("Degenerate circle input collapses to one point") {
  const Matrix pts = Matrix::Zero(5, 2);
  const std::string svg = render_circle(pts, {"0", "1", "2", "3", "<4>"});
  CHECK(svg.find("&lt;4&gt;") != std::string::npos);
  const std::regex dot(R"re(<circle cx="([0-9.]+)" cy="([0-9.]+)")re");
  std::set<std::string> centres;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), dot); it != std::sregex_iterator(); ++it) {
    centres.insert((*it)[1].str() + "," + (*it)[2].str());
  }
  CHECK(centres.size() == 1);
  CHECK_THROWS_AS(render_circle(pts, {"x"}), Error);
}

TEST_CASE("Phase plot colours runs by label") {
  std::vector<RunRecord> records(3);
  records[0].config.attention_rate = 0.0;
  records[0].classification = Classification{Label::pizza, {}};
  records[0].metrics = MetricReport{0.99, 100, 0, 0.2, 0.999, 1.0, "random:100:0"};
  records[1].config.attention_rate = 1.0;
  records[1].classification = Classification{Label::clock, {}};
  records[1].metrics = MetricReport{0.3, 100, 0, 0.85, 0.999, 1.0, "random:100:0"};
  const std::string svg = render_phase(records);
  CHECK(svg == render_phase(records));
  CHECK(svg.find("#d62728") != std::string::npos);
  CHECK(svg.find("#1f77b4") != std::string::npos);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}
