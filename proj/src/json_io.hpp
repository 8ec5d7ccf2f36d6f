#pragma once

// nlohmann conversions shared by the record, sweep and C API sources.

#include "modlab/record.hpp"

#include <json.hpp>

#include <optional>

namespace modlab::json_io {

using nlohmann::json;

json number(double v);
double number_of(const json& j);
json optional_number(const std::optional<double>& v);
std::optional<double> optional_number_of(const json& j);

json matrix(const Matrix& m);
Matrix matrix_of(const json& j);

json config(const RunConfig& c);
// Starts from `base` so partial documents keep defaults.
RunConfig config_of(const json& j, RunConfig base = {});

json metrics(const MetricReport& r);
MetricReport metrics_of(const json& j);

json circle(const CircleReport& r);
CircleReport circle_of(const json& j);

json classification(const Classification& c);
Classification classification_of(const json& j);

json record(const RunRecord& r);
RunRecord record_of(const json& j);

// Parse text, mapping parse failures to Error(data).
json parse(std::string_view text, const char* what);

}  // namespace modlab::json_io
