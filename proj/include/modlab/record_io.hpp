#pragma once

#include "modlab/record.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace modlab {

// JSON text forms. Doubles are written in shortest round-trip form, so a
// parse of the output is bit-equal; NaN and infinities are written as the
// strings "nan", "inf", "-inf". Malformed input raises Error(data).
std::string to_json(const RunRecord& record, int indent = -1);
std::string to_json(const RunConfig& config, int indent = -1);
std::string to_json(const MetricReport& report, int indent = -1);

RunRecord record_from_json(std::string_view text);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(std::string_view text);
MetricReport metric_report_from_json(std::string_view text);

// Atomic write: the text goes to a sibling temporary file that is then
// renamed over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_file(const std::filesystem::path& path);

void save_record(const std::filesystem::path& path, const RunRecord& record);
RunRecord load_record(const std::filesystem::path& path);

}  // namespace modlab
