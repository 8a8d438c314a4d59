// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ef {

struct ReportRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string cell;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Shortest decimal form with 6 significant digits ("%.6g"-style, locale independent).
[[nodiscard]] std::string format_value(double value);
/// The double that format_value(value) parses back to.
[[nodiscard]] double round_value(double value);
/// Row whose value is already rounded, so emitting and parsing it is lossless.
[[nodiscard]] ReportRow make_row(std::string experiment, std::uint64_t seed, std::string cell,
                                 std::string metric, double value);

struct RunReport {
  std::vector<ReportRow> rows;
  std::string config_hash;
  double wall_seconds = 0.0;
};

enum class ReportFormat { csv, json };

/// "csv" or "json"; throws ConfigError otherwise.
[[nodiscard]] ReportFormat parse_format(std::string_view name);

inline constexpr std::string_view kCsvHeader = "experiment,seed,cell,metric,value";

[[nodiscard]] std::string to_csv(std::span<const ReportRow> rows);
[[nodiscard]] std::string to_json(std::span<const ReportRow> rows);
/// Strict RFC 4180 reader for the layout written by to_csv. Throws DataError.
[[nodiscard]] std::vector<ReportRow> parse_csv(std::string_view text);
/// Throws DataError.
[[nodiscard]] std::vector<ReportRow> parse_json(std::string_view text);

/// Writes through a temporary file in the target directory, then renames.
/// An empty report is rejected with std::invalid_argument and nothing is
/// created; an unwritable path raises std::runtime_error.
void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path);
/// Parses a report file written by emit_report, detecting the format from
/// the first non-blank character.
[[nodiscard]] std::vector<ReportRow> read_report(const std::filesystem::path& path);

struct SummaryRow {
  std::string experiment;
  std::string cell;
  std::string metric;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};

/// Groups rows by (experiment, cell, metric) across seeds, in first-seen order.
[[nodiscard]] std::vector<SummaryRow> summarize(std::span<const ReportRow> rows);
[[nodiscard]] std::string summary_to_csv(std::span<const SummaryRow> rows);

}  // namespace ef
