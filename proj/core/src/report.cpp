// SPDX-License-Identifier: Apache-2.0
#include "ef/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "ef/errors.hpp"
#include "json.hpp"

namespace ef {
namespace {

bool needs_quotes(std::string_view field) {
  return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view field) {
  if (!needs_quotes(field)) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

std::uint64_t parse_seed(std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw DataError("report: invalid seed '" + std::string(text) + "'");
  }
  return v;
}

double parse_value(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
    throw DataError("report: invalid value '" + std::string(text) + "'");
  }
  return v;
}

// Splits RFC 4180 records; every record must end with LF.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        if (i < text.size() && text[i] != ',' && text[i] != '\n') {
          throw DataError("report: text after closing quote");
        }
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted) throw DataError("report: quote inside unquoted field");
      quoted = true;
      field_was_quoted = true;
      ++i;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
      ++i;
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
      records.push_back(std::move(fields));
      fields.clear();
      ++i;
    } else if (c == '\r') {
      throw DataError("report: carriage return outside quotes");
    } else {
      field += c;
      ++i;
    }
  }
  if (quoted) throw DataError("report: unterminated quoted field");
  if (!field.empty() || field_was_quoted || !fields.empty()) throw DataError("report: last record lacks a line feed");
  return records;
}

void require_finite_rows(std::span<const ReportRow> rows) {
  for (const auto& r : rows) {
    if (!std::isfinite(r.value)) {
      throw std::invalid_argument("report: non-finite value for " + r.cell + "/" + r.metric);
    }
  }
}

}  // namespace

std::string format_value(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 6);
  if (ec != std::errc()) throw std::runtime_error("format_value: conversion failed");
  return {buf.data(), ptr};
}

double round_value(double value) {
  if (!std::isfinite(value)) return value;
  const std::string text = format_value(value);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

ReportRow make_row(std::string experiment, std::uint64_t seed, std::string cell, std::string metric,
                   double value) {
  return {std::move(experiment), seed, std::move(cell), std::move(metric), round_value(value)};
}

ReportFormat parse_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ConfigError("unknown report format '" + std::string(name) + "' (expected csv or json)");
}

std::string to_csv(std::span<const ReportRow> rows) {
  require_finite_rows(rows);
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    append_field(out, r.experiment);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    append_field(out, r.cell);
    out += ',';
    append_field(out, r.metric);
    out += ',';
    out += format_value(r.value);
    out += '\n';
  }
  return out;
}

std::string to_json(std::span<const ReportRow> rows) {
  require_finite_rows(rows);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json obj;
    obj["experiment"] = r.experiment;
    obj["seed"] = r.seed;
    obj["cell"] = r.cell;
    obj["metric"] = r.metric;
    obj["value"] = round_value(r.value);
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

std::vector<ReportRow> parse_csv(std::string_view text) {
  const auto records = split_csv(text);
  if (records.empty()) throw DataError("report: missing header");
  const std::vector<std::string> header{"experiment", "seed", "cell", "metric", "value"};
  if (records.front() != header) throw DataError("report: unexpected header");
  std::vector<ReportRow> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != 5) throw DataError("report: record " + std::to_string(i) + " has " + std::to_string(f.size()) + " fields");
    rows.push_back({f[0], parse_seed(f[1]), f[2], f[3], parse_value(f[4])});
  }
  return rows;
}

std::vector<ReportRow> parse_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("report: JSON report must be an array");
  std::vector<ReportRow> rows;
  for (const auto& obj : doc) {
    try {
      if (!obj.is_object() || obj.size() != 5) throw DataError("report: malformed row object");
      if (!obj.at("seed").is_number_unsigned()) throw DataError("report: seed must be an unsigned integer");
      if (!obj.at("value").is_number()) throw DataError("report: value must be a number");
      rows.push_back({obj.at("experiment").get<std::string>(), obj.at("seed").get<std::uint64_t>(),
                      obj.at("cell").get<std::string>(), obj.at("metric").get<std::string>(),
                      obj.at("value").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("report: ") + e.what());
    }
  }
  return rows;
}

void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path) {
  if (report.rows.empty()) throw std::invalid_argument("emit_report: report has no rows");
  const std::string text = format == ReportFormat::csv ? to_csv(report.rows) : to_json(report.rows);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw std::runtime_error("failed writing report " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot move report into place at " + path.string());
  }
}

std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') return parse_json(text);
  return parse_csv(text);
}

std::vector<SummaryRow> summarize(std::span<const ReportRow> rows) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::size_t> index;
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    Key key{r.experiment, r.cell, r.metric};
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) {
      out.push_back({r.experiment, r.cell, r.metric, 0, 0.0, 0.0});
      values.emplace_back();
    }
    values[it->second].push_back(r.value);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    out[i].count = v.size();
    out[i].mean = mean;
    out[i].stddev = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
  }
  return out;
}

std::string summary_to_csv(std::span<const SummaryRow> rows) {
  std::string out = "experiment,cell,metric,count,mean,std\n";
  for (const auto& r : rows) {
    append_field(out, r.experiment);
    out += ',';
    append_field(out, r.cell);
    out += ',';
    append_field(out, r.metric);
    out += ',' + std::to_string(r.count) + ',' + format_value(r.mean) + ',' + format_value(r.stddev) + '\n';
  }
  return out;
}

}  // namespace ef
