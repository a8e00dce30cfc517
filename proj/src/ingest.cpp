#include "covmod/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "covmod/errors.hpp"
#include "covmod/text_io.hpp"

namespace covmod {

NullDist parse_null_dist(std::string_view name) {
  if (name == "normal" || name == "standard_normal" || name == "N(0,1)")
    return NullDist::standard_normal;
  throw ConfigError("unsupported null distribution '" + std::string(name) + "'");
}

double z_to_p(double z, NullDist null_dist) {
  if (!std::isfinite(z)) throw InputError("z-score is not finite");
  switch (null_dist) {
    case NullDist::standard_normal:
      return 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  throw ConfigError("unsupported null distribution");
}

double clip_p(double p) { return std::clamp(p, kPClip, 1.0 - kPClip); }

Dataset::Dataset(std::vector<TestRecord> records) : records_(std::move(records)) {
  if (records_.empty()) throw InputError("dataset must contain at least one record");
  std::unordered_set<std::string> seen;
  seen.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!seen.insert(records_[i].id).second)
      throw InputError("duplicate id '" + records_[i].id + "' at row " +
                       std::to_string(i + 1));
  }
}

std::vector<double> Dataset::p_values() const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.p);
  return out;
}

std::vector<double> Dataset::covariates() const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.x);
  return out;
}

namespace {

std::string row_label(std::size_t row, std::size_t line) {
  return "row " + std::to_string(row) + " (line " + std::to_string(line) + ")";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::optional<std::size_t> find_column(const std::vector<std::string_view>& header,
                                       std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == name) return i;
  return std::nullopt;
}

}  // namespace

Dataset parse_dataset(std::istream& in, const ColumnSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  // Skip leading blank lines; the first non-blank line is the header.
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ParseError("input is empty (no header row)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
  const std::string header_line = line;
  const auto header = split_fields(header_line, delim);

  auto require = [&](const std::string& name) {
    auto idx = find_column(header, name);
    if (!idx) throw ParseError("header is missing required column '" + name + "'");
    return *idx;
  };
  const std::size_t id_col = require(schema.id);
  const std::size_t x_col = require(schema.x);

  std::optional<std::size_t> p_col;
  std::optional<std::size_t> z_col;
  if (schema.p) {
    p_col = require(*schema.p);
  } else if (schema.z) {
    z_col = require(*schema.z);
  } else {
    p_col = find_column(header, "p");
    if (!p_col) z_col = find_column(header, "z");
    if (!p_col && !z_col)
      throw ParseError("header must contain a 'p' or a 'z' column");
  }
  const std::size_t needed =
      std::max({id_col, x_col, p_col.value_or(0), z_col.value_or(0)}) + 1;

  std::vector<TestRecord> records;
  std::unordered_set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line, delim);
    if (fields.size() < needed)
      throw ParseError(row_label(row, line_no) + ": expected at least " +
                       std::to_string(needed) + " fields, found " +
                       std::to_string(fields.size()));

    TestRecord rec;
    rec.id = std::string(trim(fields[id_col]));
    if (rec.id.empty()) throw ParseError(row_label(row, line_no) + ": empty id");
    if (!seen.insert(rec.id).second)
      throw ParseError(row_label(row, line_no) + ": duplicate id '" + rec.id + "'");

    if (!parse_double(fields[x_col], rec.x) || !std::isfinite(rec.x))
      throw ParseError(row_label(row, line_no) + ": covariate '" +
                       std::string(trim(fields[x_col])) + "' is not a finite number");

    if (z_col) {
      double z = 0.0;
      if (!parse_double(fields[*z_col], z) || !std::isfinite(z))
        throw ParseError(row_label(row, line_no) + ": z-score '" +
                         std::string(trim(fields[*z_col])) +
                         "' is not a finite number");
      rec.z = z;
      rec.p = clip_p(z_to_p(z, schema.null_dist));
    } else {
      double p = 0.0;
      if (!parse_double(fields[*p_col], p))
        throw ParseError(row_label(row, line_no) + ": p-value '" +
                         std::string(trim(fields[*p_col])) + "' is not a number");
      if (!(p >= 0.0 && p <= 1.0))
        throw ParseError(row_label(row, line_no) + ": p-value " +
                         std::string(trim(fields[*p_col])) + " is outside [0, 1]");
      rec.p = clip_p(p);
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ParseError("input has a header but no data rows");
  return Dataset(std::move(records));
}

Dataset parse_dataset(std::string_view text, const ColumnSchema& schema) {
  std::istringstream in{std::string(text)};
  return parse_dataset(in, schema);
}

Dataset read_dataset(const std::filesystem::path& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open input file " + path.string());
  return parse_dataset(in, schema);
}

std::string serialize_dataset(const Dataset& ds) {
  const bool all_z = std::all_of(ds.begin(), ds.end(),
                                 [](const TestRecord& r) { return r.z.has_value(); });
  std::string out = all_z ? "id,x,z\n" : "id,x,p\n";
  for (const auto& r : ds) {
    out += r.id;
    out += ',';
    out += format_double(r.x);
    out += ',';
    out += format_double(all_z ? *r.z : r.p);
    out += '\n';
  }
  return out;
}

}  // namespace covmod
