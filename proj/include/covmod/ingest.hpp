#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace covmod {

// p-values are kept inside [kPClip, 1 - kPClip] so that p^(xi - 1) stays finite.
inline constexpr double kPClip = 1e-12;

enum class NullDist { standard_normal };

// Throws ConfigError for anything other than a supported distribution name.
NullDist parse_null_dist(std::string_view name);

// One-sided upper-tail p-value 1 - F0(z). Throws InputError for non-finite z.
double z_to_p(double z, NullDist null_dist = NullDist::standard_normal);

double clip_p(double p);

struct TestRecord {
  std::string id;
  double p = 0.5;
  double x = 0.0;
  std::optional<double> z;

  bool operator==(const TestRecord&) const = default;
};

// Ordered, immutable collection of test records with unique ids.
class Dataset {
 public:
  explicit Dataset(std::vector<TestRecord> records);

  std::size_t size() const { return records_.size(); }
  const TestRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<TestRecord>& records() const { return records_; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  std::vector<double> p_values() const;
  std::vector<double> covariates() const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<TestRecord> records_;
};

// Column names for parse_dataset. When neither `p` nor `z` is given the
// header is searched for "p" first and then "z".
struct ColumnSchema {
  std::string id = "id";
  std::string x = "x";
  std::optional<std::string> p;
  std::optional<std::string> z;
  NullDist null_dist = NullDist::standard_normal;
};

// Comma- or tab-separated text with a header row; the delimiter is taken from
// the header line. Throws ParseError naming the offending row.
Dataset parse_dataset(std::istream& in, const ColumnSchema& schema = {});
Dataset parse_dataset(std::string_view text, const ColumnSchema& schema = {});
Dataset read_dataset(const std::filesystem::path& path,
                     const ColumnSchema& schema = {});

// Writes `id,x,z` when every record carries z, else `id,x,p`.
std::string serialize_dataset(const Dataset& ds);

}  // namespace covmod
