#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "covmod/ingest.hpp"

namespace covmod {

// Partition of the covariate axis into B bins. Bin indices are 0-based in the
// API; files and console output use 1-based numbering.
//
// With a zero sentinel, bin 0 holds exactly the records whose covariate equals
// the sentinel and bins 1..B-1 are the quantile bins. Quantile bin k covers
// the half-open interval (edges[k-1], edges[k]].
struct BinLayout {
  std::size_t bins = 1;
  std::vector<double> edges;
  std::optional<double> zero_sentinel;
  std::vector<std::size_t> assignment;  // per record, empty for loaded layouts
  std::vector<std::size_t> counts;
  std::vector<double> x_min;
  std::vector<double> x_max;

  std::size_t quantile_offset() const { return zero_sentinel ? 1 : 0; }
  double representative_x(std::size_t bin) const {
    return 0.5 * (x_min[bin] + x_max[bin]);
  }
};

inline constexpr std::size_t kDefaultMinBinSize = 50;

// Records equal to `zero_sentinel` go to bin 0; the rest are sorted by
// covariate (stable) and cut into equal-count groups, earlier groups taking
// the remainder. Tied covariates never straddle a cut: the whole tie block
// stays in the lower bin. Throws ConfigError when the request is infeasible.
BinLayout quantile_bins(const Dataset& ds, std::size_t bins,
                        std::optional<double> zero_sentinel = std::nullopt,
                        std::size_t min_bin_size = kDefaultMinBinSize);

// Bin for a new covariate against a frozen layout. Throws InputError for
// non-finite x.
std::size_t assign_bin(double x, const BinLayout& layout);

// Per-bin p-values, input order preserved within each bin.
std::vector<std::vector<double>> split_by_bin(const Dataset& ds,
                                              const BinLayout& layout);

// FNV-1a over a canonical rendering of B, sentinel, edges and counts.
std::uint64_t layout_hash(const BinLayout& layout);
std::string layout_hash_hex(const BinLayout& layout);

}  // namespace covmod
