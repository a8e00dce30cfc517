#include "covmod/binning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "covmod/errors.hpp"
#include "covmod/text_io.hpp"

namespace covmod {

BinLayout quantile_bins(const Dataset& ds, std::size_t bins,
                        std::optional<double> zero_sentinel,
                        std::size_t min_bin_size) {
  if (bins < 1) throw ConfigError("number of bins must be at least 1");
  min_bin_size = std::max<std::size_t>(min_bin_size, 1);
  if (zero_sentinel) {
    if (!std::isfinite(*zero_sentinel))
      throw ConfigError("zero-bin sentinel must be finite");
    if (bins < 2) throw ConfigError("a zero-bin sentinel requires at least 2 bins");
  }

  BinLayout layout;
  layout.bins = bins;
  layout.zero_sentinel = zero_sentinel;
  layout.assignment.assign(ds.size(), 0);
  layout.counts.assign(bins, 0);

  std::vector<std::size_t> order;
  order.reserve(ds.size());
  std::size_t sentinel_count = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (zero_sentinel && ds[i].x == *zero_sentinel)
      ++sentinel_count;
    else
      order.push_back(i);
  }
  if (zero_sentinel && sentinel_count == 0)
    throw ConfigError("zero-bin sentinel " + format_double(*zero_sentinel) +
                      " matches no record");

  const std::size_t groups = bins - layout.quantile_offset();
  const std::size_t n = order.size();
  if (n < groups * min_bin_size)
    throw ConfigError("cannot form " + std::to_string(groups) +
                      " quantile bins of at least " + std::to_string(min_bin_size) +
                      " records from " + std::to_string(n) + " records");

  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds[a].x < ds[b].x;
  });

  // cut[g] is the sorted position where group g starts.
  std::vector<std::size_t> cut(groups + 1, 0);
  cut[groups] = n;
  std::size_t target = 0;
  for (std::size_t g = 1; g < groups; ++g) {
    target += n / groups + ((g - 1) < n % groups ? 1 : 0);
    std::size_t c = std::max(target, cut[g - 1] + 1);
    while (c < n && ds[order[c - 1]].x == ds[order[c]].x) ++c;
    if (c >= n)
      throw ConfigError("tied covariate values leave quantile bin " +
                        std::to_string(g + 1 + layout.quantile_offset()) + " empty");
    cut[g] = c;
  }
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t size = cut[g + 1] - cut[g];
    if (size < min_bin_size)
      throw ConfigError("quantile bin " + std::to_string(g + 1 + layout.quantile_offset()) +
                        " has " + std::to_string(size) + " records after tie handling, below the minimum of " +
                        std::to_string(min_bin_size));
  }

  layout.edges.reserve(groups - 1);
  for (std::size_t g = 1; g < groups; ++g) {
    const double lo = ds[order[cut[g] - 1]].x;
    const double hi = ds[order[cut[g]]].x;
    double edge = lo + 0.5 * (hi - lo);
    if (!(edge < hi)) edge = lo;
    layout.edges.push_back(edge);
  }

  layout.x_min.assign(bins, 0.0);
  layout.x_max.assign(bins, 0.0);
  if (zero_sentinel) {
    layout.counts[0] = sentinel_count;
    layout.x_min[0] = layout.x_max[0] = *zero_sentinel;
  }
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t bin = g + layout.quantile_offset();
    layout.counts[bin] = cut[g + 1] - cut[g];
    layout.x_min[bin] = ds[order[cut[g]]].x;
    layout.x_max[bin] = ds[order[cut[g + 1] - 1]].x;
    for (std::size_t k = cut[g]; k < cut[g + 1]; ++k) layout.assignment[order[k]] = bin;
  }
  return layout;
}

std::size_t assign_bin(double x, const BinLayout& layout) {
  if (!std::isfinite(x)) throw InputError("covariate is not finite");
  if (layout.zero_sentinel && x == *layout.zero_sentinel) return 0;
  auto it = std::lower_bound(layout.edges.begin(), layout.edges.end(), x);
  return layout.quantile_offset() +
         static_cast<std::size_t>(it - layout.edges.begin());
}

std::vector<std::vector<double>> split_by_bin(const Dataset& ds,
                                              const BinLayout& layout) {
  if (layout.assignment.size() != ds.size())
    throw InputError("layout assignment does not match the dataset size");
  std::vector<std::vector<double>> out(layout.bins);
  for (std::size_t b = 0; b < layout.bins; ++b) out[b].reserve(layout.counts[b]);
  for (std::size_t i = 0; i < ds.size(); ++i) out[layout.assignment[i]].push_back(ds[i].p);
  return out;
}

std::uint64_t layout_hash(const BinLayout& layout) {
  std::string canon = "B=" + std::to_string(layout.bins) + ";sentinel=";
  canon += layout.zero_sentinel ? format_double(*layout.zero_sentinel) : "none";
  canon += ";edges=";
  for (double e : layout.edges) canon += format_double(e) + ",";
  canon += ";counts=";
  for (auto c : layout.counts) canon += std::to_string(c) + ",";

  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string layout_hash_hex(const BinLayout& layout) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(layout_hash(layout)));
  return buf;
}

}  // namespace covmod
