#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "covmod/binning.hpp"
#include "covmod/posterior.hpp"
#include "covmod/smoothing_fit.hpp"

namespace covmod {

inline constexpr const char* kFitFormat = "covmod-fit/1";

nlohmann::json layout_to_json(const BinLayout& layout);
// Throws ConfigError when the stored hash does not match the stored layout.
BinLayout layout_from_json(const nlohmann::json& j);

nlohmann::json fit_to_json(const ModelFit& fit);
ModelFit fit_from_json(const nlohmann::json& j);

struct FitSettings {
  std::size_t bins = 20;
  double c = 1.0;
  std::optional<double> zero_bin;
  std::size_t min_bin_size = kDefaultMinBinSize;
  double storey_lambda = kDefaultStoreyLambda;
};

// Everything the fit subcommand produces: the binned fit, its one-bin
// companion, and the Storey baseline.
struct FitArtifact {
  FitSettings settings;
  std::size_t records = 0;
  ModelFit fit;
  OneBinSummary one_bin;
  StoreyEstimate storey;
};

std::string serialize_fit_artifact(const FitArtifact& artifact);
FitArtifact parse_fit_artifact(const std::string& text);
FitArtifact read_fit_artifact(const std::filesystem::path& path);

}  // namespace covmod
