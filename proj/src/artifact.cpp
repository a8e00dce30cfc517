#include "covmod/artifact.hpp"

#include <cmath>

#include "covmod/errors.hpp"
#include "covmod/text_io.hpp"

namespace covmod {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json matrix3_to_json(const Eigen::Matrix3d& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) out.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return out;
}

Eigen::Matrix3d matrix3_from_json(const json& j) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

json interval(double mean, double sd, double (*map)(double)) {
  return {map(mean - kZ95 * sd), map(mean + kZ95 * sd)};
}

double theta_map(double t) { return 2.0 + std::exp(t); }

}  // namespace

json layout_to_json(const BinLayout& layout) {
  json j;
  j["bins"] = layout.bins;
  j["zero_sentinel"] = layout.zero_sentinel ? json(*layout.zero_sentinel) : json(nullptr);
  j["edges"] = layout.edges;
  j["counts"] = layout.counts;
  j["x_min"] = layout.x_min;
  j["x_max"] = layout.x_max;
  j["hash"] = layout_hash_hex(layout);
  return j;
}

BinLayout layout_from_json(const json& j) {
  BinLayout layout;
  layout.bins = j.at("bins").get<std::size_t>();
  if (!j.at("zero_sentinel").is_null()) layout.zero_sentinel = j.at("zero_sentinel").get<double>();
  layout.edges = j.at("edges").get<std::vector<double>>();
  layout.counts = j.at("counts").get<std::vector<std::size_t>>();
  layout.x_min = j.at("x_min").get<std::vector<double>>();
  layout.x_max = j.at("x_max").get<std::vector<double>>();
  if (layout.counts.size() != layout.bins || layout.x_min.size() != layout.bins ||
      layout.x_max.size() != layout.bins ||
      layout.edges.size() + 1 + layout.quantile_offset() != layout.bins)
    throw ParseError("fit artifact layout is inconsistent with its bin count");
  if (j.at("hash").get<std::string>() != layout_hash_hex(layout))
    throw ConfigError("fit artifact layout hash does not match its layout");
  return layout;
}

json fit_to_json(const ModelFit& fit) {
  json j;
  j["layout"] = layout_to_json(fit.layout);
  j["smoothing"] = {{"c", fit.lambdas.c},
                    {"lambda", {fit.lambdas.lambda[0], fit.lambdas.lambda[1], fit.lambdas.lambda[2]}}};
  j["ridge"] = fit.ridge;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["log_posterior"] = fit.log_post_at_mode;
  j["gradient_inf_norm"] = fit.gradient_norm;
  j["mode"] = vector_to_json(fit.mode);
  j["initial"] = vector_to_json(fit.initial);
  j["precision"] = {{"bandwidth", fit.precision.bandwidth()},
                    {"size", fit.precision.size()},
                    {"lower_band", fit.precision.band_data()}};
  json bins = json::array();
  for (std::size_t b = 0; b < fit.num_bins(); ++b) {
    const BinParams nat = fit.natural(b);
    const Marginal mp = marginal(fit, b, ParamKind::pi0);
    const Marginal mx = marginal(fit, b, ParamKind::xi);
    const Marginal mt = marginal(fit, b, ParamKind::theta);
    bins.push_back({{"bin", b + 1},
                    {"initial_converged", static_cast<bool>(fit.initial_converged[b])},
                    {"transformed", {mp.mean, mx.mean, mt.mean}},
                    {"transformed_sd", {mp.sd, mx.sd, mt.sd}},
                    {"natural", {{"pi0", nat.pi0}, {"xi", nat.xi}, {"theta", nat.theta}}},
                    {"natural_ci95",
                     {{"pi0", interval(mp.mean, mp.sd, logistic)},
                      {"xi", interval(mx.mean, mx.sd, logistic)},
                      {"theta", interval(mt.mean, mt.sd, theta_map)}}},
                    {"covariance", matrix3_to_json(fit.covariance_blocks[b])}});
  }
  j["per_bin"] = std::move(bins);
  return j;
}

ModelFit fit_from_json(const json& j) {
  ModelFit fit;
  fit.layout = layout_from_json(j.at("layout"));
  fit.lambdas.c = j.at("smoothing").at("c").get<double>();
  for (int k = 0; k < 3; ++k) fit.lambdas.lambda[k] = j.at("smoothing").at("lambda").at(k).get<double>();
  fit.ridge = j.at("ridge").get<double>();
  fit.converged = j.at("converged").get<bool>();
  fit.iterations = j.at("iterations").get<int>();
  fit.log_post_at_mode = j.at("log_posterior").get<double>();
  fit.gradient_norm = j.at("gradient_inf_norm").get<double>();
  fit.mode = vector_from_json(j.at("mode"));
  fit.initial = vector_from_json(j.at("initial"));
  if (static_cast<std::size_t>(fit.mode.size()) != 3 * fit.layout.bins)
    throw ParseError("fit artifact mode length does not match 3 x bins");
  const auto& prec = j.at("precision");
  fit.precision = BandedSymmetricMatrix(prec.at("size").get<std::size_t>(),
                                        prec.at("bandwidth").get<std::size_t>());
  fit.precision.band_data() = prec.at("lower_band").get<std::vector<double>>();
  for (const auto& b : j.at("per_bin")) {
    fit.covariance_blocks.push_back(matrix3_from_json(b.at("covariance")));
    fit.initial_converged.push_back(b.at("initial_converged").get<bool>());
  }
  if (fit.covariance_blocks.size() != fit.layout.bins)
    throw ParseError("fit artifact has " + std::to_string(fit.covariance_blocks.size()) +
                     " per-bin entries for " + std::to_string(fit.layout.bins) + " bins");
  return fit;
}

std::string serialize_fit_artifact(const FitArtifact& a) {
  json j;
  j["format"] = kFitFormat;
  j["settings"] = {{"bins", a.settings.bins},
                   {"smoothing_scale", a.settings.c},
                   {"zero_bin", a.settings.zero_bin ? json(*a.settings.zero_bin) : json(nullptr)},
                   {"min_bin_size", a.settings.min_bin_size},
                   {"storey_lambda", a.settings.storey_lambda}};
  j["records"] = a.records;
  j["fit"] = fit_to_json(a.fit);
  j["one_bin"] = {{"pi0_hat", a.one_bin.pi0_hat},
                  {"pi0_ci95", {a.one_bin.pi0_lo, a.one_bin.pi0_hi}},
                  {"fit", fit_to_json(a.one_bin.fit)}};
  j["storey"] = {{"pi0", a.storey.pi0}, {"degenerate", a.storey.degenerate}};
  return j.dump(2) + "\n";
}

FitArtifact parse_fit_artifact(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("fit artifact is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFitFormat)
      throw ParseError("unsupported fit artifact format '" + j.at("format").get<std::string>() + "'");
    FitArtifact a;
    const auto& s = j.at("settings");
    a.settings.bins = s.at("bins").get<std::size_t>();
    a.settings.c = s.at("smoothing_scale").get<double>();
    if (!s.at("zero_bin").is_null()) a.settings.zero_bin = s.at("zero_bin").get<double>();
    a.settings.min_bin_size = s.at("min_bin_size").get<std::size_t>();
    a.settings.storey_lambda = s.at("storey_lambda").get<double>();
    a.records = j.at("records").get<std::size_t>();
    a.fit = fit_from_json(j.at("fit"));
    a.one_bin.pi0_hat = j.at("one_bin").at("pi0_hat").get<double>();
    a.one_bin.pi0_lo = j.at("one_bin").at("pi0_ci95").at(0).get<double>();
    a.one_bin.pi0_hi = j.at("one_bin").at("pi0_ci95").at(1).get<double>();
    a.one_bin.fit = fit_from_json(j.at("one_bin").at("fit"));
    a.storey.pi0 = j.at("storey").at("pi0").get<double>();
    a.storey.degenerate = j.at("storey").at("degenerate").get<bool>();
    return a;
  } catch (const json::exception& e) {
    throw ParseError(std::string("fit artifact is malformed: ") + e.what());
  }
}

FitArtifact read_fit_artifact(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ConfigError("fit artifact " + path.string() + " does not exist");
  return parse_fit_artifact(read_file(path));
}

}  // namespace covmod
