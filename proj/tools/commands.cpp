#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "covmod/artifact.hpp"
#include "covmod/binning.hpp"
#include "covmod/errors.hpp"
#include "covmod/ingest.hpp"
#include "covmod/mixture.hpp"
#include "covmod/posterior.hpp"
#include "covmod/simulation.hpp"
#include "covmod/smoothing_fit.hpp"
#include "covmod/text_io.hpp"
#include "covmod/validation.hpp"

namespace fs = std::filesystem;

namespace covmod::cli {

namespace {

std::string g4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

struct Interval {
  double lo, hi;
};

Interval natural_interval(const ModelFit& fit, std::size_t bin, ParamKind kind) {
  const Marginal m = marginal(fit, bin, kind);
  const double a = m.mean - kZ95 * m.sd, b = m.mean + kZ95 * m.sd;
  if (kind == ParamKind::theta) return {2.0 + std::exp(a), 2.0 + std::exp(b)};
  return {logistic(a), logistic(b)};
}

std::string bin_range(const BinLayout& layout, std::size_t j) {
  if (layout.zero_sentinel && j == 0) return "x = " + g4(*layout.zero_sentinel);
  return "[" + g4(layout.x_min[j]) + ", " + g4(layout.x_max[j]) + "]";
}

// ---- fit

struct FitFlags {
  std::string input;
  std::string output_dir = ".";
  std::size_t bins = 20;
  double c = 1.0;
  std::optional<double> zero_bin;
  std::size_t min_bin_size = kDefaultMinBinSize;
  double storey_lambda = kDefaultStoreyLambda;
};

void print_fit(const FitArtifact& a, std::ostream& out) {
  const ModelFit& fit = a.fit;
  if (a.settings.bins > 1) {
    out << "records " << a.records << ", bins " << fit.num_bins() << ", c " << g4(fit.lambdas.c)
        << ", ridge " << g4(fit.ridge) << ", converged " << (fit.converged ? "yes" : "no")
        << " (" << fit.iterations << " iterations)\n";
    out << "lambda pi0 " << g4(fit.lambdas.lambda[0]) << ", xi " << g4(fit.lambdas.lambda[1])
        << ", theta " << g4(fit.lambdas.lambda[2]) << "\n";
    out << "bin\tn\tx\tpi0 [95%]\txi [95%]\ttheta [95%]\n";
    for (std::size_t j = 0; j < fit.num_bins(); ++j) {
      const BinParams nat = fit.natural(j);
      const Interval ip = natural_interval(fit, j, ParamKind::pi0);
      const Interval ix = natural_interval(fit, j, ParamKind::xi);
      const Interval it = natural_interval(fit, j, ParamKind::theta);
      out << j + 1 << "\t" << fit.layout.counts[j] << "\t" << bin_range(fit.layout, j) << "\t"
          << g4(nat.pi0) << " [" << g4(ip.lo) << ", " << g4(ip.hi) << "]\t" << g4(nat.xi) << " ["
          << g4(ix.lo) << ", " << g4(ix.hi) << "]\t" << g4(nat.theta) << " [" << g4(it.lo)
          << ", " << g4(it.hi) << "]\n";
    }
  } else {
    const BinParams nat = a.one_bin.fit.natural(0);
    const Interval ix = natural_interval(a.one_bin.fit, 0, ParamKind::xi);
    const Interval it = natural_interval(a.one_bin.fit, 0, ParamKind::theta);
    out << "records " << a.records << ", one-bin model, converged "
        << (a.one_bin.fit.converged ? "yes" : "no") << "\n";
    out << "xi " << g4(nat.xi) << " [" << g4(ix.lo) << ", " << g4(ix.hi) << "], theta "
        << g4(nat.theta) << " [" << g4(it.lo) << ", " << g4(it.hi) << "]\n";
  }
  out << "one-bin pi0 " << g4(a.one_bin.pi0_hat) << " [" << g4(a.one_bin.pi0_lo) << ", "
      << g4(a.one_bin.pi0_hi) << "]\n";
  out << "storey pi0 (lambda " << g4(a.settings.storey_lambda) << ") " << g4(a.storey.pi0)
      << (a.storey.degenerate ? " (degenerate: no p-value above lambda)" : "") << "\n";
}

int cmd_fit(const FitFlags& f, std::ostream& out, std::ostream& err) {
  const Dataset ds = read_dataset(f.input);
  FitArtifact a;
  a.settings = {f.bins, f.c, f.zero_bin, f.min_bin_size, f.storey_lambda};
  a.records = ds.size();
  a.storey = storey_pi0(ds.p_values(), f.storey_lambda);

  FitOptions opts;
  opts.c = f.c;
  a.one_bin = fit_one_bin(ds, opts);
  if (f.bins == 1 && !f.zero_bin) {
    a.fit = a.one_bin.fit;
  } else {
    const BinLayout layout = quantile_bins(ds, f.bins, f.zero_bin, f.min_bin_size);
    a.fit = fit_joint(ds, layout, opts);
  }
  if (!a.fit.converged)
    err << "warning: joint fit did not converge (gradient norm " << g4(a.fit.gradient_norm)
        << ")\n";
  if (!a.one_bin.fit.converged) err << "warning: one-bin fit did not converge\n";

  const fs::path dir = prepare_dir(f.output_dir);
  atomic_write(dir / "fit.json", serialize_fit_artifact(a));
  print_fit(a, out);
  out << "wrote " << (dir / "fit.json").string() << "\n";
  return 0;
}

// ---- score

struct ScoreFlags {
  std::string input;
  std::string fit;
  std::string output_dir = ".";
  double threshold = kDefaultThreshold;
};

int cmd_score(const ScoreFlags& f, std::ostream& out, std::ostream& err) {
  const FitArtifact a = read_fit_artifact(f.fit);
  const Dataset ds = read_dataset(f.input);
  if (!a.fit.converged) err << "warning: the fit in " << f.fit << " did not converge\n";

  const auto cov = score_all(ds, a.fit);
  const auto one = score_all(ds, a.one_bin.fit);
  const auto flags = call_significant(cov, f.threshold);
  const CallCounts counts = compare_calls(cov, one, f.threshold);

  std::string text = "id,p,x,bin,prob,ci_lo,ci_hi,rank_cov,rank_onebin,significant\n";
  for (std::size_t i = 0; i < cov.size(); ++i) {
    const auto& s = cov[i];
    text += s.id + "," + format_double(s.p) + "," + format_double(s.x) + "," +
            std::to_string(s.bin + 1) + "," + format_double(s.prob) + "," +
            format_double(s.ci_lo) + "," + format_double(s.ci_hi) + "," +
            std::to_string(s.rank) + "," + std::to_string(one[i].rank) + "," +
            (flags[i] ? "1" : "0") + "\n";
  }
  const fs::path dir = prepare_dir(f.output_dir);
  atomic_write(dir / "scores.csv", text);

  out << "threshold " << g4(f.threshold) << "\n";
  out << "significant under both models " << counts.both << "\n";
  out << "covariate model only " << counts.covariate_only << "\n";
  out << "one-bin model only " << counts.baseline_only << "\n";
  out << "neither " << counts.neither << "\n";
  out << "wrote " << (dir / "scores.csv").string() << "\n";
  return 0;
}

// ---- simulate

struct SimFlags {
  SimConfig config;
  std::size_t replicates = 1;
  std::size_t jobs = 1;
  std::string output_dir = ".";
};

std::string config_header(const SimConfig& c, const CurveParams& curve, std::size_t replicates) {
  std::string h;
  h += "# pibar0 " + format_double(c.pibar0) + "\n";
  h += "# pi0_at_0 " + format_double(c.pi0_at_0) + "\n";
  h += "# pi0_at_1 " + format_double(c.pi0_at_1) + "\n";
  h += "# alpha " + format_double(curve.alpha) + "\n";
  h += "# beta " + format_double(curve.beta) + "\n";
  h += "# gamma " + format_double(curve.gamma) + "\n";
  h += "# mu " + format_double(c.mu) + "\n";
  h += "# m " + std::to_string(c.m) + "\n";
  h += "# bins " + std::to_string(c.bins) + "\n";
  h += "# c " + format_double(c.c) + "\n";
  h += "# replicates " + std::to_string(replicates) + "\n";
  h += "# seed " + std::to_string(c.seed) + "\n";
  return h;
}

int cmd_simulate(const SimFlags& f, std::ostream& out) {
  if (f.replicates < 1) throw ConfigError("--replicates must be at least 1");
  const CurveParams curve = calibrate(f.config);
  const fs::path dir = prepare_dir(f.output_dir);

  // The first replicate's dataset and truth are written out as examples.
  SimConfig first = f.config;
  first.seed = derive_seed(f.config.seed, 0);
  const auto [ds, truth] = simulate(first);
  std::string truth_text = "id,x,p,is_null,true_posterior\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records()[i];
    truth_text += r.id + "," + format_double(r.x) + "," + format_double(r.p) + "," +
                  (truth.is_null[i] ? "1" : "0") + "," + format_double(truth.posterior[i]) + "\n";
  }

  const auto grid = default_p_grid();
  const auto reporting = default_reporting_bins(f.config.bins);
  std::string summary = config_header(f.config, curve, f.replicates);
  std::size_t failures = 0;
  std::optional<double> onebin_pi0_median;
  if (f.replicates == 1) {
    summary += "method,bin,p,truth,estimate\n";
    const ReplicateCurves rc = run_replicate(first, grid, reporting);
    auto emit = [&](const std::string& method, std::size_t j, const std::vector<double>& est) {
      const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(f.config.bins);
      for (std::size_t i = 0; i < grid.size(); ++i)
        summary += method + "," + std::to_string(j + 1) + "," + format_double(grid[i]) + "," +
                   format_double(true_posterior(grid[i], x, f.config)) + "," +
                   format_double(est[i]) + "\n";
    };
    for (std::size_t k = 0; k < reporting.size(); ++k) emit("binned", reporting[k], rc.binned[k]);
    for (std::size_t j : reporting) emit("one-bin", j, rc.onebin);
    onebin_pi0_median = rc.onebin_pi0;
  } else {
    ReplicateOptions ro;
    ro.jobs = f.jobs;
    const ReplicateSummary s = replicate_summary(f.config, f.replicates, ro);
    failures = s.failures;
    summary += "# failures " + std::to_string(s.failures) + "\n";
    summary += "method,bin,p,truth,q05,median,q95\n";
    for (const auto& cs : s.curves)
      for (std::size_t i = 0; i < s.p_grid.size(); ++i)
        summary += cs.method + "," + std::to_string(cs.bin + 1) + "," +
                   format_double(s.p_grid[i]) + "," + format_double(cs.truth[i]) + "," +
                   format_double(cs.q05[i]) + "," + format_double(cs.median[i]) + "," +
                   format_double(cs.q95[i]) + "\n";
    if (!s.onebin_pi0.empty()) onebin_pi0_median = quantile(s.onebin_pi0, 0.5);
  }

  atomic_write(dir / "sim_data.csv", serialize_dataset(ds));
  atomic_write(dir / "sim_truth.csv", truth_text);
  atomic_write(dir / "sim_summary.csv", summary);

  out << "gamma " << format_double(curve.gamma) << " (mean pi0 "
      << format_double(pi0_curve_mean(curve)) << ")\n";
  out << "replicates " << f.replicates << ", failures " << failures << "\n";
  if (onebin_pi0_median) out << "one-bin pi0 (median) " << g4(*onebin_pi0_median) << "\n";
  out << "wrote " << (dir / "sim_data.csv").string() << ", " << (dir / "sim_truth.csv").string()
      << ", " << (dir / "sim_summary.csv").string() << "\n";
  return 0;
}

// ---- validate

struct ValidateFlags {
  std::optional<std::string> input;
  std::size_t bins = 5;
  double c = 1.0;
  std::size_t min_bin_size = kDefaultMinBinSize;
  std::uint64_t seed = 1;
  std::size_t iterations = 50000;
  std::size_t burn_in = 10000;
  std::string output_dir = ".";
};

int cmd_validate(const ValidateFlags& f, std::ostream& out) {
  Dataset ds = [&] {
    if (f.input) return read_dataset(*f.input);
    SimConfig sc;
    sc.m = 2000;
    sc.bins = f.bins;
    sc.pibar0 = 0.5;
    sc.pi0_at_0 = 0.9;
    sc.pi0_at_1 = 0.1;
    sc.seed = f.seed;
    return simulate(sc).first;
  }();
  FitOptions opts;
  opts.c = f.c;
  const BinLayout layout = quantile_bins(ds, f.bins, std::nullopt, f.min_bin_size);
  const ModelFit fit = fit_joint(ds, layout, opts);

  std::vector<PValueBin> bins;
  for (const auto& pv : split_by_bin(ds, layout)) bins.emplace_back(pv);
  const LogPosterior post(std::move(bins), fit.lambdas, fit.ridge, fit.initial);

  std::string report;
  bool all_ok = true;
  auto line = [&](const std::string& name, bool ok, const std::string& detail) {
    all_ok = all_ok && ok;
    report += name + ": " + (ok ? "PASS" : "FAIL") + " " + detail + "\n";
  };
  report += "# data " + (f.input ? *f.input : std::string("synthetic m=2000 (0.5, 0.9, 0.1)")) +
            ", bins " + std::to_string(f.bins) + ", c " + format_double(f.c) + ", seed " +
            std::to_string(f.seed) + "\n";

  line("fit_converged", fit.converged,
       "gradient_inf_norm=" + format_double(fit.gradient_norm));

  // Gradient check at random points around the mode.
  SimRng rng(derive_seed(f.seed, 101));
  std::normal_distribution<double> nd(0.0, 0.5);
  double worst = 0.0;
  Eigen::VectorXd worst_point = fit.mode;
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd v = fit.mode;
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] += nd(rng);
    const double e = grad_check(post, v, 1e-5);
    if (!(e <= worst)) {
      worst = e;
      worst_point = v;
    }
  }
  {
    std::string detail = "max_rel_error=" + format_double(worst) + " points=20 step=1e-05";
    if (!(worst <= 1e-5)) {
      detail += " worst_point=";
      for (Eigen::Index k = 0; k < worst_point.size(); ++k)
        detail += (k ? ";" : "") + format_double(worst_point[k]);
    }
    line("gradient_check", worst <= 1e-5, detail);
  }

  const double audit = normalization_audit(100, f.seed);
  line("normalization_audit", audit <= 1e-6,
       "worst_deviation=" + format_double(audit) + " cases=100");

  McmcOptions mo;
  mo.iterations = f.iterations;
  mo.burn_in = f.burn_in;
  mo.seed = f.seed;
  const McmcResult mc = mcmc_sample(ds, fit, mo);
  line("mcmc_diagnostics", mc.diagnostics_ok,
       "acceptance=" + format_double(mc.acceptance_rate) +
           (mc.diagnostic.empty() ? "" : " " + mc.diagnostic));
  for (std::size_t j = 0; j < fit.num_bins(); ++j) {
    const auto i = static_cast<Eigen::Index>(3 * j);
    const double diff = std::abs(fit.mode[i] - mc.mean[i]);
    const double tol = std::max(0.05, 3.0 * mc.mcse[i]);
    line("mcmc_pi0_bin" + std::to_string(j + 1), diff <= tol,
         "gaussian=" + format_double(fit.mode[i]) + " mcmc=" + format_double(mc.mean[i]) +
             " mcse=" + format_double(mc.mcse[i]) + " tol=" + format_double(tol));
  }

  const fs::path dir = prepare_dir(f.output_dir);
  atomic_write(dir / "validation.txt", report);
  out << report;
  out << "wrote " << (dir / "validation.txt").string() << "\n";
  return all_ok ? 0 : 4;
}

// ---- plotdata

struct PlotFlags {
  std::string fit;
  std::string scores;
  double threshold = kDefaultThreshold;
  std::string output_dir = ".";
};

std::vector<double> curve_grid() {
  std::vector<double> g;
  for (int k = 0; k < 120; ++k) g.push_back(std::pow(10.0, -6.0 + 6.0 * k / 120.0));
  g.push_back(1.0 - 1e-12);
  return g;
}

struct RankRow {
  std::string id;
  std::size_t rank_cov, rank_onebin;
};

std::vector<RankRow> read_rank_rows(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("scores file " + path + " does not exist");
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[std::string(header[i])] = i;
  for (const char* need : {"id", "rank_cov", "rank_onebin"})
    if (!col.count(need))
      throw ParseError("scores file " + path + " has no column '" + need + "'");

  std::vector<RankRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    auto get_rank = [&](const char* name) {
      double v = 0.0;
      const std::size_t i = col[name];
      if (i >= fields.size() || !parse_double(fields[i], v) || v < 1 || v != std::floor(v))
        throw ParseError("scores file " + path + " line " + std::to_string(lineno) +
                         ": bad " + name);
      return static_cast<std::size_t>(v);
    };
    if (col["id"] >= fields.size())
      throw ParseError("scores file " + path + " line " + std::to_string(lineno) + ": no id");
    rows.push_back({std::string(fields[col["id"]]), get_rank("rank_cov"), get_rank("rank_onebin")});
  }
  std::sort(rows.begin(), rows.end(),
            [](const RankRow& a, const RankRow& b) { return a.rank_cov < b.rank_cov; });
  return rows;
}

int cmd_plotdata(const PlotFlags& f, std::ostream& out) {
  const FitArtifact a = read_fit_artifact(f.fit);
  const auto ranks = read_rank_rows(f.scores);
  const ModelFit& fit = a.fit;
  const BinLayout& layout = fit.layout;
  const std::size_t b = fit.num_bins();

  std::string fig1 = "bin,p,prob,ci_lo,ci_hi\n";
  const auto grid = curve_grid();
  for (std::size_t j = 0; j < b; ++j)
    for (double p : grid) {
      const PosteriorProb pp = posterior_prob(p, j, fit);
      fig1 += std::to_string(j + 1) + "," + format_double(p) + "," + format_double(pp.prob) +
              "," + format_double(pp.ci_lo) + "," + format_double(pp.ci_hi) + "\n";
    }

  std::string fig2 = "bin,x_lo,x_hi,z_cutoff\n";
  const auto cut = threshold_curve(fit, f.threshold);
  for (std::size_t j = 0; j < b; ++j)
    fig2 += std::to_string(j + 1) + "," + format_double(layout.x_min[j]) + "," +
            format_double(layout.x_max[j]) + "," + format_double(cut[j]) + "\n";

  std::string fig3 = "bin,x_lo,x_hi,pi0,ci_lo,ci_hi\n";
  for (std::size_t j = 0; j < b; ++j) {
    const Interval ip = natural_interval(fit, j, ParamKind::pi0);
    fig3 += std::to_string(j + 1) + "," + format_double(layout.x_min[j]) + "," +
            format_double(layout.x_max[j]) + "," + format_double(fit.natural(j).pi0) + "," +
            format_double(ip.lo) + "," + format_double(ip.hi) + "\n";
  }

  std::string fig4 = "id,rank_cov,rank_onebin,displacement\n";
  for (const auto& r : ranks)
    fig4 += r.id + "," + std::to_string(r.rank_cov) + "," + std::to_string(r.rank_onebin) + "," +
            std::to_string(static_cast<long>(r.rank_onebin) - static_cast<long>(r.rank_cov)) +
            "\n";

  const fs::path dir = prepare_dir(f.output_dir);
  const char* names[] = {"fig1_posterior_curves.csv", "fig2_threshold_curve.csv",
                         "fig3_pi0_by_bin.csv", "fig4_rank_pairs.csv"};
  const std::string* bodies[] = {&fig1, &fig2, &fig3, &fig4};
  for (int i = 0; i < 4; ++i) {
    atomic_write(dir / names[i], *bodies[i]);
    out << "wrote " << (dir / names[i]).string() << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Covariate-modulated local false discovery rates for p-values"};
  app.require_subcommand(1);

  FitFlags ff;
  auto* fit = app.add_subcommand("fit", "fit the binned and one-bin models, write fit.json");
  fit->add_option("--input", ff.input, "delimited file with id, x and p (or z) columns")->required();
  fit->add_option("--output-dir", ff.output_dir);
  fit->add_option("--bins", ff.bins, "number of covariate bins")->capture_default_str();
  fit->add_option("--smoothing-scale", ff.c, "smoothing scale c")->capture_default_str();
  fit->add_option("--zero-bin", ff.zero_bin, "covariate value that gets its own bin");
  fit->add_option("--min-bin-size", ff.min_bin_size)->capture_default_str();
  fit->add_option("--storey-lambda", ff.storey_lambda)->capture_default_str();

  ScoreFlags sf;
  auto* score = app.add_subcommand("score", "posterior probabilities for each test, write scores.csv");
  score->add_option("--input", sf.input)->required();
  score->add_option("--fit", sf.fit, "fit.json from the fit subcommand")->required();
  score->add_option("--threshold", sf.threshold)->capture_default_str();
  score->add_option("--output-dir", sf.output_dir);

  SimFlags mf;
  std::uint64_t sim_seed = 1;
  auto* sim = app.add_subcommand("simulate", "simulation study, write sim_*.csv");
  sim->add_option("--pibar0", mf.config.pibar0)->required();
  sim->add_option("--pi0-at-0", mf.config.pi0_at_0)->required();
  sim->add_option("--pi0-at-1", mf.config.pi0_at_1)->required();
  sim->add_option("--m", mf.config.m)->capture_default_str();
  sim->add_option("--mu", mf.config.mu)->capture_default_str();
  sim->add_option("--bins", mf.config.bins)->capture_default_str();
  sim->add_option("--smoothing-scale", mf.config.c)->capture_default_str();
  sim->add_option("--replicates", mf.replicates)->capture_default_str();
  sim->add_option("--seed", sim_seed)->capture_default_str();
  sim->add_option("--jobs", mf.jobs, "worker threads; output does not depend on it")
      ->capture_default_str();
  sim->add_option("--output-dir", mf.output_dir);

  ValidateFlags vf;
  auto* val = app.add_subcommand("validate", "derivative, normalization and MCMC checks");
  val->add_option("--input", vf.input, "data to check (default: synthetic m = 2000)");
  val->add_option("--bins", vf.bins)->capture_default_str();
  val->add_option("--smoothing-scale", vf.c)->capture_default_str();
  val->add_option("--min-bin-size", vf.min_bin_size)->capture_default_str();
  val->add_option("--seed", vf.seed)->capture_default_str();
  val->add_option("--mcmc-iterations", vf.iterations)->capture_default_str();
  val->add_option("--burn-in", vf.burn_in)->capture_default_str();
  val->add_option("--output-dir", vf.output_dir);

  PlotFlags pf;
  auto* plot = app.add_subcommand("plotdata", "figure data files from a fit and its scores");
  plot->add_option("--fit", pf.fit)->required();
  plot->add_option("--scores", pf.scores, "scores.csv from the score subcommand")->required();
  plot->add_option("--threshold", pf.threshold)->capture_default_str();
  plot->add_option("--output-dir", pf.output_dir);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }

  try {
    if (fit->parsed()) return cmd_fit(ff, out, err);
    if (score->parsed()) return cmd_score(sf, out, err);
    if (sim->parsed()) {
      mf.config.seed = sim_seed;
      return cmd_simulate(mf, out);
    }
    if (val->parsed()) return cmd_validate(vf, out);
    if (plot->parsed()) return cmd_plotdata(pf, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 4;
  }
  return 3;
}

}  // namespace covmod::cli
