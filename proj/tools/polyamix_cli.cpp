// polyamix command-line interface: studies, fitting, sampling and conformal bands.
//
// Every CSV output starts with a "# {json}" line carrying the command,
// parameters and seed. Exit status: 0 on success, 2 on invalid input, 1 on
// other failures.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyamix/conformal.hpp"
#include "polyamix/encoding.hpp"
#include "polyamix/io.hpp"
#include "polyamix/posterior.hpp"
#include "polyamix/predictive.hpp"
#include "polyamix/segmentation.hpp"
#include "polyamix/simharness.hpp"

namespace fs = std::filesystem;
using namespace polyamix;
using nlohmann::json;

namespace {

struct Options {
  std::vector<double> a0_list;
  double a0 = 1.0;
  std::vector<int> levels;
  std::size_t m = 0;
  std::size_t n = 1000;
  std::size_t runs = 500;
  std::uint64_t seed = 1;
  double alpha = 0.1;
  std::string out = ".";
  int draws_per_seg = 50;
  int conformal_draws = 0;
  int grid = 1024;
  std::size_t y_grid = 0;
  int draws = 50;
  bool interpolate = false;
  bool no_conformal = false;
  std::string data;
  std::string family;
  std::vector<int> splits;
  std::vector<int> prefix;
  std::string model;
  std::string points;
  std::string schema;
  std::vector<double> x_values;
  std::size_t quantreg_m = 100;
  std::size_t quantreg_n = 2000;
  int sample_draws = 0;
};

std::string out_path(const Options& o, const std::string& name) {
  fs::create_directories(o.out);
  return (fs::path(o.out) / name).string();
}

json meta(const std::string& command, const Options& o, json extra = json::object()) {
  extra["command"] = command;
  extra["seed"] = o.seed;
  return extra;
}

SegmentationFamily load_family(const Options& o) {
  if (!o.family.empty()) return family_from_json(read_json(o.family));
  if (o.splits.empty()) throw std::invalid_argument("give --family <json> or --splits <per-dimension counts>");
  std::map<int, int> counts;
  for (std::size_t k = 0; k < o.splits.size(); ++k) {
    if (o.splits[k] < 0) throw std::invalid_argument("--splits entries must be non-negative");
    if (o.splits[k] > 0) counts[static_cast<int>(k)] = o.splits[k];
  }
  std::vector<int> prefix;
  for (int d : o.prefix) prefix.push_back(d - 1);
  return enumerate_balanced_family(static_cast<int>(o.splits.size()), counts, prefix);
}

int cmd_table1(const Options& o) {
  const std::vector<std::vector<std::uint32_t>> configs = {{1, 1, 1, 1}, {0, 2, 0, 2}, {0, 0, 2, 2}, {0, 0, 0, 4}, {0, 0, 4, 0}};
  const std::vector<double> a0s = o.a0_list.empty() ? std::vector<double>{0.1, 1.0, 10.0} : o.a0_list;
  std::vector<std::vector<double>> table(configs.size());
  for (double a0 : a0s) {
    std::vector<double> logw;
    for (const auto& c : configs) logw.push_back(log_unnormalized_weight(CountsTree::from_leaves(c), a0));
    const double total = log_sum_exp(logw);
    for (std::size_t i = 0; i < configs.size(); ++i) table[i].push_back(std::exp(logw[i] - total));
  }
  std::vector<std::string> header = {"counts"};
  for (double a0 : a0s) header.push_back("a0=" + std::to_string(a0));
  CsvWriter w(out_path(o, "table1.csv"), meta("table1", o, {{"a0", a0s}}), header);
  std::cout << std::left << std::setw(12) << "counts";
  for (double a0 : a0s) std::cout << std::setw(10) << ("a0=" + (std::ostringstream() << a0).str());
  std::cout << '\n';
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::string label = "(";
    for (std::size_t k = 0; k < 4; ++k) label += std::to_string(configs[i][k]) + (k < 3 ? "," : ")");
    w << ("\"" + label + "\"");
    std::cout << std::setw(12) << label;
    for (double v : table[i]) {
      w << v;
      std::cout << std::setw(10) << std::fixed << std::setprecision(4) << v;
    }
    w.end_row();
    std::cout << '\n';
  }
  return 0;
}

int cmd_prior_cdf(const Options& o) {
  PriorCdfConfig c;
  if (!o.a0_list.empty()) c.a0 = o.a0_list;
  c.draws = o.draws;
  c.levels = o.levels.empty() ? 10 : o.levels.front();
  c.seed = o.seed;
  const auto study = run_prior_cdf_study(c);
  CsvWriter w(out_path(o, "prior_cdf.csv"), meta("prior-cdf", o, {{"levels", c.levels}, {"draws", c.draws}}),
              {"a0", "draw", "u", "cdf"});
  const double leaves = std::ldexp(1.0, c.levels);
  for (std::size_t a = 0; a < c.a0.size(); ++a) {
    for (std::size_t d = 0; d < study.cdf[a].size(); ++d) {
      for (std::size_t k = 0; k < study.cdf[a][d].size(); ++k) {
        w << c.a0[a] << static_cast<long long>(d + 1) << static_cast<double>(k) / leaves << study.cdf[a][d][k];
        w.end_row();
      }
    }
    std::cout << "a0=" << c.a0[a] << " dispersion=" << study.dispersion[a] << '\n';
  }
  return 0;
}

int cmd_sim1d(const Options& o) {
  Study1DConfig c;
  c.m = o.m ? o.m : 50;
  c.a0 = o.a0;
  c.runs = o.runs;
  if (!o.levels.empty()) c.levels = o.levels;
  c.grid = o.grid;
  c.seed = o.seed;
  const auto s = run_1d_study(c);
  CsvWriter w(out_path(o, "sim1d.csv"),
              meta("sim1d", o, {{"m", c.m}, {"a0", c.a0}, {"runs", c.runs}, {"levels", c.levels}}),
              {"level", "u", "truth", "mean_hbeta", "rmse_hbeta", "mean_counts", "rmse_counts", "rmse_counts_analytic",
               "approximation_error"});
  for (const auto& curve : s.curves) {
    for (std::size_t g = 0; g < s.u.size(); ++g) {
      w << static_cast<long long>(curve.level) << s.u[g] << s.truth[g] << curve.mean_hbeta[g] << curve.rmse_hbeta[g]
        << curve.mean_counts[g] << curve.rmse_counts[g] << curve.rmse_counts_analytic[g] << curve.approximation_error[g];
      w.end_row();
    }
    std::cout << "L=" << curve.level << " mean sqrt-MSE ratio counts/hBeta = " << curve.mean_ratio << '\n';
  }
  return 0;
}

int cmd_sim2d(const Options& o) {
  Study2DConfig c;
  c.m = o.m ? o.m : 50;
  c.a0 = o.a0;
  c.runs = o.runs;
  c.grid = o.grid;
  c.seed = o.seed;
  const auto s = run_2d_study(c);
  const json md = meta("sim2d", o, {{"m", c.m}, {"a0", c.a0}, {"runs", c.runs}});
  CsvWriter summary(out_path(o, "sim2d_summary.csv"), md,
                    {"segmentation", "approximation_rmse", "median_weight", "median_chi_square"});
  CsvWriter runs(out_path(o, "sim2d_runs.csv"), md,
                 {"run", "segmentation", "chi_square", "mean_abs_residual", "weight", "counts_chi_square"});
  for (std::size_t k = 0; k < s.segmentations.size(); ++k) {
    const std::string label = "\"" + s.segmentations[k].label() + "\"";
    summary << label << s.approximation_rmse[k] << s.median_weight[k] << s.median_chi_square[k];
    summary.end_row();
    std::cout << s.segmentations[k].label() << " sqrt-MSE=" << s.approximation_rmse[k]
              << " median weight=" << s.median_weight[k] << " median X2=" << s.median_chi_square[k] << '\n';
    for (std::size_t r = 0; r < s.weights.size(); ++r) {
      runs << static_cast<long long>(r + 1) << label << s.chi_square[r][k] << s.mean_abs_residual[r][k] << s.weights[r][k]
           << s.counts_chi_square[r][k];
      runs.end_row();
    }
  }
  return 0;
}

void write_band(const std::string& path, const json& md, const ConformalBand& band) {
  CsvWriter w(path, md, {"x", "y_lower", "y_upper", "alpha"});
  for (std::size_t q = 0; q < band.x_values.size(); ++q) {
    w << band.x_values[q] << band.lower[q] << band.upper[q] << band.alpha;
    w.end_row();
  }
}

void write_scores(const std::string& path, const json& md, std::vector<double> scores) {
  CsvWriter w(path, md, {"rank", "score", "uniform_quantile"});
  std::sort(scores.begin(), scores.end());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w << static_cast<long long>(i + 1) << scores[i] << (static_cast<double>(i) + 0.5) / static_cast<double>(scores.size());
    w.end_row();
  }
}

int cmd_quantreg(const Options& o) {
  QuantregConfig c;
  c.m = o.quantreg_m;
  c.a0 = o.a0;
  c.draws_per_segmentation = o.draws_per_seg;
  c.predictive_samples = o.quantreg_n;
  c.alpha = o.alpha;
  c.conformal_draws = o.conformal_draws;
  c.y_grid = o.y_grid;
  c.endpoints = o.interpolate ? EndpointMode::interpolated : EndpointMode::grid_point;
  c.conformal = !o.no_conformal;
  c.seed = o.seed;
  const auto s = run_quantreg_study(c);
  const json md = meta("quantreg", o, {{"m", c.m}, {"a0", c.a0}, {"draws_per_seg", c.draws_per_segmentation}, {"alpha", c.alpha}});
  write_points_csv(out_path(o, "observations.csv"), s.observations, md);
  write_points_csv(out_path(o, "predictive.csv"), s.predictive.points, md);
  CsvWriter q(out_path(o, "quantiles.csv"), md,
              {"x", "true_q05", "true_q50", "true_q95", "post_q05", "post_q50", "post_q95", "band_lower", "band_upper"});
  for (std::size_t k = 0; k < s.column_x.size(); ++k) {
    q << s.column_x[k] << s.true_quantiles[0][k] << s.true_quantiles[1][k] << s.true_quantiles[2][k]
      << s.posterior_quantiles[0][k] << s.posterior_quantiles[1][k] << s.posterior_quantiles[2][k]
      << s.credible.columns[k].y_lower << s.credible.columns[k].y_upper;
    q.end_row();
  }
  std::cout << "predictive samples inside the " << 1.0 - c.alpha << " credible band: " << s.inside_credible << " of "
            << s.predictive.points.size() << '\n';
  if (c.conformal) {
    write_scores(out_path(o, "loo_scores.csv"), md, s.loo_scores);
    write_band(out_path(o, "conformal_band.csv"), md, s.conformal);
    std::cout << "leave-one-out scores: KS D=" << s.loo_ks.statistic << " p=" << s.loo_ks.p_value << '\n';
  }
  return 0;
}

int cmd_conformal(const Options& o) {
  if (o.data.empty()) throw std::invalid_argument("--data is required");
  const PointSet train = read_points_csv(o.data);
  ConformalConfig cc(load_family(o));
  cc.a0 = o.a0;
  cc.draws_per_segmentation = o.conformal_draws;
  cc.seed = o.seed;
  const ConformalPredictor predictor(train, cc);
  std::vector<double> xs = o.x_values;
  if (xs.empty()) {
    for (int ix = 0; ix < predictor.x_bins(); ++ix) xs.push_back((ix + 0.5) / predictor.x_bins());
  }
  const auto band = predictor.band(xs, o.alpha, o.y_grid, o.interpolate ? EndpointMode::interpolated : EndpointMode::grid_point);
  const json md = meta("conformal", o, {{"a0", cc.a0}, {"alpha", o.alpha}, {"draws_per_seg", cc.draws_per_segmentation}});
  write_band(out_path(o, "conformal_band.csv"), md, band);
  write_scores(out_path(o, "loo_scores.csv"), md, predictor.leave_one_out_scores(ScoreSide::below));
  for (std::size_t q = 0; q < xs.size(); ++q) std::cout << xs[q] << ": [" << band.lower[q] << ", " << band.upper[q] << "]\n";
  return 0;
}

int cmd_highdim(const Options& o) {
  HighdimConfig c;
  c.m = o.m ? o.m : 400;
  c.n = o.n;
  c.a0 = o.a0;
  c.seed = o.seed;
  const auto s = run_highdim_study(c);
  const json md = meta("highdim", o, {{"m", c.m}, {"n", c.n}, {"a0", c.a0}});
  CsvWriter w(out_path(o, "highdim_weights.csv"), md, {"index", "segmentation", "pair", "log_numerator", "swapped_log_numerator"});
  for (std::size_t i = 0; i < s.family.size(); ++i) {
    w << static_cast<long long>(i + 1) << ("\"" + s.family[i].label() + "\"")
      << ("Y" + std::to_string(s.pairs[i].first + 1) + "Y" + std::to_string(s.pairs[i].second + 1)) << s.log_numerators[i]
      << s.swapped_log_numerators[i];
    w.end_row();
  }
  write_raw_csv(out_path(o, "highdim_training.csv"), s.training);
  write_raw_csv(out_path(o, "highdim_predictive.csv"), s.predictive);
  write_json(out_path(o, "highdim_encoding.json"), s.encoding.to_json());
  const auto& best = s.pairs[s.best_member];
  std::cout << "best member " << s.best_member + 1 << " " << s.family[s.best_member].label() << " pair (Y" << best.first + 1
            << ",Y" << best.second + 1 << ")\n";
  double min_drop = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.family.size(); ++i) min_drop = std::min(min_drop, s.log_numerators[i] - s.swapped_log_numerators[i]);
  std::cout << "smallest prefix-swap decrease " << min_drop << "\n";
  std::cout << "X proportions training " << s.training_levels[0] << " " << s.training_levels[1] << " " << s.training_levels[2]
            << " predictive " << s.predictive_levels[0] << " " << s.predictive_levels[1] << " " << s.predictive_levels[2]
            << " (rejected " << s.rejected << ")\n";
  return 0;
}

int cmd_fit(const Options& o) {
  if (o.data.empty()) throw std::invalid_argument("--data is required");
  const PointSet data = read_points_csv(o.data);
  const PosteriorModel model = PosteriorModel::fit(data, load_family(o), o.a0);
  write_json(out_path(o, "model.json"), model_to_json(model));
  write_weights_csv(out_path(o, "weights.csv"), model, meta("fit", o, {{"a0", o.a0}, {"m", data.size()}}));
  std::cout << "fitted " << model.family().size() << " segmentations to " << data.size() << " points\n";
  return 0;
}

int cmd_sample(const Options& o) {
  if (o.model.empty()) throw std::invalid_argument("--model is required");
  const PosteriorModel model = model_from_json(read_json(o.model));
  PredictiveSample s;
  if (o.sample_draws == 0) {
    s = sample_posterior_predictive(model, o.n, o.seed);
  } else {
    Rng rng = make_rng(o.seed, 1);
    s = sample_predictive(build_mixture(model, o.sample_draws, rng), o.n, o.seed);
  }
  write_points_csv(out_path(o, "samples.csv"), s.points, meta("sample", o, {{"n", o.n}, {"draws_per_seg", o.sample_draws}}));
  return 0;
}

int cmd_density(const Options& o) {
  if (o.model.empty() || o.points.empty()) throw std::invalid_argument("--model and --points are required");
  const PosteriorModel model = model_from_json(read_json(o.model));
  const PointSet pts = read_points_csv(o.points);
  if (pts.dim() != model.dimension()) throw std::invalid_argument("points do not match the model dimension");
  std::vector<std::string> header;
  for (int k = 1; k <= pts.dim(); ++k) header.push_back("u" + std::to_string(k));
  header.push_back("density");
  CsvWriter w(out_path(o, "density.csv"), meta("density", o), header);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (double v : pts[i]) w << v;
    w << model.density(pts[i]);
    w.end_row();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixtures of finite Polya trees over dyadic segmentations"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Master random seed");
    sub->add_option("--out", o.out, "Output directory");
  };

  auto* table1 = app.add_subcommand("table1", "Posterior weights of the five depth-2 count configurations");
  table1->add_option("--a0", o.a0_list, "Hyperparameter values")->check(CLI::PositiveNumber);
  common(table1);

  auto* prior = app.add_subcommand("prior-cdf", "Prior CDF draws for several a0");
  prior->add_option("--a0", o.a0_list, "Hyperparameter values")->check(CLI::PositiveNumber);
  prior->add_option("--levels", o.levels, "Depth L")->expected(1);
  prior->add_option("--draws", o.draws, "Prior draws per a0")->check(CLI::PositiveNumber);
  common(prior);

  auto* sim1d = app.add_subcommand("sim1d", "1D estimator bias and sqrt-MSE study");
  sim1d->add_option("--m", o.m, "Training sample size")->check(CLI::PositiveNumber);
  sim1d->add_option("--a0", o.a0, "Beta hyperparameter")->check(CLI::PositiveNumber);
  sim1d->add_option("--runs", o.runs, "Replicates")->check(CLI::PositiveNumber);
  sim1d->add_option("--levels", o.levels, "Tree depths")->check(CLI::Range(1, 20));
  sim1d->add_option("--grid", o.grid, "Evaluation grid points per axis")->check(CLI::PositiveNumber);
  common(sim1d);

  auto* sim2d = app.add_subcommand("sim2d", "2D approximation error, Pearson residual and weight study");
  sim2d->add_option("--m", o.m, "Training sample size")->check(CLI::PositiveNumber);
  sim2d->add_option("--a0", o.a0, "Beta hyperparameter")->check(CLI::PositiveNumber);
  sim2d->add_option("--runs", o.runs, "Replicates")->check(CLI::PositiveNumber);
  sim2d->add_option("--grid", o.grid, "Evaluation grid points per axis")->check(CLI::PositiveNumber);
  common(sim2d);

  auto* quantreg = app.add_subcommand("quantreg", "Quantile regression, credible and conformal bands");
  quantreg->add_option("--m", o.quantreg_m, "Training sample size");
  quantreg->add_option("--n", o.quantreg_n, "Predictive samples")->check(CLI::PositiveNumber);
  quantreg->add_option("--a0", o.a0, "Beta hyperparameter")->check(CLI::PositiveNumber);
  quantreg->add_option("--alpha", o.alpha, "Credible band level")->check(CLI::Range(0.0, 1.0));
  quantreg->add_option("--draws-per-seg", o.draws_per_seg, "Beta vectors per segmentation (0 = exact)")
      ->check(CLI::NonNegativeNumber);
  quantreg->add_option("--conformal-draws", o.conformal_draws, "Beta vectors inside conformal scores (0 = exact)")
      ->check(CLI::NonNegativeNumber);
  quantreg->add_option("--y-grid", o.y_grid, "Candidate y grid size");
  quantreg->add_flag("--interpolate", o.interpolate, "Interpolated conformal endpoints");
  quantreg->add_flag("--no-conformal", o.no_conformal);
  common(quantreg);

  auto* conformal = app.add_subcommand("conformal", "Conformal band for bivariate training data in [0,1]^2");
  conformal->add_option("--data", o.data, "Training points CSV")->required();
  conformal->add_option("--family", o.family, "Family JSON");
  conformal->add_option("--splits", o.splits, "Splits per dimension of a balanced family, e.g. 4 4");
  conformal->add_option("--a0", o.a0, "Beta hyperparameter")->check(CLI::PositiveNumber);
  conformal->add_option("--alpha", o.alpha, "Per-side level")->check(CLI::Range(0.0, 1.0));
  conformal->add_option("--draws-per-seg", o.conformal_draws, "Beta vectors per segmentation (0 = exact)")
      ->check(CLI::NonNegativeNumber);
  conformal->add_option("--grid", o.y_grid, "Candidate y grid size");
  conformal->add_option("--x", o.x_values, "x values (default: column midpoints)");
  conformal->add_flag("--interpolate", o.interpolate, "Interpolated endpoints");
  common(conformal);

  auto* highdim = app.add_subcommand("highdim", "Mixed 10-dimensional structure recovery study");
  highdim->add_option("--m", o.m, "Training sample size")->check(CLI::PositiveNumber);
  highdim->add_option("--n", o.n, "Predictive samples")->check(CLI::PositiveNumber);
  highdim->add_option("--a0", o.a0, "Beta hyperparameter")->check(CLI::PositiveNumber);
  common(highdim);

  auto* fit = app.add_subcommand("fit", "Fit segmentation posteriors to points in [0,1]^P");
  fit->add_option("--data", o.data, "Points CSV in [0,1]^P")->required();
  fit->add_option("--family", o.family, "Family JSON");
  fit->add_option("--splits", o.splits, "Splits per dimension of a balanced family, e.g. 4 4");
  fit->add_option("--prefix", o.prefix, "Fixed leading splits (1-based dimensions)");
  fit->add_option("--a0", o.a0, "Beta hyperparameter")->check(CLI::PositiveNumber);
  common(fit);

  auto* sample = app.add_subcommand("sample", "Posterior predictive samples from a fitted model");
  sample->add_option("--model", o.model, "Model JSON from fit")->required();
  sample->add_option("--n", o.n, "Number of draws")->check(CLI::PositiveNumber);
  sample->add_option("--draws-per-seg", o.sample_draws, "Beta vectors per segmentation (0 = exact)")
      ->check(CLI::NonNegativeNumber);
  common(sample);

  auto* density = app.add_subcommand("density", "Posterior predictive density at given points");
  density->add_option("--model", o.model, "Model JSON from fit")->required();
  density->add_option("--points", o.points, "Points CSV")->required();
  common(density);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*table1) return cmd_table1(o);
    if (*prior) return cmd_prior_cdf(o);
    if (*sim1d) return cmd_sim1d(o);
    if (*sim2d) return cmd_sim2d(o);
    if (*quantreg) return cmd_quantreg(o);
    if (*conformal) return cmd_conformal(o);
    if (*highdim) return cmd_highdim(o);
    if (*fit) return cmd_fit(o);
    if (*sample) return cmd_sample(o);
    if (*density) return cmd_density(o);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
