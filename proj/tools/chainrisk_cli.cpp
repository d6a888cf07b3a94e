// chainrisk: chainlet extraction, extreme-activity features, volatility
// analysis and VaR backtesting from the command line.

#include "chainrisk/pipeline.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace chainrisk;

namespace {

struct Overrides {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
};

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

void add_config_flags(CLI::App* cmd, Overrides& ov, const std::vector<std::pair<std::string, std::string>>& keys) {
  for (const auto& [key, help] : keys) {
    auto* opt = cmd->add_option(flag_name(key), ov.values[key], help);
    ov.options.emplace_back(key, opt);
  }
}

PipelineConfig resolve_config(const std::string& config_path, const std::string& seed, const Overrides& ov) {
  PipelineConfig cfg;
  if (!config_path.empty()) load_config_file(config_path, cfg);
  if (!seed.empty()) set_config_value(cfg, "seed", seed);
  for (const auto& [key, opt] : ov.options)
    if (opt->count() > 0) set_config_value(cfg, key, ov.values.at(key));
  cfg.validate();
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chainlet-based Bitcoin risk analytics"};
  app.require_subcommand(1);

  std::string config_path, seed;
  fs::path out_dir = ".";
  app.add_option("--config", config_path, "Flat key = value configuration file");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--out", out_dir, "Output directory");

  Overrides ov;

  // extract
  auto* extract = app.add_subcommand("extract", "Build daily chainlet occurrence and amount matrices");
  fs::path tx_path, occ_out, amo_out;
  extract->add_option("--tx", tx_path, "Transaction CSV")->required();
  extract->add_option("--occ-out", occ_out, "Occurrence matrix file (default <out>/occurrence.txt)");
  extract->add_option("--amo-out", amo_out, "Amount matrix file (default <out>/amount.txt)");
  add_config_flags(extract, ov, {{"N", "Chainlet threshold"}, {"start", "First day YYYY-MM-DD"}, {"end", "Last day YYYY-MM-DD"},
                                 {"skip_out_of_window", "Skip (true) or reject (false) out-of-window records"},
                                 {"format", "Input format: native | coinworks"}});

  // features
  auto* features = app.add_subcommand("features", "Compute extreme-chainlet feature series");
  fs::path occ_in, amo_in, price_in, features_out, plot_out, events_in;
  features->add_option("--occ", occ_in, "Occurrence matrix file")->required();
  features->add_option("--amo", amo_in, "Amount matrix file")->required();
  features->add_option("--prices", price_in, "Price CSV date,close")->required();
  features->add_option("--features-out", features_out, "Feature CSV (default <out>/features.csv)");
  auto* plot_opt = features->add_option("--plot-data", plot_out, "Write (day_index, O_x) points");
  features->add_option("--events", events_in, "Optional date,label annotations merged into plot data");
  add_config_flags(features, ov, {{"N", "Chainlet threshold"}, {"start", "First day"}, {"end", "Last day"},
                                  {"forward_fill", "Forward-fill missing price days"}, {"format", "native | coinworks"}});

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Volatility regression and conditional loss densities");
  fs::path features_in, price_in2;
  analyze->add_option("--features", features_in, "Feature CSV")->required();
  analyze->add_option("--prices", price_in2, "Price CSV")->required();
  add_config_flags(analyze, ov, {{"alpha_tail", "Tail fraction for conditioning"}, {"lag", "Regressor lag in days"},
                                 {"kde_points", "Density grid size"}, {"start", "First day"}, {"end", "Last day"},
                                 {"forward_fill", "Forward-fill missing price days"}});

  // backtest
  auto* backtest = app.add_subcommand("backtest", "Rolling VaR backtest with coverage tests");
  fs::path features_in3, price_in3, report_out, var_out;
  std::string model_name = "garchx";
  bool compare = false;
  backtest->add_option("--features", features_in3, "Feature CSV")->required();
  backtest->add_option("--prices", price_in3, "Price CSV")->required();
  backtest->add_option("--model", model_name, "garch | garchx")->check(CLI::IsMember({"garch", "garchx"}));
  backtest->add_flag("--compare", compare, "Run both models and a Diebold-Mariano comparison");
  backtest->add_option("--report", report_out, "Report JSON (default <out>/backtest.json)");
  backtest->add_option("--var-csv", var_out, "VaR series CSV (default <out>/var.csv)");
  add_config_flags(backtest, ov,
                   {{"window", "Trailing window length"}, {"refit_every", "Days between refits"},
                    {"var_level", "VaR tail probability"}, {"arma_p", "AR order"}, {"arma_q", "MA order"},
                    {"distribution", "skew-t | student-t | normal"}, {"restarts", "Optimizer restarts per fit"},
                    {"exog_lag", "0: same-day regressors, 1: previous day"}, {"expanding", "Expanding window"},
                    {"dm_days", "Comparison horizon in days"}, {"dm_horizon", "Forecast horizon for the DM variance"},
                    {"dm_lrv", "rectangular | newey-west"}, {"anchor", "Last day of the comparison horizon"},
                    {"start", "First day"}, {"end", "Last day"}, {"forward_fill", "Forward-fill missing price days"}});

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic transaction and price dataset");
  SynthConfig synth;
  double alpha0 = synth.garch_params.alpha0, alpha1 = synth.garch_params.alpha1, beta = synth.garch_params.beta;
  std::vector<double> beta_x;
  synth_cmd->add_option("--days", synth.days, "Number of days");
  synth_cmd->add_option("--txs-per-day", synth.txs_per_day, "Mean transactions per day");
  synth_cmd->add_option("--extreme-prob", synth.extreme_prob, "Probability a transaction is extreme");
  synth_cmd->add_option("--extreme-side", synth.extreme_side, "both | left | right");
  synth_cmd->add_option("--N", synth.N, "Chainlet threshold");
  synth_cmd->add_option("--start-date", synth.start_date, "First day YYYY-MM-DD");
  synth_cmd->add_option("--initial-price", synth.initial_price, "Opening USD price");
  synth_cmd->add_option("--alpha0", alpha0, "Variance constant");
  synth_cmd->add_option("--alpha1", alpha1, "ARCH coefficient");
  synth_cmd->add_option("--beta", beta, "GARCH coefficient");
  synth_cmd->add_option("--beta-x", beta_x, "Coefficient on the standardized daily extreme share")->expected(0, 1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) {
      const auto cfg = resolve_config(config_path, seed, ov);
      return cmd_extract(tx_path, occ_out.empty() ? out_dir / "occurrence.txt" : occ_out,
                         amo_out.empty() ? out_dir / "amount.txt" : amo_out, cfg, std::cerr);
    }
    if (*features) {
      const auto cfg = resolve_config(config_path, seed, ov);
      FeaturesOutputs out;
      out.features = features_out.empty() ? out_dir / "features.csv" : features_out;
      if (plot_opt->count() > 0) out.plot_data = plot_out.empty() ? out_dir / "plot_ox.csv" : plot_out;
      if (!events_in.empty()) out.events = events_in;
      return cmd_features(occ_in, amo_in, price_in, out, cfg, std::cerr);
    }
    if (*analyze) {
      const auto cfg = resolve_config(config_path, seed, ov);
      return cmd_analyze(features_in, price_in2, out_dir, cfg, std::cerr);
    }
    if (*backtest) {
      const auto cfg = resolve_config(config_path, seed, ov);
      BacktestOutputs out;
      out.report = report_out.empty() ? out_dir / "backtest.json" : report_out;
      out.var_csv = var_out.empty() ? out_dir / "var.csv" : var_out;
      const auto model = model_name == "garch" ? ModelKind::Garch : ModelKind::Garchx;
      return cmd_backtest(features_in3, price_in3, out, cfg, model, compare, std::cerr);
    }
    if (*synth_cmd) {
      if (!seed.empty()) synth.seed = std::stoull(seed);
      synth.garch_params.alpha0 = alpha0;
      synth.garch_params.alpha1 = alpha1;
      synth.garch_params.beta = beta;
      synth.garch_params.beta_x = beta_x;
      return cmd_synth(synth, out_dir, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
