#pragma once

#include "chainrisk/arma_garchx.hpp"
#include "chainrisk/chainlet.hpp"
#include "chainrisk/returns_stats.hpp"
#include "chainrisk/risk_backtest.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace chainrisk {

inline constexpr int kSchemaVersion = 1;

struct PipelineConfig {
  int N = kDefaultThreshold;
  double alpha_tail = 0.05;
  double var_level = 0.01;
  std::size_t window = 250;
  std::size_t refit_every = 7;
  int arma_p = 2;
  int arma_q = 2;
  std::uint64_t seed = 1;
  std::string distribution = "skew-t";
  int restarts = 5;
  int ols_lag = 0;      // regress r_t² on x_{t-lag}
  int exog_lag = 0;     // 0: variance uses x_t (same day); 1: x_{t-1}
  bool expanding = false;
  std::size_t dm_days = 30; // out-of-sample horizon for the model comparison
  int dm_horizon = 1;
  std::string dm_lrv = "rectangular";
  std::optional<Date> anchor; // last day of the comparison horizon
  std::optional<Date> start;
  std::optional<Date> end;
  bool forward_fill = false;
  bool skip_out_of_window = true;
  std::size_t kde_points = 512;
  std::string format = "native";

  DailyCalendar calendar() const;
  void validate() const;
};

/// Applies `key = value` lines (`#` comments) onto `cfg`. Unknown keys are errors.
void apply_config_text(const std::string& text, PipelineConfig& cfg);
void load_config_file(const std::filesystem::path& path, PipelineConfig& cfg);
/// Sets a single key from its textual value.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

struct SynthConfig {
  std::size_t days = 365;
  double txs_per_day = 200.0;
  double extreme_prob = 0.05;
  std::string extreme_side = "both"; // both | left | right
  int N = kDefaultThreshold;
  ArmaGarchXParams garch_params = default_synth_params();
  std::string start_date = "2015-01-01";
  double initial_price = 250.0;
  std::uint64_t seed = 1;

  static ArmaGarchXParams default_synth_params();
  void validate() const;
};

enum class ModelKind { Garch, Garchx };

nlohmann::json to_json(const PipelineConfig& cfg);
nlohmann::json to_json(const ModelSpec& spec);
nlohmann::json to_json(const ArmaGarchXParams& params);
nlohmann::json to_json(const FitResult& fit); // spec, params, loglik, convergence metadata
nlohmann::json to_json(const OlsReport& rep);
nlohmann::json to_json(const DensityMoments& m);
nlohmann::json to_json(const VarBacktestReport& rep);
nlohmann::json to_json(const DmReport& rep);
ModelSpec spec_from_json(const nlohmann::json& j);
ArmaGarchXParams params_from_json(const nlohmann::json& j);

void write_var_csv(std::ostream& out, const VarSeries& series);

// Subcommands. Each returns a process exit status; diagnostics go to `log`.

int cmd_extract(const std::filesystem::path& tx_path, const std::filesystem::path& out_occ,
                const std::filesystem::path& out_amo, const PipelineConfig& cfg, std::ostream& log);

struct FeaturesOutputs {
  std::filesystem::path features;
  std::optional<std::filesystem::path> plot_data; // (day_index, O_x) points
  std::optional<std::filesystem::path> events;    // optional `date,label` annotations
};

int cmd_features(const std::filesystem::path& occ_path, const std::filesystem::path& amo_path,
                 const std::filesystem::path& price_path, const FeaturesOutputs& out, const PipelineConfig& cfg,
                 std::ostream& log);

int cmd_analyze(const std::filesystem::path& features_path, const std::filesystem::path& price_path,
                const std::filesystem::path& out_dir, const PipelineConfig& cfg, std::ostream& log);

struct BacktestOutputs {
  std::filesystem::path report;  // JSON
  std::filesystem::path var_csv; // per model, suffixed with the model name when comparing
};

int cmd_backtest(const std::filesystem::path& features_path, const std::filesystem::path& price_path,
                 const BacktestOutputs& out, const PipelineConfig& cfg, ModelKind model, bool compare,
                 std::ostream& log);

int cmd_synth(const SynthConfig& synth, const std::filesystem::path& out_dir, std::ostream& log);

} // namespace chainrisk
