#include "chainrisk/pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace chainrisk {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// configuration

DailyCalendar PipelineConfig::calendar() const {
  DailyCalendar cal;
  if (start) cal.start = *start;
  if (end) cal.end = *end;
  cal.gap_policy = forward_fill ? GapPolicy::ForwardFill : GapPolicy::Error;
  cal.out_of_window = skip_out_of_window ? OutOfWindowPolicy::Skip : OutOfWindowPolicy::Error;
  return cal;
}

void PipelineConfig::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("invalid configuration: " + what);
  };
  require(N >= 2, "N must be at least 2");
  require(alpha_tail > 0.0 && alpha_tail < 0.5, "alpha_tail must lie in (0, 0.5)");
  require(var_level > 0.0 && var_level < 0.5, "var_level must lie in (0, 0.5)");
  require(window >= 50, "window must be at least 50");
  require(refit_every >= 1, "refit_every must be at least 1");
  require(arma_p >= 0 && arma_q >= 0, "ARMA orders must be non-negative");
  require(restarts >= 1, "restarts must be at least 1");
  require(ols_lag >= 0, "ols_lag must be non-negative");
  require(exog_lag == 0 || exog_lag == 1, "exog_lag must be 0 or 1");
  require(dm_days >= 10, "dm_days must be at least 10");
  require(dm_horizon >= 1, "dm_horizon must be at least 1");
  require(dm_lrv == "rectangular" || dm_lrv == "newey-west", "dm_lrv must be rectangular or newey-west");
  require(kde_points >= 2, "kde_points must be at least 2");
  require(format == "native" || format == "coinworks", "format must be native or coinworks");
  innovation_from_string(distribution);
  if (start && end) calendar().validate();
}

namespace {

template <class T> T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ValidationError("config key '" + key + "': invalid number '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ValidationError("config key '" + key + "': invalid boolean '" + value + "'");
}

std::string trim_copy(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

} // namespace

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "N") cfg.N = parse_number<int>(key, value);
  else if (key == "alpha_tail") cfg.alpha_tail = parse_number<double>(key, value);
  else if (key == "var_level") cfg.var_level = parse_number<double>(key, value);
  else if (key == "window") cfg.window = parse_number<std::size_t>(key, value);
  else if (key == "refit_every") cfg.refit_every = parse_number<std::size_t>(key, value);
  else if (key == "arma_p") cfg.arma_p = parse_number<int>(key, value);
  else if (key == "arma_q") cfg.arma_q = parse_number<int>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "distribution") cfg.distribution = value;
  else if (key == "restarts") cfg.restarts = parse_number<int>(key, value);
  else if (key == "ols_lag" || key == "lag") cfg.ols_lag = parse_number<int>(key, value);
  else if (key == "exog_lag") cfg.exog_lag = parse_number<int>(key, value);
  else if (key == "expanding") cfg.expanding = parse_bool(key, value);
  else if (key == "dm_days") cfg.dm_days = parse_number<std::size_t>(key, value);
  else if (key == "dm_horizon") cfg.dm_horizon = parse_number<int>(key, value);
  else if (key == "dm_lrv") cfg.dm_lrv = value;
  else if (key == "anchor") cfg.anchor = parse_date(value);
  else if (key == "start") cfg.start = parse_date(value);
  else if (key == "end") cfg.end = parse_date(value);
  else if (key == "forward_fill") cfg.forward_fill = parse_bool(key, value);
  else if (key == "skip_out_of_window") cfg.skip_out_of_window = parse_bool(key, value);
  else if (key == "kde_points") cfg.kde_points = parse_number<std::size_t>(key, value);
  else if (key == "format") cfg.format = value;
  else throw ValidationError("unknown config key '" + key + "'");
}

void apply_config_text(const std::string& text, PipelineConfig& cfg) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const auto line = trim_copy(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    try {
      set_config_value(cfg, trim_copy(line.substr(0, eq)), trim_copy(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

void load_config_file(const fs::path& path, PipelineConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(buf.str(), cfg);
}

ArmaGarchXParams SynthConfig::default_synth_params() {
  ArmaGarchXParams p;
  p.mu = 0.0;
  p.alpha0 = 1e-5;
  p.alpha1 = 0.10;
  p.beta = 0.85;
  p.nu = 0.0;
  p.xi = 1.0;
  return p;
}

void SynthConfig::validate() const {
  if (days < 2) throw ValidationError("synthetic data needs at least 2 days");
  if (!(txs_per_day > 0.0)) throw ValidationError("txs_per_day must be positive");
  if (!(extreme_prob >= 0.0 && extreme_prob <= 1.0)) throw ValidationError("extreme_prob must lie in [0,1]");
  if (extreme_side != "both" && extreme_side != "left" && extreme_side != "right")
    throw ValidationError("extreme_side must be both, left or right");
  if (N < 2) throw ValidationError("N must be at least 2");
  if (!(initial_price > 0.0)) throw ValidationError("initial_price must be positive");
  if (garch_params.beta_x.size() > 1) throw ValidationError("synthetic prices take at most one exogenous coefficient");
  ModelSpec spec{0, 0, static_cast<int>(garch_params.beta_x.size()), Innovation::Normal};
  ArmaGarchXParams p = garch_params;
  p.phi.clear();
  p.theta.clear();
  if (const auto why = p.violation(spec); !why.empty()) throw ValidationError("synthetic GARCH parameters: " + why);
  parse_date(start_date);
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const PipelineConfig& c) {
  json j;
  j["N"] = c.N;
  j["alpha_tail"] = c.alpha_tail;
  j["var_level"] = c.var_level;
  j["window"] = c.window;
  j["refit_every"] = c.refit_every;
  j["arma_p"] = c.arma_p;
  j["arma_q"] = c.arma_q;
  j["seed"] = c.seed;
  j["distribution"] = c.distribution;
  j["restarts"] = c.restarts;
  j["ols_lag"] = c.ols_lag;
  j["exog_lag"] = c.exog_lag;
  j["expanding"] = c.expanding;
  j["dm_days"] = c.dm_days;
  j["dm_horizon"] = c.dm_horizon;
  j["dm_lrv"] = c.dm_lrv;
  j["anchor"] = c.anchor ? json(format_date(*c.anchor)) : json(nullptr);
  j["start"] = c.start ? json(format_date(*c.start)) : json(nullptr);
  j["end"] = c.end ? json(format_date(*c.end)) : json(nullptr);
  j["forward_fill"] = c.forward_fill;
  j["skip_out_of_window"] = c.skip_out_of_window;
  j["kde_points"] = c.kde_points;
  j["format"] = c.format;
  return j;
}

json to_json(const ModelSpec& s) {
  return {{"p", s.p}, {"q", s.q}, {"k", s.k}, {"distribution", to_string(s.distribution)}};
}

json to_json(const ArmaGarchXParams& p) {
  return {{"mu", p.mu},         {"phi", p.phi},   {"theta", p.theta}, {"alpha0", p.alpha0}, {"alpha1", p.alpha1},
          {"beta", p.beta},     {"beta_x", p.beta_x}, {"nu", p.nu},   {"xi", p.xi}};
}

json to_json(const FitResult& f) {
  return {{"spec", to_json(f.spec)},
          {"params", to_json(f.params)},
          {"loglik", f.loglik},
          {"aic", f.aic},
          {"bic", f.bic},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"restarts_converged", f.restarts_converged},
          {"reason", f.reason},
          {"n", f.y.size()}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.p = j.at("p").get<int>();
  s.q = j.at("q").get<int>();
  s.k = j.at("k").get<int>();
  s.distribution = innovation_from_string(j.at("distribution").get<std::string>());
  return s;
}

ArmaGarchXParams params_from_json(const json& j) {
  ArmaGarchXParams p;
  p.mu = j.at("mu").get<double>();
  p.phi = j.at("phi").get<std::vector<double>>();
  p.theta = j.at("theta").get<std::vector<double>>();
  p.alpha0 = j.at("alpha0").get<double>();
  p.alpha1 = j.at("alpha1").get<double>();
  p.beta = j.at("beta").get<double>();
  p.beta_x = j.at("beta_x").get<std::vector<double>>();
  p.nu = j.at("nu").get<double>();
  p.xi = j.at("xi").get<double>();
  return p;
}

json to_json(const OlsReport& r) {
  json coefs = json::array();
  for (std::size_t i = 0; i < r.coef.size(); ++i)
    coefs.push_back({{"name", r.names[i]},
                     {"estimate", r.coef[i]},
                     {"std_error", r.se[i]},
                     {"t_value", r.t_value[i]},
                     {"p_value", r.p_value[i]},
                     {"stars", significance_stars(r.p_value[i])}});
  return {{"n", r.n}, {"k", r.k}, {"sigma2", r.sigma2}, {"r_squared", r.r_squared}, {"coefficients", coefs}};
}

json to_json(const DensityMoments& m) {
  return {{"mean", m.mean}, {"std_dev", m.std_dev}, {"skewness", m.skewness}, {"kurtosis", m.kurtosis}, {"n", m.n}};
}

json to_json(const VarBacktestReport& r) {
  return {{"alpha", r.alpha},
          {"days", r.n},
          {"expected_breaches", r.expected},
          {"expected_breaches_display", r.expected_display},
          {"actual_breaches", r.x},
          {"lr_uc_statistic", r.lr_uc},
          {"lr_uc_critical", r.lr_uc_crit},
          {"lr_uc_p_value", r.lr_uc_p},
          {"reject_uc", r.reject_uc},
          {"lr_ind_statistic", r.lr_ind},
          {"lr_cc_statistic", r.lr_cc},
          {"lr_cc_critical", r.lr_cc_crit},
          {"lr_cc_p_value", r.lr_cc_p},
          {"reject_cc", r.reject_cc}};
}

json to_json(const DmReport& r) {
  return {{"statistic", std::isfinite(r.statistic) ? json(r.statistic) : json(r.statistic > 0 ? "inf" : "-inf")},
          {"p_value", r.p_value},
          {"loss", r.loss},
          {"n", r.n},
          {"no_difference", r.no_difference}};
}

void write_var_csv(std::ostream& out, const VarSeries& s) {
  out << "date,var,return,breach\n";
  char buf[96];
  for (std::size_t t = 0; t < s.size(); ++t) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%d\n", s.var_value[t], s.realized_return[t], s.breach[t] ? 1 : 0);
    out << format_date(s.dates[t]) << buf;
  }
}

// ---------------------------------------------------------------------------
// commands

namespace {

template <class Fn> int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

void require_native_format(const PipelineConfig& cfg) {
  if (cfg.format != "native")
    throw ValidationError("format '" + cfg.format +
                          "' is reserved: its column mapping has not been confirmed against the published files");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json envelope(const PipelineConfig& cfg, const std::string& kind) {
  return {{"schema_version", kSchemaVersion}, {"kind", kind}, {"config", to_json(cfg)}};
}

const std::vector<std::string> kFeatureNames = {"A_l", "A_r", "A_x", "O_l", "O_r", "O_x"};

std::array<double, 6> feature_values(const ExtremeFeatureRow& r) {
  return {r.A_l, r.A_r, r.A_x, static_cast<double>(r.O_l), static_cast<double>(r.O_r), r.O_x};
}

// Days t carrying a return r_t = ln(P_{t+1}/P_t) and a feature row dated t - lag.
struct Aligned {
  std::vector<Date> dates;
  std::vector<double> r;
  Eigen::MatrixXd X; // T x 6, raw features
  std::size_t dropped = 0;
};

Aligned align(const std::vector<ExtremeFeatureRow>& features, const PriceSeries& prices, int lag) {
  const auto rets = log_returns(prices);
  std::map<Date, const ExtremeFeatureRow*> by_date;
  for (const auto& f : features) by_date[f.date] = &f;
  Aligned a;
  std::vector<std::array<double, 6>> rows;
  for (std::size_t t = 0; t < rets.size(); ++t) {
    const auto it = by_date.find(rets.dates[t] - std::chrono::days{lag});
    if (it == by_date.end()) {
      ++a.dropped;
      continue;
    }
    a.dates.push_back(rets.dates[t]);
    a.r.push_back(rets.r[t]);
    rows.push_back(feature_values(*it->second));
  }
  a.X.resize(static_cast<Eigen::Index>(rows.size()), 6);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (int c = 0; c < 6; ++c) a.X(static_cast<Eigen::Index>(t), c) = rows[t][static_cast<std::size_t>(c)];
  return a;
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Z(X.rows(), X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const Eigen::VectorXd col = X.col(c);
    try {
      const auto s = standardize(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
      for (Eigen::Index t = 0; t < X.rows(); ++t) Z(t, c) = s.z[static_cast<std::size_t>(t)];
    } catch (const DegenerateSeriesError&) {
      const auto& name = kFeatureNames[static_cast<std::size_t>(c)];
      throw SingularityError("regressor '" + name + "' has zero variance", name);
    }
  }
  return Z;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

int cmd_extract(const fs::path& tx_path, const fs::path& out_occ, const fs::path& out_amo, const PipelineConfig& cfg,
                std::ostream& log) {
  return guarded(log, [&] {
    cfg.validate();
    require_native_format(cfg);
    const auto load = load_transactions(tx_path, cfg.calendar());
    std::vector<DatedGrid> occ, amo;
    std::size_t tx_count = 0;
    if (!load.days.empty()) {
      std::size_t g = 0;
      for (Date d = load.days.front().day; d <= load.days.back().day; d += std::chrono::days{1}) {
        ChainletMatrix m(d, cfg.N);
        if (g < load.days.size() && load.days[g].day == d) {
          m = build_matrix(d, load.days[g].txs, cfg.N);
          tx_count += load.days[g].txs.size();
          ++g;
        }
        occ.push_back(m.occurrence_grid());
        amo.push_back(m.amount_grid());
      }
    }
    std::ostringstream so, sa;
    write_matrix_file(so, occ);
    write_matrix_file(sa, amo);
    write_file_atomic(out_occ, so.str());
    write_file_atomic(out_amo, sa.str());
    if (occ.empty()) log << "warning: no transactions to extract; wrote empty matrix files\n";
    log << "extract: days=" << occ.size() << " txs=" << tx_count << " skipped_coinbase=" << load.skipped_coinbase
        << " skipped_out_of_window=" << load.skipped_out_of_window << '\n';
    return 0;
  });
}

int cmd_features(const fs::path& occ_path, const fs::path& amo_path, const fs::path& price_path,
                 const FeaturesOutputs& out, const PipelineConfig& cfg, std::ostream& log) {
  return guarded(log, [&] {
    cfg.validate();
    require_native_format(cfg);
    const auto occ = load_matrix_file(occ_path, cfg.N);
    const auto amo = load_matrix_file(amo_path, cfg.N);
    const auto matrices = combine_grids(occ, amo);
    const auto prices = load_prices(price_path, cfg.calendar());
    const auto rows = feature_series(matrices, prices);

    std::ostringstream csv;
    write_feature_csv(csv, rows);
    write_file_atomic(out.features, csv.str());

    if (out.plot_data) {
      std::map<Date, std::string> events;
      if (out.events) {
        std::ifstream in(*out.events);
        if (!in) throw ParseError("cannot open events file " + out.events->string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
          ++line_no;
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (line.empty() || line.front() == '#' || line.rfind("date,", 0) == 0) continue;
          const auto comma = line.find(',');
          if (comma == std::string::npos) throw ParseError("expected date,label", line_no);
          events[parse_date(line.substr(0, comma))] = line.substr(comma + 1);
        }
      }
      std::ostringstream plot;
      plot << (out.events ? "day_index,O_x,event\n" : "day_index,O_x\n");
      for (std::size_t d = 0; d < rows.size(); ++d) {
        plot << d + 1 << ',' << fmt17(rows[d].O_x);
        if (out.events) {
          const auto it = events.find(rows[d].date);
          plot << ',' << (it == events.end() ? "" : it->second);
        }
        plot << '\n';
      }
      write_file_atomic(*out.plot_data, plot.str());
    }
    log << "features: days=" << rows.size() << '\n';
    return 0;
  });
}

int cmd_analyze(const fs::path& features_path, const fs::path& price_path, const fs::path& out_dir,
                const PipelineConfig& cfg, std::ostream& log) {
  return guarded(log, [&] {
    cfg.validate();
    const auto features = load_feature_csv(features_path);
    const auto prices = load_prices(price_path, cfg.calendar());

    // volatility regression, optionally on lagged regressors
    const auto reg = align(features, prices, cfg.ols_lag);
    if (reg.r.size() < 30) throw InsufficientDataError("analysis needs at least 30 aligned days, got " + std::to_string(reg.r.size()));
    std::vector<double> r_sq;
    for (double r : reg.r) r_sq.push_back(r * r);
    const auto y = standardize(r_sq);
    const auto X = standardize_columns(reg.X);
    const auto ols = ols_fit(y.z, X, kFeatureNames, true);

    json ols_doc = envelope(cfg, "ols");
    ols_doc["response"] = "r_t^2";
    ols_doc["standardized"] = true;
    ols_doc["regression"] = to_json(ols);
    write_file_atomic(out_dir / "ols.json", dump(ols_doc));

    // conditional loss densities on same-day activity
    const auto same_day = align(features, prices, 0);
    if (same_day.r.size() < 30) throw InsufficientDataError("analysis needs at least 30 aligned days");
    std::vector<double> losses;
    for (double r : same_day.r) losses.push_back(-r);
    const auto L = standardize(losses).z;

    json rows = json::array();
    const auto uncond = moments(L);
    rows.push_back({{"label", "phi(L_t)"}, {"conditioning", nullptr}, {"tail", nullptr}, {"moments", to_json(uncond)}});

    const std::vector<std::pair<std::string, int>> panels = {{"A_x", 2}, {"O_x", 5}};
    for (const auto& [name, col] : panels) {
      std::vector<double> c(static_cast<std::size_t>(same_day.X.rows()));
      for (std::size_t t = 0; t < c.size(); ++t) c[t] = same_day.X(static_cast<Eigen::Index>(t), col);

      std::vector<std::pair<std::string, std::vector<double>>> curves = {{"unconditional", L}};
      for (const auto tail : {Tail::Lower, Tail::Upper}) {
        const bool lower = tail == Tail::Lower;
        const std::string label = "phi(L_t|" + name + (lower ? " < Q(" : " > Q(") +
                                  fmt17(lower ? cfg.alpha_tail : 1.0 - cfg.alpha_tail) + "))";
        json row = {{"label", label}, {"conditioning", name}, {"tail", lower ? "lower" : "upper"}};
        const auto subset = tail_subset(L, c, cfg.alpha_tail, tail);
        if (subset.size() >= 4) {
          row["moments"] = to_json(moments(subset));
          curves.emplace_back(lower ? "lower" : "upper", subset);
        } else {
          row["moments"] = nullptr;
          row["note"] = "tail subsample has " + std::to_string(subset.size()) + " observations";
          log << "warning: " << label << " has only " << subset.size() << " observations\n";
        }
        rows.push_back(row);
      }

      const auto [lo_it, hi_it] = std::minmax_element(L.begin(), L.end());
      const double pad = 0.1 * (*hi_it - *lo_it) + 0.5;
      const auto grid = linspace(*lo_it - pad, *hi_it + pad, cfg.kde_points);
      std::ostringstream csv;
      csv << "branch,grid_point,density\n";
      for (const auto& [branch, sample] : curves) {
        const auto curve = gaussian_kde(sample, grid);
        for (std::size_t g = 0; g < grid.size(); ++g)
          csv << branch << ',' << fmt17(curve.grid[g]) << ',' << fmt17(curve.density[g]) << '\n';
      }
      write_file_atomic(out_dir / ("density_" + name + ".csv"), csv.str());
    }
    json mom_doc = envelope(cfg, "conditional_moments");
    mom_doc["rows"] = rows;
    write_file_atomic(out_dir / "moments.json", dump(mom_doc));
    log << "analyze: regression days=" << reg.r.size() << " density days=" << same_day.r.size() << '\n';
    return 0;
  });
}

int cmd_backtest(const fs::path& features_path, const fs::path& price_path, const BacktestOutputs& out,
                 const PipelineConfig& cfg, ModelKind model, bool compare, std::ostream& log) {
  return guarded(log, [&] {
    cfg.validate();
    const auto features = load_feature_csv(features_path);
    const auto prices = load_prices(price_path, cfg.calendar());
    const auto data = align(features, prices, cfg.exog_lag);
    if (data.r.size() <= cfg.window + 10)
      throw InsufficientDataError("backtest needs more than window + 10 = " + std::to_string(cfg.window + 10) +
                                  " aligned days, got " + std::to_string(data.r.size()));
    const Eigen::MatrixXd x = standardize_columns(data.X).transpose();

    BacktestConfig bc;
    bc.window = cfg.window;
    bc.refit_every = cfg.refit_every;
    bc.level = cfg.var_level;
    bc.expanding = cfg.expanding;
    bc.fit.restarts = cfg.restarts;
    bc.fit.seed = cfg.seed;

    std::vector<ModelKind> kinds;
    if (compare) kinds = {ModelKind::Garch, ModelKind::Garchx};
    else kinds = {model};

    json doc = envelope(cfg, "var_backtest");
    doc["models"] = json::object();
    std::map<ModelKind, BacktestRun> runs;
    for (const auto kind : kinds) {
      const std::string name = kind == ModelKind::Garch ? "GARCH" : "GARCHX";
      ModelSpec spec{cfg.arma_p, cfg.arma_q, kind == ModelKind::Garch ? 0 : 6, innovation_from_string(cfg.distribution)};
      const Eigen::MatrixXd none;
      auto run = rolling_backtest(data.dates, data.r, kind == ModelKind::Garch ? none : x, spec, bc);
      const auto rep = coverage_report(run.series.breach, cfg.var_level);

      json m = to_json(rep);
      m["model"] = "ARMA(" + std::to_string(spec.p) + "," + std::to_string(spec.q) + ")-" + name + "(1,1)";
      m["spec"] = to_json(spec);
      m["final_params"] = to_json(run.last_params);
      json failures = json::array();
      std::size_t unconverged = 0;
      for (const auto& rf : run.refits) {
        if (!rf.ok) failures.push_back({{"date", format_date(rf.date)}, {"message", rf.message}});
        if (rf.ok && !rf.converged) ++unconverged;
      }
      m["refits"] = run.refits.size();
      m["refit_failures"] = failures;
      m["refits_unconverged"] = unconverged;
      doc["models"][name] = m;

      std::ostringstream csv;
      write_var_csv(csv, run.series);
      fs::path csv_path = out.var_csv;
      if (compare) {
        std::string lower = name;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
        csv_path.replace_filename(out.var_csv.stem().string() + "_" + lower + out.var_csv.extension().string());
      }
      write_file_atomic(csv_path, csv.str());
      log << "backtest " << name << ": days=" << rep.n << " breaches=" << rep.x << " expected=" << rep.expected_display
          << " LR.uc=" << rep.lr_uc << " LR.cc=" << rep.lr_cc << " refit_failures=" << failures.size() << '\n';
      runs.emplace(kind, std::move(run));
    }

    if (compare) {
      const auto& g = runs.at(ModelKind::Garch).series;
      const auto& gx = runs.at(ModelKind::Garchx).series;
      std::size_t end = g.size();
      if (cfg.anchor) {
        const auto it = std::find(g.dates.begin(), g.dates.end(), *cfg.anchor);
        if (it == g.dates.end()) throw ValidationError("anchor " + format_date(*cfg.anchor) + " is not a forecast day");
        end = static_cast<std::size_t>(it - g.dates.begin()) + 1;
      }
      if (end < cfg.dm_days) throw InsufficientDataError("not enough forecast days before the anchor for the comparison");
      const std::size_t begin = end - cfg.dm_days;
      std::vector<double> e1, e2;
      for (std::size_t t = begin; t < end; ++t) {
        const double r2 = g.realized_return[t] * g.realized_return[t];
        e1.push_back(r2 - g.sigma_forecast[t] * g.sigma_forecast[t]);
        e2.push_back(r2 - gx.sigma_forecast[t] * gx.sigma_forecast[t]);
      }
      const auto dm = diebold_mariano(e1, e2, cfg.dm_horizon,
                                      cfg.dm_lrv == "newey-west" ? LongRunVariance::NeweyWest : LongRunVariance::Rectangular);
      json cmp = to_json(dm);
      cmp["model_1"] = "GARCH";
      cmp["model_2"] = "GARCHX";
      cmp["error"] = "r_t^2 - sigma_t^2";
      cmp["first_day"] = format_date(g.dates[begin]);
      cmp["last_day"] = format_date(g.dates[end - 1]);
      doc["comparison"] = cmp;
      log << "diebold-mariano: DM=" << dm.statistic << " p=" << dm.p_value << '\n';
    }
    write_file_atomic(out.report, dump(doc));
    return 0;
  });
}

int cmd_synth(const SynthConfig& synth, const fs::path& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    synth.validate();
    std::mt19937_64 rng(synth.seed);
    std::poisson_distribution<int> count(synth.txs_per_day);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> second(0, 86'399);
    std::geometric_distribution<int> small_inputs(0.55), small_outputs(0.45), wide(0.08);
    std::lognormal_distribution<double> amount(std::log(2e7), 1.8);

    const Date first = parse_date(synth.start_date);
    const int N = synth.N;
    std::ostringstream txs;
    txs << "# timestamp,n_inputs,n_outputs,amount_satoshi\n";
    std::vector<double> extreme_share(synth.days, 0.0);
    for (std::size_t d = 0; d < synth.days; ++d) {
      const std::int64_t day_start =
          std::chrono::duration_cast<std::chrono::seconds>((first + std::chrono::days{d}).time_since_epoch()).count();
      std::vector<TxRecord> day;
      // one coinbase reward per day, dropped at extraction
      day.push_back({day_start + second(rng), 0, 1, 1'250'000'000});
      const int n = count(rng);
      std::size_t extremes = 0;
      for (int k = 0; k < n; ++k) {
        TxRecord tx;
        tx.timestamp = day_start + second(rng);
        if (unif(rng) < synth.extreme_prob) {
          ++extremes;
          const bool left = synth.extreme_side == "left" || (synth.extreme_side == "both" && unif(rng) < 0.5);
          if (left) {
            tx.n_inputs = N + wide(rng);
            tx.n_outputs = 1 + std::min(small_outputs(rng), N - 1);
          } else {
            tx.n_inputs = 1 + std::min(small_inputs(rng), N - 2);
            tx.n_outputs = N + wide(rng);
          }
        } else {
          tx.n_inputs = 1 + std::min(small_inputs(rng), N - 2);
          tx.n_outputs = 1 + std::min(small_outputs(rng), N - 2);
        }
        tx.amount = static_cast<std::int64_t>(std::llround(std::min(amount(rng), 2.1e15)));
        day.push_back(tx);
      }
      extreme_share[d] = n > 0 ? static_cast<double>(extremes) / n : 0.0;
      std::sort(day.begin(), day.end(), [](const TxRecord& a, const TxRecord& b) { return a.timestamp < b.timestamp; });
      for (const auto& tx : day) txs << tx.timestamp << ',' << tx.n_inputs << ',' << tx.n_outputs << ',' << tx.amount << '\n';
    }

    // GARCH-driven prices; a single beta_x couples variance to the day's extreme share
    ArmaGarchXParams gp = synth.garch_params;
    gp.phi.clear();
    gp.theta.clear();
    const int k = static_cast<int>(gp.beta_x.size());
    const ModelSpec spec{0, 0, k, Innovation::Normal};
    const std::size_t T = synth.days - 1;
    Eigen::MatrixXd x;
    if (k == 1) {
      x.resize(1, static_cast<Eigen::Index>(T));
      std::vector<double> share(extreme_share.begin(), extreme_share.begin() + static_cast<std::ptrdiff_t>(T));
      std::vector<double> z(T, 0.0);
      try {
        z = standardize(share).z;
      } catch (const std::exception&) {
      }
      for (std::size_t t = 0; t < T; ++t) x(0, static_cast<Eigen::Index>(t)) = z[t];
    }
    const auto returns = simulate(gp, spec, x, T, synth.seed ^ 0xA5A5A5A5ULL);
    PriceSeries prices;
    double p = synth.initial_price;
    for (std::size_t d = 0; d < synth.days; ++d) {
      prices.dates.push_back(first + std::chrono::days{d});
      prices.close.push_back(p);
      if (d < T) p *= std::exp(returns[d]);
    }
    std::ostringstream price_csv;
    write_prices(price_csv, prices);

    json manifest = {{"schema_version", kSchemaVersion},
                     {"kind", "synthetic_dataset"},
                     {"days", synth.days},
                     {"txs_per_day", synth.txs_per_day},
                     {"extreme_prob", synth.extreme_prob},
                     {"extreme_side", synth.extreme_side},
                     {"N", synth.N},
                     {"start_date", synth.start_date},
                     {"initial_price", synth.initial_price},
                     {"seed", synth.seed},
                     {"garch_params", to_json(gp)},
                     {"files", {"transactions.csv", "prices.csv"}}};
    write_file_atomic(out_dir / "transactions.csv", txs.str());
    write_file_atomic(out_dir / "prices.csv", price_csv.str());
    write_file_atomic(out_dir / "manifest.json", dump(manifest));
    log << "synth: days=" << synth.days << " written to " << out_dir.string() << '\n';
    return 0;
  });
}

} // namespace chainrisk
