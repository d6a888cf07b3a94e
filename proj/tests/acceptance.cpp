// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// The data-conditional reproduction check runs only when CHAINRISK_OCC,
// CHAINRISK_AMO and CHAINRISK_PRICES point at real matrix and price files.

#include "chainrisk/pipeline.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace chainrisk;
namespace fs = std::filesystem;

namespace {

// Tolerances
constexpr double kKupiecStatTol = 0.005;
constexpr double kKupiecP1Tol = 0.001;
constexpr double kKupiecP2Tol = 0.005;
constexpr double kCriticalTol = 0.001;
constexpr double kMassTol = 1e-6;
constexpr double kMomentTol = 1e-5;
constexpr double kRoundTripTol = 1e-8;
constexpr double kPersistenceTol = 0.05;
constexpr int kRecoverySeedsNeeded = 8;
constexpr double kRecoverySeconds = 120.0;
constexpr double kCoverageSeconds = 300.0;
constexpr int kCoverageSeedsNeeded = 18;
constexpr double kSubsetRelTol = 1e-10;
constexpr double kReproRelTol = 0.20;
constexpr double kRichardsonRelTol = 1e-3;
constexpr double kReductionTol = 1e-12;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void skipped(int id, const std::string& name, const std::string& why) {
  std::printf("[SKIPPED] %2d %s: %s\n", id, name.c_str(), why.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

void criterion_1() {
  const auto a = kupiec_test(1857, 33, 0.01), b = kupiec_test(1857, 15, 0.01);
  std::vector<bool> breaches(1857, false);
  for (int i = 0; i < 33; ++i) breaches[static_cast<std::size_t>(i) * 50] = true;
  const auto rep = coverage_report(breaches, 0.01);
  const bool ok = std::abs(a.lr_uc - 9.201) <= kKupiecStatTol && std::abs(b.lr_uc - 0.742) <= kKupiecStatTol &&
                  std::abs(a.p_value - 0.002) <= kKupiecP1Tol && std::abs(b.p_value - 0.389) <= kKupiecP2Tol &&
                  std::abs(rep.expected - 18.57) < 1e-9 && rep.expected_display == 18.6 && rep.reject_uc;
  report(1, "Kupiec exactness", ok,
         fmt("LR.uc(33)=%.4f p=%.4f, LR.uc(15)=%.4f p=%.4f, expected=%.2f (display %.1f)", a.lr_uc, a.p_value, b.lr_uc,
             b.p_value, rep.expected, rep.expected_display));
}

void criterion_2() {
  const double c1 = chi_square_quantile(0.95, 1), c2 = chi_square_quantile(0.95, 2);
  report(2, "Chi-square critical values", std::abs(c1 - 3.841) <= kCriticalTol && std::abs(c2 - 5.991) <= kCriticalTol,
         fmt("chi2_1(0.95)=%.5f, chi2_2(0.95)=%.5f", c1, c2));
}

void criterion_3() {
  const Date day = parse_date("2015-01-01");
  const std::vector<TxRecord> txs{{1420070400, 20, 3, 200'000}, {1420070401, 2, 2, 1'000'000}, {1420070402, 1, 1, 800'000}};
  const auto f = extreme_features(build_matrix(day, txs, 20), 250.0);
  report(3, "A_x worked example", f.A_x == 0.1, fmt("A_x=%.17g", f.A_x));
}

void criterion_4() {
  // inputs a3, a4, a5 spend into a single output a8
  const auto c = classify(TxRecord{1420070400, 3, 1, 1}, 20);
  const auto sets = extreme_sets(20);
  const bool ok = c == ChainletClass{3, 1} && sets.left.size() == 20 && sets.right.size() == 19;
  report(4, "Chainlet taxonomy", ok,
         fmt("class C_{%d->%d}, |left|=%zu, |right|=%zu", c.i, c.j, sets.left.size(), sets.right.size()));
}

void criterion_5() {
  const ModelSpec spec{0, 0, 0, Innovation::Normal};
  ArmaGarchXParams truth;
  truth.alpha0 = 0.05;
  truth.alpha1 = 0.10;
  truth.beta = 0.85;
  truth.nu = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  int hits = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto y = simulate(truth, spec, {}, 10'000, seed);
    FitConfig cfg;
    cfg.seed = seed;
    double persistence = std::nan("");
    try {
      const auto r = fit(y, {}, spec, cfg);
      persistence = r.params.alpha1 + r.params.beta;
    } catch (const FitError& e) {
      persistence = e.best().alpha1 + e.best().beta;
    }
    if (std::abs(persistence - 0.95) <= kPersistenceTol) ++hits;
    detail += fmt("%.3f ", persistence);
  }
  const double secs = seconds_since(t0);
  report(5, "GARCH parameter recovery", hits >= kRecoverySeedsNeeded && secs < kRecoverySeconds,
         fmt("%d/10 seeds within +-0.05 of 0.95 [%s] in %.1fs", hits, detail.c_str(), secs));
}

void criterion_6() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double worst_mass = 0, worst_mean = 0, worst_var = 0, worst_rt = 0;
  for (const auto [nu, xi] : {std::pair{5.0, 1.0}, std::pair{5.0, 1.5}, std::pair{8.0, 0.7}}) {
    const auto law = InnovationLaw::skew_t(nu, xi);
    const double kink = -law.skew_shift() / law.skew_scale();
    const auto moment = [&](int k, double a, double b) {
      return oracle::integrate([&](double z) { return std::pow(z, k) * law.density(z); }, a, b, {kink});
    };
    worst_mass = std::max(worst_mass, std::abs(moment(0, -50, 50) - 1.0));
    worst_mean = std::max(worst_mean, std::abs(moment(1, -inf, inf)));
    worst_var = std::max(worst_var, std::abs(moment(2, -inf, inf) - 1.0));
    for (double p : {1e-3, 0.01, 0.05, 0.5, 0.95, 0.99, 0.999})
      worst_rt = std::max(worst_rt, std::abs(law.cdf(law.quantile(p)) - p));
  }
  const bool ok = worst_mass <= kMassTol && worst_mean <= kMomentTol && worst_var <= kMomentTol && worst_rt <= kRoundTripTol;
  report(6, "Skew-t correctness", ok,
         fmt("max |mass-1| on [-50,50]=%.2e, |mean|=%.2e, |var-1|=%.2e, |F(Q(p))-p|=%.2e", worst_mass, worst_mean,
             worst_var, worst_rt));
}

void criterion_7() {
  const ModelSpec spec{1, 0, 1, Innovation::SkewT};
  ArmaGarchXParams truth;
  truth.mu = 2e-4;
  truth.phi = {0.05};
  truth.alpha0 = 2e-5;
  truth.alpha1 = 0.10;
  truth.beta = 0.85;
  truth.beta_x = {5e-6};
  truth.nu = 6.0;
  truth.xi = 1.2;
  const std::size_t T = 5000, window = 250;
  const auto t0 = std::chrono::steady_clock::now();
  int accept = 0;
  std::size_t breaches_total = 0, within = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed * 7919);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(1, static_cast<Eigen::Index>(T + window));
    for (Eigen::Index t = 0; t < x.cols(); ++t) x(0, t) = z(rng);
    const auto y = simulate(truth, spec, x, T + window, seed);
    std::vector<Date> dates(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) dates[t] = parse_date("2000-01-01") + std::chrono::days{static_cast<int>(t)};
    BacktestConfig cfg;
    cfg.window = window;
    cfg.level = 0.01;
    cfg.fixed_params = truth;
    const auto run = rolling_backtest(dates, y, x, spec, cfg);
    const auto rep = coverage_report(run.series.breach, 0.01);
    if (!rep.reject_uc) ++accept;
    breaches_total += rep.x;
    const double se = std::sqrt(0.01 * 0.99 / static_cast<double>(rep.n));
    if (std::abs(static_cast<double>(rep.x) / static_cast<double>(rep.n) - 0.01) <= 2 * se) ++within;
  }
  const double n_all = 20.0 * static_cast<double>(T);
  const double freq = static_cast<double>(breaches_total) / n_all;
  const double se_all = std::sqrt(0.01 * 0.99 / n_all);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(freq - 0.01) <= 2 * se_all && accept >= kCoverageSeedsNeeded && secs < kCoverageSeconds;
  report(7, "VaR coverage on simulated truth", ok,
         fmt("pooled breach rate %.5f (|dev| %.2f SE), %zu/20 seeds within 2 SE, Kupiec accepted %d/20, %.1fs", freq,
             std::abs(freq - 0.01) / se_all, within, accept, secs));
}

void criterion_8() {
  std::mt19937_64 rng(2024);
  std::student_t_distribution<double> heavy(4.0);
  std::vector<double> raw(1000), c(1000);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = heavy(rng);
    c[i] = 0.5 * raw[i] + heavy(rng);
  }
  const auto L = standardize(raw).z;
  double worst = 0.0;
  for (const double alpha : {0.05, 0.1, 0.25})
    for (const auto tail : {Tail::Lower, Tail::Upper}) {
      const double q = oracle::sorted_quantile(c, tail == Tail::Lower ? alpha : 1.0 - alpha);
      std::vector<double> subset;
      for (std::size_t i = 0; i < L.size(); ++i)
        if (tail == Tail::Lower ? c[i] < q : c[i] > q) subset.push_back(L[i]);
      const auto o = oracle::four_pass_moments(subset);
      const auto m = conditional_moments(L, c, alpha, tail);
      for (const auto [got, want] : {std::pair{m.mean, o.mean}, std::pair{m.std_dev, o.sd},
                                     std::pair{m.skewness, o.skew}, std::pair{m.kurtosis, o.kurt}})
        worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-12));
    }
  const auto u = moments(L);
  const bool ok = worst <= kSubsetRelTol && std::abs(u.mean) < 1e-12 && std::abs(u.std_dev - 1.0) < 1e-12;
  report(8, "Conditional-moment oracle", ok,
         fmt("max relative deviation %.2e; unconditional mean %.1e, std %.15f", worst, u.mean, u.std_dev));
}

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

void criterion_9() {
  const std::string occ = env("CHAINRISK_OCC"), amo = env("CHAINRISK_AMO"), prices = env("CHAINRISK_PRICES");
  const std::string name = "Data-conditional reproduction";
  if (occ.empty() || amo.empty() || prices.empty()) {
    skipped(9, name, "set CHAINRISK_OCC, CHAINRISK_AMO and CHAINRISK_PRICES to the published files to run");
    return;
  }
  PipelineConfig cfg;
  cfg.forward_fill = !env("CHAINRISK_FORWARD_FILL").empty();
  if (const auto s = env("CHAINRISK_START"); !s.empty()) cfg.start = parse_date(s);
  if (const auto e = env("CHAINRISK_END"); !e.empty()) cfg.end = parse_date(e);
  const fs::path dir = fs::temp_directory_path() / "chainrisk_acceptance_repro";
  fs::create_directories(dir);
  std::ostringstream log;
  FeaturesOutputs fo;
  fo.features = dir / "features.csv";
  if (cmd_features(occ, amo, prices, fo, cfg, log) != 0 || cmd_analyze(fo.features, prices, dir, cfg, log) != 0) {
    report(9, name, false, "pipeline failed: " + log.str());
    return;
  }
  const auto read = [](const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
  };
  const auto ols = read(dir / "ols.json").at("regression").at("coefficients");
  const std::vector<std::pair<std::string, int>> signs = {{"A_l", 1}, {"A_r", 1}, {"A_x", -1},
                                                          {"O_l", -1}, {"O_r", -1}, {"O_x", 1}};
  std::string detail = "signs:";
  bool ok = true;
  for (const auto& [n, s] : signs)
    for (const auto& c : ols)
      if (c.at("name") == n) {
        const double est = c.at("estimate").get<double>();
        const bool match = (est > 0) == (s > 0);
        ok = ok && match;
        detail += fmt(" %s=%+.3f%s", n.c_str(), est, match ? "" : "(x)");
      }
  // published moments: mean, sd, skew, kurt for the four conditional rows
  const double table[4][4] = {{-0.047, 1.107, 3.283, 31.618},
                              {0.0861, 0.843, 1.590, 6.046},
                              {-0.081, 0.633, 1.296, 8.114},
                              {0.118, 0.930, 2.025, 10.457}};
  const auto rows = read(dir / "moments.json").at("rows");
  int within = 0, total = 0;
  for (int r = 0; r < 4; ++r) {
    const auto& m = rows.at(static_cast<std::size_t>(r + 1)).at("moments");
    if (m.is_null()) {
      total += 4;
      continue;
    }
    const double got[4] = {m.at("mean").get<double>(), m.at("std_dev").get<double>(), m.at("skewness").get<double>(),
                           m.at("kurtosis").get<double>()};
    for (int k = 0; k < 4; ++k) {
      ++total;
      if (rel_err(got[k], table[r][k]) <= kReproRelTol) ++within;
    }
  }
  ok = ok && within == total;
  report(9, name, ok, detail + fmt("; conditional moments within 20%%: %d/%d", within, total));
}

void criterion_10() {
  const ModelSpec spec{1, 1, 2, Innovation::SkewT};
  const std::size_t T = 1000;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(2, static_cast<Eigen::Index>(T));
  for (Eigen::Index t = 0; t < x.cols(); ++t) x.col(t) << z(rng), z(rng);
  ArmaGarchXParams truth;
  truth.mu = 1e-3;
  truth.phi = {0.1};
  truth.theta = {0.1};
  truth.alpha0 = 2e-5;
  truth.alpha1 = 0.1;
  truth.beta = 0.85;
  truth.beta_x = {2e-6, -1e-6};
  truth.nu = 6;
  truth.xi = 1.1;
  const auto y = simulate(truth, spec, x, T, 100);
  double var = 0.0, mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(T);
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(T - 1);
  const ParameterTransform tr(spec, mean, var);
  const Objective f = [&](const Eigen::VectorXd& th) { return neg_log_likelihood(y, x, tr.from_unconstrained(th), spec); };

  double worst = 0.0;
  for (int point = 0; point < 5; ++point) {
    ArmaGarchXParams p = truth;
    p.mu = mean + 0.2 * std::sqrt(var) * (u(rng) - 0.5);
    p.phi = {0.4 * (u(rng) - 0.5)};
    p.theta = {0.4 * (u(rng) - 0.5)};
    p.alpha1 = 0.03 + 0.15 * u(rng);
    p.beta = 0.6 + (0.95 - p.alpha1 - 0.6) * u(rng);
    p.alpha0 = var * (1 - p.alpha1 - p.beta) * (0.5 + u(rng));
    p.beta_x = {1e-6 * (u(rng) - 0.5), 1e-6 * (u(rng) - 0.5)};
    p.nu = 4 + 8 * u(rng);
    p.xi = 0.8 + 0.5 * u(rng);
    const Eigen::VectorXd th = tr.to_unconstrained(p);
    const Eigen::VectorXd g1 = numerical_gradient(f, th, 1e-5);
    const Eigen::VectorXd g2 = numerical_gradient(f, th, 2e-5);
    const Eigen::VectorXd rich = (4.0 * g1 - g2) / 3.0;
    for (Eigen::Index i = 0; i < th.size(); ++i)
      worst = std::max(worst, std::abs(g1(i) - rich(i)) / std::max(1.0, std::abs(rich(i))));
  }

  const ModelSpec plain{1, 1, 0, Innovation::SkewT};
  ArmaGarchXParams zero = truth, base = truth;
  zero.beta_x = {0.0, 0.0};
  base.beta_x.clear();
  const double a = neg_log_likelihood(y, x, zero, spec), b = neg_log_likelihood(y, {}, base, plain);
  const double reduction = std::abs(a - b);
  report(10, "Likelihood self-consistency", worst <= kRichardsonRelTol && reduction <= kReductionTol,
         fmt("max relative gradient deviation from Richardson estimate %.2e over 5 points; |NLL_x0 - NLL_garch|=%.1e",
             worst, reduction));
}

} // namespace

int main() {
  const auto guard = [](int id, void (*fn)()) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, "criterion", false, std::string("exception: ") + e.what());
    }
  };
  guard(1, criterion_1);
  guard(2, criterion_2);
  guard(3, criterion_3);
  guard(4, criterion_4);
  guard(5, criterion_5);
  guard(6, criterion_6);
  guard(7, criterion_7);
  guard(8, criterion_8);
  guard(9, criterion_9);
  guard(10, criterion_10);
  std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
