#include "chainrisk/chainlet.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace chainrisk {

AlignmentError::AlignmentError(const std::string& what, std::vector<Date> missing)
    : std::runtime_error(what), missing_(std::move(missing)) {}

ChainletClass classify(const TxRecord& tx, int threshold) {
  if (threshold < 2) throw ClassificationError("chainlet threshold must be at least 2");
  if (tx.n_inputs < 1 || tx.n_outputs < 1)
    throw ClassificationError("cannot classify a transaction with " + std::to_string(tx.n_inputs) +
                              " inputs and " + std::to_string(tx.n_outputs) + " outputs");
  return {static_cast<int>(std::min<std::int64_t>(tx.n_inputs, threshold)),
          static_cast<int>(std::min<std::int64_t>(tx.n_outputs, threshold))};
}

ChainletMatrix::ChainletMatrix(Date date, int dim)
    : date_(date), dim_(dim), occurrence_(static_cast<std::size_t>(dim * dim), 0),
      amount_(static_cast<std::size_t>(dim * dim), 0) {
  if (dim < 2) throw ClassificationError("chainlet matrix dimension must be at least 2");
}

ChainletMatrix ChainletMatrix::from_grids(const DatedGrid& occurrence, const DatedGrid& amount) {
  if (occurrence.date != amount.date)
    throw ValidationError("occurrence/amount date mismatch: " + format_date(occurrence.date) + " vs " +
                          format_date(amount.date));
  if (occurrence.dim != amount.dim) throw ValidationError("occurrence/amount dimension mismatch");
  ChainletMatrix m(occurrence.date, occurrence.dim);
  for (std::size_t c = 0; c < occurrence.values.size(); ++c) {
    if (occurrence.values[c] == 0 && amount.values[c] != 0) {
      const int i = static_cast<int>(c) / occurrence.dim + 1;
      const int j = static_cast<int>(c) % occurrence.dim + 1;
      throw ValidationError(format_date(occurrence.date) + ": cell (" + std::to_string(i) + "," +
                            std::to_string(j) + ") has an amount but no occurrences");
    }
  }
  m.occurrence_ = occurrence.values;
  m.amount_ = amount.values;
  return m;
}

std::size_t ChainletMatrix::index(int i, int j) const {
  if (i < 1 || i > dim_ || j < 1 || j > dim_)
    throw std::out_of_range("chainlet cell (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
  return static_cast<std::size_t>((i - 1) * dim_ + (j - 1));
}

void ChainletMatrix::add(const ChainletClass& c, std::int64_t satoshi) {
  const auto k = index(c.i, c.j);
  occurrence_[k] += 1;
  amount_[k] += satoshi;
}

std::int64_t ChainletMatrix::total_occurrences() const noexcept {
  return std::accumulate(occurrence_.begin(), occurrence_.end(), std::int64_t{0});
}

std::int64_t ChainletMatrix::total_amount() const noexcept {
  return std::accumulate(amount_.begin(), amount_.end(), std::int64_t{0});
}

ChainletMatrix build_matrix(Date day, std::span<const TxRecord> txs, int threshold) {
  ChainletMatrix m(day, threshold);
  for (const auto& tx : txs) m.add(classify(tx, threshold), tx.amount);
  return m;
}

ExtremeSets extreme_sets(int threshold) {
  if (threshold < 2) throw ClassificationError("chainlet threshold must be at least 2");
  ExtremeSets sets;
  for (int j = 1; j <= threshold; ++j) sets.left.push_back({threshold, j});
  for (int i = 1; i < threshold; ++i) sets.right.push_back({i, threshold});
  return sets;
}

ExtremeKind extreme_kind(const ChainletClass& c, int threshold) noexcept {
  if (c.i == threshold) return ExtremeKind::Left;
  if (c.j == threshold) return ExtremeKind::Right;
  return ExtremeKind::None;
}

ExtremeFeatureRow extreme_features(const ChainletMatrix& m, double price_usd) {
  if (!(price_usd > 0.0)) throw ValidationError("price must be positive");
  const int n = m.dim();
  ExtremeFeatureRow row;
  row.date = m.date();
  std::int64_t sat_l = 0, sat_r = 0;
  for (int j = 1; j <= n; ++j) {
    row.O_l += m.occurrence(n, j);
    sat_l += m.amount(n, j);
  }
  for (int i = 1; i < n; ++i) {
    row.O_r += m.occurrence(i, n);
    sat_r += m.amount(i, n);
  }
  const auto total_occ = m.total_occurrences();
  const auto total_sat = m.total_amount();
  row.A_l = static_cast<double>(sat_l) * price_usd / kSatoshiPerBitcoin;
  row.A_r = static_cast<double>(sat_r) * price_usd / kSatoshiPerBitcoin;
  row.O_x = total_occ > 0 ? static_cast<double>(row.O_l + row.O_r) / static_cast<double>(total_occ) : 0.0;
  row.A_x = total_sat > 0 ? static_cast<double>(sat_l + sat_r) / static_cast<double>(total_sat) : 0.0;
  return row;
}

std::vector<ExtremeFeatureRow> feature_series(std::span<const ChainletMatrix> matrices,
                                              const PriceSeries& prices) {
  std::vector<const ChainletMatrix*> ordered;
  ordered.reserve(matrices.size());
  for (const auto& m : matrices) ordered.push_back(&m);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->date() < b->date(); });

  std::vector<Date> missing;
  for (const auto* m : ordered)
    if (prices.find(m->date()) < 0) missing.push_back(m->date());
  if (!missing.empty()) {
    std::string msg = "no price for " + std::to_string(missing.size()) + " matrix day(s):";
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) msg += " " + format_date(missing[k]);
    if (missing.size() > 20) msg += " ...";
    throw AlignmentError(msg, std::move(missing));
  }

  std::vector<ExtremeFeatureRow> rows;
  rows.reserve(ordered.size());
  for (const auto* m : ordered)
    rows.push_back(extreme_features(*m, prices.close[static_cast<std::size_t>(prices.find(m->date()))]));
  return rows;
}

std::vector<ChainletMatrix> combine_grids(std::span<const DatedGrid> occurrence,
                                          std::span<const DatedGrid> amount) {
  if (occurrence.size() != amount.size())
    throw ValidationError("occurrence file has " + std::to_string(occurrence.size()) +
                          " days but amount file has " + std::to_string(amount.size()));
  std::vector<ChainletMatrix> out;
  out.reserve(occurrence.size());
  for (std::size_t d = 0; d < occurrence.size(); ++d)
    out.push_back(ChainletMatrix::from_grids(occurrence[d], amount[d]));
  return out;
}

namespace {

std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

void write_feature_csv(std::ostream& out, std::span<const ExtremeFeatureRow> rows) {
  out << "date,A_l,A_r,A_x,O_l,O_r,O_x\n";
  for (const auto& r : rows)
    out << format_date(r.date) << ',' << full_precision(r.A_l) << ',' << full_precision(r.A_r) << ','
        << full_precision(r.A_x) << ',' << r.O_l << ',' << r.O_r << ',' << full_precision(r.O_x) << '\n';
}

std::vector<ExtremeFeatureRow> load_feature_csv(std::istream& in) {
  std::vector<ExtremeFeatureRow> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty() || raw.front() == '#' || raw.rfind("date", 0) == 0) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
      const auto next = raw.find(',', pos);
      f.push_back(raw.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (f.size() != 7) throw ParseError("feature row needs 7 fields, got " + std::to_string(f.size()), line_no);
    ExtremeFeatureRow r;
    try {
      r.date = parse_date(f[0]);
      std::size_t used = 0;
      const auto num = [&](const std::string& s) {
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      };
      r.A_l = num(f[1]);
      r.A_r = num(f[2]);
      r.A_x = num(f[3]);
      r.O_l = static_cast<std::int64_t>(std::llround(num(f[4])));
      r.O_r = static_cast<std::int64_t>(std::llround(num(f[5])));
      r.O_x = num(f[6]);
    } catch (const std::exception& e) {
      throw ParseError(std::string("invalid feature row: ") + e.what(), line_no);
    }
    if (!rows.empty() && r.date <= rows.back().date)
      throw ValidationError("feature dates must be strictly increasing at " + format_date(r.date));
    rows.push_back(r);
  }
  return rows;
}

std::vector<ExtremeFeatureRow> load_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return load_feature_csv(in);
}

double threshold_percentile(std::span<const TxRecord> txs, int threshold) {
  if (txs.empty()) return 0.0;
  const auto below = std::count_if(txs.begin(), txs.end(), [threshold](const TxRecord& tx) {
    return tx.n_inputs < threshold && tx.n_outputs < threshold;
  });
  return static_cast<double>(below) / static_cast<double>(txs.size());
}

int threshold_for_percentile(std::span<const TxRecord> txs, double quantile) {
  if (txs.empty()) throw ValidationError("empty transaction corpus");
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw ValidationError("quantile must be within [0,1]");
  std::vector<std::int64_t> widest;
  widest.reserve(txs.size());
  for (const auto& tx : txs) widest.push_back(std::max(tx.n_inputs, tx.n_outputs));
  std::sort(widest.begin(), widest.end());
  // share below N is the count of widest < N; find the smallest N with share >= quantile
  const auto needed = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(widest.size()) - 1e-12));
  if (needed == 0) return 2;
  return static_cast<int>(std::max<std::int64_t>(2, widest[needed - 1] + 1));
}

} // namespace chainrisk
