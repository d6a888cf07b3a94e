#pragma once

#include "chainrisk/data_ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace chainrisk {

inline constexpr int kDefaultThreshold = 20;
inline constexpr double kSatoshiPerBitcoin = 1e8;

class ClassificationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class AlignmentError : public std::runtime_error {
public:
  AlignmentError(const std::string& what, std::vector<Date> missing);
  const std::vector<Date>& missing() const noexcept { return missing_; }

private:
  std::vector<Date> missing_;
};

/// Chainlet type C_{i→j}, with input and output counts clamped to the threshold.
struct ChainletClass {
  int i = 1;
  int j = 1;
  friend bool operator==(const ChainletClass&, const ChainletClass&) = default;
  friend auto operator<=>(const ChainletClass&, const ChainletClass&) = default;
};

ChainletClass classify(const TxRecord& tx, int threshold = kDefaultThreshold);

/// Daily occurrence and satoshi-amount tallies over chainlet classes.
/// Cells are addressed 1-based as (input class, output class).
class ChainletMatrix {
public:
  ChainletMatrix() = default;
  ChainletMatrix(Date date, int dim);
  /// Pairs an occurrence grid with an amount grid of the same date and dimension.
  static ChainletMatrix from_grids(const DatedGrid& occurrence, const DatedGrid& amount);

  Date date() const noexcept { return date_; }
  int dim() const noexcept { return dim_; }

  std::int64_t occurrence(int i, int j) const { return occurrence_[index(i, j)]; }
  std::int64_t amount(int i, int j) const { return amount_[index(i, j)]; }
  void add(const ChainletClass& c, std::int64_t satoshi);

  std::int64_t total_occurrences() const noexcept;
  std::int64_t total_amount() const noexcept;

  DatedGrid occurrence_grid() const { return {date_, dim_, occurrence_}; }
  DatedGrid amount_grid() const { return {date_, dim_, amount_}; }

private:
  std::size_t index(int i, int j) const;

  Date date_{};
  int dim_ = 0;
  std::vector<std::int64_t> occurrence_;
  std::vector<std::int64_t> amount_;
};

ChainletMatrix build_matrix(Date day, std::span<const TxRecord> txs, int threshold = kDefaultThreshold);

struct ExtremeSets {
  std::vector<ChainletClass> left;  // bottom row, i = N
  std::vector<ChainletClass> right; // far-right column, j = N, i < N
};

ExtremeSets extreme_sets(int threshold);

enum class ExtremeKind { None, Left, Right };
ExtremeKind extreme_kind(const ChainletClass& c, int threshold) noexcept;

struct ExtremeFeatureRow {
  Date date{};
  double A_l = 0.0; // USD
  double A_r = 0.0; // USD
  double A_x = 0.0;
  std::int64_t O_l = 0;
  std::int64_t O_r = 0;
  double O_x = 0.0;
};

ExtremeFeatureRow extreme_features(const ChainletMatrix& m, double price_usd);

/// One row per matrix date, each priced at that day's close.
/// Throws AlignmentError listing every matrix date without a price.
std::vector<ExtremeFeatureRow> feature_series(std::span<const ChainletMatrix> matrices,
                                              const PriceSeries& prices);

/// Pairs occurrence and amount files by date into full matrices.
std::vector<ChainletMatrix> combine_grids(std::span<const DatedGrid> occurrence,
                                          std::span<const DatedGrid> amount);

/// Feature CSV `date,A_l,A_r,A_x,O_l,O_r,O_x` with decimals at full precision.
void write_feature_csv(std::ostream& out, std::span<const ExtremeFeatureRow> rows);
std::vector<ExtremeFeatureRow> load_feature_csv(std::istream& in);
std::vector<ExtremeFeatureRow> load_feature_csv(const std::filesystem::path& path);

/// Share of transactions whose input and output counts both stay below `threshold`.
double threshold_percentile(std::span<const TxRecord> txs, int threshold);
/// Smallest threshold whose non-extreme share reaches `quantile`.
int threshold_for_percentile(std::span<const TxRecord> txs, double quantile);

} // namespace chainrisk
