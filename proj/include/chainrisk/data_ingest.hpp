#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chainrisk {

using Date = std::chrono::sys_days;

/// Parses a strict `YYYY-MM-DD` calendar date. Throws ParseError on malformed input.
Date parse_date(std::string_view text);
std::string format_date(Date d);
/// UTC calendar day containing the given unix timestamp.
Date day_of_timestamp(std::int64_t unix_seconds);

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct TxRecord {
  std::int64_t timestamp = 0;
  std::int64_t n_inputs = 0;
  std::int64_t n_outputs = 1;
  std::int64_t amount = 0; // satoshi, summed over outputs
};

enum class GapPolicy { Error, ForwardFill };
enum class OutOfWindowPolicy { Skip, Error };

struct DailyCalendar {
  Date start = Date{std::chrono::days{-2'000'000}};
  Date end = Date{std::chrono::days{2'000'000}};
  GapPolicy gap_policy = GapPolicy::Error;
  OutOfWindowPolicy out_of_window = OutOfWindowPolicy::Skip;

  bool contains(Date d) const noexcept { return d >= start && d <= end; }
  bool bounded() const noexcept;
  void validate() const;
};

struct DayGroup {
  Date day;
  std::vector<TxRecord> txs;
};

struct TransactionLoad {
  std::vector<DayGroup> days; // ordered by day
  std::size_t lines_read = 0;  // data lines, excluding headers and blanks
  std::size_t skipped_coinbase = 0;
  std::size_t skipped_out_of_window = 0;
};

TransactionLoad load_transactions(std::istream& in, const DailyCalendar& calendar);
TransactionLoad load_transactions(const std::filesystem::path& path,
                                  const DailyCalendar& calendar);

struct PriceSeries {
  std::vector<Date> dates;
  std::vector<double> close;

  std::size_t size() const noexcept { return dates.size(); }
  /// Index of `d`, or -1 when absent.
  std::ptrdiff_t find(Date d) const noexcept;
};

PriceSeries load_prices(std::istream& in, const DailyCalendar& calendar);
PriceSeries load_prices(const std::filesystem::path& path, const DailyCalendar& calendar);
void write_prices(std::ostream& out, const PriceSeries& prices);

/// One dated N×N grid from a matrix file, row-major with row = input class.
struct DatedGrid {
  Date date;
  int dim = 0;
  std::vector<std::int64_t> values;

  std::int64_t at(int i, int j) const { return values[static_cast<std::size_t>((i - 1) * dim + (j - 1))]; }
};

std::vector<DatedGrid> load_matrix_file(std::istream& in, int dim);
std::vector<DatedGrid> load_matrix_file(const std::filesystem::path& path, int dim);
void write_matrix_file(std::ostream& out, const std::vector<DatedGrid>& grids);

/// Writes through a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace chainrisk
