#include "chainrisk/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <unistd.h>

namespace chainrisk {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r')) ++pos;
    if (pos >= s.size()) break;
    std::size_t end = pos;
    while (end < s.size() && s[end] != ' ' && s[end] != '\t' && s[end] != '\r') ++end;
    out.push_back(s.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && !s.empty();
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && !s.empty();
}

std::int64_t parse_int_field(std::string_view s, const char* name, std::size_t line) {
  std::int64_t v = 0;
  if (!parse_int(s, v))
    throw ParseError("invalid " + std::string(name) + " '" + std::string(s) + "'", line);
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

} // namespace

ParseError::ParseError(const std::string& what, std::size_t line)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

Date parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw ParseError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  std::int64_t y = 0, m = 0, d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
      !parse_int(text.substr(8, 2), d))
    throw ParseError("invalid date '" + std::string(text) + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw ParseError("invalid calendar date '" + std::string(text) + "'");
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date day_of_timestamp(std::int64_t unix_seconds) {
  return std::chrono::floor<std::chrono::days>(std::chrono::sys_seconds{std::chrono::seconds{unix_seconds}});
}

bool DailyCalendar::bounded() const noexcept {
  const DailyCalendar defaults;
  return start != defaults.start || end != defaults.end;
}

void DailyCalendar::validate() const {
  if (start > end)
    throw ValidationError("calendar start " + format_date(start) + " is after end " + format_date(end));
}

TransactionLoad load_transactions(std::istream& in, const DailyCalendar& calendar) {
  calendar.validate();
  TransactionLoad load;
  std::map<Date, std::vector<TxRecord>> grouped;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    ++load.lines_read;
    const auto fields = split(line, ',');
    if (fields.size() != 4)
      throw ParseError("expected 4 fields (timestamp,n_inputs,n_outputs,amount), got " +
                           std::to_string(fields.size()),
                       line_no);
    TxRecord tx;
    tx.timestamp = parse_int_field(fields[0], "timestamp", line_no);
    tx.n_inputs = parse_int_field(fields[1], "n_inputs", line_no);
    tx.n_outputs = parse_int_field(fields[2], "n_outputs", line_no);
    tx.amount = parse_int_field(fields[3], "amount", line_no);
    if (tx.n_inputs < 0) throw ParseError("negative n_inputs", line_no);
    if (tx.n_outputs < 1) throw ParseError("n_outputs must be at least 1", line_no);
    if (tx.amount < 0) throw ParseError("negative amount", line_no);

    const Date day = day_of_timestamp(tx.timestamp);
    if (!calendar.contains(day)) {
      if (calendar.out_of_window == OutOfWindowPolicy::Error)
        throw ParseError("timestamp " + std::to_string(tx.timestamp) + " (" + format_date(day) +
                             ") outside analysis window",
                         line_no);
      ++load.skipped_out_of_window;
      continue;
    }
    if (tx.n_inputs == 0) {
      ++load.skipped_coinbase;
      continue;
    }
    grouped[day].push_back(tx);
  }
  load.days.reserve(grouped.size());
  for (auto& [day, txs] : grouped) load.days.push_back({day, std::move(txs)});
  return load;
}

TransactionLoad load_transactions(const std::filesystem::path& path, const DailyCalendar& calendar) {
  auto in = open_input(path);
  return load_transactions(in, calendar);
}

std::ptrdiff_t PriceSeries::find(Date d) const noexcept {
  const auto it = std::lower_bound(dates.begin(), dates.end(), d);
  if (it == dates.end() || *it != d) return -1;
  return it - dates.begin();
}

PriceSeries load_prices(std::istream& in, const DailyCalendar& calendar) {
  calendar.validate();
  std::vector<std::pair<Date, double>> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2) throw ParseError("expected 2 fields (date,close)", line_no);
    if (rows.empty() && fields[0] == "date") continue; // header
    Date d;
    try {
      d = parse_date(fields[0]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    double close = 0.0;
    if (!parse_double(fields[1], close)) throw ParseError("invalid close '" + std::string(fields[1]) + "'", line_no);
    if (!std::isfinite(close) || close <= 0.0)
      throw ValidationError("line " + std::to_string(line_no) + ": non-positive price " + std::string(fields[1]));
    if (!rows.empty() && d <= rows.back().first) {
      if (d == rows.back().first) throw ValidationError("duplicate date " + format_date(d));
      throw ValidationError("dates out of order at " + format_date(d));
    }
    if (calendar.contains(d)) rows.emplace_back(d, close);
  }
  if (rows.size() < 2) throw ValidationError("price file needs at least 2 rows in the analysis window");

  const Date first = calendar.bounded() ? calendar.start : rows.front().first;
  const Date last = calendar.bounded() ? calendar.end : rows.back().first;
  PriceSeries series;
  std::size_t k = 0;
  for (Date d = first; d <= last; d += std::chrono::days{1}) {
    if (k < rows.size() && rows[k].first == d) {
      series.dates.push_back(d);
      series.close.push_back(rows[k].second);
      ++k;
      continue;
    }
    if (calendar.gap_policy == GapPolicy::Error || series.close.empty())
      throw ValidationError("missing price for " + format_date(d));
    series.dates.push_back(d);
    series.close.push_back(series.close.back());
  }
  return series;
}

PriceSeries load_prices(const std::filesystem::path& path, const DailyCalendar& calendar) {
  auto in = open_input(path);
  return load_prices(in, calendar);
}

void write_prices(std::ostream& out, const PriceSeries& prices) {
  out << "date,close\n";
  char buf[64];
  for (std::size_t t = 0; t < prices.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%.17g", prices.close[t]);
    out << format_date(prices.dates[t]) << ',' << buf << '\n';
  }
}

std::vector<DatedGrid> load_matrix_file(std::istream& in, int dim) {
  if (dim < 2) throw ValidationError("matrix dimension must be at least 2");
  const std::size_t expected = static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim);
  std::vector<DatedGrid> grids;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tokens = split_ws(line);
    if (tokens.size() - 1 != expected)
      throw ParseError("expected " + std::to_string(expected) + " values (N=" + std::to_string(dim) +
                           "), got " + std::to_string(tokens.size() - 1),
                       line_no);
    DatedGrid g;
    try {
      g.date = parse_date(tokens[0]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    g.dim = dim;
    g.values.resize(expected);
    for (std::size_t c = 0; c < expected; ++c) {
      const auto tok = tokens[c + 1];
      std::int64_t v = 0;
      if (!parse_int(tok, v)) {
        double dv = 0.0;
        if (!parse_double(tok, dv) || !std::isfinite(dv))
          throw ParseError("invalid value '" + std::string(tok) + "'", line_no);
        v = std::llround(dv);
      }
      if (v < 0)
        throw ValidationError("line " + std::to_string(line_no) + ": negative value " + std::string(tok));
      g.values[c] = v;
    }
    if (!grids.empty() && g.date <= grids.back().date)
      throw ValidationError("line " + std::to_string(line_no) +
                            (g.date == grids.back().date ? ": duplicate date " : ": date out of order ") +
                            format_date(g.date));
    grids.push_back(std::move(g));
  }
  return grids;
}

std::vector<DatedGrid> load_matrix_file(const std::filesystem::path& path, int dim) {
  auto in = open_input(path);
  return load_matrix_file(in, dim);
}

void write_matrix_file(std::ostream& out, const std::vector<DatedGrid>& grids) {
  for (const auto& g : grids) {
    out << format_date(g.date);
    for (const auto v : g.values) out << ' ' << v;
    out << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

} // namespace chainrisk
