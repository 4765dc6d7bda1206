#include "lodiag/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lodiag {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.emplace_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

std::optional<double> parse_number(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return v;
}

// Non-blank lines, with 1-based line numbers for error messages.
std::vector<std::pair<int, std::string>> read_lines(std::istream& in) {
  std::vector<std::pair<int, std::string>> lines;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!trim(line).empty()) lines.emplace_back(number, line);
  }
  return lines;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

double require_number(const std::string& cell, int line, std::size_t col) {
  if (cell.empty()) {
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col + 1) + ": blank cell");
  }
  auto v = parse_number(cell);
  if (!v) {
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col + 1) +
                     ": not a number: '" + cell + "'");
  }
  return *v;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

NumericTable read_numeric_csv(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw ParseError("empty CSV input");

  NumericTable table;
  std::size_t first = 0;
  const auto head = split_row(lines[0].second);
  bool has_header = false;
  for (const auto& cell : head)
    if (!cell.empty() && !parse_number(cell)) has_header = true;
  if (has_header) {
    table.header = head;
    first = 1;
  }
  if (first == lines.size()) throw ParseError("CSV has a header but no data rows");

  const std::size_t cols = split_row(lines[first].second).size();
  if (table.header && table.header->size() != cols) throw ParseError("header width differs from data width");
  table.values.resize(static_cast<Index>(lines.size() - first), static_cast<Index>(cols));
  for (std::size_t r = first; r < lines.size(); ++r) {
    const auto cells = split_row(lines[r].second);
    if (cells.size() != cols) {
      throw ParseError("line " + std::to_string(lines[r].first) + ": expected " + std::to_string(cols) +
                       " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cols; ++c)
      table.values(static_cast<Index>(r - first), static_cast<Index>(c)) =
          require_number(cells[c], lines[r].first, c);
  }
  return table;
}

NumericTable read_numeric_csv_file(const std::string& path) {
  auto in = open_or_throw(path);
  return read_numeric_csv(in);
}

ReturnsPanel read_returns_panel(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw ParseError("empty returns panel");
  const auto header = split_row(lines[0].second);
  if (header.size() < 2 || header[0] != "date") {
    throw ParseError("returns panel header must be 'date,<asset1>,<asset2>,...'");
  }

  ReturnsPanel panel;
  panel.assets.assign(header.begin() + 1, header.end());
  for (std::size_t c = 0; c < panel.assets.size(); ++c)
    if (panel.assets[c].empty()) throw ParseError("blank asset name in header column " + std::to_string(c + 2));

  const std::size_t p = panel.assets.size();
  panel.returns.resize(static_cast<Index>(lines.size() - 1), static_cast<Index>(p));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_row(lines[r].second);
    if (cells.size() != p + 1) {
      throw ParseError("line " + std::to_string(lines[r].first) + ": expected " + std::to_string(p + 1) +
                       " cells, found " + std::to_string(cells.size()));
    }
    if (cells[0].empty()) throw ParseError("line " + std::to_string(lines[r].first) + ": blank date");
    panel.dates.push_back(cells[0]);
    for (std::size_t c = 0; c < p; ++c)
      panel.returns(static_cast<Index>(r - 1), static_cast<Index>(c)) =
          require_number(cells[c + 1], lines[r].first, c + 1);
  }
  try {
    panel.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(e.what());
  }
  return panel;
}

ReturnsPanel read_returns_panel_file(const std::string& path) {
  auto in = open_or_throw(path);
  return read_returns_panel(in);
}

void write_matrix_csv(std::ostream& os, const Eigen::Ref<const MatrixXd>& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

void write_portfolio_csv(std::ostream& os, const PortfolioResult& result, const std::vector<std::string>& assets) {
  os << "period,date,return";
  for (const auto& a : assets) os << ',' << a;
  os << '\n';
  for (std::size_t t = 0; t < result.realized_returns.size(); ++t) {
    os << (t + 1) << ',' << result.dates[t] << ',' << format_double(result.realized_returns[t]);
    for (Index j = 0; j < result.weights[t].size(); ++j) os << ',' << format_double(result.weights[t][j]);
    os << '\n';
  }
}

void write_portfolio_summary(std::ostream& os, const PortfolioResult& result) {
  os << "statistic,value\n"
     << "periods," << result.realized_returns.size() << '\n'
     << "mean," << format_double(result.mean_return) << '\n'
     << "std_error," << format_double(result.std_error) << '\n'
     << "stdev," << format_double(result.stdev) << '\n'
     << "sharpe," << format_double(result.sharpe) << '\n';
}

}  // namespace lodiag
