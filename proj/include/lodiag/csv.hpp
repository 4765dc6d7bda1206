#pragma once

// Plain comma-separated I/O for numeric matrices and return panels. Numbers
// are written with 17 significant digits so a write/read cycle is lossless.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lodiag/matrix.hpp"
#include "lodiag/portfolio.hpp"

namespace lodiag {

struct NumericTable {
  std::optional<std::vector<std::string>> header;
  MatrixXd values;
};

/// Numeric matrix with an optional header row, detected as a first row
/// containing any non-numeric cell. Blank cells and ragged rows throw ParseError.
NumericTable read_numeric_csv(std::istream& in);
NumericTable read_numeric_csv_file(const std::string& path);

/// Header "date,<asset1>,...,<assetp>" followed by one row per period.
ReturnsPanel read_returns_panel(std::istream& in);
ReturnsPanel read_returns_panel_file(const std::string& path);

void write_matrix_csv(std::ostream& os, const Eigen::Ref<const MatrixXd>& m);

/// period,date,return,<asset weights...>
void write_portfolio_csv(std::ostream& os, const PortfolioResult& result, const std::vector<std::string>& assets);

/// statistic,value rows: periods, mean, std_error, stdev, sharpe.
void write_portfolio_summary(std::ostream& os, const PortfolioResult& result);

std::string format_double(double x);

}  // namespace lodiag
