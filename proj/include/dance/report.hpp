#ifndef DANCE_REPORT_HPP
#define DANCE_REPORT_HPP

#include <string>
#include <vector>

#include "dance/costmodel.hpp"

namespace dance {

struct ReportRow {
  std::string run;
  std::string method;  // series tag: dance / edd / no-penalty
  double accuracy_error_pct = 0.0;
  CostMetrics metrics;
  double edap = 0.0;
  std::string dataflow;
};

std::string report_csv(const std::vector<ReportRow>& rows);

// Error-vs-EDAP scatter, log-scaled EDAP axis, one colored series per
// method. Plain hand-emitted SVG so reports stay dependency-free and
// diffable.
std::string scatter_svg(const std::vector<ReportRow>& rows);

// Loads every run directory's final.json into a report row; runs without
// one are returned in `skipped`.
std::vector<ReportRow> collect_report_rows(const std::vector<std::string>& run_dirs,
                                           std::vector<std::string>& skipped);

}  // namespace dance

#endif
