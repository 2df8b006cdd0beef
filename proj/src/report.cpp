#include "dance/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dance/cosearch.hpp"
#include "dance/util.hpp"

namespace dance {

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream ss;
  ss << "run,method,accuracy_error_pct,latency_ms,energy_mj,area_um2,edap,dataflow\n";
  for (const auto& r : rows) {
    ss << r.run << ',' << r.method << ',' << format_g9(r.accuracy_error_pct) << ','
       << format_g9(r.metrics.latency_ms) << ',' << format_g9(r.metrics.energy_mj) << ','
       << format_g9(r.metrics.area_um2) << ',' << format_g9(r.edap) << ',' << r.dataflow << '\n';
  }
  return ss.str();
}

namespace {

std::string series_color(const std::string& method) {
  static const std::map<std::string, std::string> colors = {
      {"dance", "#1f77b4"}, {"edd", "#d62728"}, {"no-penalty", "#2ca02c"}};
  const auto it = colors.find(method);
  return it != colors.end() ? it->second : "#7f7f7f";
}

std::string xml_escape(const std::string& in) {
  std::string out;
  for (char c : in) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string scatter_svg(const std::vector<ReportRow>& rows) {
  const int width = 640, height = 480;
  const int ml = 70, mr = 30, mt = 30, mb = 60;
  const double plot_w = width - ml - mr;
  const double plot_h = height - mt - mb;

  double log_min = 0.0, log_max = 1.0, err_min = 0.0, err_max = 1.0;
  if (!rows.empty()) {
    log_min = 1e300;
    log_max = -1e300;
    err_min = 1e300;
    err_max = -1e300;
    for (const auto& r : rows) {
      const double lx = std::log10(std::max(r.edap, 1e-300));
      log_min = std::min(log_min, lx);
      log_max = std::max(log_max, lx);
      err_min = std::min(err_min, r.accuracy_error_pct);
      err_max = std::max(err_max, r.accuracy_error_pct);
    }
    if (log_max - log_min < 0.5) {
      log_min -= 0.25;
      log_max += 0.25;
    }
    const double pad = std::max(0.5, (err_max - err_min) * 0.1);
    err_min = std::max(0.0, err_min - pad);
    err_max += pad;
  }

  auto x_of = [&](double edap) {
    const double lx = std::log10(std::max(edap, 1e-300));
    return ml + (lx - log_min) / (log_max - log_min) * plot_w;
  };
  auto y_of = [&](double err) {
    return mt + (1.0 - (err - err_min) / (err_max - err_min)) * plot_h;
  };

  std::ostringstream ss;
  ss << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  ss << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  ss << "  <rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << plot_w << "\" height=\""
     << plot_h << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  // x ticks at decades
  for (int d = static_cast<int>(std::ceil(log_min)); d <= static_cast<int>(std::floor(log_max));
       ++d) {
    const double x = ml + (d - log_min) / (log_max - log_min) * plot_w;
    ss << "  <line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\""
       << mt + plot_h << "\" stroke=\"#dddddd\"/>\n";
    ss << "  <text x=\"" << x << "\" y=\"" << mt + plot_h + 18
       << "\" font-size=\"11\" text-anchor=\"middle\">1e" << d << "</text>\n";
  }
  // y ticks
  for (int i = 0; i <= 4; ++i) {
    const double err = err_min + (err_max - err_min) * i / 4.0;
    const double y = y_of(err);
    ss << "  <line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + plot_w << "\" y2=\"" << y
       << "\" stroke=\"#eeeeee\"/>\n";
    ss << "  <text x=\"" << ml - 8 << "\" y=\"" << y + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << format_g9(err) << "</text>\n";
  }

  ss << "  <text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 14
     << "\" font-size=\"13\" text-anchor=\"middle\">EDAP (ms x mJ x um^2, log scale)</text>\n";
  ss << "  <text x=\"18\" y=\"" << mt + plot_h / 2
     << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << mt + plot_h / 2 << ")\">validation error (%)</text>\n";

  for (const auto& r : rows) {
    ss << "  <circle cx=\"" << x_of(r.edap) << "\" cy=\"" << y_of(r.accuracy_error_pct)
       << "\" r=\"5\" fill=\"" << series_color(r.method) << "\" fill-opacity=\"0.85\">"
       << "<title>" << xml_escape(r.run) << "</title></circle>\n";
  }

  // legend
  std::vector<std::string> methods;
  for (const auto& r : rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const double y = mt + 14 + 18.0 * i;
    ss << "  <circle cx=\"" << ml + 14 << "\" cy=\"" << y << "\" r=\"5\" fill=\""
       << series_color(methods[i]) << "\"/>\n";
    ss << "  <text x=\"" << ml + 26 << "\" y=\"" << y + 4 << "\" font-size=\"12\">"
       << xml_escape(methods[i]) << "</text>\n";
  }

  ss << "</svg>\n";
  return ss.str();
}

std::vector<ReportRow> collect_report_rows(const std::vector<std::string>& run_dirs,
                                           std::vector<std::string>& skipped) {
  std::vector<ReportRow> rows;
  for (const auto& dir : run_dirs) {
    const auto final_path = std::filesystem::path(dir) / "final.json";
    if (!std::filesystem::exists(final_path)) {
      skipped.push_back(dir);
      continue;
    }
    const auto j = nlohmann::json::parse(read_text_file(final_path.string()));
    ReportRow row;
    row.run = std::filesystem::path(dir).filename().string();
    if (row.run.empty()) row.run = dir;
    const std::string variant = j.value("variant", "dance");
    if (variant == "no_penalty")
      row.method = "no-penalty";
    else if (variant == "edd_original" || variant == "edd_fixed")
      row.method = "edd";
    else
      row.method = "dance";
    row.accuracy_error_pct = 100.0 - j.at("val_accuracy_pct").get<double>();
    const auto& m = j.at("oracle_metrics");
    row.metrics.latency_ms = m.at("latency_ms").get<double>();
    row.metrics.energy_mj = m.at("energy_mj").get<double>();
    row.metrics.area_um2 = m.at("area_um2").get<double>();
    row.edap = m.at("edap").get<double>();
    row.dataflow = j.at("accelerator").at("dataflow").get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dance
