#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgda/io.hpp"

namespace mgda {

inline std::string csv_join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out += ',';
    out += fields[k];
  }
  return out + "\n";
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf);
}

struct BarSeries {
  std::string label;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Grouped bars with CI whiskers, one group per x label; no plotting
// dependency, just enough SVG for the comparison figures.
inline std::string bar_chart_svg(const std::string& title,
                                 const std::vector<std::string>& groups,
                                 const std::map<std::string, std::vector<BarSeries>>& by_group) {
  const double width = 720.0, height = 420.0;
  const double left = 70.0, bottom = 360.0, top = 60.0;
  const double plot_w = width - left - 40.0;
  const double plot_h = bottom - top;
  const char* palette[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f",
                           "#956cb4", "#8c613c", "#dc7ec0", "#797979"};

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "' viewBox='0 0 " << width << " " << height << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << width / 2 << "' y='30' font-size='18' text-anchor='middle' "
      << "font-family='sans-serif'>" << title << "</text>\n";
  for (int tick = 0; tick <= 5; ++tick) {
    const double frac = tick / 5.0;
    const double y = bottom - frac * plot_h;
    svg << "<line x1='" << left << "' y1='" << y << "' x2='" << left + plot_w << "' y2='" << y
        << "' stroke='#dddddd'/>\n";
    svg << "<text x='" << left - 8 << "' y='" << y + 4
        << "' font-size='12' text-anchor='end' font-family='sans-serif'>" << fmt_double(frac)
        << "</text>\n";
  }

  const std::size_t n_groups = groups.size();
  std::size_t n_series = 0;
  for (const auto& [g, series] : by_group) n_series = std::max(n_series, series.size());
  if (n_groups == 0 || n_series == 0) {
    svg << "</svg>\n";
    return svg.str();
  }
  const double group_w = plot_w / double(n_groups);
  const double bar_w = group_w * 0.8 / double(n_series);
  for (std::size_t g = 0; g < n_groups; ++g) {
    const auto it = by_group.find(groups[g]);
    if (it == by_group.end()) continue;
    const double gx = left + group_w * double(g) + group_w * 0.1;
    for (std::size_t s = 0; s < it->second.size(); ++s) {
      const BarSeries& bar = it->second[s];
      const double x = gx + bar_w * double(s);
      const double h = std::max(0.0, std::min(1.0, bar.value)) * plot_h;
      svg << "<rect x='" << x << "' y='" << bottom - h << "' width='" << bar_w * 0.92
          << "' height='" << h << "' fill='" << palette[s % 8] << "'/>\n";
      const double cx = x + bar_w * 0.46;
      const double ylo = bottom - std::max(0.0, std::min(1.0, bar.ci_low)) * plot_h;
      const double yhi = bottom - std::max(0.0, std::min(1.0, bar.ci_high)) * plot_h;
      svg << "<line x1='" << cx << "' y1='" << ylo << "' x2='" << cx << "' y2='" << yhi
          << "' stroke='black' stroke-width='1.5'/>\n";
      svg << "<line x1='" << cx - 4 << "' y1='" << ylo << "' x2='" << cx + 4 << "' y2='" << ylo
          << "' stroke='black' stroke-width='1.5'/>\n";
      svg << "<line x1='" << cx - 4 << "' y1='" << yhi << "' x2='" << cx + 4 << "' y2='" << yhi
          << "' stroke='black' stroke-width='1.5'/>\n";
    }
    svg << "<text x='" << gx + group_w * 0.4 << "' y='" << bottom + 20
        << "' font-size='13' text-anchor='middle' font-family='sans-serif'>" << groups[g]
        << "</text>\n";
  }
  // Legend from the first group's series labels.
  const auto first = by_group.find(groups[0]);
  if (first != by_group.end()) {
    double lx = left;
    for (std::size_t s = 0; s < first->second.size(); ++s) {
      svg << "<rect x='" << lx << "' y='" << height - 24 << "' width='12' height='12' fill='"
          << palette[s % 8] << "'/>\n";
      svg << "<text x='" << lx + 16 << "' y='" << height - 13
          << "' font-size='12' font-family='sans-serif'>" << first->second[s].label << "</text>\n";
      lx += 26.0 + 7.5 * double(first->second[s].label.size());
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

// Run manifest: enough to reproduce the command (resolved config, fingerprints
// of every input artifact, tool version). Deliberately no timestamps so
// reruns are byte-identical.
inline Json make_manifest(const std::string& command, const Json& resolved_config,
                          const std::map<std::string, std::string>& input_paths) {
  Json inputs = Json::object();
  for (const auto& [label, path] : input_paths) {
    inputs[label] = Json{{"path", path}, {"fnv1a", hash_hex(read_text_file(path))}};
  }
  return Json{{"type", "mgda_manifest"},
              {"version", "1.0.0"},
              {"command", command},
              {"config", resolved_config},
              {"config_fnv1a", hash_hex(resolved_config.dump())},
              {"inputs", inputs}};
}

}  // namespace mgda
