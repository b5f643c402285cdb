/*
 * Copyright 2026 The biasaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "biasaudit/plot.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace biasaudit {
namespace {

std::string Escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string Header(double width, double height, const std::string& title) {
  return absl::StrFormat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" "
      "height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"100%%\" height=\"100%%\" "
      "fill=\"white\"/>\n<text x=\"%.1f\" y=\"18\" text-anchor=\"middle\" "
      "font-size=\"14\">%s</text>\n",
      width, height, width, height, width / 2, Escape(title));
}

// White to dark blue.
std::string Shade(double t) {
  const auto mix = [t](int from, int to) {
    return static_cast<int>(std::lround(from + (to - from) * t));
  };
  return absl::StrFormat("#%02x%02x%02x", mix(255, 8), mix(255, 48),
                         mix(255, 107));
}

const char* QuadrantColor(Quadrant quadrant) {
  switch (quadrant) {
    case Quadrant::kI: return "#1b9e77";
    case Quadrant::kII: return "#d95f02";
    case Quadrant::kIII: return "#7570b3";
    case Quadrant::kIV: return "#e7298a";
    case Quadrant::kAxis: return "#666666";
  }
  return "#000000";
}

}  // namespace

absl::StatusOr<std::vector<std::vector<std::optional<double>>>>
NormalizeHeatmap(const HeatmapInput& input) {
  const size_t rows = input.values.size();
  if (rows != input.row_labels.size()) {
    return absl::InvalidArgumentError("heatmap: row labels do not match rows");
  }
  if (!input.row_groups.empty() && input.row_groups.size() != rows) {
    return absl::InvalidArgumentError("heatmap: row groups do not match rows");
  }
  for (const auto& row : input.values) {
    if (row.size() != input.column_labels.size()) {
      return absl::InvalidArgumentError(
          "heatmap: row length does not match column labels");
    }
  }
  auto group_of = [&](size_t r) {
    return input.row_groups.empty() ? std::string() : input.row_groups[r];
  };
  std::map<std::string, std::pair<double, double>> range;
  for (size_t r = 0; r < rows; ++r) {
    for (const auto& value : input.values[r]) {
      if (!value || !std::isfinite(*value)) continue;
      auto [it, inserted] = range.try_emplace(group_of(r), *value, *value);
      it->second.first = std::min(it->second.first, *value);
      it->second.second = std::max(it->second.second, *value);
    }
  }
  std::vector<std::vector<std::optional<double>>> out(rows);
  for (size_t r = 0; r < rows; ++r) {
    for (const auto& value : input.values[r]) {
      if (!value || !std::isfinite(*value)) {
        out[r].push_back(std::nullopt);
        continue;
      }
      const auto [lo, hi] = range.at(group_of(r));
      out[r].push_back(hi > lo ? (*value - lo) / (hi - lo) : 0.5);
    }
  }
  return out;
}

absl::StatusOr<std::string> HeatmapSvg(const HeatmapInput& input) {
  auto normalized = NormalizeHeatmap(input);
  if (!normalized.ok()) return normalized.status();
  const double cell = 36, left = 140, top = 90;
  const double width = left + cell * input.column_labels.size() + 20;
  const double height = top + cell * input.row_labels.size() + 20;
  std::string svg = Header(width, height, input.title);
  for (size_t c = 0; c < input.column_labels.size(); ++c) {
    const double x = left + cell * (c + 0.5);
    absl::StrAppendFormat(&svg,
                          "<text x=\"%.1f\" y=\"%.1f\" transform=\"rotate(-60 "
                          "%.1f %.1f)\">%s</text>\n",
                          x, top - 6, x, top - 6,
                          Escape(input.column_labels[c]));
  }
  for (size_t r = 0; r < input.row_labels.size(); ++r) {
    const double y = top + cell * r;
    absl::StrAppendFormat(&svg,
                          "<text x=\"%.1f\" y=\"%.1f\" "
                          "text-anchor=\"end\">%s</text>\n",
                          left - 6, y + cell * 0.6,
                          Escape(input.row_labels[r]));
    for (size_t c = 0; c < input.column_labels.size(); ++c) {
      const auto& t = (*normalized)[r][c];
      const double x = left + cell * c;
      if (t) {
        absl::StrAppendFormat(
            &svg,
            "<rect class=\"cell\" x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" "
            "height=\"%.1f\" fill=\"%s\" data-intensity=\"%.4f\"/>\n",
            x, y, cell, cell, Shade(*t), *t);
      } else {
        absl::StrAppendFormat(
            &svg,
            "<rect class=\"cell undefined\" x=\"%.1f\" y=\"%.1f\" "
            "width=\"%.1f\" height=\"%.1f\" fill=\"#dddddd\"/>\n"
            "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
            "stroke=\"#999999\"/>\n",
            x, y, cell, cell, x, y + cell, x + cell, y);
      }
    }
  }
  return svg + "</svg>\n";
}

std::string ScatterSvg(const GapSummary& summary, const std::string& title) {
  const double size = 360, margin = 50;
  double extent = 1e-12;
  for (const auto& point : summary.points) {
    extent = std::max({extent, std::abs(point.pre_gap), std::abs(point.down_gap)});
  }
  extent *= 1.1;
  const double span = size - 2 * margin;
  auto sx = [&](double v) { return margin + (v + extent) / (2 * extent) * span; };
  auto sy = [&](double v) { return size - margin - (v + extent) / (2 * extent) * span; };
  std::string svg = Header(size, size, title);
  absl::StrAppendFormat(&svg,
                        "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                        "stroke=\"black\"/>\n<line x1=\"%.1f\" y1=\"%.1f\" "
                        "x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                        margin, sy(0), size - margin, sy(0), sx(0), margin,
                        sx(0), size - margin);
  absl::StrAppendFormat(&svg,
                        "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">"
                        "pre-training gap</text>\n<text x=\"14\" y=\"%.1f\" "
                        "transform=\"rotate(-90 14 %.1f)\" "
                        "text-anchor=\"middle\">downstream gap</text>\n",
                        size / 2, size - 12, size / 2, size / 2);
  for (const auto& point : summary.points) {
    absl::StrAppendFormat(
        &svg,
        "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\" "
        "data-quadrant=\"%s\"><title>%s</title></circle>\n",
        sx(point.pre_gap), sy(point.down_gap), QuadrantColor(point.quadrant),
        std::string(QuadrantName(point.quadrant)), Escape(point.model));
  }
  return svg + "</svg>\n";
}

HistogramInput BinValues(const std::vector<double>& values, double lo,
                         double hi, int bins) {
  HistogramInput out;
  bins = std::max(bins, 1);
  for (int b = 0; b <= bins; ++b) out.edges.push_back(lo + (hi - lo) * b / bins);
  out.counts.assign(bins, 0);
  for (double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    int b = hi > lo ? static_cast<int>((v - lo) / (hi - lo) * bins) : 0;
    ++out.counts[std::clamp(b, 0, bins - 1)];
  }
  return out;
}

absl::StatusOr<std::string> HistogramSvg(const HistogramInput& input) {
  if (input.edges.size() != input.counts.size() + 1 || input.counts.empty()) {
    return absl::InvalidArgumentError(
        "histogram: need bins + 1 edges and at least one bin");
  }
  const double width = 480, height = 300, margin = 40;
  const double lo = input.edges.front(), hi = input.edges.back();
  const double range = hi > lo ? hi - lo : 1.0;
  size_t peak = 1;
  for (size_t c : input.counts) peak = std::max(peak, c);
  auto sx = [&](double v) { return margin + (v - lo) / range * (width - 2 * margin); };
  const double plot_height = height - 2 * margin;
  std::string svg = Header(width, height, input.title);
  for (size_t b = 0; b < input.counts.size(); ++b) {
    const double h = plot_height * input.counts[b] / static_cast<double>(peak);
    absl::StrAppendFormat(&svg,
                          "<rect class=\"bar\" x=\"%.2f\" y=\"%.2f\" "
                          "width=\"%.2f\" height=\"%.2f\" fill=\"#4c72b0\" "
                          "data-count=\"%d\"/>\n",
                          sx(input.edges[b]), height - margin - h,
                          std::max(0.0, sx(input.edges[b + 1]) - sx(input.edges[b])),
                          h, input.counts[b]);
  }
  absl::StrAppendFormat(&svg,
                        "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                        "stroke=\"black\"/>\n<text x=\"%.1f\" y=\"%.1f\">%g"
                        "</text>\n<text x=\"%.1f\" y=\"%.1f\" "
                        "text-anchor=\"end\">%g</text>\n",
                        margin, height - margin, width - margin, height - margin,
                        margin, height - margin + 14, lo, width - margin,
                        height - margin + 14, hi);
  if (input.marker) {
    const double x = sx(*input.marker);
    absl::StrAppendFormat(&svg,
                          "<line class=\"marker\" x1=\"%.2f\" y1=\"%.1f\" "
                          "x2=\"%.2f\" y2=\"%.1f\" stroke=\"#c44e52\" "
                          "stroke-dasharray=\"4 3\" data-value=\"%g\"/>\n",
                          x, margin, x, height - margin, *input.marker);
  }
  return svg + "</svg>\n";
}

}  // namespace biasaudit
