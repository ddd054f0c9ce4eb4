/*
 * Copyright 2026 The cachescope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Static SVG reports. Three chart kinds: the access scatter with a rolling
// hit-rate strip, the stacked trace / PC-series / hit-rate figure, and the
// phase band chart. Output is textual and fully deterministic (fixed-point
// coordinates, fixed palette), so identical inputs give identical bytes.

#ifndef CACHESCOPE_SVG_HPP
#define CACHESCOPE_SVG_HPP

#include <algorithm>
#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "cachescope/cachesim.hpp"
#include "cachescope/common.hpp"
#include "cachescope/io.hpp"
#include "cachescope/mat.hpp"
#include "cachescope/phases.hpp"

namespace cachescope::svg {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

constexpr std::array<const char*, 10> palette = {
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
    "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2182b"};

constexpr const char* hit_color = "#2166ac";
constexpr const char* miss_color = "#d7191c";

class document {
public:
    document(double width, double height) : width_(width), height_(height) {}

    void rect(double x, double y, double w, double h, const std::string& fill) {
        body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
                 "\" height=\"" + fmt(h) + "\" fill=\"" + fill + "\"/>\n";
    }

    void circle(double cx, double cy, double r, const std::string& fill) {
        body_ += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) +
                 "\" fill=\"" + fill + "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  double width = 1.0) {
        body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) +
                 "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ += ' ';
            body_ += fmt(pts[i].first) + "," + fmt(pts[i].second);
        }
        body_ += "\"/>\n";
    }

    void text(double x, double y, const std::string& s, double size = 11,
              const std::string& fill = "#333333") {
        std::string escaped;
        for (char c : s) {
            if (c == '&') escaped += "&amp;";
            else if (c == '<') escaped += "&lt;";
            else if (c == '>') escaped += "&gt;";
            else escaped += c;
        }
        body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" + fmt(size) +
                 "\" font-family=\"monospace\" fill=\"" + fill + "\">" + escaped + "</text>\n";
    }

    std::string str() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width_) +
               "\" height=\"" + fmt(height_) + "\" viewBox=\"0 0 " + fmt(width_) + " " +
               fmt(height_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n" +
               body_ + "</svg>\n";
    }

private:
    double width_, height_;
    std::string body_;
};

namespace detail {

struct panel {
    double x0, y0, x1, y1; // drawable area
    double w() const { return x1 - x0; }
    double h() const { return y1 - y0; }
};

inline double scale_x(std::size_t i, std::size_t n, const panel& p) {
    if (n <= 1) return p.x0 + p.w() / 2;
    return p.x0 + p.w() * static_cast<double>(i) / static_cast<double>(n - 1);
}

inline double scale_y(double v, double lo, double hi, const panel& p) {
    if (hi <= lo) return p.y0 + p.h() / 2;
    return p.y1 - p.h() * (v - lo) / (hi - lo); // larger values higher up
}

inline void draw_hit_rate(document& doc, const panel& p, const std::vector<double>& series,
                          const std::string& stroke) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        pts.emplace_back(scale_x(i, series.size(), p), scale_y(series[i], 0.0, 1.0, p));
    doc.polyline(pts, stroke, 1.2);
}

inline void draw_access_scatter(document& doc, const panel& p, const sim_csv& sim) {
    std::uint64_t lo = sim.address[0], hi = sim.address[0];
    for (std::uint64_t a : sim.address) {
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    for (std::size_t i = 0; i < sim.address.size(); ++i) {
        const double x = scale_x(i, sim.address.size(), p);
        const double y = scale_y(static_cast<double>(sim.address[i] - lo), 0.0,
                                 static_cast<double>(hi - lo), p);
        doc.circle(x, y, 1.5, sim.hit[i] ? hit_color : miss_color);
    }
}

} // namespace detail

/// Access scatter (x = timestep, y = address, color = hit/miss) with the
/// rolling hit rate in a strip on top. One marker per access.
inline std::string render_scatter(const sim_csv& sim, std::size_t rolling_window) {
    const double width = 900, height = 520, margin = 45;
    document doc(width, height);
    detail::panel strip{margin, margin, width - margin, margin + 70};
    detail::panel main{margin, margin + 95, width - margin, height - margin};

    detail::draw_hit_rate(doc, strip, rolling_hit_rate(sim.hit, rolling_window), hit_color);
    doc.text(margin, margin - 8, "rolling hit rate (window " + std::to_string(rolling_window) + ")");
    detail::draw_access_scatter(doc, main, sim);
    doc.text(margin, main.y0 - 8, "accesses: address vs. time, hit/miss colored");
    return doc.str();
}

/// Stacked figure: the access scatter on top, the top-k principal-component
/// series in the middle, per-policy rolling hit rates on the bottom.
inline std::string render_stack(const std::vector<std::pair<std::string, sim_csv>>& sims,
                                const matrix& pc_series, std::size_t rolling_window) {
    if (sims.empty()) throw usage_error("stack plot needs at least one simulation");
    const double width = 900, height = 760, margin = 45;
    document doc(width, height);
    detail::panel top{margin, margin, width - margin, margin + 190};
    detail::panel mid{margin, margin + 230, width - margin, margin + 450};
    detail::panel bottom{margin, margin + 490, width - margin, height - margin};

    detail::draw_access_scatter(doc, top, sims.front().second);
    doc.text(margin, top.y0 - 8, "memory trace (" + sims.front().first + ")");

    double lo = 0, hi = 0;
    if (pc_series.data.empty()) throw usage_error("stack plot needs PC series");
    lo = hi = pc_series.data[0];
    for (double v : pc_series.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (std::size_t c = 0; c < pc_series.cols; ++c) {
        std::vector<std::pair<double, double>> pts;
        pts.reserve(pc_series.rows);
        for (std::size_t i = 0; i < pc_series.rows; ++i)
            pts.emplace_back(detail::scale_x(i, pc_series.rows, mid),
                             detail::scale_y(pc_series(i, c), lo, hi, mid));
        doc.polyline(pts, palette[c % palette.size()], 1.2);
        doc.text(mid.x1 - 60, mid.y0 + 14 + 14 * static_cast<double>(c),
                 "PC" + std::to_string(c), 11, palette[c % palette.size()]);
    }
    doc.text(margin, mid.y0 - 8, "top principal components");

    for (std::size_t s = 0; s < sims.size(); ++s) {
        const auto& [name, sim] = sims[s];
        detail::draw_hit_rate(doc, bottom, rolling_hit_rate(sim.hit, rolling_window),
                              palette[s % palette.size()]);
        doc.text(bottom.x1 - 110, bottom.y0 + 14 + 14 * static_cast<double>(s), name, 11,
                 palette[s % palette.size()]);
    }
    doc.text(margin, bottom.y0 - 8,
             "rolling hit rate per policy (window " + std::to_string(rolling_window) + ")");
    return doc.str();
}

/// Phase band chart: one colored band over the timeline, one rect per run of
/// equal labels.
inline std::string render_phase_bands(const phase_labeling& labeling) {
    if (labeling.labels.empty()) throw usage_error("phase band plot needs labels");
    const double width = 900, height = 120, margin = 45;
    document doc(width, height);
    detail::panel band{margin, margin, width - margin, height - margin};

    const std::size_t n = labeling.labels.size();
    std::size_t run_start = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i == n || labeling.labels[i] != labeling.labels[run_start]) {
            const double x0 = band.x0 + band.w() * static_cast<double>(run_start) / static_cast<double>(n);
            const double x1 = band.x0 + band.w() * static_cast<double>(i) / static_cast<double>(n);
            doc.rect(x0, band.y0, x1 - x0, band.h(),
                     palette[labeling.labels[run_start] % palette.size()]);
            run_start = i;
        }
    }
    doc.text(margin, margin - 8,
             "phases over time (" + std::to_string(labeling.num_phases) + " phases)");
    return doc.str();
}

} // namespace cachescope::svg

#endif // CACHESCOPE_SVG_HPP
