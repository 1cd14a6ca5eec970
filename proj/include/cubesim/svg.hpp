#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace cubesim {

// Self-contained SVG rendering (rect grid + text, no external assets, no
// plotting dependency). All numeric formatting goes through one fixed-format
// helper so renders are byte-reproducible.

namespace svg {

inline std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

inline std::string rgb(int r, int g, int b) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

// Blue (low) through white to red (high).
inline std::string heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int lo[3] = {59, 76, 192}, mid[3] = {242, 242, 242}, hi[3] = {180, 4, 38};
    int c[3];
    if (t < 0.5) {
        const double u = t * 2;
        for (int i = 0; i < 3; ++i) c[i] = (int)std::lround(lo[i] + (mid[i] - lo[i]) * u);
    } else {
        const double u = (t - 0.5) * 2;
        for (int i = 0; i < 3; ++i) c[i] = (int)std::lround(mid[i] + (hi[i] - mid[i]) * u);
    }
    return rgb(c[0], c[1], c[2]);
}

inline void text(std::ostringstream& os, double x, double y, const std::string& s,
                 const std::string& anchor = "middle", int size = 11) {
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"monospace\""
       << " font-size=\"" << size << "\" text-anchor=\"" << anchor << "\">" << s
       << "</text>\n";
}

}  // namespace svg

// Heatmap over a row-major value grid. Rows run top to bottom in the given
// label order.
inline std::string render_heatmap(const std::vector<double>& values,
                                  const std::vector<std::string>& row_labels,
                                  const std::vector<std::string>& col_labels,
                                  const std::string& title,
                                  const std::string& x_title,
                                  const std::string& y_title) {
    const size_t R = row_labels.size(), C = col_labels.size();
    if (values.size() != R * C || R == 0 || C == 0)
        throw std::invalid_argument("render_heatmap: grid/label size mismatch");
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;

    const double cw = 56, ch = 30, mx = 110, my = 56;
    const double W = mx + C * cw + 40, H = my + R * ch + 70;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(W)
       << "\" height=\"" << svg::num(H) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg::text(os, mx + C * cw / 2, 24, title, "middle", 13);
    for (size_t i = 0; i < R; ++i) {
        for (size_t j = 0; j < C; ++j) {
            const double v = values[i * C + j];
            const double t = (v - lo) / span;
            os << "<rect x=\"" << svg::num(mx + j * cw) << "\" y=\"" << svg::num(my + i * ch)
               << "\" width=\"" << svg::num(cw - 1) << "\" height=\"" << svg::num(ch - 1)
               << "\" fill=\"" << svg::heat_color(t) << "\"/>\n";
            svg::text(os, mx + j * cw + cw / 2 - 0.5, my + i * ch + ch / 2 + 3.5,
                      svg::num(v), "middle", 9);
        }
        svg::text(os, mx - 8, my + i * ch + ch / 2 + 4, row_labels[i], "end");
    }
    for (size_t j = 0; j < C; ++j)
        svg::text(os, mx + j * cw + cw / 2, my + R * ch + 16, col_labels[j]);
    svg::text(os, mx + C * cw / 2, my + R * ch + 40, x_title, "middle", 12);
    svg::text(os, 18, my + R * ch / 2, y_title, "middle", 12);
    svg::text(os, mx, H - 12,
              "low " + svg::num(lo) + " (blue)  ...  high " + svg::num(hi) + " (red)",
              "start", 10);
    os << "</svg>\n";
    return os.str();
}

// Grouped bar chart: one cluster per group, one bar per series.
inline std::string render_grouped_bars(const std::vector<std::string>& group_labels,
                                       const std::vector<std::string>& series_labels,
                                       const std::vector<std::vector<double>>& values,
                                       const std::string& title,
                                       const std::string& y_title) {
    const size_t G = group_labels.size(), S = series_labels.size();
    if (values.size() != S) throw std::invalid_argument("render_grouped_bars: series mismatch");
    for (const auto& s : values)
        if (s.size() != G) throw std::invalid_argument("render_grouped_bars: group mismatch");
    double hi = 0;
    for (const auto& s : values)
        for (double v : s) hi = std::max(hi, v);
    if (hi <= 0) hi = 1;

    static const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};
    const double bw = 26, gap = 30, mx = 70, my = 40, plot_h = 200;
    const double gw = S * bw + gap;
    const double W = mx + G * gw + 160, H = my + plot_h + 60;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(W)
       << "\" height=\"" << svg::num(H) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg::text(os, mx + G * gw / 2, 22, title, "middle", 13);
    os << "<line x1=\"" << svg::num(mx - 6) << "\" y1=\"" << svg::num(my + plot_h)
       << "\" x2=\"" << svg::num(mx + G * gw) << "\" y2=\"" << svg::num(my + plot_h)
       << "\" stroke=\"black\"/>\n";
    for (size_t g = 0; g < G; ++g) {
        for (size_t s = 0; s < S; ++s) {
            const double v = values[s][g];
            const double h = plot_h * v / hi;
            const double x = mx + g * gw + s * bw;
            os << "<rect x=\"" << svg::num(x) << "\" y=\"" << svg::num(my + plot_h - h)
               << "\" width=\"" << svg::num(bw - 3) << "\" height=\"" << svg::num(h)
               << "\" fill=\"" << palette[s % 4] << "\"/>\n";
            svg::text(os, x + bw / 2, my + plot_h - h - 4, svg::num(v), "middle", 9);
        }
        svg::text(os, mx + g * gw + S * bw / 2, my + plot_h + 16, group_labels[g]);
    }
    for (size_t s = 0; s < S; ++s) {
        const double ly = my + 14 + s * 16;
        os << "<rect x=\"" << svg::num(mx + G * gw + 16) << "\" y=\"" << svg::num(ly - 9)
           << "\" width=\"12\" height=\"12\" fill=\"" << palette[s % 4] << "\"/>\n";
        svg::text(os, mx + G * gw + 34, ly + 1, series_labels[s], "start", 10);
    }
    svg::text(os, 16, my + plot_h / 2, y_title, "middle", 12);
    os << "</svg>\n";
    return os.str();
}

}  // namespace cubesim
