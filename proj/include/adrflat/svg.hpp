#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace adrflat::svg {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

inline constexpr int kWidth = 800;
inline constexpr int kHeight = 500;

// Tick positions at 1/2/5 x 10^n spacing covering [lo, hi].
[[nodiscard]] inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
    if (!(hi > lo))
        return {lo};
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> ticks;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
        ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return ticks;
}

[[nodiscard]] inline std::string fmt(double v, const char* spec = "%g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

[[nodiscard]] inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

namespace detail {

inline void draw_panel(std::ostream& os, const Panel& p, double x0, double y0, double w, double h, bool legend) {
    const double left = x0 + 62, right = x0 + w - 12, top = y0 + 24, bottom = y0 + h - 36;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]))
                continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = -1;
        ymax = 1;
    }
    if (xmax == xmin)
        xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymin -= 1.0;
        ymax += 1.0;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto sx = [&](double v) { return left + (v - xmin) / (xmax - xmin) * (right - left); };
    auto sy = [&](double v) { return bottom - (v - ymin) / (ymax - ymin) * (bottom - top); };

    os << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(right - left) << "\" height=\""
       << fmt(bottom - top) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double t : nice_ticks(xmin, xmax)) {
        const double px = sx(t);
        os << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(bottom) << "\" x2=\"" << fmt(px) << "\" y2=\""
           << fmt(bottom + 4) << "\" stroke=\"#333\"/>\n";
        os << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(bottom + 15) << "\" font-size=\"10\" text-anchor=\"middle\">"
           << fmt(t) << "</text>\n";
    }
    for (double t : nice_ticks(ymin, ymax)) {
        const double py = sy(t);
        os << "<line x1=\"" << fmt(left - 4) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(py)
           << "\" stroke=\"#333\"/>\n";
        os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(right) << "\" y2=\"" << fmt(py)
           << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
        os << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py + 3) << "\" font-size=\"10\" text-anchor=\"end\">"
           << fmt(t, "%.3g") << "</text>\n";
    }
    os << "<text x=\"" << fmt((left + right) / 2) << "\" y=\"" << fmt(y0 + 16)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(p.title) << "</text>\n";
    os << "<text x=\"" << fmt((left + right) / 2) << "\" y=\"" << fmt(bottom + 30)
       << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(p.x_label) << "</text>\n";
    os << "<text x=\"" << fmt(x0 + 12) << "\" y=\"" << fmt((top + bottom) / 2) << "\" font-size=\"11\" text-anchor=\"middle\""
       << " transform=\"rotate(-90 " << fmt(x0 + 12) << ' ' << fmt((top + bottom) / 2) << ")\">" << escape(p.y_label)
       << "</text>\n";

    for (const auto& s : p.series) {
        const std::size_t n = s.x.size();
        const std::size_t stride = std::max<std::size_t>(1, n / 1500);
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\""
           << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
        for (std::size_t i = 0; i < n; i += stride)
            if (std::isfinite(s.y[i]))
                os << fmt(sx(s.x[i]), "%.1f") << ',' << fmt(sy(std::clamp(s.y[i], ymin, ymax)), "%.1f") << ' ';
        os << "\"/>\n";
    }
    if (legend) {
        double ly = top + 12;
        for (const auto& s : p.series) {
            os << "<line x1=\"" << fmt(right - 110) << "\" y1=\"" << fmt(ly - 3) << "\" x2=\"" << fmt(right - 92)
               << "\" y2=\"" << fmt(ly - 3) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
               << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
            os << "<text x=\"" << fmt(right - 88) << "\" y=\"" << fmt(ly) << "\" font-size=\"10\">" << escape(s.label)
               << "</text>\n";
            ly += 13;
        }
    }
}

} // namespace detail

// Writes a static rows x cols grid of panels on the fixed canvas.
inline void write_figure(std::ostream& os, const std::vector<Panel>& panels, int cols) {
    const int n = static_cast<int>(panels.size());
    cols = std::max(1, std::min(cols, n));
    const int rows = std::max(1, (n + cols - 1) / cols);
    const double w = static_cast<double>(kWidth) / cols;
    const double h = static_cast<double>(kHeight) / rows;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int i = 0; i < n; ++i)
        detail::draw_panel(os, panels[static_cast<std::size_t>(i)], (i % cols) * w, (i / cols) * h, w, h, true);
    os << "</svg>\n";
}

} // namespace adrflat::svg
