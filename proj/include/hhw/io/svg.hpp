#pragma once

// Minimal line plots written directly as SVG.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hhw/io/csv.hpp"

namespace hhw::io {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool dashed = false;
};

struct VerticalRule {
    double x = 0.0;
    std::string label;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    std::vector<VerticalRule> rules;
    bool markers = false;
    std::size_t max_points = 2000;
};

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    return colors;
}

inline std::vector<double> log10_clamped(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::log10(std::max(x, 1e-300)); });
    return out;
}

namespace detail {

inline std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
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
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step)
        ticks.push_back(std::fabs(t) < 1e-12 * step ? 0.0 : t);
    return ticks;
}

inline std::string tick_label(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

} // namespace detail

inline std::string render_svg(const Plot& plot) {
    constexpr double W = 800, H = 480, L = 80, R = 170, T = 40, B = 60;
    const double pw = W - L - R, ph = H - T - B;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : plot.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
                continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    for (const auto& r : plot.rules) {
        xmin = std::min(xmin, r.x);
        xmax = std::max(xmax, r.x);
    }
    if (!std::isfinite(xmin)) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax == xmin)
        xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return T + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << L + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
       << detail::escape_xml(plot.title) << "</text>\n";

    for (double t : detail::nice_ticks(xmin, xmax)) {
        os << "<line x1=\"" << sx(t) << "\" y1=\"" << T << "\" x2=\"" << sx(t) << "\" y2=\"" << T + ph
           << "\" stroke=\"#e6e6e6\"/>\n";
        os << "<text x=\"" << sx(t) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">"
           << detail::tick_label(t) << "</text>\n";
    }
    for (double t : detail::nice_ticks(ymin, ymax)) {
        os << "<line x1=\"" << L << "\" y1=\"" << sy(t) << "\" x2=\"" << L + pw << "\" y2=\"" << sy(t)
           << "\" stroke=\"#e6e6e6\"/>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << sy(t) + 4 << "\" text-anchor=\"end\">" << detail::tick_label(t)
           << "</text>\n";
    }
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
       << detail::escape_xml(plot.x_label) << "</text>\n";
    os << "<text transform=\"translate(20," << T + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << detail::escape_xml(plot.y_label) << "</text>\n";

    for (const auto& r : plot.rules) {
        os << "<line x1=\"" << sx(r.x) << "\" y1=\"" << T << "\" x2=\"" << sx(r.x) << "\" y2=\"" << T + ph
           << "\" stroke=\"#555\" stroke-dasharray=\"2,3\"/>\n";
        os << "<text x=\"" << sx(r.x) + 4 << "\" y=\"" << T + 14 << "\">" << detail::escape_xml(r.label)
           << "</text>\n";
    }

    double legend_y = T + 10;
    for (const auto& s : plot.series) {
        const std::size_t n = std::min(s.x.size(), s.y.size());
        const std::size_t cap = std::max<std::size_t>(1, plot.max_points);
        const std::size_t stride = std::max<std::size_t>(1, (n + cap - 1) / cap);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; i += stride)
            idx.push_back(i);
        if (n > 0 && idx.back() != n - 1)
            idx.push_back(n - 1);
        std::string d;
        bool pen_down = false;
        for (std::size_t i : idx) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                pen_down = false;
                continue;
            }
            d += pen_down ? 'L' : 'M';
            append_number(d, std::round(sx(s.x[i]) * 100.0) / 100.0);
            d += ',';
            append_number(d, std::round(sy(s.y[i]) * 100.0) / 100.0);
            pen_down = true;
        }
        os << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.4\""
           << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        if (plot.markers)
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                    os << "<circle cx=\"" << sx(s.x[i]) << "\" cy=\"" << sy(s.y[i]) << "\" r=\"3\" fill=\"" << s.color
                       << "\"/>\n";
        os << "<line x1=\"" << L + pw + 12 << "\" y1=\"" << legend_y << "\" x2=\"" << L + pw + 36 << "\" y2=\""
           << legend_y << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
           << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        os << "<text x=\"" << L + pw + 42 << "\" y=\"" << legend_y + 4 << "\">" << detail::escape_xml(s.label)
           << "</text>\n";
        legend_y += 18;
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace hhw::io
