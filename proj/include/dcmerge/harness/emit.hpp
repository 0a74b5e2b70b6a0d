#ifndef DCMERGE_HARNESS_EMIT_HPP
#define DCMERGE_HARNESS_EMIT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "experiment.hpp"

namespace dcmerge {

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("error while writing '" + path + "'");
}

}  // namespace detail

inline constexpr const char* csv_header =
    "k,strategy,contamination,median_abs_error,mean_abs_error,coverage,bound,condition_holds";

/// CSV text of the table (CRLF-free, one row per line, rows in (k, strategy, contamination) order).
inline std::string render_csv(const ResultTable& table) {
    ResultTable sorted = table;
    sorted.sort_rows();
    std::string out = std::string(csv_header) + "\n";
    for (const auto& r : sorted.rows) {
        out += std::to_string(r.k) + "," + detail::csv_field(r.strategy) + "," + std::to_string(r.contamination) +
               "," + detail::format_number(r.median_abs_error) + "," + detail::format_number(r.mean_abs_error) + "," +
               detail::opt_number(r.coverage) + "," + detail::opt_number(r.bound) + "," +
               (r.condition_holds ? (*r.condition_holds ? "true" : "false") : "") + "\n";
    }
    return out;
}

inline void emit_csv(const ResultTable& table, const std::string& path) { detail::write_file(path, render_csv(table)); }

struct PlotSpec {
    std::string x = "k";
    std::string y = "median_abs_error";
    std::string series = "strategy";
    bool logx = false;
    bool logy = false;
    /// Draws the bound column as a line per series: solid where condition_holds, dashed elsewhere.
    bool overlay_bound = false;
};

namespace detail {

inline std::optional<double> numeric_field(const ResultRow& r, const std::string& f) {
    if (f == "k") return static_cast<double>(r.k);
    if (f == "contamination") return static_cast<double>(r.contamination);
    if (f == "median_abs_error") return r.median_abs_error;
    if (f == "mean_abs_error") return r.mean_abs_error;
    if (f == "coverage") return r.coverage;
    if (f == "bound") return r.bound;
    throw std::invalid_argument("unknown numeric field '" + f + "'");
}

inline std::string series_field(const ResultRow& r, const std::string& f) {
    if (f == "strategy") return r.strategy;
    if (f == "k") return "k=" + std::to_string(r.k);
    if (f == "contamination") return "contamination=" + std::to_string(r.contamination);
    throw std::invalid_argument("unknown series field '" + f + "'");
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;
    std::vector<double> ticks;

    double map(double v) const {
        const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
        return t;
    }
};

inline double nice_step(double range, int target) {
    const double raw = range / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

inline Axis make_axis(double vmin, double vmax, bool log) {
    Axis a;
    a.log = log;
    if (log) {
        double lo = std::log10(vmin), hi = std::log10(vmax);
        if (hi - lo < 1e-9) {
            lo -= 0.5;
            hi += 0.5;
        }
        a.lo = std::floor(lo);
        a.hi = std::ceil(hi);
        const int decades = static_cast<int>(a.hi - a.lo);
        const int stride = std::max(1, decades / 8);
        for (int e = static_cast<int>(a.lo); e <= static_cast<int>(a.hi); e += stride) a.ticks.push_back(std::pow(10.0, e));
        return a;
    }
    if (vmax - vmin < 1e-12 * std::max(1.0, std::fabs(vmax))) {
        const double pad = vmin == 0.0 ? 1.0 : 0.5 * std::fabs(vmin);
        vmin -= pad;
        vmax += pad;
    }
    const double step = nice_step(vmax - vmin, 5);
    a.lo = std::floor(vmin / step) * step;
    a.hi = std::ceil(vmax / step) * step;
    const long n = std::lround((a.hi - a.lo) / step);
    for (long i = 0; i <= n; ++i) a.ticks.push_back(a.lo + static_cast<double>(i) * step);
    return a;
}

/// Shortest %g rendering that keeps consecutive tick labels distinct.
inline std::vector<std::string> tick_labels(const std::vector<double>& ticks) {
    for (int prec = 3; prec <= 15; ++prec) {
        std::vector<std::string> out;
        char buf[64];
        for (double t : ticks) {
            std::snprintf(buf, sizeof buf, "%.*g", prec, std::fabs(t) < 1e-15 ? 0.0 : t);
            out.push_back(buf);
        }
        bool distinct = true;
        for (std::size_t i = 1; i < out.size(); ++i) distinct = distinct && out[i] != out[i - 1];
        if (distinct) return out;
    }
    std::vector<std::string> out;
    for (double t : ticks) out.push_back(format_number(t));
    return out;
}

inline std::string fmt_px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

/*
 * Self-contained SVG line plot: one polyline plus circle markers per series,
 * ticked axes and a legend with one swatch per series. Rows lacking the y
 * field (or non-positive on a log axis) are skipped.
 */
inline std::string render_svg(const ResultTable& table, const PlotSpec& spec) {
    using Point = std::pair<double, double>;
    struct Series {
        std::vector<Point> pts;
        std::vector<Point> bound;
        std::vector<bool> holds;
    };
    std::map<std::string, Series> series;
    for (const auto& r : table.rows) {
        const auto x = detail::numeric_field(r, spec.x);
        const auto y = detail::numeric_field(r, spec.y);
        auto usable = [&](std::optional<double> xv, std::optional<double> yv) {
            return xv && yv && std::isfinite(*xv) && std::isfinite(*yv) && (!spec.logx || *xv > 0.0) &&
                   (!spec.logy || *yv > 0.0);
        };
        const std::string name = detail::series_field(r, spec.series);
        if (usable(x, y)) series[name].pts.emplace_back(*x, *y);
        if (spec.overlay_bound && usable(x, r.bound)) {
            series[name].bound.emplace_back(*x, *r.bound);
            series[name].holds.push_back(r.condition_holds.value_or(false));
        }
    }
    for (auto it = series.begin(); it != series.end();) {
        if (it->second.pts.empty() && it->second.bound.empty()) it = series.erase(it);
        else ++it;
    }
    if (series.empty()) throw std::runtime_error("nothing to plot");

    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (auto& [name, s] : series) {
        auto by_x = [](const Point& a, const Point& b) { return a.first < b.first; };
        std::stable_sort(s.pts.begin(), s.pts.end(), by_x);
        for (const auto& v : {&s.pts, &s.bound})
            for (const auto& [px, py] : *v) {
                xmin = std::min(xmin, px);
                xmax = std::max(xmax, px);
                ymin = std::min(ymin, py);
                ymax = std::max(ymax, py);
            }
    }
    const detail::Axis ax = detail::make_axis(xmin, xmax, spec.logx);
    const detail::Axis ay = detail::make_axis(ymin, ymax, spec.logy);

    const double W = 720, H = 480, left = 80, right = 200, top = 30, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double v) { return left + ax.map(v) * pw; };
    auto py = [&](double v) { return top + (1.0 - ay.map(v)) * ph; };
    static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    o << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw
      << "\" y2=\"" << top + ph << "\"/><line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + ph << "\"/></g>\n";

    const auto xl = detail::tick_labels(ax.ticks);
    const auto yl = detail::tick_labels(ay.ticks);
    o << "<g class=\"xticks\">\n";
    for (std::size_t i = 0; i < ax.ticks.size(); ++i) {
        const double x = px(ax.ticks[i]);
        o << "<line x1=\"" << detail::fmt_px(x) << "\" y1=\"" << top + ph << "\" x2=\"" << detail::fmt_px(x)
          << "\" y2=\"" << top + ph + 5 << "\" stroke=\"black\"/><text class=\"tick\" x=\"" << detail::fmt_px(x)
          << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << xl[i] << "</text>\n";
    }
    o << "</g>\n<g class=\"yticks\">\n";
    for (std::size_t i = 0; i < ay.ticks.size(); ++i) {
        const double y = py(ay.ticks[i]);
        o << "<line x1=\"" << left - 5 << "\" y1=\"" << detail::fmt_px(y) << "\" x2=\"" << left << "\" y2=\""
          << detail::fmt_px(y) << "\" stroke=\"black\"/><text class=\"tick\" x=\"" << left - 8 << "\" y=\""
          << detail::fmt_px(y + 4) << "\" text-anchor=\"end\">" << yl[i] << "</text>\n";
    }
    o << "</g>\n";
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
      << detail::xml_escape(spec.x) << (spec.logx ? " (log)" : "") << "</text>\n";
    o << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << top + ph / 2 << ")\">" << detail::xml_escape(spec.y) << (spec.logy ? " (log)" : "") << "</text>\n";

    std::size_t idx = 0;
    for (const auto& [name, s] : series) {
        const char* color = palette[idx % (sizeof palette / sizeof palette[0])];
        o << "<g class=\"series\" stroke=\"" << color << "\" fill=\"" << color << "\">\n";
        if (s.pts.size() > 1) {
            o << "<polyline fill=\"none\" points=\"";
            for (std::size_t i = 0; i < s.pts.size(); ++i)
                o << (i ? " " : "") << detail::fmt_px(px(s.pts[i].first)) << "," << detail::fmt_px(py(s.pts[i].second));
            o << "\"/>\n";
        }
        for (const auto& [x, y] : s.pts)
            o << "<circle cx=\"" << detail::fmt_px(px(x)) << "\" cy=\"" << detail::fmt_px(py(y)) << "\" r=\"3\"/>\n";
        for (std::size_t i = 1; i < s.bound.size(); ++i) {
            const bool solid = s.holds[i] && s.holds[i - 1];
            o << "<line class=\"bound\" x1=\"" << detail::fmt_px(px(s.bound[i - 1].first)) << "\" y1=\""
              << detail::fmt_px(py(s.bound[i - 1].second)) << "\" x2=\"" << detail::fmt_px(px(s.bound[i].first))
              << "\" y2=\"" << detail::fmt_px(py(s.bound[i].second)) << "\""
              << (solid ? "" : " stroke-dasharray=\"4 3\"") << "/>\n";
        }
        o << "</g>\n";
        const double ly = top + 10 + 20.0 * static_cast<double>(idx);
        o << "<g class=\"legend\"><rect x=\"" << left + pw + 15 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
          << color << "\"/><text x=\"" << left + pw + 32 << "\" y=\"" << ly + 10 << "\">" << detail::xml_escape(name)
          << "</text></g>\n";
        ++idx;
    }
    o << "</svg>\n";
    return o.str();
}

inline void emit_svg(const ResultTable& table, const PlotSpec& spec, const std::string& path) {
    detail::write_file(path, render_svg(table, spec));
}

}  // namespace dcmerge

#endif  // DCMERGE_HARNESS_EMIT_HPP
