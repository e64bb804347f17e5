#include "iclab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace iclab::svg {
namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = 0, hi = 1;
};

// Round a raw step to 1/2/5 times a power of ten.
double nice_step(double span, int max_ticks) {
    double raw = span / std::max(1, max_ticks);
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double r = raw / mag;
    double f = r <= 1 ? 1 : r <= 2 ? 2 : r <= 5 ? 5 : 10;
    return f * mag;
}

}  // namespace

std::string render_chart(const ChartSpec& spec, const std::vector<Series>& series) {
    const double kLeft = 64, kRight = 18, kTop = 36, kBottom = 50;
    const double plot_w = spec.width - kLeft - kRight;
    const double plot_h = spec.height - kTop - kBottom;
    if (plot_w < 50 || plot_h < 50)
        throw std::invalid_argument("render_chart: canvas too small");

    // Collect the data range over finite points only.
    Range xr, yr;
    bool any = false;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw std::invalid_argument("render_chart: x/y length mismatch in '" + s.name + "'");
        bool banded = !s.y_lo.empty() || !s.y_hi.empty();
        if (banded && (s.y_lo.size() != s.y.size() || s.y_hi.size() != s.y.size()))
            throw std::invalid_argument("render_chart: band length mismatch in '" + s.name + "'");
        for (size_t i = 0; i < s.x.size(); ++i) {
            double xv = s.x[i];
            if (spec.log2_x) {
                if (!(xv > 0))
                    throw std::invalid_argument("render_chart: log2_x needs positive x");
                xv = std::log2(xv);
            }
            if (!std::isfinite(xv) || !std::isfinite(s.y[i])) continue;
            double ylo = banded && std::isfinite(s.y_lo[i]) ? s.y_lo[i] : s.y[i];
            double yhi = banded && std::isfinite(s.y_hi[i]) ? s.y_hi[i] : s.y[i];
            if (!any) {
                xr = {xv, xv};
                yr = {std::min(ylo, s.y[i]), std::max(yhi, s.y[i])};
                any = true;
            } else {
                xr.lo = std::min(xr.lo, xv);
                xr.hi = std::max(xr.hi, xv);
                yr.lo = std::min({yr.lo, ylo, s.y[i]});
                yr.hi = std::max({yr.hi, yhi, s.y[i]});
            }
        }
    }
    if (!any) throw std::invalid_argument("render_chart: no finite data points");

    if (spec.y_min) yr.lo = *spec.y_min;
    if (spec.y_max) yr.hi = *spec.y_max;
    if (xr.hi <= xr.lo) { xr.lo -= 0.5; xr.hi += 0.5; }
    if (yr.hi <= yr.lo) { yr.lo -= 0.5; yr.hi += 0.5; }
    // Pad the auto y range a little so curves do not sit on the frame.
    double ypad = 0.04 * (yr.hi - yr.lo);
    if (!spec.y_min) yr.lo -= ypad;
    if (!spec.y_max) yr.hi += ypad;

    auto px = [&](double xv) {
        double t = spec.log2_x ? std::log2(xv) : xv;
        return kLeft + (t - xr.lo) / (xr.hi - xr.lo) * plot_w;
    };
    auto py = [&](double yv) {
        return kTop + (yr.hi - yv) / (yr.hi - yr.lo) * plot_h;
    };

    std::string out;
    out.reserve(1 << 15);
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(spec.width) +
           "\" height=\"" + num(spec.height) + "\" viewBox=\"0 0 " + num(spec.width) +
           " " + num(spec.height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<g font-family=\"Helvetica,Arial,sans-serif\" font-size=\"12\">\n";

    // y ticks with light gridlines.
    {
        double step = nice_step(yr.hi - yr.lo, 6);
        double first = std::ceil(yr.lo / step) * step;
        for (double v = first; v <= yr.hi + 1e-9 * step; v += step) {
            double y = py(v);
            out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" +
                   num(kLeft + plot_w) + "\" y2=\"" + num(y) +
                   "\" stroke=\"#e4e4e4\" stroke-width=\"1\"/>\n";
            out += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) +
                   "\" text-anchor=\"end\">" + num(std::abs(v) < 1e-12 ? 0.0 : v) +
                   "</text>\n";
        }
    }
    // x ticks.
    if (spec.log2_x) {
        int lo = (int)std::ceil(xr.lo - 1e-9), hi = (int)std::floor(xr.hi + 1e-9);
        int stride = std::max(1, (hi - lo) / 8 + ((hi - lo) % 8 ? 1 : 0));
        for (int e = lo; e <= hi; e += stride) {
            double x = kLeft + (e - xr.lo) / (xr.hi - xr.lo) * plot_w;
            out += "<line x1=\"" + num(x) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" +
                   num(x) + "\" y2=\"" + num(kTop + plot_h + 5) +
                   "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
            out += "<text x=\"" + num(x) + "\" y=\"" + num(kTop + plot_h + 18) +
                   "\" text-anchor=\"middle\">2^" + std::to_string(e) + "</text>\n";
        }
    } else {
        double step = nice_step(xr.hi - xr.lo, 7);
        double first = std::ceil(xr.lo / step) * step;
        for (double v = first; v <= xr.hi + 1e-9 * step; v += step) {
            double x = kLeft + (v - xr.lo) / (xr.hi - xr.lo) * plot_w;
            out += "<line x1=\"" + num(x) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" +
                   num(x) + "\" y2=\"" + num(kTop + plot_h + 5) +
                   "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
            out += "<text x=\"" + num(x) + "\" y=\"" + num(kTop + plot_h + 18) +
                   "\" text-anchor=\"middle\">" + num(std::abs(v) < 1e-12 ? 0.0 : v) +
                   "</text>\n";
        }
    }

    // Bands first so lines draw on top of them.
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        if (s.y_lo.empty()) continue;
        const char* color = kPalette[si % kPaletteSize];
        // One polygon per contiguous run of finite points.
        size_t i = 0;
        while (i < s.x.size()) {
            size_t j = i;
            auto ok = [&](size_t t) {
                return std::isfinite(s.x[t]) && std::isfinite(s.y_lo[t]) &&
                       std::isfinite(s.y_hi[t]) && (!spec.log2_x || s.x[t] > 0);
            };
            while (j < s.x.size() && ok(j)) ++j;
            if (j - i >= 2) {
                std::string pts;
                for (size_t t = i; t < j; ++t)
                    pts += num(px(s.x[t])) + "," + num(py(s.y_hi[t])) + " ";
                for (size_t t = j; t-- > i;)
                    pts += num(px(s.x[t])) + "," + num(py(s.y_lo[t])) + " ";
                out += "<polygon points=\"" + pts + "\" fill=\"" + color +
                       "\" fill-opacity=\"0.14\" stroke=\"none\"/>\n";
            }
            i = std::max(j, i + 1);
        }
    }

    // Lines and point markers.
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % kPaletteSize];
        size_t i = 0;
        while (i < s.x.size()) {
            auto ok = [&](size_t t) {
                return std::isfinite(s.x[t]) && std::isfinite(s.y[t]) &&
                       (!spec.log2_x || s.x[t] > 0);
            };
            size_t j = i;
            while (j < s.x.size() && ok(j)) ++j;
            if (j - i >= 2) {
                std::string pts;
                for (size_t t = i; t < j; ++t)
                    pts += num(px(s.x[t])) + "," + num(py(s.y[t])) + " ";
                out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
                       "\" stroke-width=\"1.8\"/>\n";
            }
            for (size_t t = i; t < j; ++t)
                out += "<circle cx=\"" + num(px(s.x[t])) + "\" cy=\"" + num(py(s.y[t])) +
                       "\" r=\"2.4\" fill=\"" + std::string(color) + "\"/>\n";
            i = std::max(j, i + 1);
        }
    }

    // Frame.
    out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(plot_w) +
           "\" height=\"" + num(plot_h) +
           "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";

    // Titles and axis labels.
    out += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"20\" text-anchor=\"middle\" "
           "font-size=\"14\" font-weight=\"bold\">" + escape(spec.title) + "</text>\n";
    out += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"" + num(spec.height - 12) +
           "\" text-anchor=\"middle\">" + escape(spec.x_label) + "</text>\n";
    out += "<text x=\"16\" y=\"" + num(kTop + plot_h / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + num(kTop + plot_h / 2) +
           ")\">" + escape(spec.y_label) + "</text>\n";

    // Legend, top-right inside the frame.
    if (!series.empty()) {
        double box_w = 10;
        size_t longest = 0;
        for (const auto& s : series) longest = std::max(longest, s.name.size());
        double lw = 34 + 7.0 * (double)longest;
        double lh = 16.0 * (double)series.size() + 8;
        double lx = kLeft + plot_w - lw - 8, ly = kTop + 8;
        out += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly) + "\" width=\"" + num(lw) +
               "\" height=\"" + num(lh) +
               "\" fill=\"white\" fill-opacity=\"0.85\" stroke=\"#bbb\"/>\n";
        for (size_t si = 0; si < series.size(); ++si) {
            double yy = ly + 16.0 * (double)si + 14;
            const char* color = kPalette[si % kPaletteSize];
            out += "<line x1=\"" + num(lx + 6) + "\" y1=\"" + num(yy - 4) + "\" x2=\"" +
                   num(lx + 6 + box_w + 8) + "\" y2=\"" + num(yy - 4) + "\" stroke=\"" +
                   color + "\" stroke-width=\"2.5\"/>\n";
            out += "<text x=\"" + num(lx + box_w + 20) + "\" y=\"" + num(yy) + "\">" +
                   escape(series[si].name) + "</text>\n";
        }
    }

    out += "</g>\n</svg>\n";
    return out;
}

void write_chart(const std::string& path, const ChartSpec& spec,
                 const std::vector<Series>& series) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_chart: cannot open " + path);
    f << render_chart(spec, series);
}

}  // namespace iclab::svg
