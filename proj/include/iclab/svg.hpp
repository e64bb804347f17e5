#pragma once
// Minimal standalone SVG line charts: axes, optional shaded bands, legend.
// Output is a complete <svg> document; no external renderer involved.

#include <optional>
#include <string>
#include <vector>

namespace iclab::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    // Optional band around y (e.g. mean +/- std). Either both empty or both
    // the same length as y.
    std::vector<double> y_lo;
    std::vector<double> y_hi;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log2_x = false;  // position by log2(x), ticks at integer exponents
    double width = 760;
    double height = 480;
    std::optional<double> y_min;  // override the auto y range
    std::optional<double> y_max;
};

// Renders the chart; throws std::invalid_argument on malformed series
// (mismatched lengths, log2_x with x <= 0, no finite data at all).
std::string render_chart(const ChartSpec& spec, const std::vector<Series>& series);

void write_chart(const std::string& path, const ChartSpec& spec,
                 const std::vector<Series>& series);

}  // namespace iclab::svg
