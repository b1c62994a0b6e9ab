#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace v2t {

// Minimal static line charts: axes, tick labels, polyline series, legend and
// dotted horizontal reference lines.
struct LineSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct ReferenceLine {
    std::string label;
    double y = 0.0;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<LineSeries> series;
    std::vector<ReferenceLine> references;
};

std::string render_line_plot(const LinePlot& plot);
void write_svg(const std::filesystem::path& path, const LinePlot& plot);

}  // namespace v2t
