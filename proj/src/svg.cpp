#include "v2t/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "v2t/errors.hpp"

namespace v2t {

namespace {

constexpr int kWidth = 520;
constexpr int kHeight = 340;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 16;
constexpr int kMarginTop = 32;
constexpr int kMarginBottom = 44;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string render_line_plot(const LinePlot& plot) {
    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
    bool first = true;
    for (const auto& s : plot.series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                x_min = x_max = x;
                y_min = y_max = y;
                first = false;
            } else {
                x_min = std::min(x_min, x);
                x_max = std::max(x_max, x);
                y_min = std::min(y_min, y);
                y_max = std::max(y_max, y);
            }
        }
    }
    for (const auto& r : plot.references) {
        if (first) {
            y_min = y_max = r.y;
            first = false;
        } else {
            y_min = std::min(y_min, r.y);
            y_max = std::max(y_max, r.y);
        }
    }
    if (x_max == x_min) x_max = x_min + 1.0;
    if (y_max == y_min) y_max = y_min + 1.0;
    double y_pad = 0.06 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto sx = [&](double x) { return kMarginLeft + (x - x_min) / (x_max - x_min) * plot_w; };
    auto sy = [&](double y) { return kMarginTop + (y_max - y) / (y_max - y_min) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
        << plot.title << "</text>\n";

    // axes
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << kHeight - kMarginBottom
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double xv = x_min + (x_max - x_min) * i / 4.0;
        double yv = y_min + (y_max - y_min) * i / 4.0;
        svg << "<text x=\"" << num(sx(xv)) << "\" y=\"" << kHeight - kMarginBottom + 16
            << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
        svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << num(sy(yv) + 4)
            << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 8
        << "\" text-anchor=\"middle\">" << plot.x_label << "</text>\n";
    svg << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << kHeight / 2 << ")\">" << plot.y_label << "</text>\n";

    for (const auto& r : plot.references) {
        svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << num(sy(r.y)) << "\" x2=\""
            << kWidth - kMarginRight << "\" y2=\"" << num(sy(r.y))
            << "\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>\n";
        svg << "<text x=\"" << kWidth - kMarginRight - 4 << "\" y=\"" << num(sy(r.y) - 4)
            << "\" text-anchor=\"end\" fill=\"#555\">" << r.label << "</text>\n";
    }

    for (std::size_t i = 0; i < plot.series.size(); ++i) {
        const auto& s = plot.series[i];
        const char* color = kColors[i % (sizeof kColors / sizeof kColors[0])];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points) svg << num(sx(x)) << ',' << num(sy(y)) << ' ';
        svg << "\"/>\n";
        for (const auto& [x, y] : s.points) {
            svg << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y))
                << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        }
        double ly = kMarginTop + 14.0 * static_cast<double>(i);
        svg << "<line x1=\"" << kMarginLeft + 8 << "\" y1=\"" << num(ly) << "\" x2=\""
            << kMarginLeft + 28 << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
        svg << "<text x=\"" << kMarginLeft + 32 << "\" y=\"" << num(ly + 4) << "\">" << s.label
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_svg(const std::filesystem::path& path, const LinePlot& plot) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << render_line_plot(plot);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace v2t
