#include "hilo/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hilo {

namespace {
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
}

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series, bool log_y) {
    const int width = 720, height = 480;
    const int ml = 70, mr = 20, mt = 40, mb = 50;
    const double plot_w = width - ml - mr, plot_h = height - mt - mb;

    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            double yy = log_y ? std::log10(std::max(y, 1e-12)) : y;
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, yy);
            y_max = std::max(y_max, yy);
        }
    if (x_min > x_max) {
        x_min = 0;
        x_max = 1;
        y_min = 0;
        y_max = 1;
    }
    if (x_max - x_min < 1e-12) x_max = x_min + 1;
    if (y_max - y_min < 1e-12) y_max = y_min + 1;

    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) {
        double yy = log_y ? std::log10(std::max(y, 1e-12)) : y;
        return mt + plot_h - (yy - y_min) / (y_max - y_min) * plot_h;
    };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write SVG: " + path);
    char buf[512];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">%s</text>\n",
                  width / 2, title.c_str());
    out << buf;

    // axes with 5 ticks each
    for (int t = 0; t <= 5; ++t) {
        double fx = x_min + (x_max - x_min) * t / 5.0;
        double fy_plot = y_min + (y_max - y_min) * t / 5.0;
        double fy = log_y ? std::pow(10.0, fy_plot) : fy_plot;
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"#ddd\"/>\n",
                      px(fx), mt, px(fx), height - mb);
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%.3g</text>\n", px(fx),
                      height - mb + 18, fx);
        out << buf;
        double ypix = mt + plot_h - plot_h * t / 5.0;
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", ml,
                      ypix, width - mr, ypix);
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n", ml - 6,
                      ypix + 4, fy);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%d\" y=\"%d\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"black\"/>\n",
                  ml, mt, plot_w, plot_h);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">%s</text>\n", width / 2,
                  height - 12, x_label.c_str());
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"16\" y=\"%d\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
                  "%d)\">%s</text>\n",
                  mt + static_cast<int>(plot_h) / 2, mt + static_cast<int>(plot_h) / 2,
                  y_label.c_str());
    out << buf;

    for (size_t si = 0; si < series.size(); ++si) {
        const char* color = kColors[si % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : series[si].points) {
            std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px(x), py(y));
            out << buf;
        }
        out << "\"/>\n";
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%zu\" fill=\"%s\">%s</text>\n", width - mr - 150,
                      mt + 16 * (si + 1), color, series[si].label.c_str());
        out << buf;
    }
    out << "</svg>\n";
}

}  // namespace hilo
