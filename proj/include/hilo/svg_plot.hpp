// Minimal deterministic SVG line charts for loss traces and noise sweeps.
#pragma once

#include <string>
#include <vector>

namespace hilo {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series, bool log_y = false);

}  // namespace hilo
