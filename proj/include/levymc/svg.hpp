#pragma once

#include <string>
#include <vector>

namespace levymc::svg {

struct Series {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
};

// minimal polyline plot; log axes when requested (values must be positive)
std::string line_plot(const std::vector<Series>& series, const std::string& title,
                      bool log_x = false, bool log_y = false);

void write_file(const std::string& path, const std::string& content);

}  // namespace levymc::svg
