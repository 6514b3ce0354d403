#include "levymc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace levymc::svg {

std::string line_plot(const std::vector<Series>& series, const std::string& title, bool log_x,
                      bool log_y) {
    const int w = 640, h = 420, m = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, tx(s.x[i]));
            xmax = std::max(xmax, tx(s.x[i]));
            ymin = std::min(ymin, ty(s.y[i]));
            ymax = std::max(ymax, ty(s.y[i]));
        }
    if (!(xmax > xmin)) xmax = xmin + 1;
    if (!(ymax > ymin)) ymax = ymin + 1;
    auto px = [&](double v) { return m + (tx(v) - xmin) / (xmax - xmin) * (w - 2 * m); };
    auto py = [&](double v) { return h - m - (ty(v) - ymin) / (ymax - ymin) * (h - 2 * m); };

    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
       << "</text>\n";
    os << "<line x1='" << m << "' y1='" << h - m << "' x2='" << w - m << "' y2='" << h - m
       << "' stroke='black'/>\n";
    os << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << h - m
       << "' stroke='black'/>\n";
    for (const auto& s : series) {
        os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            os << px(s.x[i]) << "," << py(s.y[i]) << " ";
        os << "'/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
}

}  // namespace levymc::svg
