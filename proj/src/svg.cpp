#include "contra/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace contra {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string region_svg(const std::vector<SvgLevel>& levels,
                       const std::vector<std::vector<double>>& scatter, int width,
                       int height) {
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
    double lo_y = std::numeric_limits<double>::infinity(), hi_y = -lo_y;
    auto grow = [&](double px, double py) {
        lo_x = std::min(lo_x, px);
        hi_x = std::max(hi_x, px);
        lo_y = std::min(lo_y, py);
        hi_y = std::max(hi_y, py);
    };
    for (const auto& level : levels) {
        if (level.boundary.points.cols != 2)
            throw std::invalid_argument("region_svg: only q = 2 regions can be drawn");
        for (std::size_t i = 0; i < level.boundary.points.rows; ++i)
            grow(level.boundary.points(i, 0), level.boundary.points(i, 1));
    }
    for (const auto& pt : scatter) grow(pt[0], pt[1]);
    if (!(lo_x < hi_x)) { lo_x -= 1.0; hi_x += 1.0; }
    if (!(lo_y < hi_y)) { lo_y -= 1.0; hi_y += 1.0; }
    const double mx = 0.1 * (hi_x - lo_x);
    const double my = 0.1 * (hi_y - lo_y);
    lo_x -= mx; hi_x += mx;
    lo_y -= my; hi_y += my;

    auto sx = [&](double v) { return (v - lo_x) / (hi_x - lo_x) * width; };
    auto sy = [&](double v) { return height - (v - lo_y) / (hi_y - lo_y) * height; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    for (const auto& pt : scatter)
        os << "<circle cx=\"" << fmt(sx(pt[0])) << "\" cy=\"" << fmt(sy(pt[1]))
           << "\" r=\"1.5\" fill=\"#f5a623\" fill-opacity=\"0.5\"/>\n";
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const auto& pts = levels[l].boundary.points;
        os << "<path d=\"";
        for (std::size_t i = 0; i < pts.rows; ++i)
            os << (i == 0 ? "M" : " L") << fmt(sx(pts(i, 0))) << "," << fmt(sy(pts(i, 1)));
        os << " Z\" fill=\"none\" stroke=\"" << kPalette[l % 6]
           << "\" stroke-width=\"2\"><title>" << levels[l].label << "</title></path>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace contra
