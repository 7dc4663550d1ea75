#pragma once

#include <string>
#include <vector>

#include "contra/conformal.hpp"

namespace contra {

struct SvgLevel {
    RegionBoundary boundary;
    std::string label;  // e.g. "90%"
};

// Region boundaries as closed SVG paths (exactly one path per level) over an
// optional scatter of conditional samples. Axes auto-fit all content with a
// 10% margin. Output is deterministic for identical inputs.
std::string region_svg(const std::vector<SvgLevel>& levels,
                       const std::vector<std::vector<double>>& scatter,
                       int width = 640, int height = 640);

}  // namespace contra
