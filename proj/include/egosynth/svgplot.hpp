#pragma once

#include <string>
#include <vector>

#include "egosynth/simcourt.hpp"

namespace egosynth::svg {

enum class PlotMode { Path, Scatter };

/// Top-down court outline with a basket marker. Path mode draws each
/// sequence's court projection as a polyline with distinct start and end
/// markers; scatter mode draws only start and end points in two colors.
std::string render_svg(const std::vector<sim::Sequence>& sequences, const sim::SimParams& court,
                       PlotMode mode);

}  // namespace egosynth::svg
