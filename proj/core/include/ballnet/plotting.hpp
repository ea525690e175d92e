#pragma once

#include <string>

#include "ballnet/synthgen.hpp"

namespace ballnet {

/// Renders a heatmap as a color-mapped panel with a colorbar on the right.
void save_heatmap_panel(const Heatmap& m, const std::string& path, double vmax = 1.0);

/// Draws the ball path (and the second ball's, when present) over the frame.
void save_trajectory_overlay(const SyntheticSequence& seq, const std::string& path, int scale = 4);

}  // namespace ballnet
