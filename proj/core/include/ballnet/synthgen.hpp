#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "ballnet/datamodel.hpp"

namespace ballnet {

/// Sampled parameters of one artificial ball trajectory.
struct TrajectorySpec {
  int radius = 3;        // in {3,4,5}
  double start_x = 0, start_y = 0;
  int steps = 30;        // in [30,60]
  double dx = 0, dy = 0; // start / steps
};

/// A generated trajectory plus its rendered heatmaps. For the two-ball
/// stimulus positions2 holds the second trajectory, otherwise it is empty.
struct SyntheticSequence {
  TrajectorySpec spec;
  std::vector<std::pair<double, double>> positions;
  std::vector<std::pair<double, double>> positions2;
  int radius = 3;
  std::vector<Heatmap> heatmaps;

  size_t length() const { return positions.size(); }
};

/// Peak-normalized Gaussian ball with variance sigma^2 = radius.
Heatmap render_ball(double x, double y, int radius, int width, int height);

/// Draws n random-walk trajectories: radius ~ U{3,4,5}, steps ~ U{30..60},
/// per-step displacement start/steps with a fresh random sign each step,
/// positions clamped to the frame. Deterministic under seed.
std::vector<SyntheticSequence> generate_sequences(int n, int width, int height, uint32_t seed);

/// Zeroes the heatmaps at the given indices; ground-truth positions are kept.
/// The last num_targets frames may not be dropped.
SyntheticSequence occlude(const SyntheticSequence& seq, const std::set<size_t>& drop_indices,
                          size_t num_targets = 1);

/// Superimposes two independent trajectories by pointwise max (test stimulus).
SyntheticSequence generate_two_ball(int width, int height, uint32_t seed);

/// Cuts (history, target) windows with the given stride.
std::vector<SequenceSample> cut_windows(const SyntheticSequence& seq, int h, int p, int stride = 1);

/// Sequence cache file, one sequence per file.
void save_sequence(const SyntheticSequence& seq, const std::string& path);
SyntheticSequence load_sequence(const std::string& path);

}  // namespace ballnet
