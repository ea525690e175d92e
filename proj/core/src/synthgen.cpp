#include "ballnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace ballnet {

namespace {

// Engine-stable integer draw; std::uniform_int_distribution is
// implementation-defined across standard libraries.
int draw_int(std::mt19937& rng, int lo, int hi) {
  return lo + int(rng() % uint32_t(hi - lo + 1));
}

SyntheticSequence draw_trajectory(int width, int height, std::mt19937& rng) {
  SyntheticSequence seq;
  seq.spec.radius = draw_int(rng, 3, 5);
  seq.spec.start_x = draw_int(rng, 0, width - 1);
  seq.spec.start_y = draw_int(rng, 0, height - 1);
  seq.spec.steps = draw_int(rng, 30, 60);
  seq.spec.dx = seq.spec.start_x / double(seq.spec.steps);
  seq.spec.dy = seq.spec.start_y / double(seq.spec.steps);
  seq.radius = seq.spec.radius;
  double x = seq.spec.start_x, y = seq.spec.start_y;
  seq.positions.emplace_back(x, y);
  for (int j = 0; j < seq.spec.steps; ++j) {
    int sx = draw_int(rng, 0, 1) ? 1 : -1;
    int sy = draw_int(rng, 0, 1) ? 1 : -1;
    x = std::clamp(x + sx * seq.spec.dx, 0.0, double(width - 1));
    y = std::clamp(y + sy * seq.spec.dy, 0.0, double(height - 1));
    seq.positions.emplace_back(x, y);
  }
  return seq;
}

}  // namespace

Heatmap render_ball(double x, double y, int radius, int width, int height) {
  Heatmap g(width, height);
  const double inv = 1.0 / (2.0 * double(radius));  // sigma^2 = radius
  for (int py = 0; py < height; ++py)
    for (int px = 0; px < width; ++px) {
      double d2 = (px - x) * (px - x) + (py - y) * (py - y);
      g.at(px, py) = std::exp(-d2 * inv);
    }
  return g;
}

std::vector<SyntheticSequence> generate_sequences(int n, int width, int height, uint32_t seed) {
  if (n < 1) throw DataError("generate_sequences: n must be >= 1");
  std::mt19937 rng(seed);
  std::vector<SyntheticSequence> out;
  out.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    SyntheticSequence seq = draw_trajectory(width, height, rng);
    for (auto [x, y] : seq.positions)
      seq.heatmaps.push_back(render_ball(x, y, seq.radius, width, height));
    out.push_back(std::move(seq));
  }
  return out;
}

SyntheticSequence occlude(const SyntheticSequence& seq, const std::set<size_t>& drop_indices,
                          size_t num_targets) {
  SyntheticSequence out = seq;
  const size_t n = seq.heatmaps.size();
  for (size_t idx : drop_indices) {
    if (idx >= n) throw DataError("occlude: index out of range");
    if (idx >= n - num_targets) throw DataError("occlude: cannot drop a target index");
    std::fill(out.heatmaps[idx].values.begin(), out.heatmaps[idx].values.end(), 0.0);
  }
  return out;
}

SyntheticSequence generate_two_ball(int width, int height, uint32_t seed) {
  std::mt19937 rng(seed);
  SyntheticSequence a = draw_trajectory(width, height, rng);
  SyntheticSequence b = draw_trajectory(width, height, rng);
  size_t len = std::min(a.positions.size(), b.positions.size());
  a.positions.resize(len);
  b.positions.resize(len);
  SyntheticSequence out;
  out.spec = a.spec;
  out.radius = a.radius;
  out.positions = a.positions;
  out.positions2 = b.positions;
  for (size_t j = 0; j < len; ++j) {
    Heatmap ha = render_ball(a.positions[j].first, a.positions[j].second, a.radius, width, height);
    Heatmap hb = render_ball(b.positions[j].first, b.positions[j].second, b.radius, width, height);
    for (size_t i = 0; i < ha.values.size(); ++i) ha.values[i] = std::max(ha.values[i], hb.values[i]);
    out.heatmaps.push_back(std::move(ha));
  }
  return out;
}

std::vector<SequenceSample> cut_windows(const SyntheticSequence& seq, int h, int p, int stride) {
  std::vector<SequenceSample> out;
  const int n = int(seq.heatmaps.size());
  for (int start = 0; start + h + p <= n; start += stride) {
    SequenceSample s;
    s.history.assign(seq.heatmaps.begin() + start, seq.heatmaps.begin() + start + h);
    s.targets.assign(seq.heatmaps.begin() + start + h, seq.heatmaps.begin() + start + h + p);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {
constexpr char kSeqMagic[8] = {'B', 'A', 'L', 'L', 'S', 'E', 'Q', '1'};
}

void save_sequence(const SyntheticSequence& seq, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write sequence file: " + path);
  out.write(kSeqMagic, 8);
  int32_t header[6] = {int32_t(seq.positions.size()), int32_t(seq.positions2.size()),
                       int32_t(seq.radius),
                       seq.heatmaps.empty() ? 0 : int32_t(seq.heatmaps[0].width),
                       seq.heatmaps.empty() ? 0 : int32_t(seq.heatmaps[0].height),
                       int32_t(seq.heatmaps.size())};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  auto write_positions = [&](const std::vector<std::pair<double, double>>& ps) {
    for (auto [x, y] : ps) {
      out.write(reinterpret_cast<const char*>(&x), sizeof(double));
      out.write(reinterpret_cast<const char*>(&y), sizeof(double));
    }
  };
  write_positions(seq.positions);
  write_positions(seq.positions2);
  for (const auto& hm : seq.heatmaps)
    out.write(reinterpret_cast<const char*>(hm.values.data()),
              std::streamsize(hm.values.size() * sizeof(double)));
  if (!out) throw DataError("short write on sequence file: " + path);
}

SyntheticSequence load_sequence(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open sequence file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kSeqMagic, 8) != 0)
    throw DataError("not a sequence file: " + path);
  int32_t header[6];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw DataError("truncated sequence file: " + path);
  SyntheticSequence seq;
  seq.radius = header[2];
  seq.spec.radius = header[2];
  auto read_positions = [&](std::vector<std::pair<double, double>>& ps, int32_t n) {
    for (int32_t i = 0; i < n; ++i) {
      double x, y;
      in.read(reinterpret_cast<char*>(&x), sizeof(double));
      in.read(reinterpret_cast<char*>(&y), sizeof(double));
      ps.emplace_back(x, y);
    }
  };
  read_positions(seq.positions, header[0]);
  read_positions(seq.positions2, header[1]);
  for (int32_t i = 0; i < header[5]; ++i) {
    Heatmap hm(header[3], header[4]);
    in.read(reinterpret_cast<char*>(hm.values.data()),
            std::streamsize(hm.values.size() * sizeof(double)));
    seq.heatmaps.push_back(std::move(hm));
  }
  if (!in) throw DataError("truncated sequence file: " + path);
  return seq;
}

}  // namespace ballnet
