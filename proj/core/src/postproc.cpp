#include "ballnet/postproc.hpp"

#include <algorithm>
#include <queue>

namespace ballnet {

std::vector<Contour> find_contours(const Heatmap& m, double threshold) {
  const int w = m.width, h = m.height;
  std::vector<uint8_t> visited(size_t(w) * h, 0);
  std::vector<Contour> contours;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t idx = size_t(y) * w + x;
      if (visited[idx] || !(m.values[idx] > threshold)) continue;
      Contour c;
      std::queue<std::pair<int, int>> q;
      q.emplace(x, y);
      visited[idx] = 1;
      while (!q.empty()) {
        auto [px, py] = q.front();
        q.pop();
        c.pixels.emplace_back(px, py);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (!dx && !dy) continue;
            int nx = px + dx, ny = py + dy;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            size_t nidx = size_t(ny) * w + nx;
            if (!visited[nidx] && m.values[nidx] > threshold) {
              visited[nidx] = 1;
              q.emplace(nx, ny);
            }
          }
      }
      contours.push_back(std::move(c));
    }
  return contours;
}

namespace {

double confidence_mass(const Heatmap& m, const Contour& c) {
  double s = 0;
  for (auto [x, y] : c.pixels) s += m.at(x, y);
  return s;
}

std::pair<int, int> top_left(const Contour& c) {
  auto best = c.pixels.front();
  for (auto [x, y] : c.pixels)
    if (y < best.second || (y == best.second && x < best.first)) best = {x, y};
  return best;
}

BallCenter centroid(const Heatmap& m, const Contour& c) {
  double sx = 0, sy = 0, sw = 0;
  for (auto [x, y] : c.pixels) {
    double v = m.at(x, y);
    sx += x * v;
    sy += y * v;
    sw += v;
  }
  return {sx / sw, sy / sw};
}

// Largest area; ties by confidence mass, then by topmost-leftmost pixel.
bool better(const Heatmap& m, const Contour& a, const Contour& b) {
  if (a.area() != b.area()) return a.area() > b.area();
  double ma = confidence_mass(m, a), mb = confidence_mass(m, b);
  if (ma != mb) return ma > mb;
  auto ta = top_left(a), tb = top_left(b);
  return std::make_pair(ta.second, ta.first) < std::make_pair(tb.second, tb.first);
}

}  // namespace

BallCenter extract_center(const Heatmap& m, double a_min) {
  auto contours = find_contours(m);
  if (contours.empty()) return BallCenter::none();
  const Contour* best = &contours[0];
  for (const auto& c : contours)
    if (better(m, c, *best)) best = &c;
  if (best->area() <= a_min) return BallCenter::none();
  return centroid(m, *best);
}

std::vector<BallCenter> extract_centers_topk(const Heatmap& m, double a_min, int k) {
  auto contours = find_contours(m);
  std::sort(contours.begin(), contours.end(),
            [&m](const Contour& a, const Contour& b) { return better(m, a, b); });
  std::vector<BallCenter> out;
  for (const auto& c : contours) {
    if (int(out.size()) >= k) break;
    if (c.area() <= a_min) continue;
    out.push_back(centroid(m, c));
  }
  return out;
}

double estimate_a_min(const std::vector<BoundingBoxAnnotation>& train, int width, int height) {
  double best = -1;
  for (const auto& box : train) {
    if (!box.present) continue;
    Heatmap g = teaching_signal(box, width, height);
    int area = 0;
    for (double v : g.values)
      if (v > kDetectionThreshold) ++area;
    if (best < 0 || area < best) best = area;
  }
  if (best < 0) throw DataError("estimate_a_min: no present annotations");
  return best;
}

}  // namespace ballnet
