#include "pcstream/kdtree.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

#include "pcstream/simd/distance.hpp"

namespace pcstream {
namespace {

std::uint32_t coord(const Point& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }

}  // namespace

KdTree::KdTree(std::span<const Point> points) {
  if (points.empty()) return;
  std::vector<std::uint32_t> order(points.size());
  std::iota(order.begin(), order.end(), 0U);
  nodes_.reserve(2 * points.size() / kLeafSize + 2);
  build(order, points, 0, static_cast<std::uint32_t>(points.size()));

  xs_.resize(points.size());
  ys_.resize(points.size());
  zs_.resize(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Point& p = points[order[i]];
    xs_[i] = p.x;
    ys_[i] = p.y;
    zs_[i] = p.z;
  }
}

std::int32_t KdTree::build(std::vector<std::uint32_t>& order, std::span<const Point> points, std::uint32_t begin,
                           std::uint32_t end) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return index;

  std::array<std::uint32_t, 3> lo{UINT32_MAX, UINT32_MAX, UINT32_MAX};
  std::array<std::uint32_t, 3> hi{0, 0, 0};
  for (std::uint32_t i = begin; i < end; ++i) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], coord(points[order[i]], a));
      hi[a] = std::max(hi[a], coord(points[order[i]], a));
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  if (hi[axis] == lo[axis]) return index;  // all points coincide

  // Left holds coordinates <= split, right holds coordinates >= split.
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return coord(points[a], axis) < coord(points[b], axis); });

  const double split = coord(points[order[mid]], axis);
  const std::int32_t left = build(order, points, begin, mid);
  const std::int32_t right = build(order, points, mid, end);
  Node& node = nodes_[static_cast<std::size_t>(index)];
  node.axis = static_cast<std::int8_t>(axis);
  node.split = split;
  node.left = left;
  node.right = right;
  return index;
}

double KdTree::nearest_sq_distance(const Point& query) const {
  double best = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;

  const simd::Query q{static_cast<double>(query.x), static_cast<double>(query.y), static_cast<double>(query.z)};
  const std::array<double, 3> qa{q.x, q.y, q.z};

  struct Visit {
    std::int32_t node;
    double bound;  // lower bound on distance to anything under `node`
  };
  std::vector<Visit> stack;
  stack.reserve(64);
  stack.push_back({0, 0.0});
  while (!stack.empty()) {
    const Visit visit = stack.back();
    stack.pop_back();
    if (visit.bound >= best) continue;
    const Node& node = nodes_[static_cast<std::size_t>(visit.node)];
    if (node.axis < 0) {
      const simd::PointBlock block{xs_.data() + node.begin, ys_.data() + node.begin, zs_.data() + node.begin,
                                   node.end - node.begin};
      best = std::min(best, simd::min_sq_distance(q, block));
      continue;
    }
    const double diff = qa[static_cast<std::size_t>(node.axis)] - node.split;
    const std::int32_t near = diff < 0 ? node.left : node.right;
    const std::int32_t far = diff < 0 ? node.right : node.left;
    stack.push_back({far, std::max(visit.bound, diff * diff)});
    stack.push_back({near, visit.bound});
  }
  return best;
}

}  // namespace pcstream
