#include "pcstream/sampler.hpp"

#include <numeric>
#include <random>
#include <string>

#include "pcstream/errors.hpp"
#include "pcstream/random.hpp"

namespace pcstream {

std::vector<std::uint32_t> sampling_permutation(std::size_t n, std::uint64_t seed, std::uint64_t frame_id) {
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0U);
  std::mt19937_64 rng(mix_seed(seed, frame_id));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

PartitionSet partition(const PointCloud& cloud, std::uint32_t k, std::uint64_t seed) {
  if (k == 0) throw ValidationError("partition count must be at least 1");

  const std::size_t n = cloud.size();
  const std::vector<std::uint32_t> perm = sampling_permutation(n, seed, cloud.frame_id());
  const std::size_t base = n / k;
  const std::size_t extra = n % k;

  PartitionSet set;
  set.source_frame_id = cloud.frame_id();
  set.k = k;
  set.partitions.reserve(k);

  const auto source = cloud.points();
  std::size_t cursor = 0;
  for (std::uint32_t i = 0; i < k; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    std::vector<Point> run;
    run.reserve(len);
    for (std::size_t j = 0; j < len; ++j) run.push_back(source[perm[cursor + j]]);
    cursor += len;
    set.partitions.emplace_back(cloud.resolution(), cloud.frame_id(), std::move(run));
  }
  return set;
}

PointCloud merge(std::span<const PointCloud> parts) {
  if (parts.empty()) return PointCloud{};

  const std::uint32_t resolution = parts.front().resolution();
  const std::uint64_t frame_id = parts.front().frame_id();
  std::size_t total = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].frame_id() != frame_id || parts[i].resolution() != resolution) {
      throw ValidationError("merge: part " + std::to_string(i) + " has frame " + std::to_string(parts[i].frame_id()) +
                                "/resolution " + std::to_string(parts[i].resolution()) + ", expected frame " +
                                std::to_string(frame_id) + "/resolution " + std::to_string(resolution),
                            i);
    }
    total += parts[i].size();
  }

  std::vector<Point> points;
  points.reserve(total);
  for (const PointCloud& part : parts) points.insert(points.end(), part.points().begin(), part.points().end());
  return PointCloud(resolution, frame_id, std::move(points));
}

}  // namespace pcstream
