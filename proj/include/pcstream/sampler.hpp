#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcstream/pointcloud.hpp"

namespace pcstream {

/// K disjoint descriptions of one frame; index i is representation level i,
/// which is also the track it is published on.
struct PartitionSet {
  std::uint64_t source_frame_id = 0;
  std::uint32_t k = 0;
  std::vector<PointCloud> partitions;
};

/// Seeded Fisher-Yates permutation of [0, n) used by `partition`; the RNG is
/// an mt19937_64 seeded with mix_seed(seed, frame_id).
std::vector<std::uint32_t> sampling_permutation(std::size_t n, std::uint64_t seed, std::uint64_t frame_id);

/// Random uniform sampling: the permutation is cut into k contiguous runs,
/// the first n % k of which hold one extra point. k > n yields empty partitions.
PartitionSet partition(const PointCloud& cloud, std::uint32_t k, std::uint64_t seed);

/// Concatenates point sequences in the given order. All parts must agree on
/// frame id and resolution; an empty input yields an empty default cloud.
PointCloud merge(std::span<const PointCloud> parts);

}  // namespace pcstream
