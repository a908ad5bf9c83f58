#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "bsr/errors.hpp"

namespace bsr {

/// Partition of a coefficient vector into K contiguous, non-overlapping
/// blocks covering indices 0..total-1.
class BlockPartition {
 public:
  explicit BlockPartition(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw InvalidInput("BlockPartition: no blocks");
    offsets_.reserve(sizes_.size());
    int running = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      if (sizes_[i] < 1)
        throw InvalidInput("BlockPartition: block " + std::to_string(i) +
                           " has non-positive size");
      offsets_.push_back(running);
      running += sizes_[i];
    }
    total_ = running;
  }

  /// K equal blocks of the given length.
  static BlockPartition uniform(int blocks, int block_size) {
    if (blocks < 1) throw InvalidInput("BlockPartition::uniform: blocks < 1");
    return BlockPartition(std::vector<int>(static_cast<std::size_t>(blocks), block_size));
  }

  int blocks() const { return static_cast<int>(sizes_.size()); }
  int size(int i) const { return sizes_[static_cast<std::size_t>(i)]; }
  int offset(int i) const { return offsets_[static_cast<std::size_t>(i)]; }
  int total() const { return total_; }

  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<int>& offsets() const { return offsets_; }

  bool operator==(const BlockPartition& o) const { return sizes_ == o.sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int total_ = 0;
};

}  // namespace bsr
