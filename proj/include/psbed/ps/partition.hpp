#pragma once

#include <cstdint>

#include "psbed/common/error.hpp"

namespace psbed::ps {

using Key = uint32_t;

// Keys hash onto shards by plain modulo. Every key maps to exactly one shard
// for a given shard count.
inline int ShardOf(Key key, int num_shards) {
  PSBED_CHECK_MSG(num_shards > 0, "shard count must be positive");
  return static_cast<int>(key % static_cast<Key>(num_shards));
}

}  // namespace psbed::ps
