#include "psbed/ps/table.hpp"

#include <algorithm>
#include <numeric>

namespace psbed::ps {

ParameterTable::ParameterTable(const TableConfig& config) : config_(config) {
  PSBED_CHECK_MSG(config_.num_shards > 0, "table needs at least one shard");
  PSBED_CHECK_MSG(config_.dimension > 0, "table dimension must be positive");
  PSBED_CHECK_MSG(config_.capacity > 0, "table capacity must be positive");
  PSBED_CHECK_MSG(config_.retain_window >= 0, "retain window must be >= 0");
  shards_.reserve(config_.num_shards);
  for (int s = 0; s < config_.num_shards; ++s) {
    auto shard = std::make_unique<Shard>();
    shard->base.assign(
        static_cast<size_t>(ShardRowCount(s)) * config_.dimension, 0.0);
    shards_.push_back(std::move(shard));
  }
}

void ParameterTable::RegisterWorker(int worker) {
  std::lock_guard<std::mutex> lock(mu_);
  PSBED_CHECK_MSG(worker >= 0, "worker id must be non-negative");
  if (worker >= static_cast<int>(clocks_.size())) {
    clocks_.resize(worker + 1, 0);
    registered_.resize(worker + 1, false);
  }
  PSBED_CHECK_MSG(!registered_[worker], "worker registered twice");
  registered_[worker] = true;
}

void ParameterTable::InitValue(Key key, std::span<const double> value) {
  PSBED_CHECK_MSG(key < config_.capacity, "key outside table capacity");
  PSBED_CHECK_MSG(static_cast<int>(value.size()) == config_.dimension,
                  "value dimension mismatch");
  {
    std::lock_guard<std::mutex> lock(mu_);
    PSBED_CHECK_MSG(sealed_through_ == 0 &&
                        std::all_of(clocks_.begin(), clocks_.end(),
                                    [](int64_t c) { return c == 0; }),
                    "InitValue after the run started");
  }
  Shard& shard = *shards_[ShardOf(key, config_.num_shards)];
  std::lock_guard<std::mutex> lock(shard.mu);
  const size_t row = key / config_.num_shards;
  std::copy(value.begin(), value.end(),
            shard.base.begin() + row * config_.dimension);
}

void ParameterTable::FoldIntoShardAggregate(int64_t iteration, Key key,
                                            std::span<const double> delta) {
  Shard& shard = *shards_[ShardOf(key, config_.num_shards)];
  std::lock_guard<std::mutex> lock(shard.mu);
  auto it = shard.staged.find(iteration);
  if (it == shard.staged.end()) {
    it = shard.staged
             .emplace(iteration,
                      std::vector<double>(shard.base.size(), 0.0))
             .first;
  }
  const size_t row = key / config_.num_shards;
  double* dst = it->second.data() + row * config_.dimension;
  for (int d = 0; d < config_.dimension; ++d) dst[d] += delta[d];
}

void ParameterTable::StageItem(int64_t iteration, uint32_t item, Key key,
                               std::span<const double> delta) {
  PSBED_CHECK_MSG(key < config_.capacity, "key outside table capacity");
  PSBED_CHECK_MSG(static_cast<int>(delta.size()) == config_.dimension,
                  "delta dimension mismatch");
  {
    std::lock_guard<std::mutex> lock(mu_);
    PSBED_CHECK_MSG(iteration > sealed_through_,
                    "update staged for an already sealed iteration");
    if (config_.order == CommitOrder::kCanonical) {
      PendingIteration& p = pending_[iteration];
      p.entries.push_back(PendingEntry{
          item, key, static_cast<uint32_t>(p.values.size())});
      p.values.insert(p.values.end(), delta.begin(), delta.end());
      return;
    }
  }
  FoldIntoShardAggregate(iteration, key, delta);
}

void ParameterTable::SealLocked(int64_t iteration) {
  // Canonical mode folds the iteration's buffered entries in ascending item
  // order (stable within an item), making the aggregate independent of which
  // worker produced each update and in what order chunks committed.
  auto it = pending_.find(iteration);
  if (it != pending_.end()) {
    PendingIteration& p = it->second;
    std::stable_sort(p.entries.begin(), p.entries.end(),
                     [](const PendingEntry& a, const PendingEntry& b) {
                       return a.item < b.item;
                     });
    for (const PendingEntry& e : p.entries) {
      FoldIntoShardAggregate(
          iteration, e.key,
          std::span<const double>(p.values).subspan(e.val_offset,
                                                    config_.dimension));
    }
    pending_.erase(it);
  }
  sealed_through_ = iteration;
}

void ParameterTable::MergeThroughLocked(int64_t bound) {
  if (bound <= merged_through_) return;
  PSBED_CHECK(bound <= sealed_through_);
  for (auto& shard_ptr : shards_) {
    Shard& shard = *shard_ptr;
    std::lock_guard<std::mutex> lock(shard.mu);
    for (auto it = shard.staged.begin();
         it != shard.staged.end() && it->first <= bound;) {
      const std::vector<double>& agg = it->second;
      for (size_t i = 0; i < agg.size(); ++i) shard.base[i] += agg[i];
      it = shard.staged.erase(it);
    }
  }
  merged_through_ = bound;
}

int64_t ParameterTable::Clock(int worker) {
  std::lock_guard<std::mutex> lock(mu_);
  PSBED_CHECK_MSG(worker >= 0 && worker < static_cast<int>(registered_.size()) &&
                      registered_[worker],
                  "clock from unregistered worker");
  const int64_t new_clock = ++clocks_[worker];
  int64_t min_clock = new_clock;
  for (size_t w = 0; w < clocks_.size(); ++w) {
    if (registered_[w]) min_clock = std::min(min_clock, clocks_[w]);
  }
  // Iterations up to the cluster minimum can no longer receive updates.
  while (sealed_through_ < min_clock) SealLocked(sealed_through_ + 1);
  // Nothing below (min - retain_window) can ever be a read bound again.
  MergeThroughLocked(min_clock - config_.retain_window);
  return new_clock;
}

int64_t ParameterTable::ClockOf(int worker) const {
  std::lock_guard<std::mutex> lock(mu_);
  PSBED_CHECK_MSG(worker >= 0 && worker < static_cast<int>(registered_.size()) &&
                      registered_[worker],
                  "clock query for unregistered worker");
  return clocks_[worker];
}

int64_t ParameterTable::MinClock() const {
  std::lock_guard<std::mutex> lock(mu_);
  int64_t min_clock = INT64_MAX;
  bool any = false;
  for (size_t w = 0; w < clocks_.size(); ++w) {
    if (registered_[w]) {
      min_clock = std::min(min_clock, clocks_[w]);
      any = true;
    }
  }
  PSBED_CHECK_MSG(any, "clock view with no registered workers");
  return min_clock;
}

std::vector<int64_t> ParameterTable::ClockView() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<int64_t> view;
  for (size_t w = 0; w < clocks_.size(); ++w) {
    if (registered_[w]) view.push_back(clocks_[w]);
  }
  return view;
}

int64_t ParameterTable::SealedThrough() const {
  std::lock_guard<std::mutex> lock(mu_);
  return sealed_through_;
}

std::vector<double> ParameterTable::ReadAtBound(Key key, int64_t bound) const {
  std::vector<double> out(config_.dimension);
  ReadAtBound(key, bound, std::span<double>(out));
  return out;
}

void ParameterTable::ReadAtBound(Key key, int64_t bound,
                                 std::span<double> out) const {
  PSBED_CHECK_MSG(key < config_.capacity, "key outside table capacity");
  PSBED_CHECK_MSG(static_cast<int>(out.size()) == config_.dimension,
                  "read buffer dimension mismatch");
  {
    std::lock_guard<std::mutex> lock(mu_);
    PSBED_CHECK_MSG(bound <= sealed_through_,
                    "read bound ahead of sealed history");
    PSBED_CHECK_MSG(bound >= merged_through_,
                    "read bound behind the merge horizon");
  }
  const Shard& shard = *shards_[ShardOf(key, config_.num_shards)];
  std::lock_guard<std::mutex> lock(shard.mu);
  const size_t row = key / config_.num_shards;
  const double* base = shard.base.data() + row * config_.dimension;
  for (int d = 0; d < config_.dimension; ++d) out[d] = base[d];
  for (const auto& [iter, agg] : shard.staged) {
    if (iter > bound) break;
    const double* src = agg.data() + row * config_.dimension;
    for (int d = 0; d < config_.dimension; ++d) out[d] += src[d];
  }
}

void ParameterTable::FillSnapshot(int64_t bound, TableSnapshot* out) const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    PSBED_CHECK_MSG(bound <= sealed_through_,
                    "snapshot bound ahead of sealed history");
    PSBED_CHECK_MSG(bound >= merged_through_,
                    "snapshot bound behind the merge horizon");
  }
  out->dimension = config_.dimension;
  out->bound = bound;
  out->data.assign(static_cast<size_t>(config_.capacity) * config_.dimension,
                   0.0);
  const int S = config_.num_shards;
  const int dim = config_.dimension;
  for (int s = 0; s < S; ++s) {
    const Shard& shard = *shards_[s];
    std::lock_guard<std::mutex> lock(shard.mu);
    const int rows = ShardRowCount(s);
    for (int r = 0; r < rows; ++r) {
      const Key key = static_cast<Key>(r) * S + s;
      double* dst = out->data.data() + static_cast<size_t>(key) * dim;
      const double* base = shard.base.data() + static_cast<size_t>(r) * dim;
      for (int d = 0; d < dim; ++d) dst[d] = base[d];
    }
    for (const auto& [iter, agg] : shard.staged) {
      if (iter > bound) break;
      for (int r = 0; r < rows; ++r) {
        const Key key = static_cast<Key>(r) * S + s;
        double* dst = out->data.data() + static_cast<size_t>(key) * dim;
        const double* src = agg.data() + static_cast<size_t>(r) * dim;
        for (int d = 0; d < dim; ++d) dst[d] += src[d];
      }
    }
  }
}

}  // namespace psbed::ps
