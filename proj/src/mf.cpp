#include "psbed/workloads/mf.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "psbed/common/error.hpp"
#include "psbed/common/hash_rng.hpp"

namespace psbed::workloads {

namespace {
constexpr uint64_t kTagInitFactor = 0x6d66696eULL;
}  // namespace

MatrixFactorization::MatrixFactorization(RatingsMatrix data, int rank,
                                         double step, double reg,
                                         uint64_t init_seed)
    : data_(std::move(data)),
      rank_(rank),
      step_(step),
      reg_(reg),
      init_seed_(init_seed) {
  data_.Validate();
  PSBED_CHECK_MSG(rank_ > 0, "rank must be positive");
  PSBED_CHECK_MSG(step_ > 0.0, "step must be positive");
  PSBED_CHECK_MSG(reg_ >= 0.0, "reg must be >= 0");
  PSBED_CHECK_MSG(!data_.entries.empty(), "no observed ratings");
  info_.num_items = static_cast<uint32_t>(data_.entries.size());
  info_.table_capacity = static_cast<ps::Key>(data_.rows) + data_.cols;
  info_.dimension = rank_;
  info_.default_item_cost_us = 8.0;
}

void MatrixFactorization::InitTable(ps::ParameterTable* table) {
  // Small positive factors; the scale keeps initial predictions near the
  // magnitude of the planted ratings.
  const double scale = 1.0 / std::sqrt(static_cast<double>(rank_));
  std::vector<double> row(rank_);
  for (ps::Key key = 0; key < info_.table_capacity; ++key) {
    for (int r = 0; r < rank_; ++r) {
      row[r] = scale * ToUnitDouble(HashMix(init_seed_, kTagInitFactor,
                                            key, static_cast<uint64_t>(r)));
    }
    table->InitValue(key, row);
  }
}

void MatrixFactorization::ProcessItems(const ValueSource& source,
                                       int64_t /*iteration*/,
                                       std::span<const uint32_t> items,
                                       ps::ChunkUpdates* out) const {
  std::vector<double> li(rank_);
  std::vector<double> rj(rank_);
  std::vector<double> dl(rank_);
  std::vector<double> dr(rank_);
  for (uint32_t item : items) {
    PSBED_CHECK_MSG(item < info_.num_items, "item id out of range");
    const RatingsMatrix::Entry& e = data_.entries[item];
    const ps::Key lkey = e.row;
    const ps::Key rkey = static_cast<ps::Key>(data_.rows) + e.col;
    source.Read(lkey, li);
    source.Read(rkey, rj);
    double pred = 0.0;
    for (int r = 0; r < rank_; ++r) pred += li[r] * rj[r];
    const double err = e.value - pred;
    PSBED_CHECK_MSG(std::isfinite(err), "matrix factorization diverged");
    for (int r = 0; r < rank_; ++r) {
      dl[r] = step_ * (err * rj[r] - reg_ * li[r]);
      dr[r] = step_ * (err * li[r] - reg_ * rj[r]);
    }
    out->BeginItem(item, err * err);
    out->AddUpdate(lkey, dl);
    out->AddUpdate(rkey, dr);
  }
}

double MatrixFactorization::FinalObjective(double summed) const {
  return std::sqrt(summed / static_cast<double>(info_.num_items));
}

}  // namespace psbed::workloads
