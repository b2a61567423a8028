#include "psbed/workloads/lr.hpp"

#include <cmath>
#include <utility>

#include "psbed/common/error.hpp"

namespace psbed::workloads {

namespace {

constexpr double kLogitCap = 30.0;

// log(1 + exp(-m)) without overflow for large |m|.
double StableLogLoss(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

}  // namespace

LogisticRegression::LogisticRegression(ExampleSet data, double step)
    : data_(std::move(data)), step_(step) {
  data_.Validate();
  PSBED_CHECK_MSG(step_ > 0.0, "step must be positive");
  PSBED_CHECK_MSG(!data_.examples.empty(), "no examples");
  info_.num_items = static_cast<uint32_t>(data_.examples.size());
  info_.table_capacity = data_.dim;
  info_.dimension = 1;
  info_.default_item_cost_us = 8.0;
}

void LogisticRegression::InitTable(ps::ParameterTable* /*table*/) {
  // Weights start at zero; absent rows already read as zero.
}

void LogisticRegression::ProcessItems(const ValueSource& source,
                                      int64_t /*iteration*/,
                                      std::span<const uint32_t> items,
                                      ps::ChunkUpdates* out) const {
  double w[1];
  for (uint32_t item : items) {
    PSBED_CHECK_MSG(item < info_.num_items, "item id out of range");
    const LabeledExample& ex = data_.examples[item];
    double z = 0.0;
    for (const auto& [idx, val] : ex.features) {
      source.Read(idx, w);
      z += w[0] * val;
    }
    bool clamped = false;
    if (z > kLogitCap) {
      z = kLogitCap;
      clamped = true;
    } else if (z < -kLogitCap) {
      z = -kLogitCap;
      clamped = true;
    }
    const double p = 1.0 / (1.0 + std::exp(-z));
    const double sign = ex.label == 1 ? 1.0 : -1.0;
    const double loss = StableLogLoss(sign * z);
    PSBED_CHECK_MSG(std::isfinite(loss), "logistic regression diverged");
    const double g = step_ * (static_cast<double>(ex.label) - p);
    out->BeginItem(item, loss);
    for (const auto& [idx, val] : ex.features) {
      const double delta[1] = {g * val};
      out->AddUpdate(idx, delta);
    }
    if (clamped) ++out->clamp_incidents;
  }
}

double LogisticRegression::FinalObjective(double summed) const {
  return summed / static_cast<double>(info_.num_items);
}

}  // namespace psbed::workloads
