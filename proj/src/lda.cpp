#include "psbed/workloads/lda.hpp"

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "psbed/common/error.hpp"
#include "psbed/common/hash_rng.hpp"

namespace psbed::workloads {

namespace {
constexpr uint64_t kTagInitTopic = 0x6c646130ULL;
constexpr uint64_t kTagGibbs = 0x6c646131ULL;
}  // namespace

CollapsedGibbsLda::CollapsedGibbsLda(Corpus corpus, double alpha, double beta,
                                     uint64_t seed)
    : corpus_(std::move(corpus)),
      alpha_(alpha),
      beta_(beta),
      seed_(seed),
      num_topics_(corpus_.num_topics) {
  corpus_.Validate();
  PSBED_CHECK_MSG(alpha_ > 0.0 && beta_ > 0.0, "priors must be positive");
  PSBED_CHECK_MSG(!corpus_.docs.empty(), "empty corpus");
  info_.num_items = static_cast<uint32_t>(corpus_.docs.size());
  info_.table_capacity = static_cast<ps::Key>(corpus_.vocab_size) + 1;
  info_.dimension = num_topics_;
  info_.default_item_cost_us = 400.0;

  state_ = std::make_unique<std::atomic<uint32_t>[]>(corpus_.total_tokens);
  for (uint64_t slot = 0; slot < corpus_.total_tokens; ++slot) {
    state_[slot].store(
        static_cast<uint32_t>(HashMix(seed_, kTagInitTopic, slot) %
                              static_cast<uint64_t>(num_topics_)),
        std::memory_order_relaxed);
  }
}

void CollapsedGibbsLda::InitTable(ps::ParameterTable* table) {
  const auto k = static_cast<size_t>(num_topics_);
  std::vector<double> word_counts(static_cast<size_t>(corpus_.vocab_size) * k,
                                  0.0);
  std::vector<double> totals(k, 0.0);
  for (size_t d = 0; d < corpus_.docs.size(); ++d) {
    uint64_t slot = corpus_.doc_slot_offset[d];
    for (uint32_t w : corpus_.docs[d]) {
      const uint32_t z = state_[slot++].load(std::memory_order_relaxed);
      word_counts[static_cast<size_t>(w) * k + z] += 1.0;
      totals[z] += 1.0;
    }
  }
  std::vector<double> row(k);
  for (uint32_t w = 0; w < corpus_.vocab_size; ++w) {
    bool any = false;
    for (size_t t = 0; t < k; ++t) {
      row[t] = word_counts[static_cast<size_t>(w) * k + t];
      any = any || row[t] != 0.0;
    }
    if (any) table->InitValue(w, row);
  }
  table->InitValue(corpus_.vocab_size, totals);
}

void CollapsedGibbsLda::ProcessItems(const ValueSource& source,
                                     int64_t iteration,
                                     std::span<const uint32_t> items,
                                     ps::ChunkUpdates* out) const {
  const int k = num_topics_;
  const double vbeta = static_cast<double>(corpus_.vocab_size) * beta_;
  const ps::Key totals_key = corpus_.vocab_size;

  std::vector<double> totals_row(k);
  std::vector<double> totals_delta(k);
  std::vector<double> doc_topic(k);
  std::vector<double> weight(k);
  std::vector<uint32_t> z;
  // Per distinct word of the document: the in-flight local row and the net
  // delta this sweep will commit.
  struct WordCell {
    std::vector<double> row;
    std::vector<double> delta;
  };
  std::map<uint32_t, WordCell> words;

  for (uint32_t item : items) {
    PSBED_CHECK_MSG(item < info_.num_items, "item id out of range");
    const std::vector<uint32_t>& doc = corpus_.docs[item];
    const uint64_t base_slot = corpus_.doc_slot_offset[item];
    int64_t incidents = 0;
    double objective = 0.0;

    source.Read(totals_key, totals_row);
    std::fill(totals_delta.begin(), totals_delta.end(), 0.0);
    std::fill(doc_topic.begin(), doc_topic.end(), 0.0);
    words.clear();
    z.resize(doc.size());
    for (size_t t = 0; t < doc.size(); ++t) {
      z[t] = state_[base_slot + t].load(std::memory_order_relaxed);
      PSBED_CHECK_MSG(z[t] < static_cast<uint32_t>(k),
                      "corrupt topic assignment");
      doc_topic[z[t]] += 1.0;
    }

    for (size_t t = 0; t < doc.size(); ++t) {
      const uint32_t w = doc[t];
      auto [it, fresh] = words.try_emplace(w);
      WordCell& cell = it->second;
      if (fresh) {
        cell.row.resize(k);
        cell.delta.assign(k, 0.0);
        source.Read(w, cell.row);
      }
      const uint32_t z0 = z[t];
      doc_topic[z0] -= 1.0;  // exclude this token from its own doc counts
      double total = 0.0;
      for (int c = 0; c < k; ++c) {
        const double excl = c == static_cast<int>(z0) ? 1.0 : 0.0;
        double wc = cell.row[c] - excl;
        if (wc < 0.0) {
          wc = 0.0;
          ++incidents;
        }
        double tc = totals_row[c] - excl;
        if (tc < 0.0) {
          tc = 0.0;
          ++incidents;
        }
        weight[c] =
            (alpha_ + doc_topic[c]) * (beta_ + wc) / (vbeta + tc);
        total += weight[c];
      }
      PSBED_CHECK_MSG(total > 0.0 && std::isfinite(total),
                      "degenerate sampling weights");
      const double u =
          ToUnitDouble(HashMix(seed_, kTagGibbs,
                               static_cast<uint64_t>(iteration),
                               base_slot + t)) *
          total;
      int z1 = k - 1;
      double cum = 0.0;
      for (int c = 0; c < k; ++c) {
        cum += weight[c];
        if (u < cum) {
          z1 = c;
          break;
        }
      }
      objective += std::log(weight[z1] / total);
      doc_topic[z1] += 1.0;
      if (z1 != static_cast<int>(z0)) {
        cell.row[z0] -= 1.0;
        cell.row[z1] += 1.0;
        cell.delta[z0] -= 1.0;
        cell.delta[z1] += 1.0;
        totals_row[z0] -= 1.0;
        totals_row[z1] += 1.0;
        totals_delta[z0] -= 1.0;
        totals_delta[z1] += 1.0;
        z[t] = static_cast<uint32_t>(z1);
      }
    }

    out->BeginItem(item, objective);
    for (const auto& [w, cell] : words) out->AddUpdate(w, cell.delta);
    out->AddUpdate(totals_key, totals_delta);
    for (size_t t = 0; t < doc.size(); ++t) {
      out->AddStateWrite(base_slot + t, z[t]);
    }
    out->clamp_incidents += incidents;
  }
}

void CollapsedGibbsLda::WriteState(uint64_t slot, uint32_t value) {
  PSBED_CHECK_MSG(slot < corpus_.total_tokens, "state slot out of range");
  state_[slot].store(value, std::memory_order_relaxed);
}

double CollapsedGibbsLda::FinalObjective(double summed) const {
  return summed / static_cast<double>(corpus_.total_tokens);
}

uint32_t CollapsedGibbsLda::AssignmentOf(uint64_t slot) const {
  PSBED_CHECK_MSG(slot < corpus_.total_tokens, "state slot out of range");
  return state_[slot].load(std::memory_order_relaxed);
}

}  // namespace psbed::workloads
