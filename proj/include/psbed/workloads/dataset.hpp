#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "psbed/common/error.hpp"

namespace psbed::workloads {

// Sparse ratings matrix with planted low-rank structure. `factor_l` /
// `factor_r` keep the planted factors so tests can check the planting.
struct RatingsMatrix {
  uint32_t rows = 0;
  uint32_t cols = 0;
  int rank = 0;

  struct Entry {
    uint32_t row;
    uint32_t col;
    double value;
  };
  std::vector<Entry> entries;

  std::vector<double> factor_l;  // rows x rank (planted)
  std::vector<double> factor_r;  // cols x rank (planted)

  void Validate() const;
};

// rows x cols matrix with values L·Rᵀ + noise x gaussian on exactly
// round(rows x cols x density) distinct cells, chosen uniformly. Fully
// deterministic in `seed`.
RatingsMatrix GenRatings(uint32_t rows, uint32_t cols, int rank,
                         double density, double noise, uint64_t seed);

// Sparse binary-labeled example: (feature index, value) pairs, indices
// strictly increasing.
struct LabeledExample {
  std::vector<std::pair<uint32_t, double>> features;
  int label = 0;  // 0 or 1
};

struct ExampleSet {
  uint32_t dim = 0;
  std::vector<LabeledExample> examples;
  std::vector<double> planted_w;  // the separator every example satisfies

  void Validate() const;
};

// n examples over `dim` features (nnz nonzeros each) satisfying
// (2·label − 1) · (planted_w · x) >= margin exactly.
ExampleSet GenExamples(uint32_t n, uint32_t dim, double margin, int nnz,
                       uint64_t seed);

// Token-id documents with one planted topic per document: document d draws
// all tokens from topic (d mod num_topics)'s vocabulary slice, so topics own
// disjoint word ranges.
struct Corpus {
  uint32_t vocab_size = 0;
  int num_topics = 0;
  std::vector<std::vector<uint32_t>> docs;

  // Global slot of token t of document d (slots tile documents in order).
  std::vector<uint64_t> doc_slot_offset;
  uint64_t total_tokens = 0;

  int PlantedTopicOf(uint32_t doc) const {
    return static_cast<int>(doc % static_cast<uint32_t>(num_topics));
  }
  void Validate() const;
};

Corpus GenCorpus(uint32_t num_docs, int doc_len, uint32_t vocab_size,
                 int num_topics, uint64_t seed);

// Plain-text round trips for inspection: ratings as "row col value" triples,
// examples as "label idx:val idx:val ...", corpus as one line of token ids
// per document (planted metadata is not preserved).
void DumpRatings(const RatingsMatrix& m, std::ostream& os);
RatingsMatrix LoadRatings(std::istream& is);
void DumpExamples(const ExampleSet& s, std::ostream& os);
ExampleSet LoadExamples(std::istream& is);
void DumpCorpus(const Corpus& c, std::ostream& os);
Corpus LoadCorpus(std::istream& is);

}  // namespace psbed::workloads
