#include "psbed/workloads/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "psbed/common/hash_rng.hpp"

namespace psbed::workloads {

namespace {

// Key-tuple tags keeping the independent draw streams disjoint.
constexpr uint64_t kTagFactorL = 0x4c666163ULL;
constexpr uint64_t kTagFactorR = 0x52666163ULL;
constexpr uint64_t kTagCell = 0x63656c6cULL;
constexpr uint64_t kTagNoise = 0x6e6f6973ULL;
constexpr uint64_t kTagSeparator = 0x73657061ULL;
constexpr uint64_t kTagSupport = 0x73757070ULL;
constexpr uint64_t kTagFeature = 0x66656174ULL;
constexpr uint64_t kTagToken = 0x746f6b65ULL;

double UnitSigned(uint64_t h) { return 2.0 * ToUnitDouble(h) - 1.0; }

// One standard gaussian from a hashed key (Box-Muller on two sub-draws).
double HashGaussian(uint64_t h) {
  const double u1 = ToUnitDoubleOpenLow(SplitMix64(h));
  const double u2 = ToUnitDouble(SplitMix64(h ^ 0x5bf0366bULL));
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

void RatingsMatrix::Validate() const {
  PSBED_CHECK_MSG(rows > 0 && cols > 0, "empty matrix shape");
  for (const Entry& e : entries) {
    PSBED_CHECK_MSG(e.row < rows && e.col < cols, "rating index out of range");
    PSBED_CHECK_MSG(std::isfinite(e.value), "non-finite rating");
  }
}

RatingsMatrix GenRatings(uint32_t rows, uint32_t cols, int rank,
                         double density, double noise, uint64_t seed) {
  PSBED_CHECK_MSG(rows > 0 && cols > 0, "matrix shape must be positive");
  PSBED_CHECK_MSG(rank > 0 && static_cast<uint32_t>(rank) <= rows &&
                      static_cast<uint32_t>(rank) <= cols,
                  "rank must lie in [1, min(rows, cols)]");
  PSBED_CHECK_MSG(density > 0.0 && density <= 1.0,
                  "density must lie in (0, 1]");
  PSBED_CHECK_MSG(noise >= 0.0, "noise must be >= 0");

  RatingsMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.rank = rank;
  m.factor_l.resize(static_cast<size_t>(rows) * rank);
  m.factor_r.resize(static_cast<size_t>(cols) * rank);
  for (uint32_t i = 0; i < rows; ++i) {
    for (int r = 0; r < rank; ++r) {
      m.factor_l[static_cast<size_t>(i) * rank + r] =
          UnitSigned(HashMix(seed, kTagFactorL, i, r)) * 0.5;
    }
  }
  for (uint32_t j = 0; j < cols; ++j) {
    for (int r = 0; r < rank; ++r) {
      m.factor_r[static_cast<size_t>(j) * rank + r] =
          UnitSigned(HashMix(seed, kTagFactorR, j, r)) * 0.5;
    }
  }

  // Exactly round(cells x density) observed cells: rank every cell by its
  // hash and keep the smallest. Exact counts keep even worker shares even.
  const uint64_t cells = static_cast<uint64_t>(rows) * cols;
  const auto target = static_cast<uint64_t>(
      std::llround(density * static_cast<double>(cells)));
  PSBED_CHECK_MSG(target > 0, "density yields an empty matrix");
  std::vector<uint64_t> keep;
  if (target >= cells) {
    keep.resize(cells);
    for (uint64_t c = 0; c < cells; ++c) keep[c] = c;
  } else {
    std::vector<std::pair<uint64_t, uint64_t>> ranked(cells);
    for (uint64_t c = 0; c < cells; ++c) {
      ranked[c] = {HashMix(seed, kTagCell, c), c};
    }
    std::nth_element(ranked.begin(), ranked.begin() + target, ranked.end());
    keep.reserve(target);
    for (uint64_t i = 0; i < target; ++i) keep.push_back(ranked[i].second);
    std::sort(keep.begin(), keep.end());
  }

  m.entries.reserve(keep.size());
  for (uint64_t c : keep) {
    const auto i = static_cast<uint32_t>(c / cols);
    const auto j = static_cast<uint32_t>(c % cols);
    double v = 0.0;
    for (int r = 0; r < rank; ++r) {
      v += m.factor_l[static_cast<size_t>(i) * rank + r] *
           m.factor_r[static_cast<size_t>(j) * rank + r];
    }
    if (noise > 0.0) v += noise * HashGaussian(HashMix(seed, kTagNoise, c));
    m.entries.push_back(RatingsMatrix::Entry{i, j, v});
  }
  m.Validate();
  return m;
}

void ExampleSet::Validate() const {
  PSBED_CHECK_MSG(dim > 0, "feature dimension must be positive");
  for (const LabeledExample& e : examples) {
    PSBED_CHECK_MSG(e.label == 0 || e.label == 1, "labels must be binary");
    uint32_t prev = 0;
    bool first = true;
    for (const auto& [idx, val] : e.features) {
      PSBED_CHECK_MSG(idx < dim, "feature index out of range");
      PSBED_CHECK_MSG(first || idx > prev, "feature indices must increase");
      PSBED_CHECK_MSG(std::isfinite(val), "non-finite feature value");
      prev = idx;
      first = false;
    }
  }
}

ExampleSet GenExamples(uint32_t n, uint32_t dim, double margin, int nnz,
                       uint64_t seed) {
  PSBED_CHECK_MSG(n > 0 && dim > 0, "example set shape must be positive");
  PSBED_CHECK_MSG(margin > 0.0, "margin must be positive");
  PSBED_CHECK_MSG(nnz > 0 && static_cast<uint32_t>(nnz) <= dim,
                  "nnz must lie in [1, dim]");

  ExampleSet s;
  s.dim = dim;
  s.planted_w.resize(dim);
  for (uint32_t k = 0; k < dim; ++k) {
    s.planted_w[k] = UnitSigned(HashMix(seed, kTagSeparator, k));
  }

  s.examples.resize(n);
  for (uint32_t e = 0; e < n; ++e) {
    LabeledExample& ex = s.examples[e];
    // nnz distinct support indices per example.
    std::vector<uint32_t> support;
    support.reserve(nnz);
    for (uint64_t probe = 0; static_cast<int>(support.size()) < nnz;
         ++probe) {
      const auto idx = static_cast<uint32_t>(
          HashMix(seed, kTagSupport, e, probe) % dim);
      if (std::find(support.begin(), support.end(), idx) == support.end()) {
        support.push_back(idx);
      }
    }
    std::sort(support.begin(), support.end());

    double dot = 0.0;
    double support_norm2 = 0.0;
    ex.features.reserve(nnz);
    for (int k = 0; k < nnz; ++k) {
      const double v =
          UnitSigned(HashMix(seed, kTagFeature, e, support[k]));
      ex.features.emplace_back(support[k], v);
      dot += v * s.planted_w[support[k]];
      support_norm2 += s.planted_w[support[k]] * s.planted_w[support[k]];
    }
    const double side = dot >= 0.0 ? 1.0 : -1.0;
    ex.label = side > 0.0 ? 1 : 0;
    // Shift along the separator restricted to the support so the signed
    // margin is met exactly; the support keeps its sparsity pattern.
    if (side * dot < margin) {
      PSBED_CHECK_MSG(support_norm2 > 0.0,
                      "degenerate support for margin enforcement");
      const double t = (margin - side * dot) / support_norm2;
      for (auto& [idx, val] : ex.features) {
        val += side * t * s.planted_w[idx];
      }
    }
  }
  s.Validate();
  return s;
}

void Corpus::Validate() const {
  PSBED_CHECK_MSG(vocab_size > 0, "vocabulary must be non-empty");
  PSBED_CHECK_MSG(num_topics > 0, "topic count must be positive");
  PSBED_CHECK_MSG(doc_slot_offset.size() == docs.size() + 1,
                  "slot offsets out of sync");
  for (size_t d = 0; d < docs.size(); ++d) {
    PSBED_CHECK_MSG(doc_slot_offset[d + 1] - doc_slot_offset[d] ==
                        docs[d].size(),
                    "slot offsets out of sync");
    for (uint32_t w : docs[d]) {
      PSBED_CHECK_MSG(w < vocab_size, "token id out of range");
    }
  }
  PSBED_CHECK_MSG(doc_slot_offset.back() == total_tokens,
                  "token total out of sync");
}

Corpus GenCorpus(uint32_t num_docs, int doc_len, uint32_t vocab_size,
                 int num_topics, uint64_t seed) {
  PSBED_CHECK_MSG(num_docs > 0 && doc_len > 0, "corpus shape must be positive");
  PSBED_CHECK_MSG(num_topics > 0, "topic count must be positive");
  PSBED_CHECK_MSG(vocab_size >= static_cast<uint32_t>(num_topics),
                  "need at least one word per topic");

  Corpus c;
  c.vocab_size = vocab_size;
  c.num_topics = num_topics;
  c.docs.resize(num_docs);
  c.doc_slot_offset.resize(num_docs + 1, 0);
  const uint32_t slice = vocab_size / static_cast<uint32_t>(num_topics);
  for (uint32_t d = 0; d < num_docs; ++d) {
    const uint32_t topic = d % static_cast<uint32_t>(num_topics);
    const uint32_t begin = topic * slice;
    std::vector<uint32_t>& doc = c.docs[d];
    doc.resize(doc_len);
    for (int t = 0; t < doc_len; ++t) {
      doc[t] = begin + static_cast<uint32_t>(
                           HashMix(seed, kTagToken, d, t) % slice);
    }
    c.doc_slot_offset[d + 1] = c.doc_slot_offset[d] + doc.size();
  }
  c.total_tokens = c.doc_slot_offset.back();
  c.Validate();
  return c;
}

void DumpRatings(const RatingsMatrix& m, std::ostream& os) {
  os << m.rows << ' ' << m.cols << '\n';
  os.precision(17);
  for (const auto& e : m.entries) {
    os << e.row << ' ' << e.col << ' ' << e.value << '\n';
  }
}

RatingsMatrix LoadRatings(std::istream& is) {
  RatingsMatrix m;
  PSBED_CHECK_MSG(static_cast<bool>(is >> m.rows >> m.cols),
                  "malformed ratings header");
  RatingsMatrix::Entry e;
  while (is >> e.row >> e.col >> e.value) m.entries.push_back(e);
  m.rank = 1;  // unknown after a round trip; shape-only metadata
  m.Validate();
  return m;
}

void DumpExamples(const ExampleSet& s, std::ostream& os) {
  os << s.dim << '\n';
  os.precision(17);
  for (const auto& ex : s.examples) {
    os << ex.label;
    for (const auto& [idx, val] : ex.features) os << ' ' << idx << ':' << val;
    os << '\n';
  }
}

ExampleSet LoadExamples(std::istream& is) {
  ExampleSet s;
  std::string line;
  PSBED_CHECK_MSG(static_cast<bool>(std::getline(is, line)),
                  "malformed example header");
  s.dim = static_cast<uint32_t>(std::stoul(line));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    LabeledExample ex;
    PSBED_CHECK_MSG(static_cast<bool>(ls >> ex.label), "malformed example");
    std::string pair;
    while (ls >> pair) {
      const size_t colon = pair.find(':');
      PSBED_CHECK_MSG(colon != std::string::npos, "malformed feature pair");
      ex.features.emplace_back(
          static_cast<uint32_t>(std::stoul(pair.substr(0, colon))),
          std::stod(pair.substr(colon + 1)));
    }
    s.examples.push_back(std::move(ex));
  }
  s.Validate();
  return s;
}

void DumpCorpus(const Corpus& c, std::ostream& os) {
  os << c.vocab_size << ' ' << c.num_topics << '\n';
  for (const auto& doc : c.docs) {
    for (size_t t = 0; t < doc.size(); ++t) {
      if (t) os << ' ';
      os << doc[t];
    }
    os << '\n';
  }
}

Corpus LoadCorpus(std::istream& is) {
  Corpus c;
  std::string line;
  PSBED_CHECK_MSG(static_cast<bool>(std::getline(is, line)),
                  "malformed corpus header");
  {
    std::istringstream hs(line);
    PSBED_CHECK_MSG(static_cast<bool>(hs >> c.vocab_size >> c.num_topics),
                    "malformed corpus header");
  }
  c.doc_slot_offset.push_back(0);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<uint32_t> doc;
    uint32_t w;
    while (ls >> w) doc.push_back(w);
    c.docs.push_back(std::move(doc));
    c.doc_slot_offset.push_back(c.doc_slot_offset.back() +
                                c.docs.back().size());
  }
  c.total_tokens = c.doc_slot_offset.back();
  c.Validate();
  return c;
}

}  // namespace psbed::workloads
