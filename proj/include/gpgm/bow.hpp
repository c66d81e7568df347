#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_set>
#include <vector>

#include "gpgm/error.hpp"
#include "gpgm/features.hpp"
#include "gpgm/synth.hpp"

namespace gpgm {

/// Flat visual vocabulary with per-word idf and distance scale.
struct Vocabulary {
  std::vector<Descriptor> words;
  std::vector<double> idf;
  std::vector<double> lambda_w;
  std::uint64_t seed = 0;

  int k() const noexcept { return static_cast<int>(words.size()); }

  void validate() const {
    if (words.size() < 2) throw InvalidArgument("Vocabulary: at least two words are required");
    if (idf.size() != words.size() || lambda_w.size() != words.size())
      throw InvalidArgument("Vocabulary: idf and lambda_w must have one entry per word");
    for (std::size_t i = 0; i < words.size(); ++i)
      if (!(idf[i] >= 0.0) || !(lambda_w[i] > 0.0)) throw InvalidArgument("Vocabulary: idf must be >= 0 and lambda_w > 0");
  }
};

struct WordAssignment {
  int word = 0;
  double distance = 0.0;
};

/// Nearest word under L1; ties go to the lowest word id.
inline WordAssignment nearest_word(const std::vector<Descriptor>& words, const Descriptor& d) {
  WordAssignment best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t w = 0; w < words.size(); ++w) {
    const double dist = l1_distance(words[w], d);
    if (dist < best.distance) best = {static_cast<int>(w), dist};
  }
  return best;
}

namespace bow_detail {

/// Uniform double in [0, 1) from the top 53 bits; portable across standard libraries.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

}  // namespace bow_detail

struct VocabularyOptions {
  int k = 128;
  int max_iters = 50;
  std::uint64_t seed = 0;
};

/// k-means++ seeded flat k-means under L1 assignment. `images` groups descriptors
/// by training image, which is what the idf counts.
inline Vocabulary build_vocabulary(const std::vector<std::vector<Descriptor>>& images, const VocabularyOptions& opt) {
  if (opt.k < 2) throw InvalidArgument("build_vocabulary: k must be at least 2");
  if (opt.max_iters < 1) throw InvalidArgument("build_vocabulary: max_iters must be positive");
  std::vector<Descriptor> corpus;
  std::vector<int> image_of;
  for (std::size_t i = 0; i < images.size(); ++i)
    for (const auto& d : images[i]) {
      corpus.push_back(d);
      image_of.push_back(static_cast<int>(i));
    }
  const auto k = static_cast<std::size_t>(opt.k);
  if (corpus.size() < k) throw InvalidArgument("build_vocabulary: corpus smaller than k");

  std::mt19937_64 rng(splitmix64(opt.seed));
  std::vector<Descriptor> words;
  words.push_back(corpus[static_cast<std::size_t>(rng() % corpus.size())]);
  std::vector<double> d2(corpus.size(), std::numeric_limits<double>::infinity());
  while (words.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const double d = l1_distance(corpus[i], words.back());
      d2[i] = std::min(d2[i], d * d);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = bow_detail::unit(rng) * total;
      double acc = 0.0;
      pick = corpus.size() - 1;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = words.size() % corpus.size();
    }
    words.push_back(corpus[pick]);
  }

  std::vector<WordAssignment> assign(corpus.size());
  for (int iter = 0; iter < opt.max_iters; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const WordAssignment a = nearest_word(words, corpus[i]);
      if (a.word != assign[i].word) changed = true;
      assign[i] = a;
    }
    if (!changed) break;
    std::vector<std::array<double, 128>> sums(k, std::array<double, 128>{});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto w = static_cast<std::size_t>(assign[i].word);
      ++counts[w];
      for (std::size_t c = 0; c < 128; ++c) sums[w][c] += corpus[i][c];
    }
    for (std::size_t w = 0; w < k; ++w) {
      if (counts[w] == 0) {
        // Re-seed an empty cluster with the worst-fitting point.
        std::size_t far = 0;
        for (std::size_t i = 1; i < corpus.size(); ++i)
          if (assign[i].distance > assign[far].distance) far = i;
        words[w] = corpus[far];
        assign[far].distance = 0.0;
        continue;
      }
      for (std::size_t c = 0; c < 128; ++c) words[w][c] = static_cast<float>(sums[w][c] / static_cast<double>(counts[w]));
    }
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) assign[i] = nearest_word(words, corpus[i]);

  Vocabulary v;
  v.words = std::move(words);
  v.seed = opt.seed;
  v.idf.assign(k, 0.0);
  v.lambda_w.assign(k, 0.0);
  std::vector<std::unordered_set<int>> seen_in(k);
  std::vector<std::vector<double>> dists(k);
  std::vector<double> all;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto w = static_cast<std::size_t>(assign[i].word);
    seen_in[w].insert(image_of[i]);
    dists[w].push_back(assign[i].distance);
    all.push_back(assign[i].distance);
  }
  double global = bow_detail::median(all);
  if (!(global > 0.0)) global = 1.0;
  const double n_images = static_cast<double>(images.size());
  for (std::size_t w = 0; w < k; ++w) {
    v.idf[w] = std::max(0.0, std::log(n_images / (1.0 + static_cast<double>(seen_in[w].size()))));
    const double m = bow_detail::median(dists[w]);
    v.lambda_w[w] = m > 0.0 ? m : global;
  }
  return v;
}

struct BowEntry {
  int word = 0;
  double weight = 0.0;
  bool operator==(const BowEntry&) const = default;
};

/// Sparse word histogram sorted by word id. Zero-weight words are omitted.
struct BowVector {
  std::vector<BowEntry> entries;

  bool empty() const noexcept { return entries.empty(); }
  double l1() const noexcept {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight;
    return s;
  }
  bool operator==(const BowVector&) const = default;
};

/// tf-idf vector with each word scaled by the mean exp(-d / lambda_w) of its descriptors.
inline BowVector bow_vector(const Vocabulary& vocab, const std::vector<Descriptor>& descriptors) {
  BowVector out;
  if (descriptors.empty()) return out;
  const auto k = static_cast<std::size_t>(vocab.k());
  std::vector<std::size_t> count(k, 0);
  std::vector<double> wsum(k, 0.0);
  for (const auto& d : descriptors) {
    const WordAssignment a = nearest_word(vocab.words, d);
    const auto w = static_cast<std::size_t>(a.word);
    ++count[w];
    wsum[w] += std::exp(-a.distance / vocab.lambda_w[w]);
  }
  const double total = static_cast<double>(descriptors.size());
  for (std::size_t w = 0; w < k; ++w) {
    if (count[w] == 0) continue;
    const double n = static_cast<double>(count[w]);
    const double weight = (wsum[w] / n) * vocab.idf[w] * (n / total);
    if (weight > 0.0) out.entries.push_back({static_cast<int>(w), weight});
  }
  return out;
}

/// 1 - |a/|a| - b/|b||_1 / 2 over L1-normalized vectors; 0 if either side carries no weight.
inline double similarity(const BowVector& a, const BowVector& b) {
  const double na = a.l1(), nb = b.l1();
  if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
  double diff = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.entries.size() || j < b.entries.size()) {
    if (j == b.entries.size() || (i < a.entries.size() && a.entries[i].word < b.entries[j].word)) {
      diff += a.entries[i++].weight / na;
    } else if (i == a.entries.size() || b.entries[j].word < a.entries[i].word) {
      diff += b.entries[j++].weight / nb;
    } else {
      diff += std::abs(a.entries[i++].weight / na - b.entries[j++].weight / nb);
    }
  }
  return std::clamp(1.0 - 0.5 * diff, 0.0, 1.0);
}

struct ScoredMap {
  int id = 0;
  double score = 0.0;
};

/// Insertion-ordered store of map vectors. One writer or many readers.
class BowDatabase {
 public:
  void add(int id, BowVector v) {
    for (const auto& e : items_)
      if (e.first == id) throw InvalidArgument("BowDatabase: duplicate map id");
    items_.emplace_back(id, std::move(v));
  }

  std::size_t size() const noexcept { return items_.size(); }
  const std::vector<std::pair<int, BowVector>>& items() const noexcept { return items_; }

  /// Best `top_k` maps by similarity, excluding `self_id`; ties keep insertion order.
  std::vector<ScoredMap> query(const BowVector& v, int top_k, std::optional<int> self_id = std::nullopt) const {
    std::vector<ScoredMap> all;
    for (const auto& [id, vec] : items_) {
      if (self_id && id == *self_id) continue;
      all.push_back({id, similarity(v, vec)});
    }
    std::stable_sort(all.begin(), all.end(), [](const ScoredMap& a, const ScoredMap& b) { return a.score > b.score; });
    if (top_k >= 0 && all.size() > static_cast<std::size_t>(top_k)) all.resize(static_cast<std::size_t>(top_k));
    return all;
  }

 private:
  std::vector<std::pair<int, BowVector>> items_;
};

}  // namespace gpgm
