#ifndef SIMT_METRICS_HPP
#define SIMT_METRICS_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "simt/decoding.hpp"
#include "simt/error.hpp"

namespace simt {

// ---------------------------------------------------------------------------
// Delay

/// tau = sum_t s(t) / (|X| |Y|). 1 for consecutive translation.
inline double delay_tau(std::span<const std::size_t> s_values, std::size_t source_len) {
  if (s_values.empty()) throw Error("undefined delay");
  if (source_len < 1) throw Error("delay needs a non-empty source");
  double total = 0.0;
  for (std::size_t s : s_values) {
    if (s < 1 || s > source_len) throw Error("s(t) outside [1, |X|]");
    total += static_cast<double>(s);
  }
  return total / (static_cast<double>(source_len) * static_cast<double>(s_values.size()));
}

struct DelayReport {
  double tau = 0.0;
  double mean_s_prime_ratio = 0.0;
  std::vector<std::size_t> s;
  std::vector<std::size_t> s_prime;
};

inline DelayReport delay_report(const DecodingTrace& trace, std::size_t source_len) {
  DelayReport r;
  r.s = trace.s_values();
  r.s_prime = trace.s_prime_values();
  r.tau = delay_tau(r.s, source_len);
  double ratio = 0.0;
  for (std::size_t sp : r.s_prime) ratio += static_cast<double>(sp) / static_cast<double>(source_len);
  r.mean_s_prime_ratio = ratio / static_cast<double>(r.s_prime.size());
  return r;
}

/// Unweighted mean of per-sentence delays.
inline double mean_delay(std::span<const double> taus) {
  if (taus.empty()) throw Error("undefined delay");
  return std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(taus.size());
}

/// Quality-to-delay ratio.
inline double q2d(double bleu, double mean_tau) {
  if (!(mean_tau > 0.0)) throw Error("q2d: mean delay must be positive");
  return bleu / mean_tau;
}

// ---------------------------------------------------------------------------
// BLEU

struct BleuReport {
  double bleu = 0.0;
  std::vector<double> precisions;  // p_1 .. p_max_n
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

/// Corpus BLEU: clipped n-gram counts pooled over the corpus, geometric mean
/// of p_1..p_max_n, brevity penalty min(1, exp(1 - r/c)). No smoothing; a zero
/// numerator for any order gives 0.
template <class Token>
BleuReport corpus_bleu(const std::vector<std::vector<Token>>& hypotheses,
                       const std::vector<std::vector<Token>>& references, std::size_t max_n = 4) {
  if (hypotheses.size() != references.size())
    throw DataError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                    std::to_string(references.size()) + " references");
  if (max_n < 1) throw UsageError("bleu: max_n must be >= 1");
  std::vector<std::size_t> matches(max_n, 0), totals(max_n, 0);
  BleuReport rep;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& hyp = hypotheses[i];
    const auto& ref = references[i];
    rep.hyp_length += hyp.size();
    rep.ref_length += ref.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      if (hyp.size() < n) continue;
      std::map<std::vector<Token>, std::size_t> ref_counts, hyp_counts;
      for (std::size_t k = 0; k + n <= ref.size(); ++k) ++ref_counts[{ref.begin() + k, ref.begin() + k + n}];
      for (std::size_t k = 0; k + n <= hyp.size(); ++k) ++hyp_counts[{hyp.begin() + k, hyp.begin() + k + n}];
      totals[n - 1] += hyp.size() - n + 1;
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < max_n; ++n) {
    const double p = totals[n] ? static_cast<double>(matches[n]) / static_cast<double>(totals[n]) : 0.0;
    rep.precisions.push_back(p);
    if (matches[n] == 0)
      zero = true;
    else
      log_sum += std::log(p);
  }
  if (rep.hyp_length == 0) {
    rep.brevity_penalty = 0.0;
  } else if (rep.hyp_length >= rep.ref_length) {
    rep.brevity_penalty = 1.0;
  } else {
    rep.brevity_penalty =
        std::exp(1.0 - static_cast<double>(rep.ref_length) / static_cast<double>(rep.hyp_length));
  }
  rep.bleu = zero ? 0.0 : 100.0 * rep.brevity_penalty * std::exp(log_sum / static_cast<double>(max_n));
  return rep;
}

/// Fraction of reference positions whose token the hypothesis reproduces.
inline double token_accuracy(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references) {
  if (hypotheses.size() != references.size()) throw DataError("accuracy: corpus size mismatch");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    total += references[i].size();
    for (std::size_t k = 0; k < references[i].size() && k < hypotheses[i].size(); ++k)
      hit += hypotheses[i][k] == references[i][k];
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------------------
// Alignment chunks

/// Target tokens [tgt_begin, tgt_end) were produced while conditioning on
/// source tokens up to src_end; the chunk owns source [src_begin, src_end).
struct Chunk {
  std::size_t src_begin = 0, src_end = 0;
  std::size_t tgt_begin = 0, tgt_end = 0;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Groups consecutive target tokens sharing the same s'(t).
inline std::vector<Chunk> alignment_chunks(std::span<const std::size_t> s_prime) {
  std::vector<Chunk> chunks;
  std::size_t prev = 0;
  for (std::size_t t = 0; t < s_prime.size(); ++t) {
    if (t > 0 && s_prime[t] < s_prime[t - 1]) throw Error("alignment_chunks: s' must be nondecreasing");
    if (chunks.empty() || s_prime[t] != chunks.back().src_end) {
      chunks.push_back({prev, s_prime[t], t, t + 1});
      prev = s_prime[t];
    } else {
      chunks.back().tgt_end = t + 1;
    }
  }
  return chunks;
}

inline std::vector<Chunk> alignment_chunks(const DecodingTrace& trace) {
  return alignment_chunks(trace.s_prime_values());
}

}  // namespace simt

#endif  // SIMT_METRICS_HPP
