#ifndef SIMT_DECODING_HPP
#define SIMT_DECODING_HPP

#include <algorithm>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simt/error.hpp"
#include "simt/model.hpp"
#include "simt/numerics.hpp"

namespace simt {

// ---------------------------------------------------------------------------
// Pipes

/// Source side of a streaming session. Tokens are pulled lazily from a
/// producer; the stream is exhausted once its eos has been consumed.
class InputPipe {
 public:
  /// Returns the next token, or nullopt if the producer has nothing more.
  using Producer = std::function<std::optional<TokenId>()>;

  explicit InputPipe(Producer producer) : producer_(std::move(producer)) {}

  explicit InputPipe(TokenSeq tokens)
      : producer_([q = std::deque<TokenId>(tokens.begin(), tokens.end())]() mutable -> std::optional<TokenId> {
          if (q.empty()) return std::nullopt;
          const TokenId t = q.front();
          q.pop_front();
          return t;
        }) {}

  bool exhausted() const noexcept { return exhausted_; }
  std::size_t consumed() const noexcept { return consumed_; }

  /// Pulls one token. A producer that runs dry before eos violates the
  /// stream contract.
  std::optional<TokenId> pull() {
    if (exhausted_) return std::nullopt;
    auto t = producer_();
    if (!t) throw DataError("input stream ended without <eos>");
    ++consumed_;
    if (*t == kEos) exhausted_ = true;
    return t;
  }

 private:
  Producer producer_;
  bool exhausted_ = false;
  std::size_t consumed_ = 0;
};

struct ReadResult {
  TokenSeq tokens;
  bool exhausted = false;
};

/// Reads up to n tokens, stopping after the source eos.
inline ReadResult end_of_source_read(InputPipe& in, std::size_t n) {
  ReadResult r;
  for (std::size_t i = 0; i < n && !in.exhausted(); ++i) r.tokens.push_back(*in.pull());
  r.exhausted = in.exhausted();
  return r;
}

/// One committed target token.
struct TraceStep {
  TokenId token = kEos;
  std::size_t s = 0;        // |C u C'| at the decision
  std::size_t s_prime = 0;  // |C|, the context actually conditioning the token
  double logp = 0.0;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

/// Append-only sink for committed tokens.
class OutputPipe {
 public:
  using Listener = std::function<void(const TraceStep&)>;

  OutputPipe() = default;
  explicit OutputPipe(Listener on_commit) : on_commit_(std::move(on_commit)) {}

  void commit(const TraceStep& step) {
    tokens_.push_back(step.token);
    if (on_commit_) on_commit_(step);
  }

  const TokenSeq& tokens() const noexcept { return tokens_; }

 private:
  TokenSeq tokens_;
  Listener on_commit_;
};

struct DecodingTrace {
  std::vector<TraceStep> steps;
  bool truncated = false;
  std::size_t forward_passes = 0;
  std::size_t source_read = 0;

  TokenSeq tokens() const {
    TokenSeq out;
    for (const auto& s : steps) out.push_back(s.token);
    return out;
  }
  std::vector<std::size_t> s_values() const {
    std::vector<std::size_t> out;
    for (const auto& s : steps) out.push_back(s.s);
    return out;
  }
  std::vector<std::size_t> s_prime_values() const {
    std::vector<std::size_t> out;
    for (const auto& s : steps) out.push_back(s.s_prime);
    return out;
  }
  double score() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.logp;
    return total;
  }
};

// ---------------------------------------------------------------------------
// Waiting criteria

enum class Criterion { wait_if_worse, wait_if_diff, entropy };

inline std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::wait_if_worse: return "worse";
    case Criterion::wait_if_diff: return "diff";
    case Criterion::entropy: return "entropy";
  }
  return "?";
}

inline std::optional<Criterion> parse_criterion(std::string_view s) {
  if (s == "worse") return Criterion::wait_if_worse;
  if (s == "diff") return Criterion::wait_if_diff;
  if (s == "entropy") return Criterion::entropy;
  return std::nullopt;
}

/// Wait when the chosen token loses probability under the larger context.
inline bool wait_if_worse(double logp_small, double logp_large) { return logp_small > logp_large; }

/// Wait when the most likely token changes under the larger context.
inline bool wait_if_diff(TokenId argmax_small, TokenId argmax_large) { return argmax_small != argmax_large; }

/// Wait when more context is expected to lower the entropy.
inline bool wait_if_entropy(std::span<const double> dist_small, std::span<const double> dist_large) {
  return entropy(dist_small) > entropy(dist_large);
}

struct WaitDecision {
  bool wait = false;
  double logp_small = 0.0;  // log-prob of argmax_small under C
  double logp_large = 0.0;  // log-prob of argmax_small under C u C'
  TokenId argmax_small = kEos;
  TokenId argmax_large = kEos;
};

inline WaitDecision evaluate_criterion(Criterion c, std::span<const double> logp_small,
                                       std::span<const double> logp_large) {
  WaitDecision d;
  d.argmax_small = static_cast<TokenId>(argmax(logp_small));
  d.argmax_large = static_cast<TokenId>(argmax(logp_large));
  d.logp_small = logp_small[static_cast<std::size_t>(d.argmax_small)];
  d.logp_large = logp_large[static_cast<std::size_t>(d.argmax_small)];
  switch (c) {
    case Criterion::wait_if_worse:
      d.wait = wait_if_worse(d.logp_small, d.logp_large);
      break;
    case Criterion::wait_if_diff:
      d.wait = wait_if_diff(d.argmax_small, d.argmax_large);
      break;
    case Criterion::entropy: {
      RealVector ps(logp_small.size()), pl(logp_large.size());
      std::transform(logp_small.begin(), logp_small.end(), ps.begin(), [](double x) { return std::exp(x); });
      std::transform(logp_large.begin(), logp_large.end(), pl.begin(), [](double x) { return std::exp(x); });
      d.wait = wait_if_entropy(ps, pl);
      break;
    }
  }
  return d;
}

/// Arbitrary waiting predicate over (log p | C, log p | C u C').
using WaitPolicy = std::function<bool(std::span<const double> logp_small, std::span<const double> logp_large)>;

struct SimulConfig {
  std::size_t delta = 1;
  std::size_t s0 = 2;
  Criterion criterion = Criterion::wait_if_diff;
  std::size_t max_target_len = 0;  // 0: 2 * (source tokens read) + 10
  WaitPolicy policy;               // overrides `criterion` when set

  void validate() const {
    if (delta < 1) throw UsageError("delta must be >= 1");
    if (s0 < 1) throw UsageError("s0 must be >= 1");
  }
};

inline std::size_t default_length_cap(std::size_t source_len) { return 2 * source_len + 10; }

/// Worst-case decoder forward passes for a sentence.
inline std::size_t forward_pass_bound(std::size_t out_len, std::size_t src_len, std::size_t s0, std::size_t delta) {
  const std::size_t extra = src_len > s0 ? (src_len - s0 + delta - 1) / delta : 0;
  return 2 * (out_len + extra);
}

// ---------------------------------------------------------------------------
// Simultaneous greedy decoding

/// Commits target tokens while the source is still arriving.
///
/// C holds the first |C| context vectors, C' the pending ones read after
/// them. Every iteration picks y = argmax p(y | C); when the source is not yet
/// exhausted, C' is filled with delta new tokens if empty and the criterion
/// compares p(. | C) with p(. | C u C'). Waiting folds C' into C without
/// committing. A commit advances the decoder with the attention over C.
///
/// Until the first commit the decoder's initial state is derived from the
/// context being scored, so p(. | C) and p(. | C u C') are both full
/// conditionals. Distributions are cached across iterations: a wait reuses
/// the C u C' pass as the new C pass.
inline DecodingTrace simul_greedy_decode(const ModelParams& p, InputPipe& in, OutputPipe& out,
                                         const SimulConfig& cfg) {
  cfg.validate();
  DecodingTrace trace;

  ContextSet ctx;
  auto read = [&](std::size_t n) {
    auto r = end_of_source_read(in, n);
    trace.source_read += r.tokens.size();
    ctx = extend_context(p, std::move(ctx), r.tokens);
  };

  read(cfg.s0);
  if (ctx.empty()) throw DataError("empty source");
  std::size_t c_size = ctx.size();

  DecoderState state;
  bool started = false;
  auto forward = [&](std::size_t prefix) {
    ++trace.forward_passes;
    return next_token_logprobs(p, started ? state : init_decoder(p, ctx, prefix), ctx, prefix);
  };

  std::optional<StepResult> small;  // p(. | C)
  std::optional<StepResult> large;  // p(. | C u C')
  while (true) {
    if (!small) small = forward(c_size);
    std::size_t s_at_decision;

    if (in.exhausted()) {
      if (ctx.size() > c_size) {
        c_size = ctx.size();
        small = large ? std::move(large) : forward(c_size);
        large.reset();
      }
      s_at_decision = c_size;
    } else {
      if (ctx.size() == c_size) {
        read(cfg.delta);
        large.reset();
      }
      if (!large) large = forward(ctx.size());
      const bool wait = cfg.policy ? cfg.policy(small->logprobs, large->logprobs)
                                   : evaluate_criterion(cfg.criterion, small->logprobs, large->logprobs).wait;
      s_at_decision = ctx.size();
      if (wait) {
        c_size = ctx.size();
        small = std::move(large);
        large.reset();
        continue;
      }
    }

    const TokenId y = small->best();
    const TraceStep step{y, s_at_decision, c_size, small->logprobs[static_cast<std::size_t>(y)]};
    trace.steps.push_back(step);
    out.commit(step);
    state = small->next;
    state.prev_token = y;
    started = true;
    small.reset();
    large.reset();

    if (y == kEos) break;
    const std::size_t cap = cfg.max_target_len ? cfg.max_target_len : default_length_cap(trace.source_read);
    if (trace.steps.size() >= cap) {
      trace.truncated = true;
      break;
    }
  }
  return trace;
}

inline DecodingTrace simul_greedy_decode(const ModelParams& p, const TokenSeq& source, const SimulConfig& cfg) {
  InputPipe in(source);
  OutputPipe out;
  return simul_greedy_decode(p, in, out, cfg);
}

// ---------------------------------------------------------------------------
// Consecutive baselines

inline void check_full_source(std::span<const TokenId> source) {
  if (source.empty()) throw DataError("empty source");
  if (source.back() != kEos) throw DataError("source must end with eos");
}

/// Argmax decoding over the full source.
inline DecodingTrace greedy_decode(const ModelParams& p, const TokenSeq& source, std::size_t max_len = 0) {
  check_full_source(source);
  const std::size_t cap = max_len ? max_len : default_length_cap(source.size());
  const ContextSet ctx = encode(p, source);
  DecoderState state = init_decoder(p, ctx);
  DecodingTrace trace;
  trace.source_read = source.size();
  while (true) {
    ++trace.forward_passes;
    const StepResult r = next_token_logprobs(p, state, ctx);
    const TokenId y = r.best();
    trace.steps.push_back({y, ctx.size(), ctx.size(), r.logprobs[static_cast<std::size_t>(y)]});
    state = r.next;
    state.prev_token = y;
    if (y == kEos) break;
    if (trace.steps.size() >= cap) {
      trace.truncated = true;
      break;
    }
  }
  return trace;
}

struct BeamResult {
  TokenSeq tokens;
  double score = 0.0;  // summed log-probability
  bool truncated = false;
};

/// Beam search over summed log-probabilities, no length normalization.
/// Finished hypotheses leave the beam; the search ends when no live
/// hypothesis can still beat the best finished one.
inline BeamResult beam_search(const ModelParams& p, const TokenSeq& source, std::size_t width,
                              std::size_t max_len = 0) {
  if (width < 1) throw UsageError("beam width must be >= 1");
  check_full_source(source);
  const std::size_t cap = max_len ? max_len : default_length_cap(source.size());
  const ContextSet ctx = encode(p, source);

  struct Hyp {
    TokenSeq tokens;
    DecoderState state;
    double score = 0.0;
  };
  struct Candidate {
    double score;
    std::size_t hyp;
    TokenId token;
  };

  std::vector<Hyp> alive{Hyp{{}, init_decoder(p, ctx), 0.0}};
  std::optional<Hyp> best_finished;
  for (std::size_t len = 0; len < cap && !alive.empty(); ++len) {
    std::vector<Candidate> cands;
    std::vector<StepResult> steps;
    steps.reserve(alive.size());
    for (std::size_t i = 0; i < alive.size(); ++i) {
      steps.push_back(next_token_logprobs(p, alive[i].state, ctx));
      const auto& lp = steps.back().logprobs;
      for (std::size_t k = 0; k < lp.size(); ++k)
        cands.push_back({alive[i].score + lp[k], i, static_cast<TokenId>(k)});
    }
    const std::size_t keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });
    std::vector<Hyp> next;
    for (std::size_t c = 0; c < keep; ++c) {
      const auto& cand = cands[c];
      Hyp h{alive[cand.hyp].tokens, steps[cand.hyp].next, cand.score};
      h.tokens.push_back(cand.token);
      h.state.prev_token = cand.token;
      if (cand.token == kEos) {
        if (!best_finished || h.score > best_finished->score) best_finished = std::move(h);
      } else {
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
    if (best_finished)
      std::erase_if(alive, [&](const Hyp& h) { return h.score <= best_finished->score; });
  }

  if (best_finished) return {best_finished->tokens, best_finished->score, false};
  const auto it = std::max_element(alive.begin(), alive.end(),
                                   [](const Hyp& a, const Hyp& b) { return a.score < b.score; });
  return {it->tokens, it->score, true};
}

}  // namespace simt

#endif  // SIMT_DECODING_HPP
