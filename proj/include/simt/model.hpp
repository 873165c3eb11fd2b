#ifndef SIMT_MODEL_HPP
#define SIMT_MODEL_HPP

// Attention-based GRU encoder-decoder.
//
// Encoder:   h_t = GRU_enc(h_{t-1}, emb_src(x_t)),  h_0 = 0
// Init:      z_0 = tanh(W_i h_s + b_i)               (h_s = last context vector)
// Attention: e_t = v . tanh(W_a z + U_a h_t + E_a emb_tgt(y_prev) + b_a)
//            alpha = softmax(e),  c = sum_t alpha_t h_t
// Decoder:   z' = GRU_dec(z, [emb_tgt(y_prev); c])
// Output:    log p(y) = log_softmax(W_o z' + b_o)
//
// GRU cell:  r = sig(W_r x + U_r h + b_r),  u = sig(W_u x + U_u h + b_u)
//            c = tanh(W_c x + U_c (r*h) + b_c),  h' = (1-u)*h + u*c

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "simt/error.hpp"
#include "simt/numerics.hpp"

namespace simt {

using TokenId = int;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;

class Vocabulary {
 public:
  static constexpr const char* kEosToken = "<eos>";

  Vocabulary() {
    add("<pad>");
    add(kEosToken);
    add("<unk>");
  }

  /// Returns the id of `token`, inserting it if new.
  TokenId add(const std::string& token) {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  /// Unknown tokens map to unk.
  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw DataError("token id " + std::to_string(id) + " out of vocabulary");
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct ModelConfig {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embedding = 32;
  std::size_t hidden = 64;
  std::size_t attention = 64;

  void validate() const {
    if (src_vocab < 1 || tgt_vocab < 1 || embedding < 1 || hidden < 1 || attention < 1)
      throw UsageError("model dimensions must all be >= 1");
    if (tgt_vocab <= static_cast<std::size_t>(kEos))
      throw UsageError("target vocabulary must contain eos");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct GruWeights {
  RealMatrix w_r, u_r, b_r;
  RealMatrix w_u, u_u, b_u;
  RealMatrix w_c, u_c, b_c;

  GruWeights() = default;
  GruWeights(std::size_t input, std::size_t hidden)
      : w_r(hidden, input), u_r(hidden, hidden), b_r(hidden, 1),
        w_u(hidden, input), u_u(hidden, hidden), b_u(hidden, 1),
        w_c(hidden, input), u_c(hidden, hidden), b_c(hidden, 1) {}

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(self.w_r), f(self.u_r), f(self.b_r);
    f(self.w_u), f(self.u_u), f(self.b_u);
    f(self.w_c), f(self.u_c), f(self.b_c);
  }

  friend bool operator==(const GruWeights&, const GruWeights&) = default;
};

/// Every learned tensor. Also used as the gradient and optimizer-accumulator
/// container, since those mirror the parameter shapes.
struct ModelParams {
  RealMatrix src_emb, tgt_emb;
  GruWeights enc, dec;
  RealMatrix att_w, att_u, att_e, att_b, att_v;
  RealMatrix out_w, out_b;
  RealMatrix init_w, init_b;

  ModelParams() = default;

  explicit ModelParams(const ModelConfig& c)
      : src_emb(c.src_vocab, c.embedding), tgt_emb(c.tgt_vocab, c.embedding),
        enc(c.embedding, c.hidden), dec(c.embedding + c.hidden, c.hidden),
        att_w(c.attention, c.hidden), att_u(c.attention, c.hidden),
        att_e(c.attention, c.embedding), att_b(c.attention, 1), att_v(c.attention, 1),
        out_w(c.tgt_vocab, c.hidden), out_b(c.tgt_vocab, 1),
        init_w(c.hidden, c.hidden), init_b(c.hidden, 1) {
    c.validate();
  }

  /// Gaussian(0, stddev) matrices, zero biases.
  static ModelParams random(const ModelConfig& c, Rng& rng, double stddev = 0.1) {
    ModelParams p(c);
    p.for_each([&](RealMatrix& m) {
      if (m.cols == 1) return;
      for (double& x : m.data) x = rng.gaussian(0.0, stddev);
    });
    return p;
  }

  /// Visits tensors in the fixed checkpoint order.
  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  ModelConfig config() const {
    return {src_emb.rows, tgt_emb.rows, src_emb.cols, init_w.rows, att_w.rows};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const RealMatrix& m) { n += m.size(); });
    return n;
  }

  void set_zero() {
    for_each([](RealMatrix& m) { m.fill(0.0); });
  }

  RealVector flatten() const {
    RealVector out;
    out.reserve(parameter_count());
    for_each([&](const RealMatrix& m) { out.insert(out.end(), m.data.begin(), m.data.end()); });
    return out;
  }

  void unflatten(std::span<const double> flat) {
    std::size_t pos = 0;
    for_each([&](RealMatrix& m) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), m.size(), m.data.begin());
      pos += m.size();
    });
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(self.src_emb), f(self.tgt_emb);
    GruWeights::visit(self.enc, f);
    GruWeights::visit(self.dec, f);
    f(self.att_w), f(self.att_u), f(self.att_e), f(self.att_b), f(self.att_v);
    f(self.out_w), f(self.out_b);
    f(self.init_w), f(self.init_b);
  }
};

/// Intermediate values of one GRU step, kept for backpropagation.
struct GruCache {
  RealVector x, h_prev, r, u, c, rh;
};

inline void gru_forward(const GruWeights& w, std::span<const double> x, std::span<const double> h,
                        RealVector& out, GruCache* cache = nullptr) {
  const std::size_t n = h.size();
  RealVector r(w.b_r.data), u(w.b_u.data), c(w.b_c.data);
  matvec_add(w.w_r, x, r);
  matvec_add(w.u_r, h, r);
  matvec_add(w.w_u, x, u);
  matvec_add(w.u_u, h, u);
  RealVector rh(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = sigmoid(r[i]);
    u[i] = sigmoid(u[i]);
    rh[i] = r[i] * h[i];
  }
  matvec_add(w.w_c, x, c);
  matvec_add(w.u_c, rh, c);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = std::tanh(c[i]);
    out[i] = (1.0 - u[i]) * h[i] + u[i] * c[i];
  }
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev.assign(h.begin(), h.end());
    cache->r = std::move(r);
    cache->u = std::move(u);
    cache->c = std::move(c);
    cache->rh = std::move(rh);
  }
}

/// Source context vectors h_1..h_s plus the encoder carry. `keys` holds the
/// attention projections U_a h_t, a derived cache.
struct ContextSet {
  std::vector<RealVector> vectors;
  std::vector<RealVector> keys;
  RealVector carry;

  std::size_t size() const noexcept { return vectors.size(); }
  bool empty() const noexcept { return vectors.empty(); }

  friend bool operator==(const ContextSet&, const ContextSet&) = default;
};

struct DecoderState {
  RealVector hidden;
  TokenId prev_token = kEos;

  friend bool operator==(const DecoderState&, const DecoderState&) = default;
};

struct AttentionOutput {
  RealVector weights;
  RealVector context;
};

inline void check_source_ids(const ModelParams& p, std::span<const TokenId> ids) {
  for (TokenId id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= p.src_emb.rows)
      throw DataError("source token id " + std::to_string(id) + " out of vocabulary");
}

/// Appends one context vector per new token, continuing from ctx.carry.
inline ContextSet extend_context(const ModelParams& p, ContextSet ctx, std::span<const TokenId> ids) {
  check_source_ids(p, ids);
  const std::size_t hidden = p.init_w.rows;
  if (ctx.carry.empty()) ctx.carry.assign(hidden, 0.0);
  for (TokenId id : ids) {
    RealVector h;
    gru_forward(p.enc, p.src_emb.row(static_cast<std::size_t>(id)), ctx.carry, h);
    RealVector key(p.att_u.rows, 0.0);
    matvec_add(p.att_u, h, key);
    ctx.carry = h;
    ctx.vectors.push_back(std::move(h));
    ctx.keys.push_back(std::move(key));
  }
  return ctx;
}

inline ContextSet encode(const ModelParams& p, std::span<const TokenId> ids) {
  return extend_context(p, ContextSet{}, ids);
}

/// z_0 = tanh(W_i h + b_i) where h is the last of the first `prefix` vectors.
inline DecoderState init_decoder(const ModelParams& p, const ContextSet& ctx, std::size_t prefix) {
  if (prefix == 0 || prefix > ctx.size()) throw Error("cannot init decoder from empty context");
  RealVector z(p.init_b.data);
  matvec_add(p.init_w, ctx.vectors[prefix - 1], z);
  for (double& x : z) x = std::tanh(x);
  return {std::move(z), kEos};
}

inline DecoderState init_decoder(const ModelParams& p, const ContextSet& ctx) {
  return init_decoder(p, ctx, ctx.size());
}

/// Content-based attention over the first `prefix` context vectors.
inline AttentionOutput attend(const ModelParams& p, const DecoderState& state, const ContextSet& ctx,
                              std::size_t prefix) {
  if (prefix == 0 || prefix > ctx.size()) throw Error("cannot attend over an empty context");
  const std::size_t a = p.att_w.rows;
  RealVector query(p.att_b.data);
  matvec_add(p.att_w, state.hidden, query);
  matvec_add(p.att_e, p.tgt_emb.row(static_cast<std::size_t>(state.prev_token)), query);
  RealVector scores(prefix);
  for (std::size_t t = 0; t < prefix; ++t) {
    const RealVector& key = ctx.keys[t];
    double s = 0.0;
    for (std::size_t i = 0; i < a; ++i) s += p.att_v.data[i] * std::tanh(query[i] + key[i]);
    scores[t] = s;
  }
  AttentionOutput out;
  out.weights = softmax(scores);
  out.context.assign(state.hidden.size(), 0.0);
  for (std::size_t t = 0; t < prefix; ++t) {
    const double w = out.weights[t];
    const RealVector& h = ctx.vectors[t];
    for (std::size_t i = 0; i < h.size(); ++i) out.context[i] += w * h[i];
  }
  return out;
}

inline AttentionOutput attend(const ModelParams& p, const DecoderState& state, const ContextSet& ctx) {
  return attend(p, state, ctx, ctx.size());
}

/// Decoder GRU step; prev_token is left for the caller to set on commit.
inline DecoderState decoder_step(const ModelParams& p, const DecoderState& state,
                                 const AttentionOutput& att, GruCache* cache = nullptr) {
  const auto emb = p.tgt_emb.row(static_cast<std::size_t>(state.prev_token));
  RealVector x(emb.begin(), emb.end());
  x.insert(x.end(), att.context.begin(), att.context.end());
  DecoderState next{{}, state.prev_token};
  gru_forward(p.dec, x, state.hidden, next.hidden, cache);
  return next;
}

inline RealVector output_logits(const ModelParams& p, const DecoderState& state) {
  RealVector logits(p.out_b.data);
  matvec_add(p.out_w, state.hidden, logits);
  return logits;
}

inline RealVector output_logprobs(const ModelParams& p, const DecoderState& state) {
  return log_softmax(output_logits(p, state));
}

/// One decoder forward pass: the next-token distribution given the first
/// `prefix` context vectors, plus what is needed to commit a token.
struct StepResult {
  RealVector logprobs;
  AttentionOutput attention;
  DecoderState next;  // hidden state after the step; prev_token not yet updated

  TokenId best() const { return static_cast<TokenId>(argmax(logprobs)); }
};

inline StepResult next_token_logprobs(const ModelParams& p, const DecoderState& state,
                                      const ContextSet& ctx, std::size_t prefix) {
  StepResult r;
  r.attention = attend(p, state, ctx, prefix);
  r.next = decoder_step(p, state, r.attention);
  r.logprobs = output_logprobs(p, r.next);
  return r;
}

inline StepResult next_token_logprobs(const ModelParams& p, const DecoderState& state,
                                      const ContextSet& ctx) {
  return next_token_logprobs(p, state, ctx, ctx.size());
}

}  // namespace simt

#endif  // SIMT_MODEL_HPP
