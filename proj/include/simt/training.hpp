#ifndef SIMT_TRAINING_HPP
#define SIMT_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "simt/error.hpp"
#include "simt/model.hpp"
#include "simt/numerics.hpp"

namespace simt {

struct SentencePair {
  TokenSeq source;
  TokenSeq target;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
  friend auto operator<=>(const SentencePair&, const SentencePair&) = default;
};

namespace detail {

// Teacher-forced forward pass with everything backprop needs.
struct Tape {
  struct Step {
    TokenId prev = kEos;
    RealVector z_prev;
    std::vector<RealVector> act;  // tanh(query + key_t) per source position
    RealVector alpha;
    RealVector context;
    GruCache gru;
    RealVector z;
    RealVector probs;
  };

  std::vector<GruCache> enc;
  std::vector<RealVector> h;
  std::vector<RealVector> keys;
  RealVector z0;
  std::vector<Step> steps;
  double loss = 0.0;
};

inline void check_pair(const ModelParams& p, const SentencePair& pair) {
  if (pair.source.empty() || pair.target.empty()) throw DataError("sentence pair has an empty side");
  check_source_ids(p, pair.source);
  for (TokenId id : pair.target)
    if (id < 0 || static_cast<std::size_t>(id) >= p.tgt_emb.rows)
      throw DataError("target token id " + std::to_string(id) + " out of vocabulary");
}

inline Tape forward(const ModelParams& p, const SentencePair& pair, bool keep) {
  check_pair(p, pair);
  const std::size_t hidden = p.init_w.rows;
  const std::size_t att = p.att_w.rows;
  Tape tape;
  RealVector carry(hidden, 0.0);
  tape.enc.resize(pair.source.size());
  for (std::size_t t = 0; t < pair.source.size(); ++t) {
    RealVector h;
    gru_forward(p.enc, p.src_emb.row(static_cast<std::size_t>(pair.source[t])), carry, h,
                keep ? &tape.enc[t] : nullptr);
    RealVector key(att, 0.0);
    matvec_add(p.att_u, h, key);
    carry = h;
    tape.h.push_back(std::move(h));
    tape.keys.push_back(std::move(key));
  }
  const std::size_t src_len = tape.h.size();

  RealVector z(p.init_b.data);
  matvec_add(p.init_w, tape.h.back(), z);
  for (double& x : z) x = std::tanh(x);
  tape.z0 = z;

  TokenId prev = kEos;
  for (TokenId y : pair.target) {
    Tape::Step s;
    s.prev = prev;
    s.z_prev = z;
    const auto emb = p.tgt_emb.row(static_cast<std::size_t>(prev));
    RealVector query(p.att_b.data);
    matvec_add(p.att_w, z, query);
    matvec_add(p.att_e, emb, query);
    RealVector scores(src_len);
    s.act.resize(src_len);
    for (std::size_t t = 0; t < src_len; ++t) {
      RealVector& a = s.act[t];
      a.resize(att);
      for (std::size_t i = 0; i < att; ++i) a[i] = std::tanh(query[i] + tape.keys[t][i]);
      scores[t] = dot(p.att_v.data, a);
    }
    s.alpha = softmax(scores);
    s.context.assign(hidden, 0.0);
    for (std::size_t t = 0; t < src_len; ++t)
      for (std::size_t i = 0; i < hidden; ++i) s.context[i] += s.alpha[t] * tape.h[t][i];

    RealVector x(emb.begin(), emb.end());
    x.insert(x.end(), s.context.begin(), s.context.end());
    RealVector z_next;
    gru_forward(p.dec, x, z, z_next, keep ? &s.gru : nullptr);
    z = std::move(z_next);

    RealVector logp = log_softmax(output_logits(p, DecoderState{z, prev}));
    tape.loss -= logp[static_cast<std::size_t>(y)];
    if (keep) {
      s.z = z;
      s.probs.resize(logp.size());
      for (std::size_t k = 0; k < logp.size(); ++k) s.probs[k] = std::exp(logp[k]);
      tape.steps.push_back(std::move(s));
    }
    prev = y;
  }
  return tape;
}

// Accumulates parameter gradients of one GRU step; returns d/dx and d/dh_prev.
inline void gru_backward(const GruWeights& w, GruWeights& g, const GruCache& c,
                         std::span<const double> dh_out, RealVector& dx, RealVector& dh_prev) {
  const std::size_t n = dh_out.size();
  dx.assign(c.x.size(), 0.0);
  dh_prev.resize(n);
  RealVector dac(n), dau(n), dar(n);
  for (std::size_t i = 0; i < n; ++i) {
    dh_prev[i] = dh_out[i] * (1.0 - c.u[i]);
    const double du = dh_out[i] * (c.c[i] - c.h_prev[i]);
    dac[i] = dh_out[i] * c.u[i] * (1.0 - c.c[i] * c.c[i]);
    dau[i] = du * c.u[i] * (1.0 - c.u[i]);
  }
  outer_add(g.w_c, dac, c.x);
  outer_add(g.u_c, dac, c.rh);
  for (std::size_t i = 0; i < n; ++i) g.b_c.data[i] += dac[i];
  matvec_t_add(w.w_c, dac, dx);
  RealVector drh(n, 0.0);
  matvec_t_add(w.u_c, dac, drh);
  for (std::size_t i = 0; i < n; ++i) {
    dh_prev[i] += drh[i] * c.r[i];
    dar[i] = drh[i] * c.h_prev[i] * c.r[i] * (1.0 - c.r[i]);
  }
  outer_add(g.w_u, dau, c.x);
  outer_add(g.u_u, dau, c.h_prev);
  outer_add(g.w_r, dar, c.x);
  outer_add(g.u_r, dar, c.h_prev);
  for (std::size_t i = 0; i < n; ++i) {
    g.b_u.data[i] += dau[i];
    g.b_r.data[i] += dar[i];
  }
  matvec_t_add(w.w_u, dau, dx);
  matvec_t_add(w.w_r, dar, dx);
  matvec_t_add(w.u_u, dau, dh_prev);
  matvec_t_add(w.u_r, dar, dh_prev);
}

inline void add_to_row(RealMatrix& m, TokenId row, std::span<const double> v) {
  auto r = m.row(static_cast<std::size_t>(row));
  for (std::size_t i = 0; i < v.size(); ++i) r[i] += v[i];
}

// Reverse accumulation through decoder, attention, init and encoder. Adds to `g`.
inline void backward(const ModelParams& p, const SentencePair& pair, const Tape& tape, ModelParams& g) {
  const std::size_t hidden = p.init_w.rows;
  const std::size_t emb_dim = p.tgt_emb.cols;
  const std::size_t att = p.att_w.rows;
  const std::size_t src_len = tape.h.size();

  std::vector<RealVector> dh(src_len, RealVector(hidden, 0.0));
  std::vector<RealVector> dkeys(src_len, RealVector(att, 0.0));
  RealVector dz(hidden, 0.0);
  RealVector dx, dz_prev;

  for (std::size_t j = tape.steps.size(); j-- > 0;) {
    const auto& s = tape.steps[j];
    RealVector dlogits = s.probs;
    dlogits[static_cast<std::size_t>(pair.target[j])] -= 1.0;
    outer_add(g.out_w, dlogits, s.z);
    for (std::size_t k = 0; k < dlogits.size(); ++k) g.out_b.data[k] += dlogits[k];
    matvec_t_add(p.out_w, dlogits, dz);

    gru_backward(p.dec, g.dec, s.gru, dz, dx, dz_prev);
    RealVector de(dx.begin(), dx.begin() + static_cast<std::ptrdiff_t>(emb_dim));
    const std::span<const double> dc(dx.data() + emb_dim, hidden);

    RealVector dalpha(src_len);
    double weighted = 0.0;
    for (std::size_t t = 0; t < src_len; ++t) {
      dalpha[t] = dot(dc, tape.h[t]);
      weighted += s.alpha[t] * dalpha[t];
      for (std::size_t i = 0; i < hidden; ++i) dh[t][i] += s.alpha[t] * dc[i];
    }
    RealVector dq(att, 0.0);
    for (std::size_t t = 0; t < src_len; ++t) {
      const double dscore = s.alpha[t] * (dalpha[t] - weighted);
      if (dscore == 0.0) continue;
      for (std::size_t i = 0; i < att; ++i) {
        const double a = s.act[t][i];
        g.att_v.data[i] += dscore * a;
        const double dpre = dscore * p.att_v.data[i] * (1.0 - a * a);
        dq[i] += dpre;
        dkeys[t][i] += dpre;
      }
    }
    const auto emb = p.tgt_emb.row(static_cast<std::size_t>(s.prev));
    outer_add(g.att_w, dq, s.z_prev);
    outer_add(g.att_e, dq, emb);
    for (std::size_t i = 0; i < att; ++i) g.att_b.data[i] += dq[i];
    matvec_t_add(p.att_w, dq, dz_prev);
    matvec_t_add(p.att_e, dq, de);
    add_to_row(g.tgt_emb, s.prev, de);
    dz = dz_prev;
  }

  RealVector da(hidden);
  for (std::size_t i = 0; i < hidden; ++i) da[i] = dz[i] * (1.0 - tape.z0[i] * tape.z0[i]);
  outer_add(g.init_w, da, tape.h.back());
  for (std::size_t i = 0; i < hidden; ++i) g.init_b.data[i] += da[i];
  matvec_t_add(p.init_w, da, dh.back());

  for (std::size_t t = 0; t < src_len; ++t) {
    outer_add(g.att_u, dkeys[t], tape.h[t]);
    matvec_t_add(p.att_u, dkeys[t], dh[t]);
  }

  RealVector dcarry(hidden, 0.0);
  for (std::size_t t = src_len; t-- > 0;) {
    for (std::size_t i = 0; i < hidden; ++i) dh[t][i] += dcarry[i];
    gru_backward(p.enc, g.enc, tape.enc[t], dh[t], dx, dcarry);
    add_to_row(g.src_emb, pair.source[t], dx);
  }
}

template <class Params>
auto tensors(Params& p) {
  using Tensor = std::conditional_t<std::is_const_v<Params>, const RealMatrix, RealMatrix>;
  std::vector<Tensor*> out;
  p.for_each([&](Tensor& m) { out.push_back(&m); });
  return out;
}

}  // namespace detail

/// Negative log-likelihood in nats under teacher forcing with the full source.
inline double nll(const ModelParams& p, const SentencePair& pair) {
  return detail::forward(p, pair, false).loss;
}

/// Exact gradient of nll; `loss` receives the nll if non-null.
inline ModelParams grad_nll(const ModelParams& p, const SentencePair& pair, double* loss = nullptr) {
  ModelParams g(p.config());
  const auto tape = detail::forward(p, pair, true);
  detail::backward(p, pair, tape, g);
  if (loss) *loss = tape.loss;
  return g;
}

struct AdadeltaState {
  ModelParams sq_grad;   // E[g^2]
  ModelParams sq_delta;  // E[dx^2]
  double rho = 0.95;
  double epsilon = 1e-6;

  explicit AdadeltaState(const ModelConfig& c, double rho_ = 0.95, double eps = 1e-6)
      : sq_grad(c), sq_delta(c), rho(rho_), epsilon(eps) {}
};

inline void adadelta_step(ModelParams& params, const ModelParams& grads, AdadeltaState& st) {
  if (params.config() != grads.config() || params.config() != st.sq_grad.config())
    throw Error("adadelta_step: shape mismatch");
  const auto ps = detail::tensors(params);
  const auto gs = detail::tensors(grads);
  const auto eg = detail::tensors(st.sq_grad);
  const auto ed = detail::tensors(st.sq_delta);
  const double rho = st.rho, eps = st.epsilon;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& x = ps[k]->data;
    const auto& g = gs[k]->data;
    auto& eg2 = eg[k]->data;
    auto& ed2 = ed[k]->data;
    for (std::size_t i = 0; i < x.size(); ++i) {
      eg2[i] = rho * eg2[i] + (1.0 - rho) * g[i] * g[i];
      const double delta = -(std::sqrt(ed2[i] + eps) / std::sqrt(eg2[i] + eps)) * g[i];
      ed2[i] = rho * ed2[i] + (1.0 - rho) * delta * delta;
      x[i] += delta;
    }
  }
}

struct TrainOptions {
  int max_epochs = 10;
  int patience = 2;
  std::size_t batch_size = 16;
  double rho = 0.95;
  double epsilon = 1e-6;
  double max_grad_norm = 0.0;  // 0 disables clipping
  double init_stddev = 0.1;
  std::size_t max_len = 50;
  std::uint64_t seed = 1;
  std::function<void(int epoch, const ModelParams&)> on_epoch;
};

struct EpochRecord {
  int epoch = 0;
  double train_nll = 0.0;       // mean per-sentence nll over the epoch
  double valid_logprob = 0.0;   // mean per-token log-probability
  bool best_so_far = false;
};

struct TrainResult {
  ModelParams params;  // parameters of the best validation epoch
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  std::size_t updates = 0;
};

inline std::vector<SentencePair> filter_by_length(const std::vector<SentencePair>& pairs, std::size_t max_len) {
  std::vector<SentencePair> out;
  for (const auto& p : pairs)
    if (p.source.size() <= max_len && p.target.size() <= max_len) out.push_back(p);
  return out;
}

/// Mean per-token log-probability of a held-out set.
inline double mean_token_logprob(const ModelParams& p, const std::vector<SentencePair>& data) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : data) {
    total -= nll(p, pair);
    tokens += pair.target.size();
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

/// Minibatch Adadelta with early stopping on validation log-probability.
/// Training stops once the validation score has failed to improve for more
/// than `patience` consecutive epochs.
inline TrainResult train(const std::vector<SentencePair>& train_set, const std::vector<SentencePair>& valid_set,
                         const ModelConfig& config, const TrainOptions& opt) {
  config.validate();
  if (opt.batch_size == 0) throw UsageError("batch size must be >= 1");
  if (opt.max_epochs < 1) throw UsageError("max_epochs must be >= 1");
  const auto data = filter_by_length(train_set, opt.max_len);
  const auto valid = filter_by_length(valid_set, opt.max_len);
  if (data.empty()) throw DataError("training set is empty");
  if (valid.empty()) throw DataError("validation set is empty");
  {
    std::set<SentencePair> seen(data.begin(), data.end());
    for (const auto& v : valid)
      if (seen.count(v)) throw UsageError("training and validation splits overlap");
  }

  Rng rng(opt.seed);
  TrainResult result;
  ModelParams params = ModelParams::random(config, rng, opt.init_stddev);
  AdadeltaState state(config, opt.rho, opt.epsilon);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best = -std::numeric_limits<double>::infinity();
  int stale = 0;
  result.params = params;
  ModelParams batch_grad(config);
  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      batch_grad.set_zero();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& pair = data[order[k]];
        const auto tape = detail::forward(params, pair, true);
        detail::backward(params, pair, tape, batch_grad);
        batch_loss += tape.loss;
      }
      if (!std::isfinite(batch_loss)) throw DivergenceError(epoch);
      const double scale = 1.0 / static_cast<double>(end - start);
      double norm2 = 0.0;
      batch_grad.for_each([&](RealMatrix& m) {
        for (double& x : m.data) {
          x *= scale;
          norm2 += x * x;
        }
      });
      if (opt.max_grad_norm > 0.0 && norm2 > opt.max_grad_norm * opt.max_grad_norm) {
        const double clip = opt.max_grad_norm / std::sqrt(norm2);
        batch_grad.for_each([&](RealMatrix& m) {
          for (double& x : m.data) x *= clip;
        });
      }
      adadelta_step(params, batch_grad, state);
      ++result.updates;
      epoch_loss += batch_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nll = epoch_loss / static_cast<double>(data.size());
    rec.valid_logprob = mean_token_logprob(params, valid);
    if (!std::isfinite(rec.valid_logprob)) throw DivergenceError(epoch);
    if (rec.valid_logprob > best) {
      best = rec.valid_logprob;
      rec.best_so_far = true;
      result.params = params;
      result.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    result.log.push_back(rec);
    if (opt.on_epoch) opt.on_epoch(epoch, params);
    if (stale > opt.patience) break;
  }
  return result;
}

}  // namespace simt

#endif  // SIMT_TRAINING_HPP
