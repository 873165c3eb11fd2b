#ifndef SIMT_HARNESS_HPP
#define SIMT_HARNESS_HPP

// Command implementations behind the `simt` CLI: configuration, corpus I/O,
// training, translation, the streaming session, the delay/quality sweep and
// the chunk-alignment renderer.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simt/checkpoint.hpp"
#include "simt/decoding.hpp"
#include "simt/error.hpp"
#include "simt/metrics.hpp"
#include "simt/model.hpp"
#include "simt/svg.hpp"
#include "simt/tasks.hpp"
#include "simt/training.hpp"

namespace simt {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Formatting and text corpora

/// Round-trippable decimal for CSV output.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

/// Whitespace tokens to ids, unknown tokens to unk, eos appended.
inline TokenSeq to_ids(const Vocabulary& vocab, const std::string& line) {
  TokenSeq ids;
  for (const auto& tok : split_tokens(line)) ids.push_back(vocab.id(tok));
  ids.push_back(kEos);
  return ids;
}

/// Ids to a space-joined sentence, dropping eos.
inline std::string to_text(const Vocabulary& vocab, const TokenSeq& ids) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEos) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

inline std::vector<std::string> to_words(const Vocabulary& vocab, const TokenSeq& ids) {
  std::vector<std::string> out;
  for (TokenId id : ids)
    if (id != kEos) out.push_back(vocab.token(id));
  return out;
}

struct ParallelCorpus {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

inline ParallelCorpus read_parallel(const fs::path& src, const fs::path& tgt) {
  ParallelCorpus c{read_lines(src), read_lines(tgt)};
  if (c.source.size() != c.target.size())
    throw DataError("parallel corpus line counts differ: " + src.string() + " vs " + tgt.string());
  return c;
}

// ---------------------------------------------------------------------------
// Run configuration

struct CorpusPaths {
  fs::path train_source, train_target, valid_source, valid_target;
};

struct SweepGrid {
  std::vector<std::size_t> deltas{1, 2, 3};
  std::vector<std::size_t> s0s{2, 3, 4, 5, 6, 7};
  std::vector<Criterion> criteria{Criterion::wait_if_worse, Criterion::wait_if_diff};
  std::size_t beam_width = 5;

  void validate() const {
    if (deltas.empty() || s0s.empty() || criteria.empty()) throw UsageError("sweep grid must be non-empty");
    for (auto d : deltas)
      if (d < 1) throw UsageError("sweep deltas must be >= 1");
    for (auto s : s0s)
      if (s < 1) throw UsageError("sweep s0 values must be >= 1");
    if (beam_width < 1) throw UsageError("beam width must be >= 1");
  }
};

struct RunConfig {
  std::uint64_t seed = 1;
  fs::path out = "run";
  std::optional<TaskSpec> task = TaskSpec{};
  std::optional<CorpusPaths> corpus;
  std::size_t embedding = 32, hidden = 64, attention = 64;
  TrainOptions training;
  SweepGrid sweep;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!j.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw UsageError("unknown key '" + key + "' in " + where);
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Parses the JSON run configuration. Unknown keys are rejected.
///
/// {
///   "seed": 1, "out": "run",
///   "task":   {"kind": "cipher", "vocab": 20, "min_len": 2, "max_len": 8,
///              "train_count": 5000, "valid_count": 500, "test_count": 500, "seed": 1},
///   "corpus": {"train_source": ..., "train_target": ..., "valid_source": ..., "valid_target": ...},
///   "model":  {"embedding": 32, "hidden": 64, "attention": 64},
///   "training": {"max_epochs": 10, "patience": 2, "batch_size": 16, "rho": 0.95,
///                "epsilon": 1e-6, "max_grad_norm": 0, "init_stddev": 0.1, "max_len": 50},
///   "sweep":  {"deltas": [1,2,3], "s0s": [2,3,4,5,6,7], "criteria": ["worse","diff"],
///              "beam_width": 5}
/// }
///
/// "task" and "corpus" are mutually exclusive; task.seed defaults to the
/// top-level seed.
inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::read_opt;
  detail::reject_unknown(j, {"seed", "out", "task", "corpus", "model", "training", "sweep"}, "config");
  RunConfig cfg;
  read_opt(j, "seed", cfg.seed);
  std::string out = cfg.out.string();
  read_opt(j, "out", out);
  cfg.out = out;

  if (j.contains("task") && j.contains("corpus")) throw UsageError("config: 'task' and 'corpus' are exclusive");
  if (j.contains("task")) {
    const auto& t = j.at("task");
    detail::reject_unknown(t, {"kind", "vocab", "min_len", "max_len", "train_count", "valid_count", "test_count", "seed"},
                           "task");
    TaskSpec spec;
    std::string kind = std::string(to_string(spec.kind));
    read_opt(t, "kind", kind);
    auto k = parse_task_kind(kind);
    if (!k) throw UsageError("unknown task kind '" + kind + "'");
    spec.kind = *k;
    read_opt(t, "vocab", spec.vocab);
    read_opt(t, "min_len", spec.min_len);
    read_opt(t, "max_len", spec.max_len);
    read_opt(t, "train_count", spec.train_count);
    read_opt(t, "valid_count", spec.valid_count);
    read_opt(t, "test_count", spec.test_count);
    spec.seed = cfg.seed;
    read_opt(t, "seed", spec.seed);
    cfg.task = spec;
  }
  if (j.contains("corpus")) {
    const auto& c = j.at("corpus");
    detail::reject_unknown(c, {"train_source", "train_target", "valid_source", "valid_target"}, "corpus");
    CorpusPaths paths;
    std::string s;
    for (auto [key, dst] : {std::pair{"train_source", &paths.train_source}, std::pair{"train_target", &paths.train_target},
                            std::pair{"valid_source", &paths.valid_source}, std::pair{"valid_target", &paths.valid_target}}) {
      if (!c.contains(key)) throw UsageError(std::string("corpus: missing '") + key + "'");
      read_opt(c, key, s);
      *dst = s;
    }
    cfg.corpus = paths;
    cfg.task.reset();
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown(m, {"embedding", "hidden", "attention"}, "model");
    read_opt(m, "embedding", cfg.embedding);
    read_opt(m, "hidden", cfg.hidden);
    read_opt(m, "attention", cfg.attention);
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    detail::reject_unknown(t, {"max_epochs", "patience", "batch_size", "rho", "epsilon", "max_grad_norm", "init_stddev", "max_len"},
                           "training");
    read_opt(t, "max_epochs", cfg.training.max_epochs);
    read_opt(t, "patience", cfg.training.patience);
    read_opt(t, "batch_size", cfg.training.batch_size);
    read_opt(t, "rho", cfg.training.rho);
    read_opt(t, "epsilon", cfg.training.epsilon);
    read_opt(t, "max_grad_norm", cfg.training.max_grad_norm);
    read_opt(t, "init_stddev", cfg.training.init_stddev);
    read_opt(t, "max_len", cfg.training.max_len);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::reject_unknown(s, {"deltas", "s0s", "criteria", "beam_width"}, "sweep");
    read_opt(s, "deltas", cfg.sweep.deltas);
    read_opt(s, "s0s", cfg.sweep.s0s);
    read_opt(s, "beam_width", cfg.sweep.beam_width);
    if (s.contains("criteria")) {
      std::vector<std::string> names;
      read_opt(s, "criteria", names);
      cfg.sweep.criteria.clear();
      for (const auto& n : names) {
        auto c = parse_criterion(n);
        if (!c) throw UsageError("unknown criterion '" + n + "'");
        cfg.sweep.criteria.push_back(*c);
      }
    }
    cfg.sweep.validate();
  }
  cfg.training.seed = cfg.seed;
  return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  fs::path checkpoint;
  fs::path log;
  TrainResult result;
};

inline std::string training_log_csv(const std::vector<EpochRecord>& log) {
  std::string csv = "epoch,train_nll,valid_logprob,best_so_far\n";
  for (const auto& r : log)
    csv += std::to_string(r.epoch) + "," + format_real(r.train_nll) + "," + format_real(r.valid_logprob) + "," +
           (r.best_so_far ? "1" : "0") + "\n";
  return csv;
}

inline void write_split(const fs::path& dir, const std::string& name, const std::vector<SentencePair>& pairs,
                        const Vocabulary& sv, const Vocabulary& tv) {
  std::string src, tgt;
  for (const auto& p : pairs) {
    src += to_text(sv, p.source) + "\n";
    tgt += to_text(tv, p.target) + "\n";
  }
  write_text(dir / (name + ".src"), src);
  write_text(dir / (name + ".tgt"), tgt);
}

/// Trains a model and writes model.smdc and train_log.csv into cfg.out.
/// Synthetic tasks also get their valid/test splits written as text.
inline TrainOutcome cmd_train(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  Checkpoint ck;
  std::vector<SentencePair> train_set, valid_set;
  if (cfg.task) {
    TaskData data = generate_task(*cfg.task);
    ck.source_vocab = data.source_vocab;
    ck.target_vocab = data.target_vocab;
    train_set = std::move(data.train);
    valid_set = std::move(data.valid);
    write_split(cfg.out, "valid", valid_set, ck.source_vocab, ck.target_vocab);
    write_split(cfg.out, "test", data.test, ck.source_vocab, ck.target_vocab);
  } else if (cfg.corpus) {
    const auto train_text = read_parallel(cfg.corpus->train_source, cfg.corpus->train_target);
    const auto valid_text = read_parallel(cfg.corpus->valid_source, cfg.corpus->valid_target);
    for (std::size_t i = 0; i < train_text.source.size(); ++i) {
      for (const auto& tok : split_tokens(train_text.source[i])) ck.source_vocab.add(tok);
      for (const auto& tok : split_tokens(train_text.target[i])) ck.target_vocab.add(tok);
    }
    for (std::size_t i = 0; i < train_text.source.size(); ++i)
      train_set.push_back({to_ids(ck.source_vocab, train_text.source[i]), to_ids(ck.target_vocab, train_text.target[i])});
    for (std::size_t i = 0; i < valid_text.source.size(); ++i)
      valid_set.push_back({to_ids(ck.source_vocab, valid_text.source[i]), to_ids(ck.target_vocab, valid_text.target[i])});
  } else {
    throw UsageError("config needs a 'task' or a 'corpus'");
  }

  ck.config = {ck.source_vocab.size(), ck.target_vocab.size(), cfg.embedding, cfg.hidden, cfg.attention};
  TrainOptions opt = cfg.training;
  opt.seed = cfg.seed;
  TrainOutcome outcome;
  outcome.result = train(train_set, valid_set, ck.config, opt);
  ck.params = outcome.result.params;
  outcome.checkpoint = cfg.out / "model.smdc";
  outcome.log = cfg.out / "train_log.csv";
  save_checkpoint(ck, outcome.checkpoint);
  write_text(outcome.log, training_log_csv(outcome.result.log));
  return outcome;
}

// ---------------------------------------------------------------------------
// translate

enum class TranslateMode { greedy, beam };

inline std::string translate_line(const Checkpoint& ck, const std::string& line, TranslateMode mode,
                                  std::size_t width, std::size_t max_len) {
  const TokenSeq src = to_ids(ck.source_vocab, line);
  const TokenSeq out = mode == TranslateMode::greedy ? greedy_decode(ck.params, src, max_len).tokens()
                                                     : beam_search(ck.params, src, width, max_len).tokens;
  return to_text(ck.target_vocab, out);
}

/// One output line per input line.
inline void cmd_translate(const Checkpoint& ck, std::istream& in, std::ostream& out, TranslateMode mode,
                          std::size_t width = 5, std::size_t max_len = 0) {
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out << translate_line(ck, line, mode, width, max_len) << '\n';
  }
}

// ---------------------------------------------------------------------------
// simul: line protocol on streams

/// Streaming session. Input: one source token per line, each sentence closed
/// by a line holding exactly `<eos>`. Output per committed token:
/// `token<TAB>s(t)<TAB>s'(t)<TAB>logp`, flushed at once; then
/// `#trace tau=<value> truncated=<0|1>` per sentence.
/// Returns the per-sentence traces.
inline std::vector<DecodingTrace> cmd_simul(const Checkpoint& ck, std::istream& in, std::ostream& out,
                                            const SimulConfig& cfg) {
  cfg.validate();
  std::vector<DecodingTrace> traces;
  auto next_line = [&]() -> std::optional<std::string> {
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto toks = split_tokens(line);
      if (toks.empty()) continue;
      if (toks.size() > 1) throw DataError("protocol violation: more than one token on a line: '" + line + "'");
      return toks.front();
    }
    return std::nullopt;
  };

  while (true) {
    auto first = next_line();
    if (!first) break;
    std::optional<std::string> pending = std::move(first);
    auto producer = [&]() -> std::optional<TokenId> {
      std::optional<std::string> tok = pending ? std::move(pending) : next_line();
      pending.reset();
      if (!tok) return std::nullopt;
      return *tok == Vocabulary::kEosToken ? kEos : ck.source_vocab.id(*tok);
    };
    InputPipe pipe(producer);
    OutputPipe sink([&](const TraceStep& s) {
      out << ck.target_vocab.token(s.token) << '\t' << s.s << '\t' << s.s_prime << '\t' << format_fixed(s.logp)
          << '\n'
          << std::flush;
    });
    DecodingTrace trace = simul_greedy_decode(ck.params, pipe, sink, cfg);
    while (!pipe.exhausted()) pipe.pull();
    const double tau = delay_tau(trace.s_values(), pipe.consumed());
    out << "#trace tau=" << format_fixed(tau) << " truncated=" << (trace.truncated ? 1 : 0) << '\n' << std::flush;
    traces.push_back(std::move(trace));
  }
  return traces;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  std::string criterion;  // "worse" | "diff" | "entropy" | "greedy" | "beam"
  std::size_t delta = 0;  // 0 for consecutive baselines
  std::size_t s0 = 0;
  double bleu = 0.0;
  double mean_tau = 0.0;
  double q2d = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;

  const SweepRow* find(const std::string& criterion, std::size_t delta, std::size_t s0) const {
    for (const auto& r : rows)
      if (r.criterion == criterion && r.delta == delta && r.s0 == s0) return &r;
    return nullptr;
  }

  /// Highest-Q2D configuration per simultaneous criterion.
  std::map<std::string, SweepRow> best_q2d() const {
    std::map<std::string, SweepRow> best;
    for (const auto& r : rows) {
      if (r.delta == 0) continue;
      auto it = best.find(r.criterion);
      if (it == best.end() || r.q2d > it->second.q2d) best[r.criterion] = r;
    }
    return best;
  }
};

/// Evaluates one simultaneous configuration over a corpus, asserting the
/// forward-pass bound on every sentence.
inline SweepRow evaluate_simul(const Checkpoint& ck, const std::vector<SentencePair>& corpus, Criterion crit,
                               std::size_t delta, std::size_t s0) {
  SimulConfig cfg;
  cfg.delta = delta;
  cfg.s0 = s0;
  cfg.criterion = crit;
  std::vector<std::vector<std::string>> hyps, refs;
  std::vector<double> taus;
  for (const auto& pair : corpus) {
    const DecodingTrace trace = simul_greedy_decode(ck.params, pair.source, cfg);
    const std::size_t bound = forward_pass_bound(trace.steps.size(), pair.source.size(), s0, delta);
    if (trace.forward_passes > bound)
      throw Error("forward-pass bound violated: " + std::to_string(trace.forward_passes) + " > " +
                  std::to_string(bound));
    taus.push_back(delay_tau(trace.s_values(), pair.source.size()));
    hyps.push_back(to_words(ck.target_vocab, trace.tokens()));
    refs.push_back(to_words(ck.target_vocab, pair.target));
  }
  SweepRow row{std::string(to_string(crit)), delta, s0};
  row.bleu = corpus_bleu(hyps, refs).bleu;
  row.mean_tau = mean_delay(taus);
  row.q2d = q2d(row.bleu, row.mean_tau);
  return row;
}

/// Baselines first (greedy, beam), then simultaneous rows ordered by
/// (criterion name, delta, s0).
inline SweepTable cmd_sweep(const Checkpoint& ck, const std::vector<SentencePair>& corpus, const SweepGrid& grid) {
  grid.validate();
  if (corpus.empty()) throw DataError("sweep: empty corpus");
  SweepTable table;

  std::vector<std::vector<std::string>> refs, greedy_h, beam_h;
  std::vector<double> greedy_tau;
  for (const auto& pair : corpus) {
    refs.push_back(to_words(ck.target_vocab, pair.target));
    const auto g = greedy_decode(ck.params, pair.source);
    greedy_tau.push_back(delay_tau(g.s_values(), pair.source.size()));
    greedy_h.push_back(to_words(ck.target_vocab, g.tokens()));
    beam_h.push_back(to_words(ck.target_vocab, beam_search(ck.params, pair.source, grid.beam_width).tokens));
  }
  SweepRow greedy{"greedy", 0, 0, corpus_bleu(greedy_h, refs).bleu, mean_delay(greedy_tau)};
  greedy.q2d = q2d(greedy.bleu, greedy.mean_tau);
  // Consecutive decoding reads the whole source before the first commit.
  SweepRow beam{"beam", 0, 0, corpus_bleu(beam_h, refs).bleu, 1.0};
  beam.q2d = q2d(beam.bleu, beam.mean_tau);
  table.rows.push_back(greedy);
  table.rows.push_back(beam);

  auto criteria = grid.criteria;
  std::sort(criteria.begin(), criteria.end(), [](Criterion a, Criterion b) { return to_string(a) < to_string(b); });
  criteria.erase(std::unique(criteria.begin(), criteria.end()), criteria.end());
  auto deltas = grid.deltas;
  auto s0s = grid.s0s;
  std::sort(deltas.begin(), deltas.end());
  std::sort(s0s.begin(), s0s.end());
  for (Criterion c : criteria)
    for (std::size_t d : deltas)
      for (std::size_t s : s0s) table.rows.push_back(evaluate_simul(ck, corpus, c, d, s));
  return table;
}

inline std::string sweep_csv(const SweepTable& t) {
  std::string csv = "criterion,delta,s0,bleu,mean_tau,q2d\n";
  for (const auto& r : t.rows)
    csv += r.criterion + "," + std::to_string(r.delta) + "," + std::to_string(r.s0) + "," + format_real(r.bleu) + "," +
           format_real(r.mean_tau) + "," + format_real(r.q2d) + "\n";
  return csv;
}

struct MarkerStyle {
  svg::Marker shape;
  const char* fill;
  const char* label;
};

inline MarkerStyle marker_style(const std::string& criterion) {
  if (criterion == "worse") return {svg::Marker::triangle_up, "#d62728", "Wait-If-Worse"};
  if (criterion == "diff") return {svg::Marker::triangle_down, "#1f77b4", "Wait-If-Diff"};
  if (criterion == "entropy") return {svg::Marker::circle, "#2ca02c", "Entropy"};
  if (criterion == "greedy") return {svg::Marker::star, "#000000", "consecutive greedy"};
  return {svg::Marker::diamond, "#000000", "consecutive beam"};
}

/// Quality-vs-delay scatter: x = mean tau in [0, 1], y = BLEU in [0, 100].
inline std::string frontier_svg(const SweepTable& t, const std::string& title = "Quality vs. Delay") {
  constexpr double W = 800, H = 600, L = 80, R = 200, T = 50, B = 70;
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double tau) { return L + std::clamp(tau, 0.0, 1.0) * pw; };
  auto py = [&](double bleu) { return T + (1.0 - std::clamp(bleu, 0.0, 100.0) / 100.0) * ph; };

  svg::Document doc(W, H);
  doc.rect(0, 0, W, H, "white");
  doc.text(L + pw / 2, 30, title, 18, "middle");
  doc.line(L, T + ph, L + pw, T + ph, "black");
  doc.line(L, T, L, T + ph, "black");
  for (int k = 0; k <= 10; ++k) {
    const double tau = k / 10.0;
    doc.line(px(tau), T + ph, px(tau), T + ph + 5, "black");
    doc.text(px(tau), T + ph + 20, format_fixed(tau, 1), 11, "middle");
    const double bleu = k * 10.0;
    doc.line(L - 5, py(bleu), L, py(bleu), "black");
    doc.text(L - 8, py(bleu) + 4, format_fixed(bleu, 0), 11, "end");
    if (k > 0) doc.line(L, py(bleu), L + pw, py(bleu), "#dddddd", 0.5);
  }
  doc.text(L + pw / 2, H - 20, "Delay (mean tau), lower is better", 13, "middle");
  doc.text(25, T + ph / 2, "BLEU", 13, "middle", -90);

  std::vector<std::string> seen;
  for (const auto& r : t.rows) {
    const auto st = marker_style(r.criterion);
    svg::marker(doc, st.shape, px(r.mean_tau), py(r.bleu), 6, st.fill);
    if (std::find(seen.begin(), seen.end(), r.criterion) == seen.end()) seen.push_back(r.criterion);
  }
  double ly = T + 10;
  for (const auto& c : seen) {
    const auto st = marker_style(c);
    svg::marker(doc, st.shape, L + pw + 25, ly, 6, st.fill);
    doc.text(L + pw + 40, ly + 4, st.label, 12);
    ly += 24;
  }
  return doc.str();
}

// ---------------------------------------------------------------------------
// trace rendering

struct TraceRendering {
  std::vector<std::string> source;  // includes <eos>
  std::vector<std::string> target;
  DecodingTrace trace;
  std::vector<Chunk> chunks;
  std::string text;
  std::string svg;
};

/// Text form: bracketed chunk groups `[src ...] -> [tgt ...]` separated by ` | `.
inline std::string render_chunks_text(const std::vector<std::string>& source, const std::vector<std::string>& target,
                                      const std::vector<Chunk>& chunks) {
  std::string out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& c = chunks[i];
    if (i) out += " | ";
    out += "[";
    for (std::size_t k = c.src_begin; k < c.src_end; ++k) out += (k > c.src_begin ? " " : "") + source[k];
    out += "] -> [";
    for (std::size_t k = c.tgt_begin; k < c.tgt_end; ++k) out += (k > c.tgt_begin ? " " : "") + target[k];
    out += "]";
  }
  return out;
}

inline std::string render_chunks_svg(const std::vector<std::string>& source, const std::vector<std::string>& target,
                                     const std::vector<Chunk>& chunks, const std::vector<std::size_t>& s_prime) {
  constexpr double W = 800, H = 600, L = 60, R = 40;
  const double pw = W - L - R;
  const double sw = pw / static_cast<double>(std::max<std::size_t>(source.size(), 1));
  const double tw = pw / static_cast<double>(std::max<std::size_t>(target.size(), 1));
  const double src_y = 60, tgt_y = 200, box = 28;
  const char* fills[] = {"#fde0a0", "#b9dcf5"};

  svg::Document doc(W, H);
  doc.rect(0, 0, W, H, "white");
  doc.text(20, src_y + box / 2 + 4, "src", 12);
  doc.text(20, tgt_y + box / 2 + 4, "tgt", 12);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& c = chunks[i];
    const char* fill = fills[i % 2];
    if (c.src_end > c.src_begin)
      doc.rect(L + c.src_begin * sw, src_y, (c.src_end - c.src_begin) * sw, box, fill);
    doc.rect(L + c.tgt_begin * tw, tgt_y, (c.tgt_end - c.tgt_begin) * tw, box, fill);
    const std::string pts = svg::num(L + c.src_begin * sw) + "," + svg::num(src_y + box) + " " +
                            svg::num(L + c.src_end * sw) + "," + svg::num(src_y + box) + " " +
                            svg::num(L + c.tgt_end * tw) + "," + svg::num(tgt_y) + " " +
                            svg::num(L + c.tgt_begin * tw) + "," + svg::num(tgt_y);
    doc.polygon(pts, fill);
  }
  for (std::size_t k = 0; k < source.size(); ++k)
    doc.text(L + (k + 0.5) * sw, src_y + box / 2 + 4, source[k], 11, "middle");
  for (std::size_t k = 0; k < target.size(); ++k)
    doc.text(L + (k + 0.5) * tw, tgt_y + box / 2 + 4, target[k], 11, "middle");

  // s'(t) step plot: x = target position, y = source position.
  const double top = 300, bottom = 560;
  const double n_src = static_cast<double>(std::max<std::size_t>(source.size(), 1));
  auto sy = [&](double s) { return bottom - s / n_src * (bottom - top); };
  doc.line(L, bottom, L + pw, bottom, "black");
  doc.line(L, top, L, bottom, "black");
  doc.text(L + pw / 2, bottom + 30, "target position t", 12, "middle");
  doc.text(20, (top + bottom) / 2, "s'(t)", 12, "middle", -90);
  for (std::size_t s = 0; s <= source.size(); ++s) doc.text(L - 6, sy(static_cast<double>(s)) + 4, std::to_string(s), 10, "end");
  std::string pts;
  for (std::size_t t = 0; t < s_prime.size(); ++t) {
    const double y = sy(static_cast<double>(s_prime[t]));
    pts += svg::num(L + t * tw) + "," + svg::num(y) + " " + svg::num(L + (t + 1) * tw) + "," + svg::num(y) + " ";
    doc.line(L + (t + 0.5) * tw, bottom, L + (t + 0.5) * tw, y, "#888888", 1.0, "2,3");
  }
  if (!pts.empty()) doc.polyline(pts, "#d62728", 2.0);
  return doc.str();
}

/// Decodes one sentence simultaneously and renders its chunk alignment.
inline TraceRendering cmd_trace(const Checkpoint& ck, const std::string& sentence, const SimulConfig& cfg) {
  TraceRendering r;
  const TokenSeq src = to_ids(ck.source_vocab, sentence);
  r.source = split_tokens(sentence);
  r.source.push_back(Vocabulary::kEosToken);
  r.trace = simul_greedy_decode(ck.params, src, cfg);
  for (const auto& s : r.trace.steps) r.target.push_back(ck.target_vocab.token(s.token));
  r.chunks = alignment_chunks(r.trace);

  const double tau = delay_tau(r.trace.s_values(), src.size());
  std::ostringstream text;
  text << "source: ";
  for (std::size_t k = 0; k < r.source.size(); ++k) text << (k ? " " : "") << r.source[k];
  text << "\ntarget: ";
  for (std::size_t k = 0; k < r.target.size(); ++k) text << (k ? " " : "") << r.target[k];
  text << "\ns'(t):  ";
  for (std::size_t k = 0; k < r.trace.steps.size(); ++k) text << (k ? " " : "") << r.trace.steps[k].s_prime;
  text << "\nchunks: " << render_chunks_text(r.source, r.target, r.chunks) << "\n";
  text << "tau=" << format_fixed(tau) << " truncated=" << (r.trace.truncated ? 1 : 0) << "\n";
  r.text = text.str();
  r.svg = render_chunks_svg(r.source, r.target, r.chunks, r.trace.s_prime_values());
  return r;
}

// ---------------------------------------------------------------------------
// bleu over files

inline BleuReport cmd_bleu(const fs::path& hyp, const fs::path& ref) {
  const auto h = read_lines(hyp), r = read_lines(ref);
  std::vector<std::vector<std::string>> hs, rs;
  for (const auto& l : h) hs.push_back(split_tokens(l));
  for (const auto& l : r) rs.push_back(split_tokens(l));
  return corpus_bleu(hs, rs);
}

/// Reads a source/reference text pair into id sequences for a checkpoint.
inline std::vector<SentencePair> load_eval_corpus(const Checkpoint& ck, const fs::path& src, const fs::path& ref) {
  const auto c = read_parallel(src, ref);
  std::vector<SentencePair> out;
  for (std::size_t i = 0; i < c.source.size(); ++i)
    out.push_back({to_ids(ck.source_vocab, c.source[i]), to_ids(ck.target_vocab, c.target[i])});
  return out;
}

}  // namespace simt

#endif  // SIMT_HARNESS_HPP
