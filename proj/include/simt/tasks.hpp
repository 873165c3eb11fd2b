#ifndef SIMT_TASKS_HPP
#define SIMT_TASKS_HPP

// Synthetic translation tasks.
//
//   copy        y = x
//   reverse     y = reverse(x)
//   cipher      y_i = pi(x_i) for a seed-derived bijection pi
//   verb-final  x = body MARK_A|MARK_B;  y = TAG_A pi(body)  or  TAG_B pi(reverse(body))
//
// Source content tokens are "x<k>", target content tokens "y<k>", with
// k in [3, vocab). The first target token of verb-final depends on the last
// source token, so a good translation must read to the end.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "simt/error.hpp"
#include "simt/model.hpp"
#include "simt/numerics.hpp"
#include "simt/training.hpp"

namespace simt {

enum class TaskKind { copy, reverse, cipher, verb_final };

inline std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::copy: return "copy";
    case TaskKind::reverse: return "reverse";
    case TaskKind::cipher: return "cipher";
    case TaskKind::verb_final: return "verb-final";
  }
  return "?";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
  if (s == "copy") return TaskKind::copy;
  if (s == "reverse") return TaskKind::reverse;
  if (s == "cipher") return TaskKind::cipher;
  if (s == "verb-final" || s == "verb_final") return TaskKind::verb_final;
  return std::nullopt;
}

struct TaskSpec {
  TaskKind kind = TaskKind::cipher;
  std::size_t vocab = 20;  // includes the three reserved ids
  std::size_t min_len = 2;
  std::size_t max_len = 8;
  std::size_t train_count = 5000;
  std::size_t valid_count = 500;
  std::size_t test_count = 500;
  std::uint64_t seed = 1;

  void validate() const {
    if (vocab < 4) throw UsageError("task vocab must be >= 4");
    if (min_len < 1 || max_len < min_len) throw UsageError("task lengths must satisfy 1 <= min_len <= max_len");
    if (train_count == 0 || valid_count == 0 || test_count == 0)
      throw UsageError("task split sizes must be >= 1");
  }
};

struct TaskData {
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  std::vector<TokenId> cipher;  // cipher[k] = pi(k) for content ids, identity on reserved ids
  std::vector<SentencePair> train, valid, test;
};

/// Seed-derived bijection over content ids [3, vocab), identity elsewhere.
inline std::vector<TokenId> make_cipher(std::size_t vocab, std::uint64_t seed) {
  std::vector<TokenId> content;
  for (std::size_t k = 3; k < vocab; ++k) content.push_back(static_cast<TokenId>(k));
  Rng rng(seed ^ 0xC1F4E5ULL);
  rng.shuffle(content);
  std::vector<TokenId> pi(vocab);
  for (std::size_t k = 0; k < 3 && k < vocab; ++k) pi[k] = static_cast<TokenId>(k);
  for (std::size_t k = 3; k < vocab; ++k) pi[k] = content[k - 3];
  return pi;
}

/// Target sequence for a source body (without eos), per task definition.
inline TokenSeq task_target(TaskKind kind, const TokenSeq& body, const std::vector<TokenId>& pi,
                            TokenId marker_b, TokenId tag_a, TokenId tag_b) {
  TokenSeq out;
  switch (kind) {
    case TaskKind::copy:
      out = body;
      break;
    case TaskKind::reverse:
      out.assign(body.rbegin(), body.rend());
      break;
    case TaskKind::cipher:
      for (TokenId x : body) out.push_back(pi[static_cast<std::size_t>(x)]);
      break;
    case TaskKind::verb_final: {
      const bool is_b = body.back() == marker_b;
      TokenSeq content(body.begin(), body.end() - 1);
      if (is_b) std::reverse(content.begin(), content.end());
      out.push_back(is_b ? tag_b : tag_a);
      for (TokenId x : content) out.push_back(pi[static_cast<std::size_t>(x)]);
      break;
    }
  }
  out.push_back(kEos);
  return out;
}

/// Generates disjoint train/valid/test splits of distinct source sentences.
inline TaskData generate_task(const TaskSpec& spec) {
  spec.validate();
  TaskData data;
  for (std::size_t k = 3; k < spec.vocab; ++k) {
    data.source_vocab.add("x" + std::to_string(k));
    data.target_vocab.add("y" + std::to_string(k));
  }
  data.cipher = make_cipher(spec.vocab, spec.seed);
  TokenId marker_a = -1, marker_b = -1, tag_a = -1, tag_b = -1;
  if (spec.kind == TaskKind::verb_final) {
    marker_a = data.source_vocab.add("MARK_A");
    marker_b = data.source_vocab.add("MARK_B");
    tag_a = data.target_vocab.add("TAG_A");
    tag_b = data.target_vocab.add("TAG_B");
  }

  const std::size_t total = spec.train_count + spec.valid_count + spec.test_count;
  const std::uint64_t content = spec.vocab - 3;
  Rng rng(spec.seed);
  std::set<TokenSeq> seen;
  std::vector<TokenSeq> sources;
  std::size_t attempts = 0;
  while (sources.size() < total) {
    if (++attempts > 100 * total + 1000)
      throw UsageError("task space too small for the requested number of distinct sentences");
    const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
    TokenSeq body;
    for (std::size_t i = 0; i < len; ++i) body.push_back(static_cast<TokenId>(3 + rng.below(content)));
    if (spec.kind == TaskKind::verb_final) body.push_back(rng.below(2) == 0 ? marker_a : marker_b);
    if (seen.insert(body).second) sources.push_back(std::move(body));
  }

  for (std::size_t i = 0; i < sources.size(); ++i) {
    SentencePair pair;
    pair.target = task_target(spec.kind, sources[i], data.cipher, marker_b, tag_a, tag_b);
    pair.source = std::move(sources[i]);
    pair.source.push_back(kEos);
    if (i < spec.train_count)
      data.train.push_back(std::move(pair));
    else if (i < spec.train_count + spec.valid_count)
      data.valid.push_back(std::move(pair));
    else
      data.test.push_back(std::move(pair));
  }
  return data;
}

}  // namespace simt

#endif  // SIMT_TASKS_HPP
