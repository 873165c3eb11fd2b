#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "simt/tasks.hpp"
#include "simt/training.hpp"

namespace simt {
namespace {

ModelConfig tiny_config() { return {8, 8, 4, 6, 5}; }

SentencePair random_pair(Rng& rng, std::size_t vocab, std::size_t src_len, std::size_t tgt_len) {
  SentencePair p;
  for (std::size_t i = 0; i + 1 < src_len; ++i) p.source.push_back(static_cast<TokenId>(3 + rng.below(vocab - 3)));
  for (std::size_t i = 0; i + 1 < tgt_len; ++i) p.target.push_back(static_cast<TokenId>(3 + rng.below(vocab - 3)));
  p.source.push_back(kEos);
  p.target.push_back(kEos);
  return p;
}

// |a - b| / max(|a|, |b|, 1e-5). Central differences at h = 1e-5 carry
// round-off near 1e-10, so smaller denominators would measure that noise.
double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5}); }

TEST(Nll, ZeroWeightsGiveUniformLoss) {
  const ModelParams p(tiny_config());
  const SentencePair pair{{3, 4, kEos}, {5, 6, 7, kEos}};
  EXPECT_NEAR(nll(p, pair), 4.0 * std::log(8.0), 1e-12);
}

TEST(Nll, NonNegative) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto p = ModelParams::random(tiny_config(), rng, 1.0);
    EXPECT_GE(nll(p, random_pair(rng, 8, 1 + rng.below(5), 1 + rng.below(5))), 0.0);
  }
}

TEST(Nll, RejectsInvalidPairs) {
  const ModelParams p(tiny_config());
  EXPECT_THROW(nll(p, SentencePair{{}, {kEos}}), DataError);
  EXPECT_THROW(nll(p, SentencePair{{3, kEos}, {8, kEos}}), DataError);
}

TEST(GradNll, MatchesFiniteDifferences) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const auto params = ModelParams::random(tiny_config(), rng, 0.5);
    auto with_bias = params;
    with_bias.for_each([&](RealMatrix& m) {
      if (m.cols == 1)
        for (double& x : m.data) x = rng.gaussian(0.0, 0.5);
    });
    const auto pair = random_pair(rng, 8, 3, 3);

    const ModelParams g = grad_nll(with_bias, pair);
    const RealVector analytic = g.flatten();
    ModelParams scratch = with_bias;
    auto f = [&](const RealVector& x) {
      scratch.unflatten(x);
      return nll(scratch, pair);
    };
    const RealVector numeric = fd_gradient(f, with_bias.flatten(), 1e-5);
    ASSERT_EQ(analytic.size(), numeric.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, relative_error(analytic[i], numeric[i]));
  }
  EXPECT_LT(worst, 1e-4);
  RecordProperty("max_relative_error", std::to_string(worst));
}

TEST(GradNll, UnusedTargetRowsHaveZeroGradient) {
  Rng rng(5);
  const auto p = ModelParams::random(tiny_config(), rng, 0.5);
  const SentencePair pair{{3, 4, kEos}, {5, 5, kEos}};
  const auto g = grad_nll(p, pair);
  // Rows read as the previous target token: eos (start) and 5.
  for (TokenId id : {0, 2, 3, 4, 6, 7})
    for (double v : g.tgt_emb.row(static_cast<std::size_t>(id))) EXPECT_EQ(v, 0.0) << "row " << id;
  for (TokenId id : {0, 2, 5, 6, 7})
    for (double v : g.src_emb.row(static_cast<std::size_t>(id))) EXPECT_EQ(v, 0.0) << "row " << id;
}

TEST(GradNll, IsLinearInTheLoss) {
  Rng rng(6);
  const auto p = ModelParams::random(tiny_config(), rng, 0.5);
  const auto pair = random_pair(rng, 8, 4, 4);
  double loss = 0.0;
  const auto once = grad_nll(p, pair, &loss);
  EXPECT_DOUBLE_EQ(loss, nll(p, pair));

  ModelParams twice(tiny_config());
  for (int k = 0; k < 2; ++k) detail::backward(p, pair, detail::forward(p, pair, true), twice);
  const auto a = once.flatten();
  const auto b = twice.flatten();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 2.0 * a[i], 1e-12 * std::abs(a[i]));
}

TEST(Adadelta, FirstStepValue) {
  const ModelConfig c{4, 4, 1, 1, 1};
  ModelParams params(c);
  ModelParams grads(c);
  grads.for_each([](RealMatrix& m) { m.fill(1.0); });
  AdadeltaState st(c);
  adadelta_step(params, grads, st);
  const double mean_sq = (1.0 - 0.95) * 1.0 * 1.0;
  const double expected = -std::sqrt(1e-6) / std::sqrt(mean_sq + 1e-6);
  EXPECT_NEAR(expected, -4.4721e-3, 1e-7);
  params.for_each([&](const RealMatrix& m) {
    for (double x : m.data) EXPECT_DOUBLE_EQ(x, expected);
  });
  st.sq_grad.for_each([&](const RealMatrix& m) {
    for (double x : m.data) EXPECT_DOUBLE_EQ(x, mean_sq);
  });
}

TEST(Adadelta, ZeroGradientIsANoOp) {
  Rng rng(7);
  const auto c = tiny_config();
  auto params = ModelParams::random(c, rng);
  const auto before = params;
  AdadeltaState st(c);
  st.sq_grad.for_each([](RealMatrix& m) { m.fill(2.0); });
  st.sq_delta.for_each([](RealMatrix& m) { m.fill(4.0); });
  adadelta_step(params, ModelParams(c), st);
  EXPECT_EQ(params, before);
  st.sq_grad.for_each([](const RealMatrix& m) {
    for (double x : m.data) EXPECT_DOUBLE_EQ(x, 1.9);
  });
  st.sq_delta.for_each([](const RealMatrix& m) {
    for (double x : m.data) EXPECT_DOUBLE_EQ(x, 3.8);
  });
}

TEST(Adadelta, StepOpposesGradientSign) {
  Rng rng(8);
  const auto c = tiny_config();
  ModelParams params(c);
  AdadeltaState st(c);
  for (int step = 0; step < 5; ++step) {
    const auto before = params.flatten();
    const auto grads = ModelParams::random(c, rng, 1.0);
    adadelta_step(params, grads, st);
    const auto after = params.flatten();
    const auto g = grads.flatten();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] > 0) {
        EXPECT_LT(after[i], before[i]);
      } else if (g[i] < 0) {
        EXPECT_GT(after[i], before[i]);
      } else {
        EXPECT_EQ(after[i], before[i]);
      }
    }
  }
}

TEST(Tasks, TargetDefinitions) {
  const std::vector<TokenId> pi = make_cipher(10, 4);
  EXPECT_EQ(task_target(TaskKind::copy, {5, 7}, pi, -1, -1, -1), (TokenSeq{5, 7, kEos}));
  EXPECT_EQ(task_target(TaskKind::reverse, {5, 7, 9}, pi, -1, -1, -1), (TokenSeq{9, 7, 5, kEos}));
  EXPECT_EQ(task_target(TaskKind::cipher, {5, 7}, pi, -1, -1, -1), (TokenSeq{pi[5], pi[7], kEos}));
  EXPECT_EQ(task_target(TaskKind::verb_final, {5, 7, 20}, pi, 21, 30, 31), (TokenSeq{30, pi[5], pi[7], kEos}));
  EXPECT_EQ(task_target(TaskKind::verb_final, {5, 7, 21}, pi, 21, 30, 31), (TokenSeq{31, pi[7], pi[5], kEos}));
}

TEST(Tasks, CipherIsABijectionOnContentIds) {
  const auto pi = make_cipher(20, 1);
  EXPECT_EQ(pi[0], 0);
  EXPECT_EQ(pi[1], 1);
  EXPECT_EQ(pi[2], 2);
  std::vector<TokenId> content(pi.begin() + 3, pi.end());
  std::sort(content.begin(), content.end());
  for (std::size_t k = 0; k < content.size(); ++k) EXPECT_EQ(content[k], static_cast<TokenId>(k + 3));
}

TEST(Tasks, DeterministicAndDisjoint) {
  for (TaskKind kind : {TaskKind::copy, TaskKind::reverse, TaskKind::cipher, TaskKind::verb_final}) {
    TaskSpec spec;
    spec.kind = kind;
    spec.train_count = 300;
    spec.valid_count = 50;
    spec.test_count = 50;
    spec.seed = 9;
    const auto a = generate_task(spec);
    const auto b = generate_task(spec);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.valid, b.valid);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.train.size(), 300u);
    EXPECT_EQ(a.valid.size(), 50u);
    EXPECT_EQ(a.test.size(), 50u);

    std::set<TokenSeq> sources;
    for (const auto* split : {&a.train, &a.valid, &a.test})
      for (const auto& p : *split) {
        EXPECT_TRUE(sources.insert(p.source).second);
        EXPECT_EQ(p.source.back(), kEos);
        EXPECT_EQ(p.target.back(), kEos);
        for (TokenId t : p.source) EXPECT_LT(static_cast<std::size_t>(t), a.source_vocab.size());
        for (TokenId t : p.target) EXPECT_LT(static_cast<std::size_t>(t), a.target_vocab.size());
      }

    spec.seed = 10;
    EXPECT_NE(generate_task(spec).train, a.train);
  }
}

TEST(Tasks, VerbFinalTargetsPermuteTheCipheredContent) {
  TaskSpec spec;
  spec.kind = TaskKind::verb_final;
  spec.train_count = 300;
  const auto data = generate_task(spec);
  std::size_t reordered = 0;
  for (const auto& p : data.train) {
    ASSERT_EQ(p.target.size(), p.source.size());
    TokenSeq expected;
    for (std::size_t i = 0; i + 2 < p.source.size(); ++i)
      expected.push_back(data.cipher[static_cast<std::size_t>(p.source[i])]);
    const TokenSeq body(p.target.begin() + 1, p.target.end() - 1);
    TokenSeq reversed(expected.rbegin(), expected.rend());
    EXPECT_TRUE(body == expected || body == reversed);
    reordered += body != expected;
  }
  EXPECT_GT(reordered, 0u);
}

TEST(Tasks, RejectsInvalidSpecs) {
  TaskSpec spec;
  spec.vocab = 3;
  EXPECT_THROW(generate_task(spec), UsageError);
  spec = TaskSpec{};
  spec.min_len = 4;
  spec.max_len = 3;
  EXPECT_THROW(generate_task(spec), UsageError);
  spec = TaskSpec{};
  spec.vocab = 4;
  spec.max_len = 1;
  spec.min_len = 1;
  EXPECT_THROW(generate_task(spec), UsageError);
}

constexpr double kCopyStart = 10.90832053606881;
constexpr double kCopyEnd = 8.9337689059764518;

// Copy task, 100 Adadelta updates from a fixed seed. The endpoint losses are
// regression values from this exact procedure.
TEST(Training, CopyTaskLossDecreasesOverFirstHundredUpdates) {
  TaskSpec spec;
  spec.kind = TaskKind::copy;
  spec.vocab = 10;
  spec.min_len = 2;
  spec.max_len = 5;
  spec.train_count = 1600;
  spec.valid_count = 1;
  spec.test_count = 1;
  spec.seed = 3;
  const auto data = generate_task(spec);
  const ModelConfig c{data.source_vocab.size(), data.target_vocab.size(), 8, 16, 16};
  Rng rng(3);
  auto params = ModelParams::random(c, rng);
  AdadeltaState st(c);

  auto mean_nll = [&](const ModelParams& p) {
    double total = 0.0;
    for (std::size_t i = 0; i < 200; ++i) total += nll(p, data.train[i]);
    return total / 200.0;
  };
  const double start = mean_nll(params);
  ModelParams g(c);
  for (std::size_t u = 0; u < 100; ++u) {
    g.set_zero();
    for (std::size_t k = 0; k < 16; ++k) {
      const auto& pair = data.train[u * 16 + k];
      detail::backward(params, pair, detail::forward(params, pair, true), g);
    }
    g.for_each([](RealMatrix& m) {
      for (double& x : m.data) x /= 16.0;
    });
    adadelta_step(params, g, st);
  }
  const double end = mean_nll(params);
  EXPECT_LT(end, start);
  EXPECT_NEAR(start, kCopyStart, 1e-6);
  EXPECT_NEAR(end, kCopyEnd, 1e-6);
}

std::pair<std::vector<SentencePair>, std::vector<SentencePair>> small_cipher() {
  TaskSpec spec;
  spec.kind = TaskKind::cipher;
  spec.vocab = 8;
  spec.min_len = 1;
  spec.max_len = 4;
  spec.train_count = 200;
  spec.valid_count = 40;
  spec.test_count = 1;
  auto d = generate_task(spec);
  return {d.train, d.valid};
}

TEST(Training, DeterministicGivenSeed) {
  const auto [tr, va] = small_cipher();
  const ModelConfig c{8, 8, 4, 8, 8};
  TrainOptions opt;
  opt.max_epochs = 2;
  const auto a = train(tr, va, c, opt);
  const auto b = train(tr, va, c, opt);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].valid_logprob, b.log[i].valid_logprob);
  opt.seed = 2;
  EXPECT_NE(train(tr, va, c, opt).params, a.params);
}

TEST(Training, ReturnsBestEpochAndHonoursPatience) {
  const auto [tr, va] = small_cipher();
  const ModelConfig c{8, 8, 4, 8, 8};
  TrainOptions opt;
  opt.max_epochs = 40;
  opt.patience = 0;
  std::vector<ModelParams> snapshots;
  opt.on_epoch = [&](int, const ModelParams& p) { snapshots.push_back(p); };
  const auto r = train(tr, va, c, opt);
  ASSERT_EQ(snapshots.size(), r.log.size());
  ASSERT_GE(r.best_epoch, 1);
  EXPECT_EQ(r.params, snapshots[static_cast<std::size_t>(r.best_epoch - 1)]);

  // With patience 0 the run ends at the first epoch that does not improve.
  int first_stale = 0;
  for (const auto& rec : r.log)
    if (!rec.best_so_far) {
      first_stale = rec.epoch;
      break;
    }
  if (first_stale) {
    EXPECT_EQ(static_cast<int>(r.log.size()), first_stale);
    EXPECT_NE(r.params, snapshots.back());
  } else {
    EXPECT_EQ(static_cast<int>(r.log.size()), opt.max_epochs);
  }
  double best = -1e300;
  for (const auto& rec : r.log) {
    EXPECT_EQ(rec.best_so_far, rec.valid_logprob > best);
    best = std::max(best, rec.valid_logprob);
  }
}

TEST(Training, RejectsOverlappingSplits) {
  const auto [tr, va] = small_cipher();
  auto bad = va;
  bad.push_back(tr.front());
  EXPECT_THROW(train(tr, bad, {8, 8, 4, 8, 8}, TrainOptions{}), UsageError);
}

TEST(Training, DivergenceNamesTheEpoch) {
  const auto [tr, va] = small_cipher();
  TrainOptions opt;
  opt.init_stddev = std::numeric_limits<double>::infinity();
  try {
    train(tr, va, {8, 8, 4, 8, 8}, opt);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1);
    EXPECT_STREQ(e.what(), "diverged at epoch 1");
  }
}

TEST(Training, LengthFilter) {
  SentencePair long_pair{TokenSeq(51, 3), TokenSeq{kEos}};
  SentencePair ok{TokenSeq(50, 3), TokenSeq{kEos}};
  const auto kept = filter_by_length({long_pair, ok}, 50);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0], ok);
}

}  // namespace
}  // namespace simt
