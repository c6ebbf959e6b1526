#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "jeanie/error.hpp"
#include "jeanie/fsar.hpp"

using namespace jeanie;
using namespace jeanie::fsar;

namespace {

SyntheticConfig tiny_corpus() {
  SyntheticConfig c;
  c.classes = 6;
  c.samples_per_class = 4;
  c.joints = 4;
  c.min_frames = 20;
  c.max_frames = 24;
  return c;
}

FsarConfig tiny_config() {
  FsarConfig c;
  c.representation.grid = {1, 0};
  c.representation.d_prime = 6;
  c.episodes = {3, 1, 2};
  c.supervised.iterations = 3;
  c.unsupervised.iterations = 2;
  c.unsupervised.dictionary_size = 4;
  c.unsupervised.coder.k_nn = 2;
  c.fusion.iterations = 2;
  return c;
}

const Workspace& tiny_workspace() {
  static const Workspace ws(make_synthetic_corpus(tiny_corpus()), tiny_config().representation);
  return ws;
}

std::vector<int> all_indices(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

}  // namespace

TEST(SupervisedLoss, WorkedExample) {
  const std::vector<double> dp{2, 4}, dm{1, 3, 5};
  const auto loss = supervised_loss(dp, dm, 2, {1});
  // (3 - 2)^2 + (3 - mean{5, 3})^2
  EXPECT_DOUBLE_EQ(loss.value, 2.0);
  EXPECT_EQ(loss.d_plus_grad, (std::vector<double>{1.0, 1.0}));
  for (double g : loss.d_minus_grad) EXPECT_DOUBLE_EQ(g, -2.0 / 3.0);
}

TEST(SupervisedLoss, ZeroWhenTargetsAreMeans) {
  const std::vector<double> dp{2, 2}, dm{1, 3};
  const auto loss = supervised_loss(dp, dm, 1, {2});
  EXPECT_EQ(loss.value, 0.0);
  EXPECT_THROW(supervised_loss(dp, dm, 2, {2}), Error);
}

TEST(Synthetic, ShapeAndDeterminism) {
  const auto cfg = tiny_corpus();
  const auto a = make_synthetic_corpus(cfg);
  ASSERT_EQ(a.size(), 24u);
  std::vector<int> counts(6, 0);
  for (const auto& s : a) {
    ++counts[static_cast<std::size_t>(s.label)];
    EXPECT_EQ(s.sequence.joints(), 4u);
    EXPECT_GE(s.sequence.frames(), 20u);
    EXPECT_LE(s.sequence.frames(), 24u);
  }
  EXPECT_EQ(counts, std::vector<int>(6, 4));
  const auto b = make_synthetic_corpus(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].sequence, b[i].sequence);
  auto other = cfg;
  other.seed = 8;
  EXPECT_NE(make_synthetic_corpus(other)[0].sequence, a[0].sequence);
}

TEST(Synthetic, RejectsBadConfig) {
  auto cfg = tiny_corpus();
  cfg.min_frames = 30;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = tiny_corpus();
  cfg.classes = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Split, PerClassAndByClass) {
  const auto& corpus = tiny_workspace().corpus();
  const auto per = split_per_class(corpus, 3);
  EXPECT_EQ(per.train.size(), 18u);
  EXPECT_EQ(per.test.size(), 6u);
  const auto by = split_by_class(corpus, 4);
  EXPECT_EQ(by.train.size(), 16u);
  EXPECT_EQ(by.test.size(), 8u);
  for (int i : by.train) EXPECT_LT(corpus[static_cast<std::size_t>(i)].label, 4);
  for (int i : by.test) EXPECT_GE(corpus[static_cast<std::size_t>(i)].label, 4);
}

TEST(EpisodeSampler, LayoutInvariant) {
  const auto& corpus = tiny_workspace().corpus();
  const auto pool = all_indices(static_cast<int>(corpus.size()));
  const EpisodeSampler sampler(corpus, pool, 3, 2);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto ep = sampler.sample(rng);
    EXPECT_NO_THROW(check_episode(ep, corpus));
    const int q = corpus[static_cast<std::size_t>(ep.query)].label;
    EXPECT_EQ(ep.classes[0], q);
    EXPECT_EQ(std::set<int>(ep.classes.begin(), ep.classes.end()).size(), 3u);
    std::set<int> seen(ep.supports.begin(), ep.supports.end());
    seen.insert(ep.query);
    EXPECT_EQ(seen.size(), 7u);
  }
}

TEST(EpisodeSampler, SeededDraws) {
  const auto& corpus = tiny_workspace().corpus();
  const auto pool = all_indices(static_cast<int>(corpus.size()));
  const EpisodeSampler sampler(corpus, pool, 4, 1);
  std::mt19937_64 a(5), b(5);
  const auto x = sampler.sample_batch(10, a), y = sampler.sample_batch(10, b);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].query, y[i].query);
    EXPECT_EQ(x[i].supports, y[i].supports);
  }
}

TEST(EpisodeSampler, RejectsSmallPool) {
  const auto& corpus = tiny_workspace().corpus();
  const std::vector<int> pool{0, 1, 2, 3};  // one class only
  EXPECT_THROW(EpisodeSampler(corpus, pool, 2, 1), Error);
}

TEST(CheckEpisode, DetectsWrongGroup) {
  const auto& corpus = tiny_workspace().corpus();
  const auto pool = all_indices(static_cast<int>(corpus.size()));
  std::mt19937_64 rng(2);
  auto ep = EpisodeSampler(corpus, pool, 3, 1).sample(rng);
  std::swap(ep.supports[0], ep.supports[1]);
  EXPECT_THROW(check_episode(ep, corpus), Error);
}

TEST(BatchSamples, QueryThenSupports) {
  Episode a{1, {2, 3}, {0, 1}, 2, 1}, b{4, {5, 6}, {0, 1}, 2, 1};
  const std::vector<Episode> eps{a, b};
  EXPECT_EQ(batch_samples(eps), (std::vector<int>{1, 2, 3, 4, 5, 6}));
}

TEST(Classifiers, NearestLabelTies) {
  const std::vector<double> d{0.5, 0.2, 0.2};
  const std::vector<int> labels{7, 8, 9};
  EXPECT_EQ(nearest_label(d, labels), 8);
  EXPECT_THROW(nearest_label(d, std::vector<int>{1}), Error);
}

TEST(Classifiers, FusedEndpoints) {
  const std::vector<double> sup{1.0, 2.0, 3.0}, code{3.0, 0.5, 2.0};
  const std::vector<int> labels{0, 1, 2};
  EXPECT_EQ(fuse_weighted(sup, code, labels, 1.0), 0);
  EXPECT_EQ(fuse_weighted(sup, code, labels, 0.0), 1);
  // rho 0.8: 1.4, 1.7, 2.8
  EXPECT_EQ(fuse_weighted(sup, code, labels, 0.8), 0);
  // rho 0.6: 1.8, 1.4, 2.6
  EXPECT_EQ(fuse_weighted(sup, code, labels, 0.6), 1);
}

TEST(Classifiers, UnsupervisedUsesCodeDistance) {
  coding::Code q(2), s0(2), s1(2);
  q << 0.9, 0.1;
  s0 << 0.2, 0.8;
  s1 << 1.0, 0.0;
  const std::vector<coding::Code> supports{s0, s1};
  const std::vector<int> labels{3, 4};
  for (auto k : {coding::CodeDistanceKind::HIK, coding::CodeDistanceKind::CSK, coding::CodeDistanceKind::L2})
    EXPECT_EQ(classify_unsupervised(q, supports, labels, k), 4);
}

TEST(FsarConfig, CrossFieldBeta) {
  auto cfg = tiny_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.episodes = {5, 1, 1};
  cfg.supervised.loss.beta = 5;  // N Z beta = 25 > B (N-1) Z = 4
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(RngStreams, IndependentStreams) {
  RngStreams a(3), b(3);
  a(RngStreams::Supervised)();
  EXPECT_EQ(a(RngStreams::Unsupervised)(), b(RngStreams::Unsupervised)());
  EXPECT_NE(a.serialize(), b.serialize());
  EXPECT_NE(RngStreams(3)(RngStreams::EncoderInit)(), RngStreams(4)(RngStreams::EncoderInit)());
}

TEST(SupervisedStep, GradientMatchesFiniteDifference) {
  const auto& ws = tiny_workspace();
  const auto cfg = tiny_config();
  const auto pool = all_indices(ws.size());
  std::mt19937_64 rng(3);
  const auto eps = EpisodeSampler(ws.corpus(), pool, 3, 1).sample_batch(2, rng);
  auto enc = encoder::LinearBlockEncoder::random(cfg.representation.d_prime,
                                                 static_cast<int>(ws.joints()),
                                                 cfg.representation.blocks.block_length, rng);
  auto sup = cfg.supervised;
  sup.aligner.jeanie.smooth = {0.5, false};
  const auto step = supervised_step(ws, eps, enc, sup);
  EXPECT_DOUBLE_EQ(step.loss.value, supervised_step(ws, eps, enc, sup, false).loss.value);
  // The targets (beta smallest d+, N Z beta largest d-) are held constant, so
  // differentiate the loss with targets frozen at the base point.
  auto sorted = [](std::vector<double> v) { std::sort(v.begin(), v.end()); return v; };
  const auto dp = sorted(step.distances.d_plus), dm = sorted(step.distances.d_minus);
  const double tp = dp.front(), tm = (dm[dm.size() - 1] + dm[dm.size() - 2] + dm[dm.size() - 3]) / 3;
  auto frozen = [&](const encoder::LinearBlockEncoder& e) {
    const auto d = supervised_step(ws, eps, e, sup, false).distances;
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    return std::pow(mean(d.d_plus) - tp, 2) + std::pow(mean(d.d_minus) - tm, 2);
  };
  EXPECT_DOUBLE_EQ(frozen(enc), step.loss.value);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < enc.weights().size(); i += 7) {
    auto p = enc, m = enc;
    p.weights()(i) += h;
    m.weights()(i) -= h;
    const double fd = (frozen(p) - frozen(m)) / (2 * h);
    EXPECT_NEAR(step.gradient.d_weights(i), fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(SupervisedIteration, ZeroStepIsNoOp) {
  const auto& ws = tiny_workspace();
  auto cfg = tiny_config();
  cfg.supervised.learning_rate = 0.0;
  cfg.supervised.weight_decay = 0.0;
  const auto pool = all_indices(ws.size());
  std::mt19937_64 rng(4);
  const auto eps = EpisodeSampler(ws.corpus(), pool, 3, 1).sample_batch(2, rng);
  auto enc = encoder::LinearBlockEncoder::random(6, 4, cfg.representation.blocks.block_length, rng);
  const auto before = enc;
  Eigen::MatrixXd velocity;
  supervised_iteration(ws, eps, enc, velocity, cfg.supervised);
  EXPECT_EQ(enc.weights(), before.weights());
  EXPECT_EQ(enc.bias(), before.bias());
}

TEST(Training, SupervisedIsDeterministic) {
  const auto& ws = tiny_workspace();
  const auto cfg = tiny_config();
  const auto pool = all_indices(ws.size());
  std::vector<double> la, lb;
  RngStreams ra(9), rb(9);
  const auto a = train_supervised(ws, pool, cfg, ra, [&](const IterationMetrics& m) { la.push_back(m.loss); });
  const auto b = train_supervised(ws, pool, cfg, rb, [&](const IterationMetrics& m) { lb.push_back(m.loss); });
  EXPECT_EQ(a.encoder.weights(), b.encoder.weights());
  EXPECT_EQ(la, lb);
  EXPECT_EQ(la.size(), 3u);
}

TEST(Training, UnsupervisedObjectiveDecreases) {
  const auto& ws = tiny_workspace();
  const auto cfg = tiny_config();
  const auto pool = all_indices(ws.size());
  std::mt19937_64 rng(10);
  const auto eps = EpisodeSampler(ws.corpus(), pool, 3, 1).sample_batch(2, rng);
  auto enc = encoder::LinearBlockEncoder::random(6, 4, cfg.representation.blocks.block_length, rng);
  CodingState state{initial_dictionary(ws, pool, enc, cfg.unsupervised, rng), {}, {}};
  std::vector<const encoder::BlockStack*> stacks;
  for (int i : batch_samples(eps)) stacks.push_back(&ws.grid_blocks(i));
  for (int it = 0; it < 3; ++it) {
    const auto r = unsupervised_iteration(stacks, enc, state, cfg.unsupervised);
    EXPECT_LE(r.loss_after, r.loss_before);
  }
}

TEST(Evaluate, SingleWayIsAlwaysRight) {
  const auto& ws = tiny_workspace();
  auto cfg = tiny_config();
  const auto pool = all_indices(ws.size());
  RngStreams rng(1);
  const auto model = train_supervised(ws, pool, cfg, rng);
  EvaluationConfig eval;
  eval.episodes = 20;
  eval.n_way = 1;
  eval.seeds = {1, 2};
  const auto r = evaluate(ws, pool, model, cfg, eval);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.per_seed.size(), 2u);
  EXPECT_EQ(r.ci95, 0.0);
}

TEST(Evaluate, FusedEndpointMatchesSupervised) {
  const auto& ws = tiny_workspace();
  auto cfg = tiny_config();
  const auto pool = all_indices(ws.size());
  RngStreams rng(2);
  const auto model = train_weighted_fusion(ws, pool, cfg, rng);
  EvaluationConfig sup, fused;
  sup.episodes = fused.episodes = 30;
  sup.n_way = fused.n_way = 3;
  fused.classifier = ClassifierKind::Fused;
  fused.rho = 1.0;
  const std::vector<EvaluationConfig> evals{sup, fused};
  const auto r = evaluate_many(ws, pool, model, cfg, evals);
  EXPECT_EQ(r[0].accuracy, r[1].accuracy);
  EXPECT_EQ(r[0].accuracy, evaluate(ws, pool, model, cfg, sup).accuracy);
}
