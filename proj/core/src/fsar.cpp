#include "jeanie/fsar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "jeanie/error.hpp"
#include "jeanie/parallel.hpp"

namespace jeanie::fsar {

void SupervisedLossConfig::validate() const {
  require(beta >= 1, ErrorKind::Config, "beta must be at least 1");
}

void RepresentationConfig::validate() const {
  grid.validate();
  blocks.validate();
  require(d_prime >= 1, ErrorKind::Config, "d_prime must be positive");
  require(view.camera_distance > 0.0, ErrorKind::Config, "camera distance must be positive");
}

void EpisodeConfig::validate() const {
  require(n_way >= 2, ErrorKind::Config, "training episodes need n_way >= 2");
  require(z_shot >= 1, ErrorKind::Config, "z_shot must be at least 1");
  require(batch >= 1, ErrorKind::Config, "batch must be at least 1");
}

void SupervisedConfig::validate() const {
  require(iterations >= 0, ErrorKind::Config, "supervised iterations must be nonnegative");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorKind::Config,
          "learning rate must be finite and nonnegative");
  require(weight_decay >= 0.0, ErrorKind::Config, "weight decay must be nonnegative");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::Config, "momentum must lie in [0, 1)");
  loss.validate();
  aligner.validate();
}

void UnsupervisedConfig::validate() const {
  require(iterations >= 0, ErrorKind::Config, "unsupervised iterations must be nonnegative");
  require(dictionary_size >= 1, ErrorKind::Config, "dictionary size must be positive");
  require(tau_star >= 0, ErrorKind::Config, "tau_star must be nonnegative (0 = automatic)");
  require(dic_iter >= 0, ErrorKind::Config, "dic_iter must be nonnegative");
  require(omega_dl >= 0.0 && omega_en >= 0.0, ErrorKind::Config,
          "dictionary and encoder step sizes must be nonnegative");
  require(init_noise >= 0.0, ErrorKind::Config, "init_noise must be nonnegative");
  coder.validate(dictionary_size);
}

void FusionConfig::validate() const {
  require(iterations >= 0, ErrorKind::Config, "fusion iterations must be nonnegative");
  require(rho >= 0.0 && rho <= 1.0, ErrorKind::Config, "rho must lie in [0, 1]");
  require(lambda >= 0.0, ErrorKind::Config, "lambda must be nonnegative");
}

void FsarConfig::validate() const {
  representation.validate();
  episodes.validate();
  supervised.validate();
  unsupervised.validate();
  fusion.validate();
  const long nzb = static_cast<long>(episodes.n_way) * episodes.z_shot * supervised.loss.beta;
  const long negatives =
      static_cast<long>(episodes.batch) * (episodes.n_way - 1) * episodes.z_shot;
  require(nzb <= negatives, ErrorKind::Config,
          "N*Z*beta = " + std::to_string(nzb) + " exceeds the B*(N-1)*Z = " +
              std::to_string(negatives) + " between-class distances per batch");
  require(supervised.loss.beta <= episodes.batch * episodes.z_shot, ErrorKind::Config,
          "beta exceeds the B*Z within-class distances per batch");
}

void EvaluationConfig::validate() const {
  require(episodes >= 1, ErrorKind::Config, "evaluation needs at least one episode");
  require(n_way >= 1 && z_shot >= 1, ErrorKind::Config, "n_way and z_shot must be positive");
  require(rho >= 0.0 && rho <= 1.0, ErrorKind::Config, "rho must lie in [0, 1]");
  require(!seeds.empty(), ErrorKind::Config, "evaluation needs at least one seed");
}

RngStreams::RngStreams(std::uint64_t seed) : seed_(seed) {
  for (std::uint64_t s = 0; s < 4; ++s) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    engines_.emplace_back(seq);
  }
}

std::string RngStreams::serialize() const {
  std::ostringstream out;
  out << seed_;
  for (const auto& e : engines_) out << '\n' << e;
  return out.str();
}

// ---------------------------------------------------------------------------
// Episodes

EpisodeSampler::EpisodeSampler(const Corpus& corpus, std::span<const int> pool, int n_way,
                               int z_shot)
    : n_way_(n_way), z_shot_(z_shot) {
  require(n_way >= 1 && z_shot >= 1, ErrorKind::Config, "n_way and z_shot must be positive");
  std::map<int, std::vector<int>> by_label;
  for (int i : pool) {
    require(i >= 0 && i < static_cast<int>(corpus.size()), ErrorKind::Argument,
            "pool index out of range");
    by_label[corpus[static_cast<std::size_t>(i)].label].push_back(i);
  }
  for (auto& [label, members] : by_label) {
    if (static_cast<int>(members.size()) < z_shot) continue;
    labels_.push_back(label);
    members_.push_back(std::move(members));
    if (static_cast<int>(members_.back().size()) >= z_shot + 1)
      query_classes_.push_back(static_cast<int>(labels_.size()) - 1);
  }
  require(static_cast<int>(labels_.size()) >= n_way, ErrorKind::Config,
          "pool has " + std::to_string(labels_.size()) + " classes with >= " +
              std::to_string(z_shot) + " samples; " + std::to_string(n_way) + "-way episodes need more");
  require(!query_classes_.empty(), ErrorKind::Config,
          "no class has the Z+1 samples a query episode needs");
}

Episode EpisodeSampler::sample(std::mt19937_64& rng) const {
  Episode ep;
  ep.n_way = n_way_;
  ep.z_shot = z_shot_;
  const int qslot = query_classes_[std::uniform_int_distribution<std::size_t>(
      0, query_classes_.size() - 1)(rng)];
  std::vector<int> others;
  for (int s = 0; s < static_cast<int>(labels_.size()); ++s)
    if (s != qslot) others.push_back(s);
  // Partial Fisher-Yates: the first N-1 entries become the negative classes.
  for (int i = 0; i < n_way_ - 1; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(
        static_cast<std::size_t>(i), others.size() - 1)(rng);
    std::swap(others[static_cast<std::size_t>(i)], others[j]);
  }
  auto draw = [&](int slot, int count) {
    std::vector<int> m = members_[static_cast<std::size_t>(slot)];
    for (int i = 0; i < count; ++i) {
      const auto j =
          std::uniform_int_distribution<std::size_t>(static_cast<std::size_t>(i), m.size() - 1)(rng);
      std::swap(m[static_cast<std::size_t>(i)], m[j]);
    }
    m.resize(static_cast<std::size_t>(count));
    return m;
  };
  const std::vector<int> own = draw(qslot, z_shot_ + 1);
  ep.query = own[0];
  ep.classes.push_back(labels_[static_cast<std::size_t>(qslot)]);
  ep.supports.insert(ep.supports.end(), own.begin() + 1, own.end());
  for (int i = 0; i < n_way_ - 1; ++i) {
    const int slot = others[static_cast<std::size_t>(i)];
    const std::vector<int> picked = draw(slot, z_shot_);
    ep.classes.push_back(labels_[static_cast<std::size_t>(slot)]);
    ep.supports.insert(ep.supports.end(), picked.begin(), picked.end());
  }
  return ep;
}

std::vector<Episode> EpisodeSampler::sample_batch(int batch, std::mt19937_64& rng) const {
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) out.push_back(sample(rng));
  return out;
}

void check_episode(const Episode& ep, const Corpus& corpus) {
  require(static_cast<int>(ep.supports.size()) == ep.n_way * ep.z_shot &&
              static_cast<int>(ep.classes.size()) == ep.n_way,
          ErrorKind::Shape, "episode support layout does not match N x Z");
  const int qlabel = corpus[static_cast<std::size_t>(ep.query)].label;
  std::set<int> distinct(ep.classes.begin(), ep.classes.end());
  require(static_cast<int>(distinct.size()) == ep.n_way, ErrorKind::Argument,
          "episode classes must be distinct");
  for (int n = 0; n < ep.n_way; ++n) {
    for (int z = 0; z < ep.z_shot; ++z) {
      const int label = corpus[static_cast<std::size_t>(ep.support(n, z))].label;
      require(label == ep.classes[static_cast<std::size_t>(n)], ErrorKind::Argument,
              "support label disagrees with its group");
      require((n == 0) == (label == qlabel), ErrorKind::Argument,
              "group 0 must share the query class and no other group may");
    }
  }
}

std::vector<int> batch_samples(std::span<const Episode> episodes) {
  std::vector<int> out;
  for (const auto& ep : episodes) {
    out.push_back(ep.query);
    out.insert(out.end(), ep.supports.begin(), ep.supports.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

SupervisedLoss supervised_loss(std::span<const double> d_plus, std::span<const double> d_minus,
                               int nz, const SupervisedLossConfig& cfg) {
  cfg.validate();
  require(nz >= 1, ErrorKind::Config, "N*Z must be positive");
  const auto beta = static_cast<std::size_t>(cfg.beta);
  const auto top = static_cast<std::size_t>(nz) * beta;
  require(beta <= d_plus.size(), ErrorKind::Config,
          "beta = " + std::to_string(beta) + " exceeds |d+| = " + std::to_string(d_plus.size()));
  require(top <= d_minus.size(), ErrorKind::Config,
          "N*Z*beta = " + std::to_string(top) + " exceeds |d-| = " + std::to_string(d_minus.size()));

  auto mean = [](std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  std::vector<double> plus(d_plus.begin(), d_plus.end());
  std::vector<double> minus(d_minus.begin(), d_minus.end());
  std::partial_sort(plus.begin(), plus.begin() + static_cast<std::ptrdiff_t>(beta), plus.end());
  std::partial_sort(minus.begin(), minus.begin() + static_cast<std::ptrdiff_t>(top), minus.end(),
                    std::greater<>());
  const double target_plus = mean(std::span<const double>(plus.data(), beta));
  const double target_minus = mean(std::span<const double>(minus.data(), top));
  const double gap_plus = mean(d_plus) - target_plus;
  const double gap_minus = mean(d_minus) - target_minus;

  SupervisedLoss out;
  out.value = gap_plus * gap_plus + gap_minus * gap_minus;
  out.d_plus_grad.assign(d_plus.size(), 2.0 * gap_plus / static_cast<double>(d_plus.size()));
  out.d_minus_grad.assign(d_minus.size(), 2.0 * gap_minus / static_cast<double>(d_minus.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(Corpus corpus, RepresentationConfig repr, int jobs)
    : corpus_(std::move(corpus)), repr_(std::move(repr)), jobs_(std::max(1, jobs)) {
  repr_.validate();
  require(!corpus_.empty(), ErrorKind::Argument, "empty corpus");
  const std::size_t J = corpus_.front().sequence.joints();
  for (const auto& s : corpus_) {
    require(s.sequence.joints() == J, ErrorKind::Layout,
            "all sequences must share one joint layout (" + s.id + ")");
  }
  grid_.resize(corpus_.size());
  center_.resize(corpus_.size());
  parallel_for(corpus_.size(), jobs_, [&](std::size_t i) {
    grid_[i] = encoder::prepare_blocks(corpus_[i].sequence, repr_.grid, repr_.view, repr_.blocks);
    center_[i] = grid_[i].center_view();
  });
}

std::size_t Workspace::joints() const { return corpus_.front().sequence.joints(); }

int mean_block_count(const Workspace& ws, std::span<const int> pool) {
  require(!pool.empty(), ErrorKind::Argument, "empty pool");
  double sum = 0.0;
  for (int i : pool) sum += ws.center_blocks(i).tau;
  return std::max(1, static_cast<int>(std::lround(sum / static_cast<double>(pool.size()))));
}

// ---------------------------------------------------------------------------
// Classifiers

int nearest_label(std::span<const double> distances, std::span<const int> labels) {
  require(!distances.empty() && distances.size() == labels.size(), ErrorKind::Argument,
          "need one label per support distance");
  std::size_t best = 0;
  for (std::size_t i = 1; i < distances.size(); ++i)
    if (distances[i] < distances[best]) best = i;
  return labels[best];
}

int classify_unsupervised(const coding::Code& query, std::span<const coding::Code> supports,
                          std::span<const int> labels, coding::CodeDistanceKind kind) {
  std::vector<double> d;
  d.reserve(supports.size());
  for (const auto& s : supports) d.push_back(coding::code_distance(query, s, kind));
  return nearest_label(d, labels);
}

int fuse_weighted(std::span<const double> d_sup, std::span<const double> d_code,
                  std::span<const int> labels, double rho) {
  require(d_sup.size() == d_code.size(), ErrorKind::Argument, "distance lists differ in length");
  require(rho >= 0.0 && rho <= 1.0, ErrorKind::Config, "rho must lie in [0, 1]");
  std::vector<double> fused(d_sup.size());
  for (std::size_t i = 0; i < fused.size(); ++i)
    fused[i] = rho * d_sup[i] + (1.0 - rho) * d_code[i];
  return nearest_label(fused, labels);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

bool uses_grid(alignment::Method m) {
  return m == alignment::Method::JEANIE || m == alignment::Method::FVM;
}

struct EpisodeView {
  int query = 0;
  std::vector<int> supports;
  std::vector<int> labels;
};

std::vector<EpisodeView> draw_episodes(const Workspace& ws, std::span<const int> pool,
                                       const EvaluationConfig& eval, std::uint64_t seed) {
  const EpisodeSampler sampler(ws.corpus(), pool, eval.n_way, eval.z_shot);
  std::mt19937_64 rng(seed);
  std::vector<EpisodeView> out;
  out.reserve(static_cast<std::size_t>(eval.episodes));
  for (int e = 0; e < eval.episodes; ++e) {
    const Episode ep = sampler.sample(rng);
    std::vector<int> order(static_cast<std::size_t>(ep.n_way));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    EpisodeView v;
    v.query = ep.query;
    for (int n : order) {
      for (int z = 0; z < ep.z_shot; ++z) {
        v.supports.push_back(ep.support(n, z));
        v.labels.push_back(ep.classes[static_cast<std::size_t>(n)]);
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

double ci95(const std::vector<double>& per_seed, int episodes) {
  const double n = static_cast<double>(per_seed.size());
  const double mean = std::accumulate(per_seed.begin(), per_seed.end(), 0.0) / n;
  if (per_seed.size() > 1) {
    double var = 0.0;
    for (double a : per_seed) var += (a - mean) * (a - mean);
    var /= n - 1.0;
    return 1.96 * std::sqrt(var / n);
  }
  return 1.96 * std::sqrt(mean * (1.0 - mean) / episodes);
}

}  // namespace

double episode_distance_supervised(const Workspace& ws, int query, int support,
                                   const encoder::LinearBlockEncoder& enc,
                                   const alignment::AlignerConfig& cfg) {
  const auto& qs = uses_grid(cfg.method) ? ws.grid_blocks(query) : ws.center_blocks(query);
  return alignment::align(encoder::encode_blocks(qs, enc),
                          encoder::encode_blocks(ws.center_blocks(support), enc), cfg);
}

std::vector<EvaluationResult> evaluate_many(const Workspace& ws, std::span<const int> pool,
                                            const Model& model, const FsarConfig& cfg,
                                            std::span<const EvaluationConfig> evals) {
  bool need_sup = false;
  bool need_codes = false;
  for (const auto& e : evals) {
    e.validate();
    need_sup = need_sup || e.classifier != ClassifierKind::Unsupervised;
    need_codes = need_codes || e.classifier != ClassifierKind::Supervised;
  }
  require(!need_codes || model.dictionary.has_value(), ErrorKind::CheckpointMismatch,
          "unsupervised and fused classifiers need a trained dictionary");

  std::vector<std::vector<std::vector<EpisodeView>>> streams;  // eval x seed x episode
  std::set<std::pair<int, int>> pairs;
  std::set<int> coded;
  for (const auto& e : evals) {
    auto& per_seed = streams.emplace_back();
    for (auto seed : e.seeds) {
      per_seed.push_back(draw_episodes(ws, pool, e, seed));
      for (const auto& v : per_seed.back()) {
        for (int s : v.supports) {
          if (e.classifier != ClassifierKind::Unsupervised) pairs.insert({v.query, s});
          if (e.classifier != ClassifierKind::Supervised) {
            coded.insert(v.query);
            coded.insert(s);
          }
        }
      }
    }
  }

  const auto& aligner = cfg.supervised.aligner;
  std::map<int, encoder::FeatureMap> query_maps;
  std::map<int, encoder::FeatureMap> support_maps;
  if (need_sup) {
    for (const auto& [q, s] : pairs) {
      query_maps.try_emplace(q);
      support_maps.try_emplace(s);
    }
    std::vector<std::pair<const int, encoder::FeatureMap>*> slots;
    for (auto& kv : query_maps) slots.push_back(&kv);
    parallel_for(slots.size(), ws.jobs(), [&](std::size_t i) {
      const int q = slots[i]->first;
      slots[i]->second = encoder::encode_blocks(
          uses_grid(aligner.method) ? ws.grid_blocks(q) : ws.center_blocks(q), model.encoder);
    });
    slots.clear();
    for (auto& kv : support_maps) slots.push_back(&kv);
    parallel_for(slots.size(), ws.jobs(), [&](std::size_t i) {
      slots[i]->second = encoder::encode_blocks(ws.center_blocks(slots[i]->first), model.encoder);
    });
  }
  std::vector<std::pair<int, int>> pair_list(pairs.begin(), pairs.end());
  std::vector<double> pair_dist(pair_list.size());
  parallel_for(pair_list.size(), ws.jobs(), [&](std::size_t i) {
    pair_dist[i] = alignment::align(query_maps.at(pair_list[i].first),
                                    support_maps.at(pair_list[i].second), aligner);
  });
  std::map<std::pair<int, int>, double> sup_dist;
  for (std::size_t i = 0; i < pair_list.size(); ++i) sup_dist[pair_list[i]] = pair_dist[i];

  std::vector<int> coded_list(coded.begin(), coded.end());
  std::vector<coding::Code> code_list(coded_list.size());
  if (need_codes) {
    parallel_for(coded_list.size(), ws.jobs(), [&](std::size_t i) {
      const auto psi = encoder::encode_blocks(ws.grid_blocks(coded_list[i]), model.unsup_encoder);
      code_list[i] = coding::encode(psi, *model.dictionary, cfg.unsupervised.coder);
    });
  }
  std::map<int, const coding::Code*> codes;
  for (std::size_t i = 0; i < coded_list.size(); ++i) codes[coded_list[i]] = &code_list[i];

  std::vector<EvaluationResult> results;
  for (std::size_t k = 0; k < evals.size(); ++k) {
    const auto& e = evals[k];
    EvaluationResult r;
    r.episodes = e.episodes;
    for (const auto& episodes : streams[k]) {
      int correct = 0;
      for (const auto& v : episodes) {
        const int truth = ws.sample(v.query).label;
        std::vector<double> ds;
        std::vector<double> dc;
        for (int s : v.supports) {
          if (e.classifier != ClassifierKind::Unsupervised) ds.push_back(sup_dist.at({v.query, s}));
          if (e.classifier != ClassifierKind::Supervised)
            dc.push_back(coding::code_distance(*codes.at(v.query), *codes.at(s), e.code_distance));
        }
        int predicted = 0;
        switch (e.classifier) {
          case ClassifierKind::Supervised: predicted = nearest_label(ds, v.labels); break;
          case ClassifierKind::Unsupervised: predicted = nearest_label(dc, v.labels); break;
          case ClassifierKind::Fused: predicted = fuse_weighted(ds, dc, v.labels, e.rho); break;
        }
        if (predicted == truth) ++correct;
      }
      r.per_seed.push_back(static_cast<double>(correct) / e.episodes);
    }
    r.accuracy = std::accumulate(r.per_seed.begin(), r.per_seed.end(), 0.0) /
                 static_cast<double>(r.per_seed.size());
    r.ci95 = ci95(r.per_seed, e.episodes);
    results.push_back(std::move(r));
  }
  return results;
}

EvaluationResult evaluate(const Workspace& ws, std::span<const int> pool, const Model& model,
                          const FsarConfig& cfg, const EvaluationConfig& eval) {
  return evaluate_many(ws, pool, model, cfg, std::span<const EvaluationConfig>(&eval, 1)).front();
}

}  // namespace jeanie::fsar
