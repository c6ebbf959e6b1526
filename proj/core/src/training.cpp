#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "jeanie/error.hpp"
#include "jeanie/fsar.hpp"
#include "jeanie/parallel.hpp"

namespace jeanie::fsar {

namespace {

constexpr int kMaxHalvings = 30;

bool uses_grid(alignment::Method m) {
  return m == alignment::Method::JEANIE || m == alignment::Method::FVM;
}

std::vector<encoder::FeatureMap> encode_all(std::span<const encoder::BlockStack* const> stacks,
                                            const encoder::LinearBlockEncoder& enc, int jobs) {
  std::vector<encoder::FeatureMap> maps(stacks.size());
  parallel_for(stacks.size(), jobs,
               [&](std::size_t i) { maps[i] = encoder::encode_blocks(*stacks[i], enc); });
  return maps;
}

encoder::LinearBlockEncoder fresh_encoder(const Workspace& ws, const FsarConfig& cfg,
                                          RngStreams& rng) {
  return encoder::LinearBlockEncoder::random(cfg.representation.d_prime, ws.joints(),
                                             static_cast<std::size_t>(cfg.representation.blocks.block_length),
                                             rng(RngStreams::EncoderInit));
}

/// SGD step with optional momentum over [W | b]; weight decay touches W only.
void apply_update(encoder::LinearBlockEncoder& enc, encoder::EncoderGradient grad,
                  Eigen::MatrixXd& velocity, const SupervisedConfig& cfg) {
  grad.d_weights += cfg.weight_decay * enc.weights();
  const Eigen::Index cols = enc.weights().cols();
  Eigen::MatrixXd g(enc.weights().rows(), cols + 1);
  g.leftCols(cols) = grad.d_weights;
  g.col(cols) = grad.d_bias;
  if (cfg.momentum > 0.0) {
    if (velocity.rows() != g.rows() || velocity.cols() != g.cols())
      velocity = Eigen::MatrixXd::Zero(g.rows(), g.cols());
    velocity = cfg.momentum * velocity + g;
    g = velocity;
  }
  enc.weights() -= cfg.learning_rate * g.leftCols(cols);
  enc.bias() -= cfg.learning_rate * g.col(cols);
}

void require_finite_loss(double loss, const BatchDistances& d, const char* where) {
  if (std::isfinite(loss)) return;
  std::ostringstream msg;
  msg << where << ": non-finite loss";
  auto range = [&](const std::vector<double>& v, const char* name) {
    if (v.empty()) return;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    msg << "; " << name << " in [" << *lo << ", " << *hi << "]";
  };
  range(d.d_plus, "d+");
  range(d.d_minus, "d-");
  msg << " (lower the learning rate)";
  fail(ErrorKind::Training, msg.str());
}

coding::Code closed_form_code(const Eigen::VectorXd& errors, const coding::CoderConfig& coder) {
  switch (coder.kind) {
    case coding::CoderKind::HA: return coding::encode_HA(errors);
    case coding::CoderKind::LcSA: return coding::encode_LcSA(errors, coder.sigma, coder.k_nn);
    default: return coding::soft_assignment(errors, coder.sigma);
  }
}

double code_accuracy(std::span<const Episode> episodes, const Eigen::MatrixXd& codes,
                     const Corpus& corpus) {
  int correct = 0;
  Eigen::Index col = 0;
  for (const auto& ep : episodes) {
    const Eigen::VectorXd q = codes.col(col);
    std::vector<coding::Code> supports;
    std::vector<int> labels;
    for (int n = 0; n < ep.n_way; ++n)
      for (int z = 0; z < ep.z_shot; ++z) {
        supports.push_back(codes.col(col + 1 + n * ep.z_shot + z));
        labels.push_back(ep.classes[static_cast<std::size_t>(n)]);
      }
    if (classify_unsupervised(q, supports, labels, coding::CodeDistanceKind::L2) ==
        corpus[static_cast<std::size_t>(ep.query)].label)
      ++correct;
    col += 1 + ep.n_way * ep.z_shot;
  }
  return episodes.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(episodes.size());
}

std::vector<const encoder::BlockStack*> grid_stacks(const Workspace& ws,
                                                    std::span<const Episode> episodes) {
  std::vector<const encoder::BlockStack*> out;
  for (int i : batch_samples(episodes)) out.push_back(&ws.grid_blocks(i));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Supervised

SupervisedStep supervised_step(const Workspace& ws, std::span<const Episode> episodes,
                               const encoder::LinearBlockEncoder& enc, const SupervisedConfig& cfg,
                               bool with_gradient) {
  require(!episodes.empty(), ErrorKind::Argument, "empty episode batch");
  const bool grid = uses_grid(cfg.aligner.method);
  const int jobs = ws.jobs();
  const int N = episodes.front().n_way;
  const int Z = episodes.front().z_shot;
  for (const auto& ep : episodes) {
    check_episode(ep, ws.corpus());
    require(ep.n_way == N && ep.z_shot == Z, ErrorKind::Shape, "episodes in a batch differ in N or Z");
  }

  auto query_stack = [&](int i) -> const encoder::BlockStack& {
    return grid ? ws.grid_blocks(i) : ws.center_blocks(i);
  };
  std::vector<encoder::FeatureMap> qmaps(episodes.size());
  parallel_for(episodes.size(), jobs, [&](std::size_t b) {
    qmaps[b] = encoder::encode_blocks(query_stack(episodes[b].query), enc);
  });
  std::map<int, std::size_t> support_slot;
  std::vector<int> support_ids;
  for (const auto& ep : episodes)
    for (int s : ep.supports)
      if (support_slot.try_emplace(s, support_ids.size()).second) support_ids.push_back(s);
  std::vector<encoder::FeatureMap> smaps(support_ids.size());
  parallel_for(support_ids.size(), jobs, [&](std::size_t i) {
    smaps[i] = encoder::encode_blocks(ws.center_blocks(support_ids[i]), enc);
  });

  const std::size_t per = static_cast<std::size_t>(N * Z);
  std::vector<alignment::PairGradient> pairs(episodes.size() * per);
  parallel_for(pairs.size(), jobs, [&](std::size_t p) {
    const std::size_t b = p / per;
    const auto& q = qmaps[b];
    const auto& s = smaps[support_slot.at(episodes[b].supports[p % per])];
    if (with_gradient) {
      pairs[p] = alignment::align_with_gradient(q, s, cfg.aligner);
    } else {
      pairs[p].distance = alignment::align(q, s, cfg.aligner);
    }
  });

  SupervisedStep out;
  int correct = 0;
  for (std::size_t b = 0; b < episodes.size(); ++b) {
    std::vector<double> d(per);
    std::vector<int> labels(per);
    for (std::size_t j = 0; j < per; ++j) {
      d[j] = pairs[b * per + j].distance;
      labels[j] = episodes[b].classes[j / static_cast<std::size_t>(Z)];
      (j < static_cast<std::size_t>(Z) ? out.distances.d_plus : out.distances.d_minus).push_back(d[j]);
    }
    if (nearest_label(d, labels) == ws.sample(episodes[b].query).label) ++correct;
  }
  out.distances.accuracy = static_cast<double>(correct) / static_cast<double>(episodes.size());
  out.loss = supervised_loss(out.distances.d_plus, out.distances.d_minus, N * Z, cfg.loss);
  if (!with_gradient) return out;

  std::vector<Eigen::MatrixXd> qgrad(episodes.size());
  std::vector<Eigen::MatrixXd> sgrad(support_ids.size());
  std::size_t ip = 0;
  std::size_t im = 0;
  for (std::size_t b = 0; b < episodes.size(); ++b) {
    for (std::size_t j = 0; j < per; ++j) {
      const double scale = j < static_cast<std::size_t>(Z) ? out.loss.d_plus_grad[ip++]
                                                           : out.loss.d_minus_grad[im++];
      const auto& g = pairs[b * per + j].features;
      if (qgrad[b].size() == 0) qgrad[b] = Eigen::MatrixXd::Zero(g.query.rows(), g.query.cols());
      qgrad[b] += scale * g.query;
      const std::size_t slot = support_slot.at(episodes[b].supports[j]);
      if (sgrad[slot].size() == 0)
        sgrad[slot] = Eigen::MatrixXd::Zero(g.support.rows(), g.support.cols());
      sgrad[slot] += scale * g.support;
    }
  }
  out.gradient = encoder::EncoderGradient::zeros_like(enc);
  for (std::size_t b = 0; b < episodes.size(); ++b)
    encoder::accumulate_gradient(query_stack(episodes[b].query), qgrad[b], out.gradient);
  for (std::size_t i = 0; i < support_ids.size(); ++i)
    encoder::accumulate_gradient(ws.center_blocks(support_ids[i]), sgrad[i], out.gradient);
  return out;
}

SupervisedStep supervised_iteration(const Workspace& ws, std::span<const Episode> episodes,
                                    encoder::LinearBlockEncoder& enc, Eigen::MatrixXd& velocity,
                                    const SupervisedConfig& cfg) {
  SupervisedStep step = supervised_step(ws, episodes, enc, cfg, true);
  require_finite_loss(step.loss.value, step.distances, "supervised iteration");
  apply_update(enc, step.gradient, velocity, cfg);
  return step;
}

Model train_supervised(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                       RngStreams& rng, const MetricsSink& sink,
                       std::optional<encoder::LinearBlockEncoder> init) {
  cfg.validate();
  encoder::LinearBlockEncoder enc = init ? std::move(*init) : fresh_encoder(ws, cfg, rng);
  const EpisodeSampler sampler(ws.corpus(), pool, cfg.episodes.n_way, cfg.episodes.z_shot);
  Eigen::MatrixXd velocity;
  for (int it = 1; it <= cfg.supervised.iterations; ++it) {
    const auto episodes = sampler.sample_batch(cfg.episodes.batch, rng(RngStreams::Supervised));
    const SupervisedStep step = supervised_iteration(ws, episodes, enc, velocity, cfg.supervised);
    if (sink) sink({it, step.loss.value, step.distances.accuracy});
  }
  return {enc, enc, std::nullopt};
}

// ---------------------------------------------------------------------------
// Unsupervised

double unsupervised_objective(std::span<const encoder::FeatureMap> maps, const CodingState& state,
                              const coding::CoderConfig& coder, int jobs) {
  double total = coding::batch_reconstruction_error(maps, state.dictionary, state.codes, coder, jobs);
  if (!coding::is_closed_form(coder.kind)) {
    const Eigen::VectorXd none;
    for (Eigen::Index i = 0; i < state.codes.cols(); ++i) {
      const bool llc = coder.kind == coding::CoderKind::LLC;
      total += coding::coder_penalty(state.codes.col(i), coder,
                                     llc ? Eigen::VectorXd(state.locality.col(i)) : none);
    }
  }
  return total;
}

UnsupervisedReport unsupervised_iteration(std::span<const encoder::BlockStack* const> stacks,
                                          encoder::LinearBlockEncoder& enc, CodingState& state,
                                          const UnsupervisedConfig& cfg, int jobs) {
  require(!stacks.empty(), ErrorKind::Argument, "empty unsupervised batch");
  const coding::CoderConfig& coder = cfg.coder;
  coder.validate(state.dictionary.size());
  const auto n = static_cast<Eigen::Index>(stacks.size());
  const int k = state.dictionary.size();
  std::vector<encoder::FeatureMap> maps = encode_all(stacks, enc, jobs);

  const bool fresh = state.codes.cols() != n || state.codes.rows() != k;
  if (fresh) {
    state.codes.resize(k, n);
    state.locality = Eigen::MatrixXd::Zero(k, n);
    parallel_for(stacks.size(), jobs, [&](std::size_t i) {
      const auto col = static_cast<Eigen::Index>(i);
      const Eigen::VectorXd errors = coding::atom_errors(maps[i], state.dictionary, coder);
      state.codes.col(col) = coding::is_closed_form(coder.kind)
                                 ? closed_form_code(errors, coder)
                                 : coding::soft_assignment(errors, coder.sigma);
      if (coder.kind == coding::CoderKind::LLC)
        state.locality.col(col) = coding::llc_locality(errors, coder.sigma);
    });
  }

  UnsupervisedReport report;
  report.loss_before = unsupervised_objective(maps, state, coder, jobs);
  require(std::isfinite(report.loss_before), ErrorKind::Training, "non-finite unsupervised loss");

  // A-step: M and F fixed. Fresh closed-form codes already sit at the target.
  if (coder.alpha_iter > 0 && !(fresh && coding::is_closed_form(coder.kind))) {
    parallel_for(stacks.size(), jobs, [&](std::size_t i) {
      const auto col = static_cast<Eigen::Index>(i);
      const coding::Code current = state.codes.col(col);
      if (!coding::is_closed_form(coder.kind)) {
        state.codes.col(col) = coding::refine_code(maps[i], state.dictionary, coder, current,
                                                   state.locality.col(col));
        return;
      }
      // Closed-form coders: move toward the closed-form code, halving the
      // step until the reconstruction error does not increase.
      const coding::Code target =
          closed_form_code(coding::atom_errors(maps[i], state.dictionary, coder), coder);
      const double base = coding::reconstruction_error(maps[i], state.dictionary, current, coder);
      double s = 1.0;
      for (int h = 0; h < 40; ++h, s *= 0.5) {
        const coding::Code candidate = current + s * (target - current);
        const double e = coding::reconstruction_error(maps[i], state.dictionary, candidate, coder);
        if (std::isfinite(e) && e <= base) {
          state.codes.col(col) = candidate;
          break;
        }
      }
    });
  }

  // Dictionary step: A and F fixed; the coder penalty is constant here.
  if (cfg.dic_iter > 0 && cfg.omega_dl > 0.0) {
    state.dictionary = coding::learn_dictionary(maps, state.codes, std::move(state.dictionary),
                                                cfg.dic_iter, cfg.omega_dl, coder, jobs);
  }

  // Encoder step: M and A fixed.
  if (cfg.omega_en > 0.0) {
    std::vector<encoder::EncoderGradient> parts(stacks.size());
    parallel_for(stacks.size(), jobs, [&](std::size_t i) {
      const auto g = coding::reconstruction_gradient(maps[i], state.dictionary,
                                                     state.codes.col(static_cast<Eigen::Index>(i)), coder);
      parts[i] = encoder::EncoderGradient::zeros_like(enc);
      encoder::accumulate_gradient(*stacks[i], g.d_features, parts[i]);
    });
    encoder::EncoderGradient grad = encoder::EncoderGradient::zeros_like(enc);
    for (const auto& p : parts) grad += p;
    const double current =
        coding::batch_reconstruction_error(maps, state.dictionary, state.codes, coder, jobs);
    double lr = cfg.omega_en;
    for (int h = 0; h < 40; ++h, lr *= 0.5) {
      encoder::LinearBlockEncoder candidate = enc;
      candidate.weights() -= lr * grad.d_weights;
      candidate.bias() -= lr * grad.d_bias;
      std::vector<encoder::FeatureMap> cmaps = encode_all(stacks, candidate, jobs);
      const double e =
          coding::batch_reconstruction_error(cmaps, state.dictionary, state.codes, coder, jobs);
      if (std::isfinite(e) && e <= current) {
        enc = std::move(candidate);
        maps = std::move(cmaps);
        break;
      }
    }
  }

  report.loss_after = unsupervised_objective(maps, state, coder, jobs);
  return report;
}

coding::Dictionary initial_dictionary(const Workspace& ws, std::span<const int> pool,
                                      const encoder::LinearBlockEncoder& enc,
                                      const UnsupervisedConfig& cfg, std::mt19937_64& rng) {
  const int tau_star = cfg.tau_star > 0 ? cfg.tau_star : mean_block_count(ws, pool);
  std::vector<encoder::FeatureMap> maps(pool.size());
  parallel_for(pool.size(), ws.jobs(), [&](std::size_t i) {
    maps[i] = encoder::encode_blocks(ws.center_blocks(pool[i]), enc);
  });
  return coding::Dictionary::from_samples(maps, cfg.dictionary_size, tau_star, cfg.init_noise, rng);
}

Model train_unsupervised(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                         RngStreams& rng, const MetricsSink& sink,
                         std::optional<encoder::LinearBlockEncoder> init) {
  cfg.validate();
  encoder::LinearBlockEncoder enc = init ? std::move(*init) : fresh_encoder(ws, cfg, rng);
  CodingState state{initial_dictionary(ws, pool, enc, cfg.unsupervised,
                                        rng(RngStreams::DictionaryInit)),
                    {}, {}};
  const EpisodeSampler sampler(ws.corpus(), pool, cfg.episodes.n_way, cfg.episodes.z_shot);
  for (int it = 1; it <= cfg.unsupervised.iterations; ++it) {
    const auto episodes = sampler.sample_batch(cfg.episodes.batch, rng(RngStreams::Unsupervised));
    const auto stacks = grid_stacks(ws, episodes);
    state.codes.resize(0, 0);
    const UnsupervisedReport r =
        unsupervised_iteration(stacks, enc, state, cfg.unsupervised, ws.jobs());
    if (sink) sink({it, r.loss_after, code_accuracy(episodes, state.codes, ws.corpus())});
  }
  return {enc, enc, std::move(state.dictionary)};
}

Model train_finetune_unsup(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                           RngStreams& rng, const MetricsSink& sink) {
  Model unsup = train_unsupervised(ws, pool, cfg, rng, sink);
  const int offset = cfg.unsupervised.iterations;
  MetricsSink shifted;
  if (sink) {
    shifted = [&](const IterationMetrics& m) { sink({m.iter + offset, m.loss, m.acc}); };
  }
  Model sup = train_supervised(ws, pool, cfg, rng, shifted, unsup.encoder);
  return {std::move(sup.encoder), std::move(unsup.unsup_encoder), std::move(unsup.dictionary)};
}

Model train_weighted_fusion(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                            RngStreams& rng, const MetricsSink& sink) {
  Model sup = train_supervised(ws, pool, cfg, rng, sink);
  const int offset = cfg.supervised.iterations;
  MetricsSink shifted;
  if (sink) {
    shifted = [&](const IterationMetrics& m) { sink({m.iter + offset, m.loss, m.acc}); };
  }
  Model unsup = train_unsupervised(ws, pool, cfg, rng, shifted);
  return {std::move(sup.encoder), std::move(unsup.unsup_encoder), std::move(unsup.dictionary)};
}

// ---------------------------------------------------------------------------
// Fusion

SupervisedStep maml_iteration(const Workspace& ws, std::span<const Episode> episodes,
                              encoder::LinearBlockEncoder& enc, coding::Dictionary& dict,
                              Eigen::MatrixXd& velocity, const FsarConfig& cfg) {
  const auto stacks = grid_stacks(ws, episodes);
  // Inner loop: unsupervised update of a copy of F (and of M).
  encoder::LinearBlockEncoder adapted = enc;
  CodingState state{dict, {}, {}};
  unsupervised_iteration(stacks, adapted, state, cfg.unsupervised, ws.jobs());
  dict = std::move(state.dictionary);
  // Outer loop: supervised gradient at the adapted parameters, applied to F
  // (first-order approximation).
  SupervisedStep step = supervised_step(ws, episodes, adapted, cfg.supervised, true);
  require_finite_loss(step.loss.value, step.distances, "MAML-inspired iteration");
  apply_update(enc, step.gradient, velocity, cfg.supervised);
  return step;
}

Model train_maml_fusion(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                        RngStreams& rng, const MetricsSink& sink) {
  cfg.validate();
  encoder::LinearBlockEncoder enc = fresh_encoder(ws, cfg, rng);
  coding::Dictionary dict =
      initial_dictionary(ws, pool, enc, cfg.unsupervised, rng(RngStreams::DictionaryInit));
  const EpisodeSampler sampler(ws.corpus(), pool, cfg.episodes.n_way, cfg.episodes.z_shot);
  Eigen::MatrixXd velocity;
  for (int it = 1; it <= cfg.fusion.iterations; ++it) {
    const auto episodes = sampler.sample_batch(cfg.episodes.batch, rng(RngStreams::Supervised));
    const SupervisedStep step = maml_iteration(ws, episodes, enc, dict, velocity, cfg);
    if (sink) sink({it, step.loss.value, step.distances.accuracy});
  }
  return {enc, enc, std::move(dict)};
}

AdaptationStep adaptation_iteration(const Workspace& ws, std::span<const Episode> episodes,
                                    encoder::LinearBlockEncoder& enc, coding::Dictionary& dict,
                                    Eigen::MatrixXd& velocity, const FsarConfig& cfg,
                                    bool update_copy) {
  const auto stacks = grid_stacks(ws, episodes);
  const int jobs = ws.jobs();
  const std::vector<encoder::FeatureMap> maps = encode_all(stacks, enc, jobs);
  encoder::LinearBlockEncoder copy = enc;
  if (update_copy) {
    CodingState state{dict, {}, {}};
    unsupervised_iteration(stacks, copy, state, cfg.unsupervised, jobs);
    dict = std::move(state.dictionary);
  }
  const std::vector<encoder::FeatureMap> adapted = encode_all(stacks, copy, jobs);

  // L_align = sum_i d^2(Psi_i, Psi_hat_i); the adapted maps are constants.
  const auto& aligner = cfg.supervised.aligner;
  std::vector<double> align_terms(stacks.size());
  std::vector<encoder::EncoderGradient> parts(stacks.size());
  parallel_for(stacks.size(), jobs, [&](std::size_t i) {
    parts[i] = encoder::EncoderGradient::zeros_like(enc);
    const double d = alignment::align(maps[i], adapted[i], aligner);
    align_terms[i] = d * d;
    if (d == 0.0 || cfg.fusion.lambda == 0.0) return;  // 2 d grad(d) vanishes
    const auto pg = alignment::align_with_gradient(maps[i], adapted[i], aligner);
    encoder::accumulate_gradient(*stacks[i], 2.0 * d * pg.features.query, parts[i]);
  });

  AdaptationStep out;
  out.align_loss = std::accumulate(align_terms.begin(), align_terms.end(), 0.0);
  out.supervised = supervised_step(ws, episodes, enc, cfg.supervised, true);
  const double total = out.supervised.loss.value + cfg.fusion.lambda * out.align_loss;
  require_finite_loss(total, out.supervised.distances, "adaptation iteration");
  encoder::EncoderGradient grad = out.supervised.gradient;
  if (cfg.fusion.lambda != 0.0) {
    for (const auto& p : parts) {
      grad.d_weights += cfg.fusion.lambda * p.d_weights;
      grad.d_bias += cfg.fusion.lambda * p.d_bias;
    }
  }
  // The alignment term can be steep once the copy has moved far, so the step
  // is halved until the objective on this batch does not increase.
  auto objective = [&](const encoder::LinearBlockEncoder& e) {
    double value = supervised_step(ws, episodes, e, cfg.supervised, false).loss.value;
    if (cfg.fusion.lambda == 0.0) return value;
    const std::vector<encoder::FeatureMap> m = encode_all(stacks, e, jobs);
    std::vector<double> terms(stacks.size());
    parallel_for(stacks.size(), jobs, [&](std::size_t i) {
      const double d = alignment::align(m[i], adapted[i], aligner);
      terms[i] = d * d;
    });
    return value + cfg.fusion.lambda * std::accumulate(terms.begin(), terms.end(), 0.0);
  };
  const encoder::LinearBlockEncoder start = enc;
  const Eigen::MatrixXd start_velocity = velocity;
  SupervisedConfig step_cfg = cfg.supervised;
  for (int halving = 0; halving <= kMaxHalvings; ++halving) {
    enc = start;
    velocity = start_velocity;
    apply_update(enc, grad, velocity, step_cfg);
    if (objective(enc) <= total) return out;
    step_cfg.learning_rate *= 0.5;
  }
  enc = start;
  velocity = start_velocity;
  return out;
}

Model train_adaptation_fusion(const Workspace& ws, std::span<const int> pool,
                              const FsarConfig& cfg, RngStreams& rng, const MetricsSink& sink,
                              AdaptationReport* report) {
  cfg.validate();
  encoder::LinearBlockEncoder enc = fresh_encoder(ws, cfg, rng);
  coding::Dictionary dict =
      initial_dictionary(ws, pool, enc, cfg.unsupervised, rng(RngStreams::DictionaryInit));
  const EpisodeSampler sampler(ws.corpus(), pool, cfg.episodes.n_way, cfg.episodes.z_shot);
  Eigen::MatrixXd velocity;
  for (int it = 1; it <= cfg.fusion.iterations; ++it) {
    const auto episodes = sampler.sample_batch(cfg.episodes.batch, rng(RngStreams::Supervised));
    const AdaptationStep step = adaptation_iteration(ws, episodes, enc, dict, velocity, cfg);
    if (report != nullptr) report->align_loss = step.align_loss;
    if (sink) {
      sink({it, step.supervised.loss.value + cfg.fusion.lambda * step.align_loss,
            step.supervised.distances.accuracy});
    }
  }
  return {enc, enc, std::move(dict)};
}

}  // namespace jeanie::fsar
