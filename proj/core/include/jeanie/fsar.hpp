#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jeanie/alignment.hpp"
#include "jeanie/coding.hpp"
#include "jeanie/encoder.hpp"
#include "jeanie/geometry.hpp"
#include "jeanie/skeleton.hpp"

namespace jeanie::fsar {

struct LabeledSequence {
  SkeletonSequence sequence;
  int label = 0;
  std::string id;
};

using Corpus = std::vector<LabeledSequence>;

/// Parametric multi-view toy corpus. Each class family mixes a few harmonic
/// joint trajectories drawn from a shared bank of primitives. Classes come in
/// twins performing one family at headings 90 degrees apart, so telling twins
/// apart needs viewpoint handling. Samples differ by amplitude, phase, speed
/// warp, two random distractor harmonics, noise, a random global yaw/pitch
/// about the hip and a slow yaw drift over time.
struct SyntheticConfig {
  int classes = 10;
  int samples_per_class = 20;
  int joints = 10;
  int primitives = 8;  // size of the shared bank
  int primitives_per_class = 3;
  int min_frames = 36;
  int max_frames = 44;
  double yaw_range_deg = 45.0;    // global yaw ~ U(-r, r)
  double pitch_range_deg = 15.0;  // global pitch ~ U(-r, r)
  double yaw_drift_deg = 30.0;    // yaw change over the sequence ~ U(-r, r)
  double amplitude_jitter = 0.15;
  double distractor_amplitude = 0.2;  // peak amplitude of the per-sample distractors
  double speed_warp = 0.2;
  double noise = 0.02;
  std::uint64_t seed = 7;

  void validate() const;
};

Corpus make_synthetic_corpus(const SyntheticConfig& cfg);

/// Per class, the first `train_per_class` samples (in corpus order) go to
/// training and the rest to testing.
struct Split {
  std::vector<int> train;
  std::vector<int> test;
};
Split split_per_class(const Corpus& corpus, int train_per_class);
/// Labels below `train_classes` go to training, the rest to testing, so test
/// episodes only contain classes never seen in training.
Split split_by_class(const Corpus& corpus, int train_classes);

/// One query and N x Z supports stored group-major; group 0 shares the
/// query's class.
struct Episode {
  int query = 0;
  std::vector<int> supports;
  std::vector<int> classes;  // label of each support group
  int n_way = 0;
  int z_shot = 0;

  int support(int n, int z) const { return supports[static_cast<std::size_t>(n * z_shot + z)]; }
};

/// Draw order per episode: query class, the N-1 other classes (without
/// replacement), Z+1 distinct samples of the query class (the first is the
/// query), then Z samples of each other class.
class EpisodeSampler {
 public:
  EpisodeSampler(const Corpus& corpus, std::span<const int> pool, int n_way, int z_shot);

  Episode sample(std::mt19937_64& rng) const;
  std::vector<Episode> sample_batch(int batch, std::mt19937_64& rng) const;

 private:
  std::vector<int> labels_;                    // distinct labels in the pool
  std::vector<std::vector<int>> members_;      // pool indices per label
  std::vector<int> query_classes_;             // label slots with >= Z+1 members
  int n_way_;
  int z_shot_;
};

/// Throws unless the episode satisfies the class-layout invariant.
void check_episode(const Episode& ep, const Corpus& corpus);

struct SupervisedLossConfig {
  int beta = 1;

  void validate() const;
};

struct SupervisedLoss {
  double value = 0.0;
  std::vector<double> d_plus_grad;
  std::vector<double> d_minus_grad;
};

/// (mean d+ - {mean of the beta smallest d+})^2 + (mean d- - {mean of the N Z beta
/// largest d-})^2, with the braced targets held constant. `nz` is N * Z.
SupervisedLoss supervised_loss(std::span<const double> d_plus, std::span<const double> d_minus,
                               int nz, const SupervisedLossConfig& cfg);

/// Everything the encoder sees: viewpoint grid, block split and feature width.
struct RepresentationConfig {
  // Seven 15-degree steps per axis, i.e. shifts within [-45, 45] degrees.
  geometry::CameraShiftGrid grid{3, 3};
  geometry::ViewOptions view;
  encoder::BlockSplitConfig blocks;
  int d_prime = 32;

  void validate() const;
};

/// Corpus plus the block stacks of every sample, built once. The grid stack
/// feeds queries (and every sample in unsupervised mode); the centre stack is
/// the untransformed single view used for supervised supports.
class Workspace {
 public:
  Workspace(Corpus corpus, RepresentationConfig repr, int jobs = 1);

  const Corpus& corpus() const { return corpus_; }
  int size() const { return static_cast<int>(corpus_.size()); }
  const LabeledSequence& sample(int i) const { return corpus_[static_cast<std::size_t>(i)]; }
  const encoder::BlockStack& grid_blocks(int i) const { return grid_[static_cast<std::size_t>(i)]; }
  const encoder::BlockStack& center_blocks(int i) const {
    return center_[static_cast<std::size_t>(i)];
  }
  const RepresentationConfig& representation() const { return repr_; }
  std::size_t joints() const;
  int jobs() const { return jobs_; }

 private:
  Corpus corpus_;
  RepresentationConfig repr_;
  int jobs_;
  std::vector<encoder::BlockStack> grid_;
  std::vector<encoder::BlockStack> center_;
};

struct EpisodeConfig {
  int n_way = 5;
  int z_shot = 1;
  int batch = 8;  // B episodes per iteration

  void validate() const;
};

struct SupervisedConfig {
  int iterations = 250;
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;  // applied to W only
  double momentum = 0.0;
  SupervisedLossConfig loss;
  // Squared-Euclidean base distances let a few far blocks dominate the loss
  // and training diverges; the bounded RBF-induced distance does not.
  alignment::AlignerConfig aligner{alignment::Method::JEANIE, {},
                                   {alignment::DistanceKind::RBFInduced, 0.5}};

  void validate() const;
};

struct UnsupervisedConfig {
  int iterations = 20;
  int dictionary_size = 32;
  int tau_star = 0;  // 0: mean block count of the training pool
  int dic_iter = 5;
  double omega_dl = 1e-2;
  double omega_en = 1e-4;
  double init_noise = 0.01;
  coding::CoderConfig coder;

  void validate() const;
};

enum class FusionStrategy { Weighted, FinetuneUnsup, MamlInspired, AdaptationBased };

struct FusionConfig {
  FusionStrategy strategy = FusionStrategy::MamlInspired;
  int iterations = 250;  // outer iterations of the MAML-inspired and adaptation loops
  double rho = 0.5;
  double lambda = 0.1;
  coding::CodeDistanceKind code_distance = coding::CodeDistanceKind::CSK;

  void validate() const;
};

struct FsarConfig {
  RepresentationConfig representation;
  EpisodeConfig episodes;
  SupervisedConfig supervised;
  UnsupervisedConfig unsupervised;
  FusionConfig fusion;

  /// Per-section checks plus the cross-field N Z beta <= B (N-1) Z.
  void validate() const;
};

/// One seed, independent named substreams so that each training phase sees
/// the same draws whatever phases ran before it.
class RngStreams {
 public:
  enum Stream : std::uint64_t { EncoderInit = 0, DictionaryInit = 1, Supervised = 2, Unsupervised = 3 };

  explicit RngStreams(std::uint64_t seed);
  std::mt19937_64& operator()(Stream s) { return engines_[static_cast<std::size_t>(s)]; }
  std::uint64_t seed() const { return seed_; }
  std::string serialize() const;

 private:
  std::uint64_t seed_;
  std::vector<std::mt19937_64> engines_;
};

struct Model {
  encoder::LinearBlockEncoder encoder;        // drives the supervised distance
  encoder::LinearBlockEncoder unsup_encoder;  // drives feature coding
  std::optional<coding::Dictionary> dictionary;
};

struct IterationMetrics {
  int iter = 0;
  double loss = 0.0;
  double acc = 0.0;  // nearest-neighbour accuracy on the iteration's own episodes
};

using MetricsSink = std::function<void(const IterationMetrics&)>;

/// Distances of one batch of episodes: d+ holds group 0, d- the rest, both in
/// (episode, group, shot) order.
struct BatchDistances {
  std::vector<double> d_plus;
  std::vector<double> d_minus;
  double accuracy = 0.0;
};

struct SupervisedStep {
  SupervisedLoss loss;
  BatchDistances distances;
  encoder::EncoderGradient gradient;  // of the loss, without weight decay
};

/// Forward (and backward when `with_gradient`) of the supervised loss on a
/// batch: queries use the viewpoint grid, supports the centre view.
SupervisedStep supervised_step(const Workspace& ws, std::span<const Episode> episodes,
                               const encoder::LinearBlockEncoder& enc, const SupervisedConfig& cfg,
                               bool with_gradient = true);

double episode_distance_supervised(const Workspace& ws, int query, int support,
                                   const encoder::LinearBlockEncoder& enc,
                                   const alignment::AlignerConfig& cfg);

/// Codes, dictionary and the LLC locality of one unsupervised batch. Codes are
/// (re)initialised whenever their column count does not match the batch.
struct CodingState {
  coding::Dictionary dictionary;
  Eigen::MatrixXd codes;     // k x N'
  Eigen::MatrixXd locality;  // k x N', LLC only; fixed for the batch
};

struct UnsupervisedReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
};

/// Sum over the batch of d^2(Psi_i, M alpha_i) + kappa Omega(alpha_i).
double unsupervised_objective(std::span<const encoder::FeatureMap> maps, const CodingState& state,
                              const coding::CoderConfig& coder, int jobs = 1);

/// One alternating iteration: A-step, dictionary step, encoder step. Every
/// step is guarded by step halving so the objective never increases.
UnsupervisedReport unsupervised_iteration(std::span<const encoder::BlockStack* const> stacks,
                                          encoder::LinearBlockEncoder& enc, CodingState& state,
                                          const UnsupervisedConfig& cfg, int jobs = 1);

/// Pool samples (with repetition) appearing in a batch: each query followed by
/// its supports, N' = B (N Z + 1) in total.
std::vector<int> batch_samples(std::span<const Episode> episodes);

/// Dictionary of pseudo-sequences cut from centre-view maps of the pool.
coding::Dictionary initial_dictionary(const Workspace& ws, std::span<const int> pool,
                                      const encoder::LinearBlockEncoder& enc,
                                      const UnsupervisedConfig& cfg, std::mt19937_64& rng);

int mean_block_count(const Workspace& ws, std::span<const int> pool);

/// Training entry points. Each starts from `init` when given, otherwise from a
/// random encoder drawn from the EncoderInit stream.
Model train_supervised(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                       RngStreams& rng, const MetricsSink& sink = {},
                       std::optional<encoder::LinearBlockEncoder> init = std::nullopt);
Model train_unsupervised(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                         RngStreams& rng, const MetricsSink& sink = {},
                         std::optional<encoder::LinearBlockEncoder> init = std::nullopt);
/// Unsupervised training, then supervised finetuning of a copy; the model keeps
/// both encoders.
Model train_finetune_unsup(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                           RngStreams& rng, const MetricsSink& sink = {});
/// Independent supervised and unsupervised models, combined only at test time.
Model train_weighted_fusion(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                            RngStreams& rng, const MetricsSink& sink = {});
Model train_maml_fusion(const Workspace& ws, std::span<const int> pool, const FsarConfig& cfg,
                        RngStreams& rng, const MetricsSink& sink = {});

struct AdaptationReport {
  double align_loss = 0.0;  // L_align of the last iteration
};
Model train_adaptation_fusion(const Workspace& ws, std::span<const int> pool,
                              const FsarConfig& cfg, RngStreams& rng,
                              const MetricsSink& sink = {}, AdaptationReport* report = nullptr);

/// Single iterations, exposed for tests. `velocity` is the momentum buffer
/// over [W | b]; an empty matrix starts it at zero.
SupervisedStep supervised_iteration(const Workspace& ws, std::span<const Episode> episodes,
                                    encoder::LinearBlockEncoder& enc, Eigen::MatrixXd& velocity,
                                    const SupervisedConfig& cfg);
SupervisedStep maml_iteration(const Workspace& ws, std::span<const Episode> episodes,
                              encoder::LinearBlockEncoder& enc, coding::Dictionary& dict,
                              Eigen::MatrixXd& velocity, const FsarConfig& cfg);
struct AdaptationStep {
  SupervisedStep supervised;
  double align_loss = 0.0;
};
/// With `update_copy` false the unsupervised side-track is skipped, so the copy
/// keeps the current parameters.
AdaptationStep adaptation_iteration(const Workspace& ws, std::span<const Episode> episodes,
                                    encoder::LinearBlockEncoder& enc, coding::Dictionary& dict,
                                    Eigen::MatrixXd& velocity, const FsarConfig& cfg,
                                    bool update_copy = true);

/// Nearest support; ties go to the lowest index.
int nearest_label(std::span<const double> distances, std::span<const int> labels);

int classify_unsupervised(const coding::Code& query, std::span<const coding::Code> supports,
                          std::span<const int> labels, coding::CodeDistanceKind kind);

/// Per support rho * d_sup + (1 - rho) * d_code, then nearest.
int fuse_weighted(std::span<const double> d_sup, std::span<const double> d_code,
                  std::span<const int> labels, double rho);

enum class ClassifierKind { Supervised, Unsupervised, Fused };

struct EvaluationConfig {
  int episodes = 500;
  int n_way = 5;
  int z_shot = 1;
  ClassifierKind classifier = ClassifierKind::Supervised;
  double rho = 0.5;
  coding::CodeDistanceKind code_distance = coding::CodeDistanceKind::CSK;
  std::vector<std::uint64_t> seeds{1};

  void validate() const;
};

struct EvaluationResult {
  double accuracy = 0.0;  // mean over seeds
  double ci95 = 0.0;      // half-width
  std::vector<double> per_seed;
  int episodes = 0;       // per seed
};

/// N-way Z-shot accuracy over the test pool. Support groups are shuffled per
/// episode before classification so tie-breaking cannot favour the true class.
EvaluationResult evaluate(const Workspace& ws, std::span<const int> pool, const Model& model,
                          const FsarConfig& cfg, const EvaluationConfig& eval);

/// Several classifiers over the same episode streams, sharing the cached
/// distances and codes.
std::vector<EvaluationResult> evaluate_many(const Workspace& ws, std::span<const int> pool,
                                            const Model& model, const FsarConfig& cfg,
                                            std::span<const EvaluationConfig> evals);

}  // namespace jeanie::fsar
