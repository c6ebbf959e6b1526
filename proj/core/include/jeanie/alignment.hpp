#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "jeanie/encoder.hpp"

namespace jeanie::alignment {

/// gamma is the smoothing temperature; `hard` switches to the exact minimum.
struct SmoothMinConfig {
  double gamma = 0.1;
  bool hard = false;

  void validate() const;
};

/// -gamma log sum exp(-v_i / gamma), evaluated around the minimum so it never
/// overflows. Infinite entries are treated as absent. Throws on empty input.
double softmin(std::span<const double> values, const SmoothMinConfig& cfg);

enum class DistanceKind { SquaredEuclidean, RBFInduced };

struct BaseDistance {
  DistanceKind kind = DistanceKind::SquaredEuclidean;
  double sigma = 1.0;

  void validate() const;
  /// ||a-b||^2, or 2 - 2 exp(-||a-b||^2 / (2 sigma^2)) for the RBF-induced kind.
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) const;
  /// Derivative with respect to `a`; the derivative with respect to `b` is its negation.
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b) const;
};

/// K x K' x tau x tau' base distances.
class DistanceTensor {
 public:
  DistanceTensor() = default;
  DistanceTensor(int azimuth_cells, int altitude_cells, int query_blocks, int support_blocks,
                 double fill = 0.0);
  static DistanceTensor from_matrix(const Eigen::MatrixXd& D);

  int azimuth_cells() const { return k_; }
  int altitude_cells() const { return k_prime_; }
  int views() const { return k_ * k_prime_; }
  int query_blocks() const { return tau_; }
  int support_blocks() const { return tau_prime_; }

  double& operator()(int k, int kp, int t, int tp) { return values_[index(k, kp, t, tp)]; }
  double operator()(int k, int kp, int t, int tp) const { return values_[index(k, kp, t, tp)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// tau x tau' matrix of one fixed viewpoint.
  Eigen::MatrixXd view_slice(int k, int kp) const;

  /// Checks entries are finite and nonnegative.
  void validate() const;

 private:
  std::size_t index(int k, int kp, int t, int tp) const {
    return static_cast<std::size_t>(((k * k_prime_ + kp) * tau_ + t) * tau_prime_ + tp);
  }

  int k_ = 0;
  int k_prime_ = 0;
  int tau_ = 0;
  int tau_prime_ = 0;
  std::vector<double> values_;
};

/// Entry (k, k', m, n) = d_base(psi_{k,k',m}, psi'_n). The support is used as a
/// single view; a support carrying a viewpoint grid contributes its centre view.
DistanceTensor base_distance_tensor(const encoder::FeatureMap& query,
                                    const encoder::FeatureMap& support, const BaseDistance& d);

struct FeatureGradients {
  Eigen::MatrixXd query;    // shaped like query.values()
  Eigen::MatrixXd support;  // shaped like support.values()
};

FeatureGradients base_distance_backward(const encoder::FeatureMap& query,
                                        const encoder::FeatureMap& support, const BaseDistance& d,
                                        const DistanceTensor& upstream);

struct JeanieConfig {
  SmoothMinConfig smooth;
  int iota = 2;  // max viewpoint-index change per axis per step

  void validate() const;
};

struct PathNode {
  int k = 0;
  int k_prime = 0;
  int t = 0;
  int t_prime = 0;
  double cell_cost = 0.0;
  double cumulative = 0.0;
};

struct AlignmentResult {
  double distance = 0.0;
  std::optional<std::vector<PathNode>> path;  // hard mode only
  std::optional<DistanceTensor> grad;         // d distance / d D when requested
};

AlignmentResult soft_dtw(const Eigen::MatrixXd& D, const SmoothMinConfig& cfg);
Eigen::MatrixXd soft_dtw_backward(const Eigen::MatrixXd& D, const SmoothMinConfig& cfg);

AlignmentResult jeanie(const DistanceTensor& D, const JeanieConfig& cfg);
/// Forward pass plus d distance / d D. Hard mode yields the indicator of the
/// optimal path and throws an ambiguity error if that path is not unique.
AlignmentResult jeanie_with_gradient(const DistanceTensor& D, const JeanieConfig& cfg);
DistanceTensor jeanie_backward(const DistanceTensor& D, const JeanieConfig& cfg);

/// Viewpoints collapsed per (t, t') by softmin, then soft-DTW over time.
AlignmentResult fvm(const DistanceTensor& D, const SmoothMinConfig& cfg);
AlignmentResult fvm(const encoder::FeatureMap& query, const encoder::FeatureMap& support,
                    const BaseDistance& d, const SmoothMinConfig& cfg);
DistanceTensor fvm_backward(const DistanceTensor& D, const SmoothMinConfig& cfg);

/// Minimum over viewpoints of the single-view soft-DTW distances.
double min_fixed_view_dtw(const DistanceTensor& D, const SmoothMinConfig& cfg);

/// Enumerates every admissible path (test oracle). Throws an oracle-scope
/// error once more than `max_paths` paths have been visited.
double brute_force_alignment(const DistanceTensor& D, const JeanieConfig& cfg,
                             std::size_t max_paths = 1'000'000);

/// CSV rows: k,k_prime,t,t_prime,cell_cost,cumulative.
void write_path_csv(std::span<const PathNode> path, std::ostream& out);

enum class Method { SoftDTW, FVM, JEANIE, Euclidean };

/// Distance between encoded sequences. The support is always single-view.
/// SoftDTW and Euclidean use the query's centre view; FVM and JEANIE use its
/// full viewpoint grid. Euclidean sums d_base along the diagonal and needs
/// tau == tau'.
struct AlignerConfig {
  Method method = Method::JEANIE;
  JeanieConfig jeanie;
  BaseDistance base;

  void validate() const;
};

struct PairGradient {
  double distance = 0.0;
  FeatureGradients features;
};

double align(const encoder::FeatureMap& query, const encoder::FeatureMap& support,
             const AlignerConfig& cfg);
PairGradient align_with_gradient(const encoder::FeatureMap& query,
                                 const encoder::FeatureMap& support, const AlignerConfig& cfg);

}  // namespace jeanie::alignment
