#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jeanie/geometry.hpp"
#include "jeanie/skeleton.hpp"

namespace jeanie::encoder {

struct BlockSplitConfig {
  int block_length = 8;  // M
  int stride = 5;        // S

  void validate() const;
  /// floor((T - M) / S) + 1; throws if T < M.
  int block_count(std::size_t frames) const;
};

/// M consecutive frames, vectorised frame-major (frame, joint, xyz).
struct TemporalBlock {
  std::size_t joints = 0;
  std::size_t frames = 0;
  Eigen::VectorXd values;
};

std::vector<TemporalBlock> split_blocks(const SkeletonSequence& seq, const BlockSplitConfig& cfg);

/// d' x K x K' x tau feature map. Column ((k * K' + k') * tau + t) of `values`
/// holds the feature of block t seen from viewpoint (k, k').
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(Eigen::MatrixXd values, int azimuth_cells, int altitude_cells, int blocks);

  int dim() const { return static_cast<int>(values_.rows()); }
  int azimuth_cells() const { return k_; }
  int altitude_cells() const { return k_prime_; }
  int views() const { return k_ * k_prime_; }
  int blocks() const { return tau_; }

  static int column(int k, int kp, int t, int altitude_cells, int blocks) {
    return (k * altitude_cells + kp) * blocks + t;
  }
  auto feature(int k, int kp, int t) const { return values_.col(column(k, kp, t, k_prime_, tau_)); }

  /// Single-view map holding the centre viewpoint (identity view).
  FeatureMap center_view() const;

  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { return values_; }

 private:
  Eigen::MatrixXd values_;
  int k_ = 1;
  int k_prime_ = 1;
  int tau_ = 0;
};

/// Stand-in for the block encoding network: f(X) = W vec(X) + b.
class LinearBlockEncoder {
 public:
  LinearBlockEncoder() = default;
  LinearBlockEncoder(Eigen::MatrixXd weights, Eigen::VectorXd bias, std::size_t joints,
                     std::size_t block_length);

  /// W ~ N(0, 1/sqrt(3 J M)) i.i.d., b = 0.
  static LinearBlockEncoder random(int d_prime, std::size_t joints, std::size_t block_length,
                                   std::mt19937_64& rng);
  /// d' = 3 J M, W = I: features are the raw block coordinates.
  static LinearBlockEncoder identity(std::size_t joints, std::size_t block_length);

  int output_dim() const { return static_cast<int>(weights_.rows()); }
  int input_dim() const { return static_cast<int>(weights_.cols()); }
  std::size_t joints() const { return joints_; }
  std::size_t block_length() const { return block_length_; }

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }
  Eigen::MatrixXd& weights() { return weights_; }
  Eigen::VectorXd& bias() { return bias_; }

  Eigen::VectorXd encode(const TemporalBlock& block) const;

  bool operator==(const LinearBlockEncoder& other) const {
    return joints_ == other.joints_ && block_length_ == other.block_length_ &&
           weights_ == other.weights_ && bias_ == other.bias_;
  }

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  std::size_t joints_ = 0;
  std::size_t block_length_ = 0;
};

inline Eigen::VectorXd encode_block(const TemporalBlock& block, const LinearBlockEncoder& enc) {
  return enc.encode(block);
}

struct EncoderGradient {
  Eigen::MatrixXd d_weights;
  Eigen::VectorXd d_bias;

  static EncoderGradient zeros_like(const LinearBlockEncoder& enc);
  EncoderGradient& operator+=(const EncoderGradient& other);
};

struct BlockGradient {
  EncoderGradient params;
  Eigen::VectorXd d_block;
};

BlockGradient encoder_backward(const TemporalBlock& block, const LinearBlockEncoder& enc,
                               const Eigen::VectorXd& upstream);

/// All blocks of all views of one sequence, one vectorised block per column,
/// in FeatureMap column order. Depends only on the geometry and block split,
/// so training caches it per sample.
struct BlockStack {
  Eigen::MatrixXd blocks;
  int azimuth_cells = 1;
  int altitude_cells = 1;
  int tau = 0;

  int views() const { return azimuth_cells * altitude_cells; }
  /// The identity-view blocks (grid centre).
  BlockStack center_view() const;
};

BlockStack prepare_blocks(const SkeletonSequence& seq, const geometry::CameraShiftGrid& grid,
                          const geometry::ViewOptions& opts, const BlockSplitConfig& cfg);

FeatureMap encode_blocks(const BlockStack& stack, const LinearBlockEncoder& enc);

/// dW += G X^T and db += G 1 for feature gradient G (d' x columns).
void accumulate_gradient(const BlockStack& stack, const Eigen::MatrixXd& feature_grad,
                         EncoderGradient& grad);

FeatureMap encode_sequence(const SkeletonSequence& seq, const geometry::CameraShiftGrid& grid,
                           const geometry::ViewOptions& opts, const BlockSplitConfig& cfg,
                           const LinearBlockEncoder& enc);

/// JSON tensor file {"d_prime", "J", "M", "weights" (row-major), "bias"}.
void save_encoder(const LinearBlockEncoder& enc, const std::string& path);
LinearBlockEncoder load_encoder(const std::string& path);

}  // namespace jeanie::encoder
