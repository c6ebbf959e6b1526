#include "jeanie/encoder.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "jeanie/error.hpp"

namespace jeanie::encoder {

void BlockSplitConfig::validate() const {
  require(block_length >= 1, ErrorKind::Config, "block length M must be >= 1");
  require(stride >= 1, ErrorKind::Config, "block stride S must be >= 1");
}

int BlockSplitConfig::block_count(std::size_t frames) const {
  validate();
  const auto M = static_cast<std::size_t>(block_length);
  require(frames >= M, ErrorKind::SequenceTooShort,
          "sequence of " + std::to_string(frames) + " frames is shorter than block length " +
              std::to_string(M));
  return static_cast<int>((frames - M) / static_cast<std::size_t>(stride)) + 1;
}

std::vector<TemporalBlock> split_blocks(const SkeletonSequence& seq, const BlockSplitConfig& cfg) {
  const int count = cfg.block_count(seq.frames());
  const std::size_t frame_width = seq.joints() * 3;
  const std::size_t M = static_cast<std::size_t>(cfg.block_length);
  std::vector<TemporalBlock> blocks;
  blocks.reserve(static_cast<std::size_t>(count));
  const auto values = seq.values();
  for (int i = 0; i < count; ++i) {
    const std::size_t start = static_cast<std::size_t>(i) * static_cast<std::size_t>(cfg.stride);
    TemporalBlock block{seq.joints(), M, Eigen::VectorXd(static_cast<Eigen::Index>(M * frame_width))};
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(start * frame_width), M * frame_width,
                block.values.data());
    blocks.push_back(std::move(block));
  }
  return blocks;
}

FeatureMap::FeatureMap(Eigen::MatrixXd values, int azimuth_cells, int altitude_cells, int blocks)
    : values_(std::move(values)), k_(azimuth_cells), k_prime_(altitude_cells), tau_(blocks) {
  require(values_.cols() == static_cast<Eigen::Index>(k_) * k_prime_ * tau_, ErrorKind::Shape,
          "feature map column count does not match K x K' x tau");
}

FeatureMap FeatureMap::center_view() const {
  if (views() == 1) return *this;
  const int k = k_ / 2;
  const int kp = k_prime_ / 2;
  const int first = column(k, kp, 0, k_prime_, tau_);
  return FeatureMap(values_.middleCols(first, tau_), 1, 1, tau_);
}

LinearBlockEncoder::LinearBlockEncoder(Eigen::MatrixXd weights, Eigen::VectorXd bias,
                                       std::size_t joints, std::size_t block_length)
    : weights_(std::move(weights)), bias_(std::move(bias)), joints_(joints),
      block_length_(block_length) {
  require(weights_.cols() == static_cast<Eigen::Index>(3 * joints_ * block_length_),
          ErrorKind::Encoder, "encoder weight columns must equal 3 J M");
  require(bias_.size() == weights_.rows(), ErrorKind::Encoder, "encoder bias length mismatch");
  require(weights_.allFinite() && bias_.allFinite(), ErrorKind::Encoder,
          "encoder parameters must be finite");
}

LinearBlockEncoder LinearBlockEncoder::random(int d_prime, std::size_t joints,
                                              std::size_t block_length, std::mt19937_64& rng) {
  require(d_prime >= 1, ErrorKind::Config, "feature dimension must be >= 1");
  const auto in = static_cast<Eigen::Index>(3 * joints * block_length);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
  Eigen::MatrixXd W(d_prime, in);
  // Column-major fill order is part of the seeded-determinism contract.
  for (Eigen::Index c = 0; c < W.cols(); ++c)
    for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = normal(rng);
  return LinearBlockEncoder(std::move(W), Eigen::VectorXd::Zero(d_prime), joints, block_length);
}

LinearBlockEncoder LinearBlockEncoder::identity(std::size_t joints, std::size_t block_length) {
  const auto in = static_cast<Eigen::Index>(3 * joints * block_length);
  return LinearBlockEncoder(Eigen::MatrixXd::Identity(in, in), Eigen::VectorXd::Zero(in), joints,
                            block_length);
}

Eigen::VectorXd LinearBlockEncoder::encode(const TemporalBlock& block) const {
  require(block.values.size() == weights_.cols(), ErrorKind::Encoder,
          "block size " + std::to_string(block.values.size()) + " does not match encoder input " +
              std::to_string(weights_.cols()));
  return weights_ * block.values + bias_;
}

EncoderGradient EncoderGradient::zeros_like(const LinearBlockEncoder& enc) {
  return {Eigen::MatrixXd::Zero(enc.weights().rows(), enc.weights().cols()),
          Eigen::VectorXd::Zero(enc.bias().size())};
}

EncoderGradient& EncoderGradient::operator+=(const EncoderGradient& other) {
  d_weights += other.d_weights;
  d_bias += other.d_bias;
  return *this;
}

BlockGradient encoder_backward(const TemporalBlock& block, const LinearBlockEncoder& enc,
                               const Eigen::VectorXd& upstream) {
  require(block.values.size() == enc.weights().cols() && upstream.size() == enc.weights().rows(),
          ErrorKind::Encoder, "encoder backward shape mismatch");
  BlockGradient g;
  g.params.d_weights = upstream * block.values.transpose();
  g.params.d_bias = upstream;
  g.d_block = enc.weights().transpose() * upstream;
  return g;
}

BlockStack BlockStack::center_view() const {
  if (views() == 1) return *this;
  const int first = FeatureMap::column(azimuth_cells / 2, altitude_cells / 2, 0, altitude_cells, tau);
  return BlockStack{blocks.middleCols(first, tau), 1, 1, tau};
}

BlockStack prepare_blocks(const SkeletonSequence& seq, const geometry::CameraShiftGrid& grid,
                          const geometry::ViewOptions& opts, const BlockSplitConfig& cfg) {
  const int tau = cfg.block_count(seq.frames());
  const auto views = geometry::make_view_grid(seq, grid, opts);
  const auto input = static_cast<Eigen::Index>(seq.joints() * 3 * cfg.block_length);
  BlockStack stack{Eigen::MatrixXd(input, views.azimuth_cells() * views.altitude_cells() * tau),
                   views.azimuth_cells(), views.altitude_cells(), tau};
  for (int k = 0; k < stack.azimuth_cells; ++k) {
    for (int kp = 0; kp < stack.altitude_cells; ++kp) {
      const auto blocks = split_blocks(views.at(k, kp), cfg);
      for (int t = 0; t < tau; ++t) {
        stack.blocks.col(FeatureMap::column(k, kp, t, stack.altitude_cells, tau)) =
            blocks[static_cast<std::size_t>(t)].values;
      }
    }
  }
  return stack;
}

FeatureMap encode_blocks(const BlockStack& stack, const LinearBlockEncoder& enc) {
  require(stack.blocks.rows() == enc.weights().cols(), ErrorKind::Encoder,
          "block stack does not match encoder input size");
  Eigen::MatrixXd values = enc.weights() * stack.blocks;
  values.colwise() += enc.bias();
  return FeatureMap(std::move(values), stack.azimuth_cells, stack.altitude_cells, stack.tau);
}

void accumulate_gradient(const BlockStack& stack, const Eigen::MatrixXd& feature_grad,
                         EncoderGradient& grad) {
  require(feature_grad.cols() == stack.blocks.cols(), ErrorKind::Shape,
          "feature gradient does not match block stack");
  grad.d_weights.noalias() += feature_grad * stack.blocks.transpose();
  grad.d_bias += feature_grad.rowwise().sum();
}

FeatureMap encode_sequence(const SkeletonSequence& seq, const geometry::CameraShiftGrid& grid,
                           const geometry::ViewOptions& opts, const BlockSplitConfig& cfg,
                           const LinearBlockEncoder& enc) {
  return encode_blocks(prepare_blocks(seq, grid, opts, cfg), enc);
}

void save_encoder(const LinearBlockEncoder& enc, const std::string& path) {
  nlohmann::json doc;
  doc["d_prime"] = enc.output_dim();
  doc["J"] = enc.joints();
  doc["M"] = enc.block_length();
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(enc.weights().size()));
  for (Eigen::Index r = 0; r < enc.weights().rows(); ++r)
    for (Eigen::Index c = 0; c < enc.weights().cols(); ++c) w.push_back(enc.weights()(r, c));
  doc["weights"] = std::move(w);
  doc["bias"] = std::vector<double>(enc.bias().data(), enc.bias().data() + enc.bias().size());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write encoder file " + path);
  out << doc.dump() << '\n';
}

LinearBlockEncoder load_encoder(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read encoder file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
    const int d = doc.at("d_prime").get<int>();
    const auto J = doc.at("J").get<std::size_t>();
    const auto M = doc.at("M").get<std::size_t>();
    const auto w = doc.at("weights").get<std::vector<double>>();
    const auto b = doc.at("bias").get<std::vector<double>>();
    const auto in_dim = static_cast<Eigen::Index>(3 * J * M);
    require(w.size() == static_cast<std::size_t>(d * in_dim) && b.size() == static_cast<std::size_t>(d),
            ErrorKind::Parse, "encoder tensor payload does not match header {d_prime, J, M}");
    Eigen::MatrixXd W(d, in_dim);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < in_dim; ++c) W(r, c) = w[static_cast<std::size_t>(r * in_dim + c)];
    return LinearBlockEncoder(std::move(W), Eigen::Map<const Eigen::VectorXd>(b.data(), d), J, M);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, "malformed encoder file " + path + ": " + e.what());
  }
}

}  // namespace jeanie::encoder
