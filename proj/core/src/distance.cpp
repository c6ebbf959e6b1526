#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jeanie/alignment.hpp"
#include "jeanie/error.hpp"

namespace jeanie::alignment {

void SmoothMinConfig::validate() const {
  if (!hard) {
    require(gamma > 0.0 && std::isfinite(gamma), ErrorKind::Config,
            "softmin gamma must be positive unless hard mode is set");
  }
}

double softmin(std::span<const double> values, const SmoothMinConfig& cfg) {
  require(!values.empty(), ErrorKind::Argument, "softmin of an empty list");
  double lo = std::numeric_limits<double>::infinity();
  for (double v : values) lo = std::min(lo, v);
  if (cfg.hard || !std::isfinite(lo)) return lo;
  double sum = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) sum += std::exp(-(v - lo) / cfg.gamma);
  }
  return lo - cfg.gamma * std::log(sum);
}

void BaseDistance::validate() const {
  if (kind == DistanceKind::RBFInduced) {
    require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::Config, "RBF sigma must be positive");
  }
}

double BaseDistance::operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                                const Eigen::Ref<const Eigen::VectorXd>& b) const {
  const double sq = (a - b).squaredNorm();
  if (kind == DistanceKind::SquaredEuclidean) return sq;
  return 2.0 - 2.0 * std::exp(-sq / (2.0 * sigma * sigma));
}

Eigen::VectorXd BaseDistance::gradient(const Eigen::Ref<const Eigen::VectorXd>& a,
                                       const Eigen::Ref<const Eigen::VectorXd>& b) const {
  const Eigen::VectorXd diff = a - b;
  if (kind == DistanceKind::SquaredEuclidean) return 2.0 * diff;
  const double s2 = sigma * sigma;
  return (2.0 * std::exp(-diff.squaredNorm() / (2.0 * s2)) / s2) * diff;
}

DistanceTensor::DistanceTensor(int azimuth_cells, int altitude_cells, int query_blocks,
                               int support_blocks, double fill)
    : k_(azimuth_cells), k_prime_(altitude_cells), tau_(query_blocks),
      tau_prime_(support_blocks),
      values_(static_cast<std::size_t>(azimuth_cells * altitude_cells * query_blocks * support_blocks),
              fill) {
  require(k_ >= 1 && k_prime_ >= 1 && tau_ >= 1 && tau_prime_ >= 1, ErrorKind::Argument,
          "distance tensor dimensions must be positive");
}

DistanceTensor DistanceTensor::from_matrix(const Eigen::MatrixXd& D) {
  require(D.rows() > 0 && D.cols() > 0, ErrorKind::Argument, "empty distance matrix");
  DistanceTensor out(1, 1, static_cast<int>(D.rows()), static_cast<int>(D.cols()));
  for (int t = 0; t < D.rows(); ++t)
    for (int tp = 0; tp < D.cols(); ++tp) out(0, 0, t, tp) = D(t, tp);
  return out;
}

Eigen::MatrixXd DistanceTensor::view_slice(int k, int kp) const {
  Eigen::MatrixXd out(tau_, tau_prime_);
  for (int t = 0; t < tau_; ++t)
    for (int tp = 0; tp < tau_prime_; ++tp) out(t, tp) = (*this)(k, kp, t, tp);
  return out;
}

void DistanceTensor::validate() const {
  for (double v : values_) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::Argument,
            "distance tensor entries must be finite and nonnegative");
  }
}

namespace {

encoder::FeatureMap single_view(const encoder::FeatureMap& map) {
  return map.views() == 1 ? map : map.center_view();
}

int center_first_column(const encoder::FeatureMap& map) {
  return encoder::FeatureMap::column(map.azimuth_cells() / 2, map.altitude_cells() / 2, 0,
                                     map.altitude_cells(), map.blocks());
}

}  // namespace

DistanceTensor base_distance_tensor(const encoder::FeatureMap& query,
                                    const encoder::FeatureMap& support, const BaseDistance& d) {
  require(query.dim() == support.dim(), ErrorKind::Shape,
          "feature dimension mismatch: " + std::to_string(query.dim()) + " vs " +
              std::to_string(support.dim()));
  d.validate();
  const encoder::FeatureMap s = single_view(support);
  DistanceTensor out(query.azimuth_cells(), query.altitude_cells(), query.blocks(), s.blocks());
  for (int k = 0; k < query.azimuth_cells(); ++k)
    for (int kp = 0; kp < query.altitude_cells(); ++kp)
      for (int t = 0; t < query.blocks(); ++t)
        for (int tp = 0; tp < s.blocks(); ++tp)
          out(k, kp, t, tp) = d(query.feature(k, kp, t), s.feature(0, 0, tp));
  return out;
}

FeatureGradients base_distance_backward(const encoder::FeatureMap& query,
                                        const encoder::FeatureMap& support, const BaseDistance& d,
                                        const DistanceTensor& upstream) {
  const encoder::FeatureMap s = single_view(support);
  const int support_offset = support.views() == 1 ? 0 : center_first_column(support);
  FeatureGradients g{Eigen::MatrixXd::Zero(query.values().rows(), query.values().cols()),
                     Eigen::MatrixXd::Zero(support.values().rows(), support.values().cols())};
  for (int k = 0; k < query.azimuth_cells(); ++k) {
    for (int kp = 0; kp < query.altitude_cells(); ++kp) {
      for (int t = 0; t < query.blocks(); ++t) {
        const int qc = encoder::FeatureMap::column(k, kp, t, query.altitude_cells(), query.blocks());
        for (int tp = 0; tp < s.blocks(); ++tp) {
          const double w = upstream(k, kp, t, tp);
          if (w == 0.0) continue;
          const Eigen::VectorXd gd = w * d.gradient(query.feature(k, kp, t), s.feature(0, 0, tp));
          g.query.col(qc) += gd;
          g.support.col(support_offset + tp) -= gd;
        }
      }
    }
  }
  return g;
}

void AlignerConfig::validate() const {
  jeanie.validate();
  base.validate();
}

namespace {

struct Prepared {
  encoder::FeatureMap query;  // the query views the method actually uses
  int query_offset = 0;       // first column of `query` inside the caller's map
};

Prepared prepare_query(const encoder::FeatureMap& query, Method method) {
  if (method == Method::SoftDTW || method == Method::Euclidean) {
    if (query.views() == 1) return {query, 0};
    return {query.center_view(), center_first_column(query)};
  }
  return {query, 0};
}

double euclidean_sum(const DistanceTensor& D) {
  require(D.query_blocks() == D.support_blocks(), ErrorKind::Shape,
          "Euclidean alignment needs equal block counts (" + std::to_string(D.query_blocks()) +
              " vs " + std::to_string(D.support_blocks()) + ")");
  double sum = 0.0;
  for (int t = 0; t < D.query_blocks(); ++t) sum += D(0, 0, t, t);
  return sum;
}

}  // namespace

double align(const encoder::FeatureMap& query, const encoder::FeatureMap& support,
             const AlignerConfig& cfg) {
  const Prepared p = prepare_query(query, cfg.method);
  const DistanceTensor D = base_distance_tensor(p.query, support, cfg.base);
  switch (cfg.method) {
    case Method::SoftDTW: return soft_dtw(D.view_slice(0, 0), cfg.jeanie.smooth).distance;
    case Method::FVM: return fvm(D, cfg.jeanie.smooth).distance;
    case Method::JEANIE: return jeanie(D, cfg.jeanie).distance;
    case Method::Euclidean: return euclidean_sum(D);
  }
  return 0.0;
}

PairGradient align_with_gradient(const encoder::FeatureMap& query,
                                 const encoder::FeatureMap& support, const AlignerConfig& cfg) {
  const Prepared p = prepare_query(query, cfg.method);
  const DistanceTensor D = base_distance_tensor(p.query, support, cfg.base);
  PairGradient out;
  DistanceTensor upstream;
  switch (cfg.method) {
    case Method::SoftDTW: {
      const Eigen::MatrixXd M = D.view_slice(0, 0);
      out.distance = soft_dtw(M, cfg.jeanie.smooth).distance;
      upstream = DistanceTensor::from_matrix(soft_dtw_backward(M, cfg.jeanie.smooth));
      break;
    }
    case Method::FVM:
      out.distance = fvm(D, cfg.jeanie.smooth).distance;
      upstream = fvm_backward(D, cfg.jeanie.smooth);
      break;
    case Method::JEANIE: {
      AlignmentResult r = jeanie_with_gradient(D, cfg.jeanie);
      out.distance = r.distance;
      upstream = std::move(*r.grad);
      break;
    }
    case Method::Euclidean:
      out.distance = euclidean_sum(D);
      upstream = DistanceTensor(1, 1, D.query_blocks(), D.support_blocks(), 0.0);
      for (int t = 0; t < D.query_blocks(); ++t) upstream(0, 0, t, t) = 1.0;
      break;
  }
  FeatureGradients g = base_distance_backward(p.query, support, cfg.base, upstream);
  if (p.query.views() == query.views()) {
    out.features.query = std::move(g.query);
  } else {
    out.features.query = Eigen::MatrixXd::Zero(query.values().rows(), query.values().cols());
    out.features.query.middleCols(p.query_offset, p.query.blocks()) = g.query;
  }
  out.features.support = std::move(g.support);
  return out;
}

}  // namespace jeanie::alignment
