#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <tuple>

#include "jeanie/alignment.hpp"
#include "jeanie/error.hpp"

namespace jeanie::alignment {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Step {
  int dt;
  int dtp;
};

// Enumeration order doubles as the hard-mode tie-break preference.
constexpr std::array<Step, 3> kTemporalSteps{{{1, 1}, {1, 0}, {0, 1}}};

struct Shift {
  int dk;
  int dkp;
};

std::vector<Shift> viewpoint_shifts(int iota, int K, int Kp) {
  const int rk = std::min(iota, K - 1);
  const int rkp = std::min(iota, Kp - 1);
  std::vector<Shift> shifts;
  for (int dk = -rk; dk <= rk; ++dk)
    for (int dkp = -rkp; dkp <= rkp; ++dkp) shifts.push_back({dk, dkp});
  std::stable_sort(shifts.begin(), shifts.end(), [](const Shift& a, const Shift& b) {
    return std::make_tuple(std::abs(a.dk) + std::abs(a.dkp), std::abs(a.dk), a.dk, a.dkp) <
           std::make_tuple(std::abs(b.dk) + std::abs(b.dkp), std::abs(b.dk), b.dk, b.dkp);
  });
  return shifts;
}

/// Accumulator over (t, t', k, k') for one distance tensor.
class JeanieDp {
 public:
  JeanieDp(const DistanceTensor& D, const JeanieConfig& cfg)
      : D_(D), cfg_(cfg), K_(D.azimuth_cells()), Kp_(D.altitude_cells()), T_(D.query_blocks()),
        Tp_(D.support_blocks()), shifts_(viewpoint_shifts(cfg.iota, K_, Kp_)) {
    const auto n = static_cast<std::size_t>(K_ * Kp_ * T_ * Tp_);
    acc_.assign(n, kInf);
    pred_min_.assign(n, 0.0);
    forward();
  }

  double distance() const { return distance_; }

  std::vector<PathNode> path(bool* tie = nullptr) const {
    bool ambiguous = false;
    const std::size_t end = best_end(&ambiguous);
    std::vector<PathNode> nodes;
    std::size_t cur = end;
    for (;;) {
      const auto [k, kp, t, tp] = coords(cur);
      nodes.push_back({k, kp, t, tp, D_(k, kp, t, tp), acc_[cur]});
      if (t == 0 && tp == 0) break;
      std::size_t chosen = 0;
      int matches = 0;
      for_each_predecessor(k, kp, t, tp, [&](std::size_t p) {
        if (acc_[p] == pred_min_[cur]) {
          if (matches == 0) chosen = p;
          ++matches;
        }
      });
      if (matches > 1) ambiguous = true;
      cur = chosen;
    }
    std::reverse(nodes.begin(), nodes.end());
    if (tie != nullptr) *tie = ambiguous;
    return nodes;
  }

  DistanceTensor gradient() const {
    DistanceTensor grad(K_, Kp_, T_, Tp_, 0.0);
    if (cfg_.smooth.hard) {
      bool tie = false;
      const auto nodes = path(&tie);
      require(!tie, ErrorKind::Ambiguity,
              "hard-mode gradient undefined: the optimal alignment path is not unique");
      for (const auto& n : nodes) grad(n.k, n.k_prime, n.t, n.t_prime) = 1.0;
      return grad;
    }
    const double gamma = cfg_.smooth.gamma;
    std::vector<double> adj(acc_.size(), 0.0);
    for (int k = 0; k < K_; ++k)
      for (int kp = 0; kp < Kp_; ++kp) {
        const std::size_t e = index(k, kp, T_ - 1, Tp_ - 1);
        adj[e] = std::exp(-(acc_[e] - distance_) / gamma);
      }
    for (int t = T_ - 1; t >= 0; --t)
      for (int tp = Tp_ - 1; tp >= 0; --tp)
        for (int k = K_ - 1; k >= 0; --k)
          for (int kp = Kp_ - 1; kp >= 0; --kp) {
            const std::size_t cur = index(k, kp, t, tp);
            const double a = adj[cur];
            grad(k, kp, t, tp) = a;
            if (a == 0.0 || (t == 0 && tp == 0)) continue;
            const double s = pred_min_[cur];
            for_each_predecessor(k, kp, t, tp, [&](std::size_t p) {
              if (std::isfinite(acc_[p])) adj[p] += a * std::exp(-(acc_[p] - s) / gamma);
            });
          }
    return grad;
  }

 private:
  std::size_t index(int k, int kp, int t, int tp) const {
    return static_cast<std::size_t>(((t * Tp_ + tp) * K_ + k) * Kp_ + kp);
  }

  std::array<int, 4> coords(std::size_t idx) const {
    const int i = static_cast<int>(idx);
    const int kp = i % Kp_;
    const int k = (i / Kp_) % K_;
    const int tp = (i / (Kp_ * K_)) % Tp_;
    const int t = i / (Kp_ * K_ * Tp_);
    return {k, kp, t, tp};
  }

  template <typename Fn>
  void for_each_predecessor(int k, int kp, int t, int tp, Fn&& fn) const {
    for (const Step& step : kTemporalSteps) {
      const int pt = t - step.dt;
      const int ptp = tp - step.dtp;
      if (pt < 0 || ptp < 0) continue;
      for (const Shift& sh : shifts_) {
        const int pk = k - sh.dk;
        const int pkp = kp - sh.dkp;
        if (pk < 0 || pk >= K_ || pkp < 0 || pkp >= Kp_) continue;
        fn(index(pk, pkp, pt, ptp));
      }
    }
  }

  // The viewpoint window is a box (|dk| <= iota, |dk'| <= iota), and a
  // soft-min over a product set nests exactly, so each finished (t, t') plane
  // is reduced once along k' and then along k. A cell then combines the three
  // reduced temporal predecessors in kTemporalSteps order, which keeps the
  // K = K' = 1 case identical to soft_dtw.
  void forward() {
    const int rk = std::min(cfg_.iota, K_ - 1);
    const int rkp = std::min(cfg_.iota, Kp_ - 1);
    const auto plane = static_cast<std::size_t>(K_ * Kp_);
    window_.assign(acc_.size(), kInf);
    std::vector<double> along_kp(plane);
    std::vector<double> buf;
    buf.reserve(static_cast<std::size_t>(2 * std::max(rk, rkp) + 1));
    for (int t = 0; t < T_; ++t)
      for (int tp = 0; tp < Tp_; ++tp) {
        for (int k = 0; k < K_; ++k)
          for (int kp = 0; kp < Kp_; ++kp) {
            const std::size_t cur = index(k, kp, t, tp);
            const double cost = D_(k, kp, t, tp);
            if (t == 0 && tp == 0) {
              acc_[cur] = cost;
              continue;
            }
            buf.clear();
            for (const Step& step : kTemporalSteps) {
              const int pt = t - step.dt;
              const int ptp = tp - step.dtp;
              if (pt >= 0 && ptp >= 0) buf.push_back(window_[index(k, kp, pt, ptp)]);
            }
            const double s = softmin(buf, cfg_.smooth);
            pred_min_[cur] = s;
            acc_[cur] = cost + s;
          }
        if (t == T_ - 1 && tp == Tp_ - 1) break;
        const std::size_t base = index(0, 0, t, tp);
        for (int k = 0; k < K_; ++k)
          for (int kp = 0; kp < Kp_; ++kp) {
            buf.clear();
            for (int q = std::max(0, kp - rkp); q <= std::min(Kp_ - 1, kp + rkp); ++q)
              buf.push_back(acc_[base + static_cast<std::size_t>(k * Kp_ + q)]);
            along_kp[static_cast<std::size_t>(k * Kp_ + kp)] = softmin(buf, cfg_.smooth);
          }
        for (int k = 0; k < K_; ++k)
          for (int kp = 0; kp < Kp_; ++kp) {
            buf.clear();
            for (int q = std::max(0, k - rk); q <= std::min(K_ - 1, k + rk); ++q)
              buf.push_back(along_kp[static_cast<std::size_t>(q * Kp_ + kp)]);
            window_[base + static_cast<std::size_t>(k * Kp_ + kp)] = softmin(buf, cfg_.smooth);
          }
      }
    buf.clear();
    for (int k = 0; k < K_; ++k)
      for (int kp = 0; kp < Kp_; ++kp) buf.push_back(acc_[index(k, kp, T_ - 1, Tp_ - 1)]);
    distance_ = softmin(buf, cfg_.smooth);
  }

  std::size_t best_end(bool* tie) const {
    std::size_t best = index(0, 0, T_ - 1, Tp_ - 1);
    int matches = 0;
    double lo = kInf;
    for (int k = 0; k < K_; ++k)
      for (int kp = 0; kp < Kp_; ++kp) {
        const std::size_t e = index(k, kp, T_ - 1, Tp_ - 1);
        if (acc_[e] < lo) {
          lo = acc_[e];
          best = e;
          matches = 1;
        } else if (acc_[e] == lo) {
          ++matches;
        }
      }
    if (matches > 1) *tie = true;
    return best;
  }

  const DistanceTensor& D_;
  JeanieConfig cfg_;
  int K_;
  int Kp_;
  int T_;
  int Tp_;
  std::vector<Shift> shifts_;
  std::vector<double> acc_;
  std::vector<double> pred_min_;
  std::vector<double> window_;  // per plane: soft-min of acc over the shift box
  double distance_ = 0.0;
};

}  // namespace

void JeanieConfig::validate() const {
  smooth.validate();
  require(iota >= 0, ErrorKind::Config, "iota must be nonnegative");
}

AlignmentResult soft_dtw(const Eigen::MatrixXd& D, const SmoothMinConfig& cfg) {
  require(D.rows() > 0 && D.cols() > 0, ErrorKind::Argument, "soft-DTW of an empty matrix");
  cfg.validate();
  const Eigen::Index T = D.rows();
  const Eigen::Index Tp = D.cols();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Constant(T, Tp, kInf);
  Eigen::MatrixXd pred_min = Eigen::MatrixXd::Zero(T, Tp);
  std::vector<double> buf;
  buf.reserve(3);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index tp = 0; tp < Tp; ++tp) {
      if (t == 0 && tp == 0) {
        acc(0, 0) = D(0, 0);
        continue;
      }
      buf.clear();
      for (const Step& step : kTemporalSteps) {
        const Eigen::Index pt = t - step.dt;
        const Eigen::Index ptp = tp - step.dtp;
        if (pt >= 0 && ptp >= 0) buf.push_back(acc(pt, ptp));
      }
      pred_min(t, tp) = softmin(buf, cfg);
      acc(t, tp) = D(t, tp) + pred_min(t, tp);
    }
  }
  AlignmentResult result;
  result.distance = acc(T - 1, Tp - 1);
  if (cfg.hard) {
    std::vector<PathNode> nodes;
    Eigen::Index t = T - 1;
    Eigen::Index tp = Tp - 1;
    for (;;) {
      nodes.push_back({0, 0, static_cast<int>(t), static_cast<int>(tp), D(t, tp), acc(t, tp)});
      if (t == 0 && tp == 0) break;
      for (const Step& step : kTemporalSteps) {
        const Eigen::Index pt = t - step.dt;
        const Eigen::Index ptp = tp - step.dtp;
        if (pt >= 0 && ptp >= 0 && acc(pt, ptp) == pred_min(t, tp)) {
          t = pt;
          tp = ptp;
          break;
        }
      }
    }
    std::reverse(nodes.begin(), nodes.end());
    result.path = std::move(nodes);
  }
  return result;
}

Eigen::MatrixXd soft_dtw_backward(const Eigen::MatrixXd& D, const SmoothMinConfig& cfg) {
  const DistanceTensor grad = jeanie_backward(DistanceTensor::from_matrix(D), {cfg, 0});
  return grad.view_slice(0, 0);
}

AlignmentResult jeanie(const DistanceTensor& D, const JeanieConfig& cfg) {
  cfg.validate();
  const JeanieDp dp(D, cfg);
  AlignmentResult result;
  result.distance = dp.distance();
  if (cfg.smooth.hard) result.path = dp.path();
  return result;
}

AlignmentResult jeanie_with_gradient(const DistanceTensor& D, const JeanieConfig& cfg) {
  cfg.validate();
  const JeanieDp dp(D, cfg);
  AlignmentResult result;
  result.distance = dp.distance();
  if (cfg.smooth.hard) result.path = dp.path();
  result.grad = dp.gradient();
  return result;
}

DistanceTensor jeanie_backward(const DistanceTensor& D, const JeanieConfig& cfg) {
  return *jeanie_with_gradient(D, cfg).grad;
}

namespace {

Eigen::MatrixXd collapse_views(const DistanceTensor& D, const SmoothMinConfig& cfg) {
  Eigen::MatrixXd out(D.query_blocks(), D.support_blocks());
  std::vector<double> buf(static_cast<std::size_t>(D.views()));
  for (int t = 0; t < D.query_blocks(); ++t)
    for (int tp = 0; tp < D.support_blocks(); ++tp) {
      std::size_t i = 0;
      for (int k = 0; k < D.azimuth_cells(); ++k)
        for (int kp = 0; kp < D.altitude_cells(); ++kp) buf[i++] = D(k, kp, t, tp);
      out(t, tp) = softmin(buf, cfg);
    }
  return out;
}

}  // namespace

AlignmentResult fvm(const DistanceTensor& D, const SmoothMinConfig& cfg) {
  cfg.validate();
  return soft_dtw(collapse_views(D, cfg), cfg);
}

AlignmentResult fvm(const encoder::FeatureMap& query, const encoder::FeatureMap& support,
                    const BaseDistance& d, const SmoothMinConfig& cfg) {
  return fvm(base_distance_tensor(query, support, d), cfg);
}

DistanceTensor fvm_backward(const DistanceTensor& D, const SmoothMinConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd collapsed = collapse_views(D, cfg);
  const Eigen::MatrixXd upstream = soft_dtw_backward(collapsed, cfg);
  DistanceTensor grad(D.azimuth_cells(), D.altitude_cells(), D.query_blocks(), D.support_blocks());
  for (int t = 0; t < D.query_blocks(); ++t)
    for (int tp = 0; tp < D.support_blocks(); ++tp) {
      const double u = upstream(t, tp);
      if (u == 0.0) continue;
      if (cfg.hard) {
        int matches = 0;
        for (int k = 0; k < D.azimuth_cells(); ++k)
          for (int kp = 0; kp < D.altitude_cells(); ++kp)
            if (D(k, kp, t, tp) == collapsed(t, tp)) {
              if (matches++ == 0) grad(k, kp, t, tp) = u;
            }
        require(matches == 1, ErrorKind::Ambiguity,
                "hard-mode FVM gradient undefined: tied viewpoints on the optimal path");
      } else {
        for (int k = 0; k < D.azimuth_cells(); ++k)
          for (int kp = 0; kp < D.altitude_cells(); ++kp)
            grad(k, kp, t, tp) = u * std::exp(-(D(k, kp, t, tp) - collapsed(t, tp)) / cfg.gamma);
      }
    }
  return grad;
}

double min_fixed_view_dtw(const DistanceTensor& D, const SmoothMinConfig& cfg) {
  double best = kInf;
  for (int k = 0; k < D.azimuth_cells(); ++k)
    for (int kp = 0; kp < D.altitude_cells(); ++kp)
      best = std::min(best, soft_dtw(D.view_slice(k, kp), cfg).distance);
  return best;
}

namespace {

class PathEnumerator {
 public:
  PathEnumerator(const DistanceTensor& D, const JeanieConfig& cfg, std::size_t limit)
      : D_(D), iota_(cfg.iota), limit_(limit) {}

  std::vector<double> run() {
    for (int k = 0; k < D_.azimuth_cells(); ++k)
      for (int kp = 0; kp < D_.altitude_cells(); ++kp) visit(k, kp, 0, 0, D_(k, kp, 0, 0));
    return std::move(costs_);
  }

 private:
  void visit(int k, int kp, int t, int tp, double cost) {
    if (t == D_.query_blocks() - 1 && tp == D_.support_blocks() - 1) {
      require(costs_.size() < limit_, ErrorKind::OracleScope,
              "path enumeration exceeded " + std::to_string(limit_) + " paths");
      costs_.push_back(cost);
      return;
    }
    for (const Step& step : kTemporalSteps) {
      const int nt = t + step.dt;
      const int ntp = tp + step.dtp;
      if (nt >= D_.query_blocks() || ntp >= D_.support_blocks()) continue;
      for (int nk = std::max(0, k - iota_); nk <= std::min(D_.azimuth_cells() - 1, k + iota_); ++nk)
        for (int nkp = std::max(0, kp - iota_); nkp <= std::min(D_.altitude_cells() - 1, kp + iota_);
             ++nkp)
          visit(nk, nkp, nt, ntp, cost + D_(nk, nkp, nt, ntp));
    }
  }

  const DistanceTensor& D_;
  int iota_;
  std::size_t limit_;
  std::vector<double> costs_;
};

}  // namespace

double brute_force_alignment(const DistanceTensor& D, const JeanieConfig& cfg,
                             std::size_t max_paths) {
  cfg.validate();
  const std::vector<double> costs = PathEnumerator(D, cfg, max_paths).run();
  const double lo = *std::min_element(costs.begin(), costs.end());
  if (cfg.smooth.hard) return lo;
  double sum = 0.0;
  for (double c : costs) sum += std::exp(-(c - lo) / cfg.smooth.gamma);
  return lo - cfg.smooth.gamma * std::log(sum);
}

void write_path_csv(std::span<const PathNode> path, std::ostream& out) {
  out << "k,k_prime,t,t_prime,cell_cost,cumulative\n";
  const auto old_precision = out.precision(17);
  for (const auto& n : path) {
    out << n.k << ',' << n.k_prime << ',' << n.t << ',' << n.t_prime << ',' << n.cell_cost << ','
        << n.cumulative << '\n';
  }
  out.precision(old_precision);
}

}  // namespace jeanie::alignment
