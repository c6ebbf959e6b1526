#include "jeanie/coding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "jeanie/error.hpp"
#include "jeanie/parallel.hpp"

namespace jeanie::coding {

Dictionary::Dictionary(Eigen::MatrixXd atoms, int dim, int tau_star)
    : atoms_(std::move(atoms)), dim_(dim), tau_star_(tau_star) {
  require(dim_ >= 1 && tau_star_ >= 1, ErrorKind::Shape, "dictionary dimensions must be positive");
  require(atoms_.rows() == static_cast<Eigen::Index>(dim_) * tau_star_, ErrorKind::Shape,
          "dictionary rows must equal d' * tau*");
  require(atoms_.cols() >= 1, ErrorKind::Shape, "dictionary needs at least one atom");
}

encoder::FeatureMap Dictionary::atom(int j) const {
  return encoder::FeatureMap(
      Eigen::Map<const Eigen::MatrixXd>(atoms_.col(j).data(), dim_, tau_star_), 1, 1, tau_star_);
}

Dictionary Dictionary::from_samples(std::span<const encoder::FeatureMap> maps, int k, int tau_star,
                                    double noise, std::mt19937_64& rng) {
  require(!maps.empty(), ErrorKind::Argument, "dictionary initialisation needs samples");
  require(k >= 1 && tau_star >= 1, ErrorKind::Config, "dictionary size and tau* must be positive");
  const int dim = maps.front().dim();
  Eigen::MatrixXd atoms(static_cast<Eigen::Index>(dim) * tau_star, k);
  std::uniform_int_distribution<std::size_t> pick(0, maps.size() - 1);
  std::normal_distribution<double> jitter(0.0, noise);
  for (int j = 0; j < k; ++j) {
    const encoder::FeatureMap& src = maps[pick(rng)];
    const encoder::FeatureMap view = src.views() == 1 ? src : src.center_view();
    const int slack = std::max(0, view.blocks() - tau_star);
    const int start = std::uniform_int_distribution<int>(0, slack)(rng);
    for (int t = 0; t < tau_star; ++t) {
      const int bt = std::min(start + t, view.blocks() - 1);
      atoms.col(j).segment(static_cast<Eigen::Index>(t) * dim, dim) = view.feature(0, 0, bt);
    }
    if (noise > 0.0) {
      for (Eigen::Index r = 0; r < atoms.rows(); ++r) atoms(r, j) += jitter(rng);
    }
  }
  return Dictionary(std::move(atoms), dim, tau_star);
}

void CoderConfig::validate(int atoms) const {
  require(k_nn >= 1 && k_nn <= atoms, ErrorKind::Config, "k_nn must lie in [1, k]");
  require(alpha_iter >= 0, ErrorKind::Config, "alpha_iter must be nonnegative");
  require(sigma > 0.0, ErrorKind::Config, "coder sigma must be positive");
  require(kappa >= 0.0, ErrorKind::Config, "kappa must be nonnegative");
  require(omega > 0.0, ErrorKind::Config, "code step size must be positive");
  jeanie.validate();
  base.validate();
}

alignment::AlignerConfig CoderConfig::aligner() const {
  alignment::AlignerConfig a;
  a.jeanie = jeanie;
  a.base = base;
  switch (recon_distance) {
    case ReconDistance::JEANIE: a.method = alignment::Method::JEANIE; break;
    case ReconDistance::SoftDTW: a.method = alignment::Method::SoftDTW; break;
    case ReconDistance::SquaredEuclidean:
      a.method = alignment::Method::Euclidean;
      a.base.kind = alignment::DistanceKind::SquaredEuclidean;
      break;
  }
  return a;
}

bool is_closed_form(CoderKind kind) {
  return kind == CoderKind::HA || kind == CoderKind::SA || kind == CoderKind::LcSA;
}

Code one_hot(int size, int index) {
  Code c = Code::Zero(size);
  c(index) = 1.0;
  return c;
}

encoder::FeatureMap reconstruct(const Dictionary& dict, const Code& code) {
  require(code.size() == dict.size(), ErrorKind::Shape, "code length does not match dictionary");
  const Eigen::VectorXd flat = dict.atoms() * code;
  return encoder::FeatureMap(Eigen::Map<const Eigen::MatrixXd>(flat.data(), dict.dim(), dict.tau_star()),
                             1, 1, dict.tau_star());
}

double reconstruction_distance(const encoder::FeatureMap& psi, const encoder::FeatureMap& recon,
                               const CoderConfig& cfg) {
  return alignment::align(psi, recon, cfg.aligner());
}

double reconstruction_error(const encoder::FeatureMap& psi, const Dictionary& dict,
                            const Code& code, const CoderConfig& cfg) {
  const double d = reconstruction_distance(psi, reconstruct(dict, code), cfg);
  return d * d;
}

ReconstructionGradient reconstruction_gradient(const encoder::FeatureMap& psi,
                                               const Dictionary& dict, const Code& code,
                                               const CoderConfig& cfg) {
  const alignment::PairGradient pg =
      alignment::align_with_gradient(psi, reconstruct(dict, code), cfg.aligner());
  ReconstructionGradient g;
  g.error = pg.distance * pg.distance;
  const Eigen::Map<const Eigen::VectorXd> d_recon(pg.features.support.data(),
                                                  pg.features.support.size());
  const Eigen::VectorXd scaled = 2.0 * pg.distance * d_recon;
  g.d_code = dict.atoms().transpose() * scaled;
  g.d_atoms = scaled * code.transpose();
  g.d_features = 2.0 * pg.distance * pg.features.query;
  return g;
}

Eigen::VectorXd atom_errors(const encoder::FeatureMap& psi, const Dictionary& dict,
                            const CoderConfig& cfg) {
  const alignment::AlignerConfig aligner = cfg.aligner();
  Eigen::VectorXd e(dict.size());
  for (int j = 0; j < dict.size(); ++j) {
    const double d = alignment::align(psi, dict.atom(j), aligner);
    e(j) = d * d;
  }
  return e;
}

Code soft_assignment(const Eigen::VectorXd& errors, double sigma, std::span<const char> mask) {
  const auto k = static_cast<std::size_t>(errors.size());
  auto active = [&](std::size_t j) { return mask.empty() || mask[j] != 0; };
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j)
    if (active(j)) lo = std::min(lo, errors(static_cast<Eigen::Index>(j)));
  Code c = Code::Zero(errors.size());
  double z = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (!active(j)) continue;
    const auto i = static_cast<Eigen::Index>(j);
    c(i) = std::exp(-(errors(i) - lo) / (2.0 * sigma * sigma));
    z += c(i);
  }
  return c / z;
}

Eigen::VectorXd llc_locality(const Eigen::VectorXd& errors, double sigma) {
  // (e^{x_j} - e^{x_min}) / (e^{x_max} - e^{x_min}) evaluated relative to x_max.
  const Eigen::VectorXd x = errors / sigma;
  const double hi = x.maxCoeff();
  const double lo = x.minCoeff();
  if (hi == lo) return Eigen::VectorXd::Zero(errors.size());
  const double floor = std::exp(lo - hi);
  Eigen::VectorXd d(errors.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) d(j) = (std::exp(x(j) - hi) - floor) / (1.0 - floor);
  return d;
}

Code encode_HA(const Eigen::VectorXd& errors) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < errors.size(); ++j)
    if (errors(j) < errors(best)) best = j;
  return one_hot(static_cast<int>(errors.size()), static_cast<int>(best));
}

Code encode_LcSA(const Eigen::VectorXd& errors, double sigma, int k_nn) {
  std::vector<int> order(static_cast<std::size_t>(errors.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return errors(a) < errors(b); });
  std::vector<char> mask(order.size(), 0);
  for (int i = 0; i < k_nn && i < static_cast<int>(order.size()); ++i)
    mask[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  return soft_assignment(errors, sigma, mask);
}

Code encode_HA(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg) {
  return encode_HA(atom_errors(psi, dict, cfg));
}

Code encode_SA(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg) {
  return soft_assignment(atom_errors(psi, dict, cfg), cfg.sigma);
}

Code encode_LcSA(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg) {
  cfg.validate(dict.size());
  return encode_LcSA(atom_errors(psi, dict, cfg), cfg.sigma, cfg.k_nn);
}

double coder_penalty(const Code& code, const CoderConfig& cfg, const Eigen::VectorXd& locality) {
  switch (cfg.kind) {
    case CoderKind::SC:
    case CoderKind::SCPlus: return cfg.kappa * code.lpNorm<1>();
    case CoderKind::LLC: return cfg.kappa * locality.cwiseProduct(code).squaredNorm();
    default: return 0.0;
  }
}

namespace {

Code iterative_code(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
                    CoderKind kind, std::optional<Code> init, const Eigen::VectorXd* fixed_locality,
                    ObjectiveTrace* trace) {
  CoderConfig local = cfg;
  local.kind = kind;
  local.validate(dict.size());
  Eigen::VectorXd errors;
  if (!init || (kind == CoderKind::LLC && fixed_locality == nullptr))
    errors = atom_errors(psi, dict, local);
  Eigen::VectorXd locality;
  if (kind == CoderKind::LLC) {
    locality = fixed_locality != nullptr ? *fixed_locality : llc_locality(errors, local.sigma);
    require(locality.size() == dict.size(), ErrorKind::Shape, "locality vector length mismatch");
  }
  const double k = static_cast<double>(dict.size());

  auto project = [&](Code& a, double step) {
    switch (kind) {
      case CoderKind::SC:
        a = a.unaryExpr([&](double v) {
          return std::copysign(std::max(std::abs(v) - step * local.kappa, 0.0), v);
        });
        break;
      case CoderKind::SCPlus:
        a = a.unaryExpr([&](double v) { return std::max(v - step * local.kappa, 0.0); });
        break;
      default:
        a.array() += (1.0 - a.sum()) / k;
        break;
    }
  };
  auto objective = [&](const Code& a) {
    return reconstruction_error(psi, dict, a, local) + coder_penalty(a, local, locality);
  };

  Code alpha = init ? *init : soft_assignment(errors, local.sigma);
  require(alpha.size() == dict.size(), ErrorKind::Shape, "initial code length mismatch");
  if (kind == CoderKind::LLC) alpha.array() += (1.0 - alpha.sum()) / k;
  double obj = objective(alpha);
  require(std::isfinite(obj), ErrorKind::Numeric, "non-finite coding objective");
  if (trace != nullptr) trace->push_back(obj);

  double step = local.omega;
  for (int it = 0; it < local.alpha_iter; ++it) {
    Code grad = reconstruction_gradient(psi, dict, alpha, local).d_code;
    if (kind == CoderKind::LLC)
      grad += 2.0 * local.kappa * locality.cwiseProduct(locality).cwiseProduct(alpha);
    bool accepted = false;
    Code candidate;
    double cand_obj = obj;
    for (int halving = 0; halving < 40; ++halving) {
      candidate = alpha - step * grad;
      project(candidate, step);
      cand_obj = objective(candidate);
      if (std::isfinite(cand_obj) && cand_obj <= obj) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double change = (candidate - alpha).lpNorm<Eigen::Infinity>();
    alpha = std::move(candidate);
    obj = cand_obj;
    if (trace != nullptr) trace->push_back(obj);
    step *= 2.0;
    if (change <= local.tolerance) break;
  }
  return alpha;
}

}  // namespace

Code encode_SC(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
               std::optional<Code> init, ObjectiveTrace* trace) {
  return iterative_code(psi, dict, cfg, CoderKind::SC, std::move(init), nullptr, trace);
}

Code encode_SCPlus(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
                   std::optional<Code> init, ObjectiveTrace* trace) {
  return iterative_code(psi, dict, cfg, CoderKind::SCPlus, std::move(init), nullptr, trace);
}

Code encode_LLC(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
                std::optional<Code> init, ObjectiveTrace* trace) {
  return iterative_code(psi, dict, cfg, CoderKind::LLC, std::move(init), nullptr, trace);
}

Code refine_code(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
                 const Code& init, const Eigen::VectorXd& locality, ObjectiveTrace* trace) {
  require(!is_closed_form(cfg.kind), ErrorKind::Config, "refine_code needs an iterative coder");
  return iterative_code(psi, dict, cfg, cfg.kind, init,
                        cfg.kind == CoderKind::LLC ? &locality : nullptr, trace);
}

Code encode(const encoder::FeatureMap& psi, const Dictionary& dict, const CoderConfig& cfg,
            std::optional<Code> init, ObjectiveTrace* trace) {
  switch (cfg.kind) {
    case CoderKind::HA: return encode_HA(psi, dict, cfg);
    case CoderKind::SA: return encode_SA(psi, dict, cfg);
    case CoderKind::LcSA: return encode_LcSA(psi, dict, cfg);
    case CoderKind::SC: return encode_SC(psi, dict, cfg, std::move(init), trace);
    case CoderKind::SCPlus: return encode_SCPlus(psi, dict, cfg, std::move(init), trace);
    case CoderKind::LLC: return encode_LLC(psi, dict, cfg, std::move(init), trace);
  }
  return {};
}

double batch_reconstruction_error(std::span<const encoder::FeatureMap> batch,
                                  const Dictionary& dict, const Eigen::MatrixXd& codes,
                                  const CoderConfig& cfg, int jobs) {
  require(codes.cols() == static_cast<Eigen::Index>(batch.size()) && codes.rows() == dict.size(),
          ErrorKind::Shape, "code matrix must be k x batch size");
  std::vector<double> errors(batch.size());
  parallel_for(batch.size(), jobs, [&](std::size_t i) {
    errors[i] = reconstruction_error(batch[i], dict, codes.col(static_cast<Eigen::Index>(i)), cfg);
  });
  return std::accumulate(errors.begin(), errors.end(), 0.0);
}

Dictionary learn_dictionary(std::span<const encoder::FeatureMap> batch,
                            const Eigen::MatrixXd& codes, Dictionary dict, int steps,
                            double learning_rate, const CoderConfig& cfg, int jobs) {
  double current = batch_reconstruction_error(batch, dict, codes, cfg, jobs);
  require(std::isfinite(current), ErrorKind::Numeric, "non-finite reconstruction error");
  double lr = learning_rate;
  std::vector<Eigen::MatrixXd> grads(batch.size());
  for (int s = 0; s < steps; ++s) {
    parallel_for(batch.size(), jobs, [&](std::size_t i) {
      grads[i] = reconstruction_gradient(batch[i], dict, codes.col(static_cast<Eigen::Index>(i)), cfg)
                     .d_atoms;
    });
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(dict.atoms().rows(), dict.atoms().cols());
    for (const auto& g : grads) grad += g;
    if (grad.squaredNorm() == 0.0) break;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      Dictionary candidate(dict.atoms() - lr * grad, dict.dim(), dict.tau_star());
      const double value = batch_reconstruction_error(batch, candidate, codes, cfg, jobs);
      if (std::isfinite(value) && value <= current) {
        dict = std::move(candidate);
        current = value;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
  }
  return dict;
}

namespace {

void require_simplex(const Code& c) {
  require((c.array() >= 0.0).all() && std::abs(c.sum() - 1.0) <= 1e-8, ErrorKind::Normalization,
          "kernel code distances need nonnegative l1-normalised codes");
}

double hik(const Code& a, const Code& b) { return a.cwiseMin(b).sum(); }

double csk(const Code& a, const Code& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = a(i) + b(i);
    if (denom > 0.0) s += 2.0 * a(i) * b(i) / denom;
  }
  return s;
}

}  // namespace

double code_distance(const Code& a, const Code& b, CodeDistanceKind kind) {
  require(a.size() == b.size(), ErrorKind::Shape, "code length mismatch");
  switch (kind) {
    case CodeDistanceKind::L1: return (a - b).lpNorm<1>();
    case CodeDistanceKind::L2: return (a - b).norm();
    case CodeDistanceKind::HIK:
    case CodeDistanceKind::CSK: {
      require_simplex(a);
      require_simplex(b);
      auto kernel = kind == CodeDistanceKind::HIK ? hik : csk;
      const double d = kernel(a, a) + kernel(b, b) - 2.0 * kernel(a, b);
      return std::clamp(d, 0.0, 2.0);
    }
  }
  return 0.0;
}

void save_dictionary(const Dictionary& dict, const std::string& path) {
  nlohmann::json doc;
  doc["d_prime"] = dict.dim();
  doc["tau_star"] = dict.tau_star();
  doc["k"] = dict.size();
  std::vector<double> payload;
  payload.reserve(static_cast<std::size_t>(dict.atoms().size()));
  for (Eigen::Index r = 0; r < dict.atoms().rows(); ++r)
    for (Eigen::Index c = 0; c < dict.atoms().cols(); ++c) payload.push_back(dict.atoms()(r, c));
  doc["atoms"] = std::move(payload);
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write dictionary file " + path);
  out << doc.dump() << '\n';
}

Dictionary load_dictionary(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read dictionary file " + path);
  try {
    nlohmann::json doc;
    in >> doc;
    const int d = doc.at("d_prime").get<int>();
    const int tau = doc.at("tau_star").get<int>();
    const int k = doc.at("k").get<int>();
    const auto payload = doc.at("atoms").get<std::vector<double>>();
    const auto rows = static_cast<Eigen::Index>(d) * tau;
    require(payload.size() == static_cast<std::size_t>(rows * k), ErrorKind::Parse,
            "dictionary payload does not match header {d_prime, tau_star, k}");
    Eigen::MatrixXd atoms(rows, k);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < k; ++c) atoms(r, c) = payload[static_cast<std::size_t>(r * k + c)];
    return Dictionary(std::move(atoms), d, tau);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, "malformed dictionary file " + path + ": " + e.what());
  }
}

void write_codes_csv(std::span<const std::string> sample_ids, const Eigen::MatrixXd& codes,
                     std::ostream& out) {
  require(static_cast<Eigen::Index>(sample_ids.size()) == codes.cols(), ErrorKind::Shape,
          "one sample id per code column expected");
  out << "sample_id,atom,value\n";
  const auto old_precision = out.precision(17);
  for (Eigen::Index i = 0; i < codes.cols(); ++i)
    for (Eigen::Index j = 0; j < codes.rows(); ++j)
      if (codes(j, i) != 0.0)
        out << sample_ids[static_cast<std::size_t>(i)] << ',' << j << ',' << codes(j, i) << '\n';
  out.precision(old_precision);
}

}  // namespace jeanie::coding
