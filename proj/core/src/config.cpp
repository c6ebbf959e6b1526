#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <filesystem>
#include <set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "jeanie/config.hpp"
#include "jeanie/error.hpp"
#include "jeanie/geometry.hpp"
#include "jeanie/io.hpp"

namespace jeanie::io {

using nlohmann::json;

namespace {

template <class E>
using NameTable = std::vector<std::pair<E, std::string_view>>;

template <class E>
const NameTable<E>& names();

template <>
const NameTable<alignment::Method>& names() {
  static const NameTable<alignment::Method> t{{alignment::Method::SoftDTW, "dtw"},
                                              {alignment::Method::FVM, "fvm"},
                                              {alignment::Method::JEANIE, "jeanie"},
                                              {alignment::Method::Euclidean, "euclidean"}};
  return t;
}
template <>
const NameTable<alignment::DistanceKind>& names() {
  static const NameTable<alignment::DistanceKind> t{
      {alignment::DistanceKind::SquaredEuclidean, "euclidean"},
      {alignment::DistanceKind::RBFInduced, "rbf"}};
  return t;
}
template <>
const NameTable<geometry::ViewMode>& names() {
  static const NameTable<geometry::ViewMode> t{{geometry::ViewMode::Euler, "euler"},
                                               {geometry::ViewMode::CamVPC, "camvpc"}};
  return t;
}
template <>
const NameTable<coding::CoderKind>& names() {
  static const NameTable<coding::CoderKind> t{
      {coding::CoderKind::HA, "ha"},   {coding::CoderKind::SC, "sc"},
      {coding::CoderKind::SCPlus, "sc+"}, {coding::CoderKind::LLC, "llc"},
      {coding::CoderKind::SA, "sa"},   {coding::CoderKind::LcSA, "lcsa"}};
  return t;
}
template <>
const NameTable<coding::ReconDistance>& names() {
  static const NameTable<coding::ReconDistance> t{
      {coding::ReconDistance::JEANIE, "jeanie"},
      {coding::ReconDistance::SoftDTW, "dtw"},
      {coding::ReconDistance::SquaredEuclidean, "euclidean"}};
  return t;
}
template <>
const NameTable<coding::CodeDistanceKind>& names() {
  static const NameTable<coding::CodeDistanceKind> t{{coding::CodeDistanceKind::L1, "l1"},
                                                     {coding::CodeDistanceKind::L2, "l2"},
                                                     {coding::CodeDistanceKind::HIK, "hik"},
                                                     {coding::CodeDistanceKind::CSK, "csk"}};
  return t;
}
template <>
const NameTable<fsar::FusionStrategy>& names() {
  static const NameTable<fsar::FusionStrategy> t{
      {fsar::FusionStrategy::Weighted, "weighted"},
      {fsar::FusionStrategy::FinetuneUnsup, "finetune"},
      {fsar::FusionStrategy::MamlInspired, "maml"},
      {fsar::FusionStrategy::AdaptationBased, "adapt"}};
  return t;
}
template <>
const NameTable<fsar::ClassifierKind>& names() {
  static const NameTable<fsar::ClassifierKind> t{{fsar::ClassifierKind::Supervised, "sup"},
                                                 {fsar::ClassifierKind::Unsupervised, "unsup"},
                                                 {fsar::ClassifierKind::Fused, "fused"}};
  return t;
}
template <>
const NameTable<DataSource>& names() {
  static const NameTable<DataSource> t{{DataSource::Synthetic, "synthetic"},
                                       {DataSource::Manifest, "manifest"}};
  return t;
}

/// Reads one JSON object, remembering which keys were consumed so leftovers
/// can be reported.
class Section {
 public:
  Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) fail(ErrorKind::Config, "config: " + where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = take(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::invalid_argument("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw std::invalid_argument("");
        if constexpr (std::is_unsigned_v<T>) {
          if (v->is_number_unsigned()) {
            out = v->get<T>();
            return;
          }
          if (v->get<long long>() < 0) throw std::invalid_argument("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw std::invalid_argument("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::invalid_argument("");
      }
      out = v->get<T>();
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "config: " + where(key) + " has the wrong type");
    }
  }

  void get_degrees(const char* key, double& radians) {
    double deg = radians * 180.0 / std::numbers::pi;
    const bool present = j_ && j_->contains(key);
    get(key, deg);
    if (present) radians = geometry::deg_to_rad(deg);
  }

  template <class E>
  void get_enum(const char* key, E& out) {
    std::string s(enum_name(out));
    get(key, s);
    try {
      out = enum_from<E>(s);
    } catch (const Error& e) {
      fail(ErrorKind::Config, "config: " + where(key) + ": " + e.what());
    }
  }

  Section sub(const char* key) { return Section(take(key), where(key)); }
  const json* raw(const char* key) { return take(key); }

  void finish() const {
    if (!j_) return;
    for (const auto& item : j_->items()) {
      if (!seen_.count(item.key()))
        fail(ErrorKind::Config, "config: unknown key " + where(item.key().c_str()));
    }
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    if (!j_ || !j_->contains(key)) return nullptr;
    return &j_->at(key);
  }
  std::string where(const char* key = nullptr) const {
    std::string w = path_.empty() ? "" : path_;
    if (key) w += (w.empty() ? "" : ".") + std::string(key);
    return w.empty() ? "<root>" : w;
  }

  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_smooth(Section& s, alignment::SmoothMinConfig& c) {
  s.get("gamma", c.gamma);
  s.get("hard", c.hard);
}

void read_aligner(Section s, alignment::AlignerConfig& a) {
  s.get_enum("method", a.method);
  read_smooth(s, a.jeanie.smooth);
  s.get("iota", a.jeanie.iota);
  s.get_enum("base", a.base.kind);
  s.get("sigma", a.base.sigma);
  s.finish();
}

json write_aligner(const alignment::AlignerConfig& a) {
  return {{"method", enum_name(a.method)},   {"gamma", a.jeanie.smooth.gamma},
          {"hard", a.jeanie.smooth.hard},    {"iota", a.jeanie.iota},
          {"base", enum_name(a.base.kind)},  {"sigma", a.base.sigma}};
}

void read_coder(Section s, coding::CoderConfig& c) {
  s.get_enum("kind", c.kind);
  s.get("kappa", c.kappa);
  s.get("sigma", c.sigma);
  s.get("k_nn", c.k_nn);
  s.get("alpha_iter", c.alpha_iter);
  s.get("omega", c.omega);
  s.get("tolerance", c.tolerance);
  s.get_enum("recon_distance", c.recon_distance);
  read_smooth(s, c.jeanie.smooth);
  s.get("iota", c.jeanie.iota);
  s.get_enum("base", c.base.kind);
  s.get("base_sigma", c.base.sigma);
  s.finish();
}

json write_coder(const coding::CoderConfig& c) {
  return {{"kind", enum_name(c.kind)},
          {"kappa", c.kappa},
          {"sigma", c.sigma},
          {"k_nn", c.k_nn},
          {"alpha_iter", c.alpha_iter},
          {"omega", c.omega},
          {"tolerance", c.tolerance},
          {"recon_distance", enum_name(c.recon_distance)},
          {"gamma", c.jeanie.smooth.gamma},
          {"hard", c.jeanie.smooth.hard},
          {"iota", c.jeanie.iota},
          {"base", enum_name(c.base.kind)},
          {"base_sigma", c.base.sigma}};
}

void read_synthetic(Section s, fsar::SyntheticConfig& c) {
  s.get("classes", c.classes);
  s.get("samples_per_class", c.samples_per_class);
  s.get("joints", c.joints);
  s.get("primitives", c.primitives);
  s.get("primitives_per_class", c.primitives_per_class);
  s.get("min_frames", c.min_frames);
  s.get("max_frames", c.max_frames);
  s.get("yaw_range_deg", c.yaw_range_deg);
  s.get("pitch_range_deg", c.pitch_range_deg);
  s.get("yaw_drift_deg", c.yaw_drift_deg);
  s.get("amplitude_jitter", c.amplitude_jitter);
  s.get("distractor_amplitude", c.distractor_amplitude);
  s.get("speed_warp", c.speed_warp);
  s.get("noise", c.noise);
  s.get("seed", c.seed);
  s.finish();
}

json write_synthetic(const fsar::SyntheticConfig& c) {
  return {{"classes", c.classes},
          {"samples_per_class", c.samples_per_class},
          {"joints", c.joints},
          {"primitives", c.primitives},
          {"primitives_per_class", c.primitives_per_class},
          {"min_frames", c.min_frames},
          {"max_frames", c.max_frames},
          {"yaw_range_deg", c.yaw_range_deg},
          {"pitch_range_deg", c.pitch_range_deg},
          {"yaw_drift_deg", c.yaw_drift_deg},
          {"amplitude_jitter", c.amplitude_jitter},
          {"distractor_amplitude", c.distractor_amplitude},
          {"speed_warp", c.speed_warp},
          {"noise", c.noise},
          {"seed", c.seed}};
}

// Rounded so that 15 degrees prints as 15 rather than 14.999999999999998.
double degrees(double radians) { return std::round(radians * 180.0 / std::numbers::pi * 1e9) / 1e9; }

json to_json(const RunConfig& c) {
  const auto& f = c.fsar;
  const auto& r = f.representation;
  json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["data"] = {{"source", enum_name(c.data.source)},
               {"synthetic", write_synthetic(c.data.synthetic)},
               {"manifest", c.data.manifest},
               {"train_classes", c.data.train_classes}};
  j["representation"] = {
      {"grid",
       {{"eta_az", r.grid.eta_az},
        {"eta_alt", r.grid.eta_alt},
        {"delta_az_deg", degrees(r.grid.delta_az)},
        {"delta_alt_deg", degrees(r.grid.delta_alt)}}},
      {"view",
       {{"mode", enum_name(r.view.mode)},
        {"camera_distance", r.view.camera_distance},
        {"camera_height", r.view.camera_height}}},
      {"blocks", {{"block_length", r.blocks.block_length}, {"stride", r.blocks.stride}}},
      {"d_prime", r.d_prime}};
  j["episodes"] = {{"n_way", f.episodes.n_way},
                   {"z_shot", f.episodes.z_shot},
                   {"batch", f.episodes.batch}};
  j["supervised"] = {{"iterations", f.supervised.iterations},
                     {"learning_rate", f.supervised.learning_rate},
                     {"weight_decay", f.supervised.weight_decay},
                     {"momentum", f.supervised.momentum},
                     {"beta", f.supervised.loss.beta},
                     {"aligner", write_aligner(f.supervised.aligner)}};
  j["unsupervised"] = {{"iterations", f.unsupervised.iterations},
                       {"dictionary_size", f.unsupervised.dictionary_size},
                       {"tau_star", f.unsupervised.tau_star},
                       {"dic_iter", f.unsupervised.dic_iter},
                       {"omega_dl", f.unsupervised.omega_dl},
                       {"omega_en", f.unsupervised.omega_en},
                       {"init_noise", f.unsupervised.init_noise},
                       {"coder", write_coder(f.unsupervised.coder)}};
  j["fusion"] = {{"strategy", enum_name(f.fusion.strategy)},
                 {"iterations", f.fusion.iterations},
                 {"rho", f.fusion.rho},
                 {"lambda", f.fusion.lambda},
                 {"code_distance", enum_name(f.fusion.code_distance)}};
  j["evaluation"] = {{"episodes", c.evaluation.episodes},
                     {"n_way", c.evaluation.n_way},
                     {"z_shot", c.evaluation.z_shot},
                     {"classifier", enum_name(c.evaluation.classifier)},
                     {"rho", c.evaluation.rho},
                     {"code_distance", enum_name(c.evaluation.code_distance)},
                     {"seeds", c.evaluation.seeds}};
  return j;
}

}  // namespace

template <class E>
std::string_view enum_name(E value) {
  for (const auto& [v, n] : names<E>())
    if (v == value) return n;
  fail(ErrorKind::Argument, "enum value without a name");
}

template <class E>
std::string enum_choices() {
  std::string out;
  for (const auto& [v, n] : names<E>()) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

template <class E>
E enum_from(std::string_view name) {
  for (const auto& [v, n] : names<E>())
    if (n == name) return v;
  fail(ErrorKind::Config, "unknown value \"" + std::string(name) + "\" (expected one of " +
                              enum_choices<E>() + ")");
}

#define JEANIE_ENUM(E)                            \
  template std::string_view enum_name<E>(E);      \
  template E enum_from<E>(std::string_view);      \
  template std::string enum_choices<E>();
JEANIE_ENUM(alignment::Method)
JEANIE_ENUM(alignment::DistanceKind)
JEANIE_ENUM(geometry::ViewMode)
JEANIE_ENUM(coding::CoderKind)
JEANIE_ENUM(coding::ReconDistance)
JEANIE_ENUM(coding::CodeDistanceKind)
JEANIE_ENUM(fsar::FusionStrategy)
JEANIE_ENUM(fsar::ClassifierKind)
JEANIE_ENUM(DataSource)
#undef JEANIE_ENUM

void DataConfig::validate() const {
  if (source == DataSource::Synthetic) synthetic.validate();
  require(source != DataSource::Manifest || !manifest.empty(), ErrorKind::Config,
          "data.manifest is required when data.source is \"manifest\"");
  require(train_classes >= 0, ErrorKind::Config, "data.train_classes must be nonnegative");
}

void RunConfig::validate() const {
  require(jobs >= 1, ErrorKind::Config, "jobs must be at least 1");
  data.validate();
  fsar.validate();
  evaluation.validate();
}

RunConfig parse_run_config(std::string_view json_text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string(source) + ": " + e.what());
  }
  RunConfig c;
  Section root(&doc, "");
  root.get("seed", c.seed);
  root.get("jobs", c.jobs);
  {
    Section d = root.sub("data");
    d.get_enum("source", c.data.source);
    read_synthetic(d.sub("synthetic"), c.data.synthetic);
    d.get("manifest", c.data.manifest);
    d.get("train_classes", c.data.train_classes);
    d.finish();
  }
  auto& f = c.fsar;
  {
    Section r = root.sub("representation");
    Section g = r.sub("grid");
    g.get("eta_az", f.representation.grid.eta_az);
    g.get("eta_alt", f.representation.grid.eta_alt);
    g.get_degrees("delta_az_deg", f.representation.grid.delta_az);
    g.get_degrees("delta_alt_deg", f.representation.grid.delta_alt);
    g.finish();
    Section v = r.sub("view");
    v.get_enum("mode", f.representation.view.mode);
    v.get("camera_distance", f.representation.view.camera_distance);
    v.get("camera_height", f.representation.view.camera_height);
    v.finish();
    Section b = r.sub("blocks");
    b.get("block_length", f.representation.blocks.block_length);
    b.get("stride", f.representation.blocks.stride);
    b.finish();
    r.get("d_prime", f.representation.d_prime);
    r.finish();
  }
  {
    Section e = root.sub("episodes");
    e.get("n_way", f.episodes.n_way);
    e.get("z_shot", f.episodes.z_shot);
    e.get("batch", f.episodes.batch);
    e.finish();
  }
  {
    Section s = root.sub("supervised");
    s.get("iterations", f.supervised.iterations);
    s.get("learning_rate", f.supervised.learning_rate);
    s.get("weight_decay", f.supervised.weight_decay);
    s.get("momentum", f.supervised.momentum);
    s.get("beta", f.supervised.loss.beta);
    read_aligner(s.sub("aligner"), f.supervised.aligner);
    s.finish();
  }
  {
    Section u = root.sub("unsupervised");
    u.get("iterations", f.unsupervised.iterations);
    u.get("dictionary_size", f.unsupervised.dictionary_size);
    u.get("tau_star", f.unsupervised.tau_star);
    u.get("dic_iter", f.unsupervised.dic_iter);
    u.get("omega_dl", f.unsupervised.omega_dl);
    u.get("omega_en", f.unsupervised.omega_en);
    u.get("init_noise", f.unsupervised.init_noise);
    read_coder(u.sub("coder"), f.unsupervised.coder);
    u.finish();
  }
  {
    Section s = root.sub("fusion");
    s.get_enum("strategy", f.fusion.strategy);
    s.get("iterations", f.fusion.iterations);
    s.get("rho", f.fusion.rho);
    s.get("lambda", f.fusion.lambda);
    s.get_enum("code_distance", f.fusion.code_distance);
    s.finish();
  }
  {
    Section e = root.sub("evaluation");
    e.get("episodes", c.evaluation.episodes);
    e.get("n_way", c.evaluation.n_way);
    e.get("z_shot", c.evaluation.z_shot);
    e.get_enum("classifier", c.evaluation.classifier);
    e.get("rho", c.evaluation.rho);
    e.get_enum("code_distance", c.evaluation.code_distance);
    e.get("seeds", c.evaluation.seeds);
    e.finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path), path);
}

std::string to_json_text(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t model_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("jobs");
  j.erase("evaluation");
  return fnv1a(j.dump());
}

LoadedData load_data(const DataConfig& cfg, const std::string& base_dir) {
  cfg.validate();
  LoadedData out;
  if (cfg.source == DataSource::Synthetic) {
    out.corpus = fsar::make_synthetic_corpus(cfg.synthetic);
  } else {
    namespace fs = std::filesystem;
    const fs::path manifest = fs::path(base_dir) / cfg.manifest;
    const std::string text = read_file(manifest.string());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const std::size_t comma = line.rfind(',');
      const std::string where = manifest.string() + ":" + std::to_string(line_no);
      require(comma != std::string::npos, ErrorKind::Parse, where + ": expected path,label");
      int label = 0;
      const std::string lab = line.substr(comma + 1);
      const auto r = std::from_chars(lab.data(), lab.data() + lab.size(), label);
      require(r.ec == std::errc() && r.ptr == lab.data() + lab.size() && label >= 0,
              ErrorKind::Parse, where + ": label must be a nonnegative integer");
      fs::path seq_path = line.substr(0, comma);
      if (seq_path.is_relative()) seq_path = manifest.parent_path() / seq_path;
      out.corpus.push_back({parse_sequence(seq_path.string()), label, line.substr(0, comma)});
    }
    require(!out.corpus.empty(), ErrorKind::Parse, manifest.string() + ": no sequences");
  }
  out.split = fsar::split_by_class(out.corpus, cfg.train_classes);
  return out;
}

}  // namespace jeanie::io
