#include <bit>
#include <charconv>
#include <cstring>

#include "jeanie/checkpoint.hpp"
#include "jeanie/error.hpp"
#include "jeanie/io.hpp"

namespace jeanie::io {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr std::string_view kMagic = "JEANIECK";
constexpr std::uint8_t kTensor = 1;
constexpr std::uint8_t kText = 2;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_bytes(std::string& out, std::string_view s) { out.append(s.data(), s.size()); }

class Reader {
 public:
  Reader(std::string_view bytes, std::string_view source) : bytes_(bytes), source_(source) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    const std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::Parse, std::string(source_) + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) error("truncated checkpoint");
  }

  std::string_view bytes_;
  std::string_view source_;
  std::size_t pos_ = 0;
};

const Eigen::MatrixXd& tensor(const Checkpoint& ck, const std::string& name) {
  const auto it = ck.tensors.find(name);
  require(it != ck.tensors.end(), ErrorKind::CheckpointMismatch, "checkpoint lacks " + name);
  return it->second;
}

const std::string& text(const Checkpoint& ck, const std::string& name) {
  const auto it = ck.texts.find(name);
  require(it != ck.texts.end(), ErrorKind::CheckpointMismatch, "checkpoint lacks " + name);
  return it->second;
}

std::size_t text_size(const Checkpoint& ck, const std::string& name) {
  const std::string& s = text(ck, name);
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  require(r.ec == std::errc() && r.ptr == s.data() + s.size(), ErrorKind::CheckpointMismatch,
          "checkpoint entry " + name + " is not an integer");
  return v;
}

encoder::LinearBlockEncoder encoder_from(const Checkpoint& ck, const std::string& prefix,
                                         std::size_t joints, std::size_t block_length) {
  const Eigen::MatrixXd& W = tensor(ck, prefix + ".W");
  const Eigen::MatrixXd& b = tensor(ck, prefix + ".b");
  require(b.cols() == 1 && b.rows() == W.rows(), ErrorKind::CheckpointMismatch,
          prefix + " bias does not match its weights");
  return encoder::LinearBlockEncoder(W, b.col(0), joints, block_length);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out;
  put_bytes(out, kMagic);
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint64_t>(out, ck.config_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size() + ck.texts.size()));
  // Merge both maps by name so the file order is one sorted sequence.
  auto ti = ck.tensors.begin();
  auto xi = ck.texts.begin();
  while (ti != ck.tensors.end() || xi != ck.texts.end()) {
    const bool take_tensor = xi == ck.texts.end() || (ti != ck.tensors.end() && ti->first < xi->first);
    const std::string& name = take_tensor ? ti->first : xi->first;
    put<std::uint8_t>(out, take_tensor ? kTensor : kText);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    put_bytes(out, name);
    if (take_tensor) {
      const Eigen::MatrixXd& m = ti->second;
      put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
      put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
      for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
      ++ti;
    } else {
      put<std::uint64_t>(out, static_cast<std::uint64_t>(xi->second.size()));
      put_bytes(out, xi->second);
      ++xi;
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes, std::string_view source) {
  Reader r(bytes, source);
  if (bytes.size() < kMagic.size() || r.take(kMagic.size()) != kMagic) r.error("not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion) r.error("unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config_hash = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto type = r.get<std::uint8_t>();
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.take(name_len));
    if (ck.tensors.count(name) || ck.texts.count(name)) r.error("duplicate entry " + name);
    if (type == kTensor) {
      const auto rows = r.get<std::uint64_t>();
      const auto cols = r.get<std::uint64_t>();
      if (cols != 0 && rows > (bytes.size() / sizeof(double)) / cols) r.error("tensor too large");
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.get<double>();
      ck.tensors.emplace(std::move(name), std::move(m));
    } else if (type == kText) {
      const auto len = r.get<std::uint64_t>();
      ck.texts.emplace(std::move(name), std::string(r.take(static_cast<std::size_t>(len))));
    } else {
      r.error("unknown entry type " + std::to_string(type));
    }
  }
  if (!r.done()) r.error("trailing bytes");
  return ck;
}

void write_checkpoint(const Checkpoint& ck, const std::string& path) {
  write_file(path, serialize_checkpoint(ck));
}

Checkpoint read_checkpoint(const std::string& path) {
  return deserialize_checkpoint(read_file(path), path);
}

Checkpoint make_checkpoint(const fsar::Model& model, const RunConfig& cfg,
                           const fsar::RngStreams& rng, std::string_view mode) {
  Checkpoint ck;
  ck.config_hash = model_hash(cfg);
  ck.tensors["encoder.W"] = model.encoder.weights();
  ck.tensors["encoder.b"] = model.encoder.bias();
  ck.tensors["encoder_unsup.W"] = model.unsup_encoder.weights();
  ck.tensors["encoder_unsup.b"] = model.unsup_encoder.bias();
  if (model.dictionary) {
    ck.tensors["dictionary.M"] = model.dictionary->atoms();
    ck.texts["dictionary.tau_star"] = std::to_string(model.dictionary->tau_star());
  }
  ck.texts["config"] = to_json_text(cfg);
  ck.texts["rng"] = rng.serialize();
  ck.texts["mode"] = std::string(mode);
  ck.texts["joints"] = std::to_string(model.encoder.joints());
  ck.texts["block_length"] = std::to_string(model.encoder.block_length());
  return ck;
}

RunConfig config_from_checkpoint(const Checkpoint& ck) {
  return parse_run_config(text(ck, "config"), "checkpoint config");
}

fsar::Model model_from_checkpoint(const Checkpoint& ck, const RunConfig& expected) {
  require(ck.config_hash == model_hash(expected), ErrorKind::CheckpointMismatch,
          "checkpoint was trained with a different configuration");
  const std::size_t joints = text_size(ck, "joints");
  const std::size_t block_length = text_size(ck, "block_length");
  fsar::Model model{encoder_from(ck, "encoder", joints, block_length),
                    encoder_from(ck, "encoder_unsup", joints, block_length),
                    std::nullopt};
  if (ck.tensors.count("dictionary.M")) {
    const Eigen::MatrixXd& M = tensor(ck, "dictionary.M");
    const auto tau_star = static_cast<int>(text_size(ck, "dictionary.tau_star"));
    require(tau_star > 0 && M.rows() % tau_star == 0, ErrorKind::CheckpointMismatch,
            "dictionary shape does not match tau_star");
    model.dictionary = coding::Dictionary(M, static_cast<int>(M.rows()) / tau_star, tau_star);
  }
  return model;
}

}  // namespace jeanie::io
