#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "jeanie/config.hpp"
#include "jeanie/fsar.hpp"

namespace jeanie::io {

/// Binary parameter file, little-endian:
///
///   "JEANIECK"            8-byte magic
///   u32 version           currently 1
///   u64 config_hash       model_hash() of the run that produced it
///   u32 entry_count
///   entries, sorted by name:
///     u8  type            1 = f64 tensor, 2 = text
///     u32 name_length, name bytes
///     tensor: u64 rows, u64 cols, rows*cols f64 in column-major order
///     text:   u64 length, bytes
///
/// Model entries: encoder.W, encoder.b, encoder_unsup.W, encoder_unsup.b,
/// optional dictionary.M with text dictionary.tau_star, plus texts config
/// (the run config JSON), rng (stream states after training), mode, joints
/// and block_length.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t config_hash = 0;
  std::map<std::string, Eigen::MatrixXd> tensors;
  std::map<std::string, std::string> texts;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(std::string_view bytes, std::string_view source = "<checkpoint>");
void write_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const fsar::Model& model, const RunConfig& cfg,
                           const fsar::RngStreams& rng, std::string_view mode);

/// Rebuilds the model; throws a checkpoint-mismatch error when the hash of
/// `expected` differs from the stored one.
fsar::Model model_from_checkpoint(const Checkpoint& ck, const RunConfig& expected);

/// The run config stored inside the checkpoint.
RunConfig config_from_checkpoint(const Checkpoint& ck);

}  // namespace jeanie::io
