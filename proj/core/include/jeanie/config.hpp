#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "jeanie/fsar.hpp"

namespace jeanie::io {

enum class DataSource { Synthetic, Manifest };

/// Where sequences come from. A manifest is a CSV file with one `path,label`
/// row per sequence; relative paths are resolved against the manifest's
/// directory. Labels below `train_classes` form the training pool, the rest
/// the test pool.
struct DataConfig {
  DataSource source = DataSource::Synthetic;
  fsar::SyntheticConfig synthetic;
  std::string manifest;
  int train_classes = 5;

  void validate() const;
};

/// Everything a run needs as one document. Missing keys keep their defaults;
/// unknown keys are rejected so typos do not pass silently.
struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  DataConfig data;
  fsar::FsarConfig fsar;
  fsar::EvaluationConfig evaluation;

  void validate() const;
};

RunConfig parse_run_config(std::string_view json_text, std::string_view source = "<config>");
RunConfig load_run_config(const std::string& path);
std::string to_json_text(const RunConfig& cfg);

/// FNV-1a over the canonical JSON of everything that shapes a trained model
/// (jobs and the evaluation section are left out).
std::uint64_t model_hash(const RunConfig& cfg);

/// Config-file spellings of the enums ("jeanie", "rbf", "lcsa", ...). The
/// parser throws a config error listing the accepted names.
template <class E>
std::string_view enum_name(E value);
template <class E>
E enum_from(std::string_view name);
template <class E>
std::string enum_choices();

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// The configured corpus, with the split into training and test pools.
struct LoadedData {
  fsar::Corpus corpus;
  fsar::Split split;
};
LoadedData load_data(const DataConfig& cfg, const std::string& base_dir = ".");

}  // namespace jeanie::io
