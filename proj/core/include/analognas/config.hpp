#pragma once

// Run configuration: one JSON document holding the dataset source, macro,
// training, quantization, hardware and HWT settings, pipeline scope and
// output paths. Ships as two presets, desk and paper.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "analognas/analog.hpp"
#include "analognas/nn/dataset.hpp"
#include "analognas/nn/network.hpp"
#include "analognas/nn/quant.hpp"
#include "analognas/nn/train.hpp"
#include "analognas/search_space.hpp"

namespace analognas {

inline constexpr std::string_view kConfigEnvVar = "ANALOGNAS_CONFIG";

enum class DatasetSource { synthetic, cifar10 };

struct DatasetConfig {
  DatasetSource source = DatasetSource::synthetic;
  nn::SynthSpec synthetic;
  std::string cifar10_dir;  // data_batch_{1..5}.bin and test_batch.bin
  std::size_t train_limit = 0;  // 0 keeps every sample
  std::size_t test_limit = 0;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

// Everything that determines a benchmark record besides the architecture.
struct PipelineConfig {
  nn::MacroConfig macro;
  nn::TrainConfig train;
  nn::QuantScheme quant;
  nn::QatConfig qat;
  analog::HardwareConfig hw;
  analog::HwtConfig hwt;

  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

enum class ScopeKind { list, sample, subspace, full };

// Which architectures build-bench evaluates. A subspace pattern such as
// "(2,0,3,*,*,*)" fixes some edges and enumerates every op on the rest.
struct ScopeConfig {
  ScopeKind kind = ScopeKind::subspace;
  std::vector<space::ArchIndex> archs;
  int sample_count = 125;
  std::uint64_t sample_seed = 0;
  std::string pattern = "(2,0,3,*,*,*)";

  friend bool operator==(const ScopeConfig&, const ScopeConfig&) = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  PipelineConfig pipeline;
  ScopeConfig scope;
  std::string output = "benchmark.jsonl";

  static RunConfig desk();
  static RunConfig paper();
  static RunConfig preset(std::string_view name);  // "desk" or "paper"
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string to_json(const RunConfig& cfg, int indent = 2);
// Missing keys keep the desk defaults; unknown keys are a ParseError.
RunConfig run_config_from_json(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

// Canonical (compact, fixed key order) JSON of the parts that determine a
// record: seed, dataset and pipeline. Scope and output paths are excluded so
// worker partitions share a digest.
std::string canonical_experiment_json(const RunConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes);
std::string digest_hex(std::uint64_t digest);
std::string config_digest(const RunConfig& cfg);

// Architectures selected by the scope, ascending by ArchIndex.
std::vector<space::CellEncoding> resolve_scope(const ScopeConfig& scope);

// A subspace pattern: fixed op codes or '*' per edge.
struct SubspacePattern {
  std::array<int, space::kNumEdges> fixed{};  // -1 marks a free edge

  static SubspacePattern parse(std::string_view text);
  std::string to_string() const;
  std::vector<int> free_edges() const;
  bool contains(const space::CellEncoding& enc) const;
  std::vector<space::CellEncoding> enumerate() const;
};

// Loads or synthesizes the dataset; normalizes both splits with training-set
// statistics when the training config asks for it.
nn::DatasetPair load_dataset(const RunConfig& cfg);

}  // namespace analognas
