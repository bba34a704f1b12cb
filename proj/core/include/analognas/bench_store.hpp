#pragma once

// Per-architecture evaluation pipeline and the JSON-lines benchmark table.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "analognas/config.hpp"
#include "analognas/search_space.hpp"

namespace analognas::bench {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kCodeVersion = "0.1.0";

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

// Accuracies are percentages in [0, 100].
struct BenchmarkRecord {
  space::CellEncoding arch;
  space::ArchIndex index = 0;
  double baseline_acc = 0.0;
  double ptq_acc = 0.0;
  double qat_acc = 0.0;
  MeanStd noisy_acc;
  MeanStd analog_acc;
  std::array<MeanStd, 4> noisy_drift{};
  std::array<MeanStd, 4> analog_drift{};
  std::uint64_t param_count = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  int schema_version = kSchemaVersion;
  std::vector<std::string> provenance;

  // Analog accuracy at 60 s minus analog accuracy at 30 d.
  double avm() const { return analog_drift[0].mean - analog_drift[3].mean; }
  friend bool operator==(const BenchmarkRecord&, const BenchmarkRecord&) = default;
};

// Throws ValidationError naming the first field that breaks its invariant.
void validate_record(const BenchmarkRecord& r, std::size_t line = 0);

struct TableMetadata {
  int schema_version = kSchemaVersion;
  std::string code_version{kCodeVersion};
  std::string config_digest;
  std::string config_json;  // canonical experiment JSON

  static TableMetadata from_config(const RunConfig& cfg);
  friend bool operator==(const TableMetadata&, const TableMetadata&) = default;
};

class BenchmarkTable {
 public:
  BenchmarkTable() = default;
  explicit BenchmarkTable(TableMetadata meta) : meta_(std::move(meta)) {}

  const TableMetadata& metadata() const { return meta_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool contains(space::ArchIndex index) const { return records_.count(index) != 0; }

  // Throws MetadataMismatchError when the record's digest differs from the
  // table's, MergeConflictError when a different record has the same index.
  void put(BenchmarkRecord r);
  const BenchmarkRecord& query(space::ArchIndex index) const;  // NotFoundError
  const BenchmarkRecord& query(const space::CellEncoding& enc) const;

  // Ascending ArchIndex.
  std::vector<const BenchmarkRecord*> records() const;
  const std::map<space::ArchIndex, BenchmarkRecord>& map() const { return records_; }

  friend bool operator==(const BenchmarkTable&, const BenchmarkTable&) = default;

 private:
  TableMetadata meta_;
  std::map<space::ArchIndex, BenchmarkRecord> records_;
};

// Train -> PTQ -> QAT -> program and evaluate (noisy branch, t0 and every
// drift time) -> HWT -> program and evaluate (analog branch). Any failure is
// rethrown as StageError naming the stage.
struct PipelineStages {
  std::function<void(std::string_view stage)> on_stage;
};

BenchmarkRecord run_full_pipeline(const space::CellEncoding& enc, const nn::DatasetPair& data, const RunConfig& cfg,
                                  const PipelineStages* hooks = nullptr);

void save(const BenchmarkTable& table, std::ostream& out);
void save(const BenchmarkTable& table, const std::filesystem::path& path);
BenchmarkTable load(std::istream& in);
BenchmarkTable load(const std::filesystem::path& path);

// Union of partitions with identical metadata; identical duplicates collapse.
BenchmarkTable merge(const std::vector<BenchmarkTable>& parts);

// Field names accepted by export_csv and field_value.
const std::vector<std::string>& exportable_fields();
double field_value(const BenchmarkRecord& r, std::string_view field);
void export_csv(const BenchmarkTable& table, const std::vector<std::string>& fields, std::ostream& out);

}  // namespace analognas::bench
