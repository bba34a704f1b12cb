#pragma once

// Statistics over a benchmark table: rank correlation, distribution
// summaries, robustness labels, operation and path statistics, HWT groups and
// graph features.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "analognas/bench_store.hpp"
#include "analognas/search_space.hpp"

namespace analognas::analysis {

// Marker for values that are mathematically undefined (tau of an all-tied
// list, share over an empty group, improvement over zero accuracy).
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();
inline bool is_undefined(double v) { return std::isnan(v); }

// Tau-b with tie correction in O(n log n). Throws RangeError on length
// mismatch, n < 2 or NaN input; returns kUndefined if either list is all tied.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);
// Pair-counting reference, O(n^2).
double kendall_tau_b_pairwise(std::span<const double> x, std::span<const double> y);

struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

// Linear interpolation between closest ranks: position h = (n - 1) p on the
// sorted values.
double quantile(std::span<const double> values, double p);
SummaryStats summarize(std::span<const double> values);  // EmptyInputError

enum class Robustness { robust, non_robust, excluded };
std::string_view robustness_name(Robustness r);

struct NoiseRobustnessOptions {
  double baseline_min = 90.0;  // strict: baseline > baseline_min
  double quantile = 0.25;
  std::optional<double> fixed_threshold;  // replaces the quantile rule
};

struct NoiseLabel {
  space::ArchIndex index = 0;
  double drop = 0.0;  // baseline - noisy
  Robustness tag = Robustness::excluded;
};

struct NoiseRobustness {
  double threshold = 0.0;
  NoiseRobustnessOptions options;
  std::vector<NoiseLabel> labels;  // every record, ascending index
  std::size_t robust_count() const;
};

NoiseRobustness classify_noise_robustness(const bench::BenchmarkTable& table, const NoiseRobustnessOptions& opt = {});

enum class Branch { noisy, analog };
std::string_view branch_name(Branch b);

struct DriftThresholds {
  std::array<double, 4> noisy{5.0, 10.0, 16.0, 25.0};
  std::array<double, 4> analog{2.5, 3.5, 4.5, 7.0};
  const std::array<double, 4>& of(Branch b) const { return b == Branch::noisy ? noisy : analog; }
  void validate() const;  // positive, non-decreasing
};

// What each drift drop is measured from.
enum class DriftReference { baseline, branch_t0 };

struct DriftRobustnessOptions {
  DriftThresholds thresholds;
  double baseline_min = 80.0;  // strict
  double noisy_min = 70.0;     // strict
  DriftReference noisy_reference = DriftReference::baseline;
  DriftReference analog_reference = DriftReference::branch_t0;
};

struct DriftLabel {
  space::ArchIndex index = 0;
  std::array<double, 4> drop{};
  std::array<Robustness, 4> tag{};
};

struct DriftRobustness {
  Branch branch = Branch::noisy;
  DriftRobustnessOptions options;
  std::vector<DriftLabel> labels;            // every record, ascending index
  std::array<SummaryStats, 4> drop_summary;  // over the filtered set
  std::array<std::size_t, 4> robust_count{};
  std::size_t filtered = 0;
};

// Drop of one record at every horizon under the given reference.
std::array<double, 4> drift_drops(const bench::BenchmarkRecord& r, Branch b, DriftReference ref);

DriftRobustness classify_drift_robustness(const bench::BenchmarkTable& table, Branch branch,
                                          const DriftRobustnessOptions& opt = {});

enum class HwtGroup { non_robust, moderate, naturally_robust };
std::string_view hwt_group_name(HwtGroup g);
// < 20 non-robust, 20..70 moderate, > 70 naturally robust (on noisy accuracy).
HwtGroup hwt_group(double noisy_acc);

struct HwtRecord {
  space::ArchIndex index = 0;
  HwtGroup group = HwtGroup::moderate;
  double improvement = 0.0;  // percent; kUndefined when noisy accuracy is 0
  bool high_performing = false;
};

struct HwtGroupStats {
  std::size_t count = 0;
  std::optional<SummaryStats> analog;  // absent for an empty group
  double mean_improvement = kUndefined;
  std::size_t high_performing = 0;
};

struct HwtCategories {
  double high_performing_min = 80.0;
  std::vector<HwtRecord> records;
  std::array<HwtGroupStats, 3> groups;  // indexed by HwtGroup
  double mean_improvement = kUndefined;
  std::size_t undefined_improvements = 0;
};

HwtCategories hwt_categories(const bench::BenchmarkTable& table, double high_performing_min = 80.0);

struct OpStatistics {
  std::size_t architectures = 0;
  std::array<double, space::kNumOps> mean_share{};  // percent of the 6 edges
  std::array<std::array<std::size_t, 7>, space::kNumOps> count_histogram{};
  // Fraction of architectures with exactly c edges of an op that are robust;
  // kUndefined where no architecture has that count. Empty without labels.
  std::vector<std::array<double, 7>> robust_share;
};

// `robust` is empty or parallel to `group`.
OpStatistics op_statistics(std::span<const space::CellEncoding> group, std::span<const bool> robust = {});

struct PathFrequency {
  space::OpPath path;
  std::uint64_t count = 0;
};

// Most frequent live paths of the given length; ties ordered by path.
std::vector<PathFrequency> frequent_paths(std::span<const space::CellEncoding> group, int length,
                                          std::size_t top_k);

// Bitmask over op codes.
using OpSubset = std::uint8_t;
constexpr OpSubset subset_of(std::initializer_list<space::OpKind> ops) {
  OpSubset s = 0;
  for (auto op : ops) s = static_cast<OpSubset>(s | (1u << space::op_code(op)));
  return s;
}
std::string subset_name(OpSubset s);  // "{conv3,conv1}"

// Singletons, {conv3,conv1}, {skip,conv3}, every non-zeroize op, and all ops.
std::vector<OpSubset> default_subset_family();

// Unreachable min_path_len.
inline constexpr int kNoPath = 4;

struct SubsetFeatures {
  OpSubset subset = 0;
  int min_path_len = kNoPath;
  int max_op_on_path = 0;
  int input_out_degree = 0;
  int output_in_degree = 0;
  double mean_intermediate_degree = 0.0;
  int max_intermediate_degree = 0;
};

struct GrafFeatureVector {
  std::array<int, space::kNumOps> op_count{};
  std::vector<SubsetFeatures> subsets;

  std::vector<double> values() const;  // flattened in names() order
};

SubsetFeatures subset_features(const space::CellEncoding& enc, OpSubset s);
GrafFeatureVector graf_features(const space::CellEncoding& enc, std::span<const OpSubset> family);
std::vector<std::string> graf_feature_names(std::span<const OpSubset> family);

struct FeatureCorrelation {
  std::string feature;
  double tau = 0.0;
};

struct FeatureRanking {
  std::string target;
  std::vector<FeatureCorrelation> ranked;  // by |tau| descending, then name
  std::vector<std::string> skipped;        // undefined tau
};

// Targets: noisy_drop, hwt_improvement, noisy_drift_drop_<h>, analog_drift_drop_<h>
// with h one of 60s, 1h, 1d, 30d. Drift drops use the default references.
std::vector<std::string> correlation_targets();
double target_value(const bench::BenchmarkRecord& r, std::string_view target);

// Generic form: one row of feature values per sample.
FeatureRanking rank_features(const std::vector<std::string>& names, const std::vector<std::vector<double>>& rows,
                             std::span<const double> target, std::size_t top_k);
// Needs at least 10 records with a defined target.
FeatureRanking feature_correlations(const bench::BenchmarkTable& table, std::string_view target, std::size_t top_k,
                                    std::span<const OpSubset> family);

struct CorrelationMatrix {
  std::vector<std::string> fields;
  std::vector<std::vector<double>> tau;
};
CorrelationMatrix kendall_matrix(const bench::BenchmarkTable& table, const std::vector<std::string>& fields);

// CSV writers. Undefined values are written as NA.
void write_csv(const CorrelationMatrix& m, std::ostream& out);
void write_csv(const NoiseRobustness& r, std::ostream& out);
void write_csv(const DriftRobustness& r, std::ostream& out);
void write_csv(const HwtCategories& h, std::ostream& out);
void write_csv(const OpStatistics& s, std::ostream& out);
void write_csv(std::span<const PathFrequency> paths, std::ostream& out);
void write_csv(const FeatureRanking& r, std::ostream& out);
void write_summary_csv(const std::vector<std::pair<std::string, SummaryStats>>& rows, std::ostream& out);

}  // namespace analognas::analysis
