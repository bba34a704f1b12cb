#pragma once

// Architecture search strategies over a benchmark table or a live evaluator:
// exhaustive, random, regularized evolution, bootstrap-GBT Bayesian
// optimization, a path-encoded predictor-ensemble search, and a constrained
// surrogate-ranked evolution for analog deployment.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "analognas/bench_store.hpp"
#include "analognas/config.hpp"
#include "analognas/rng.hpp"
#include "analognas/search_space.hpp"

namespace analognas::search {

// AVM measured from the 60 s point (default) or from the undrifted analog
// accuracy.
enum class AvmReference { sixty_seconds, t0 };

struct ObjectiveSpec {
  std::string metric = "analog_1d";  // any bench::exportable_fields() accuracy
  AvmReference avm_reference = AvmReference::sixty_seconds;
};

double avm(const bench::BenchmarkRecord& r, AvmReference ref);

// What a single query returns.
struct Measurement {
  double value = 0.0;  // primary metric, maximized
  double avm = 0.0;
  std::uint64_t param_count = 0;
};

using Evaluator = std::function<Measurement(const space::CellEncoding&)>;

// Frozen-table evaluator; throws NotFoundError for a missing architecture.
Evaluator table_evaluator(const bench::BenchmarkTable& table, const ObjectiveSpec& spec = {});

// The set of encodings a strategy may propose.
class SearchDomain {
 public:
  explicit SearchDomain(SubspacePattern pattern);
  static SearchDomain full();
  static SearchDomain parse(std::string_view pattern);

  const SubspacePattern& pattern() const { return pattern_; }
  std::size_t size() const { return members_.size(); }
  const std::vector<space::CellEncoding>& members() const { return members_; }  // ascending index
  bool contains(const space::CellEncoding& enc) const { return pattern_.contains(enc); }
  const std::vector<int>& free_edges() const { return free_; }

  space::CellEncoding sample(Rng& rng) const;
  // One uniformly chosen free edge set to a uniformly chosen different op.
  space::CellEncoding mutate(const space::CellEncoding& enc, Rng& rng) const;

 private:
  SubspacePattern pattern_;
  std::vector<int> free_;
  std::vector<space::CellEncoding> members_;
};

struct TrajectoryStep {
  std::size_t step = 0;  // 1-based query number
  space::CellEncoding arch;
  Measurement measurement;
  double best_so_far = 0.0;
};

struct SearchResult {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  space::CellEncoding best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<TrajectoryStep> trajectory;
  std::size_t queries_used = 0;
  double elapsed_seconds = 0.0;
};

// Memoized, budgeted access to an evaluator. Repeated encodings are answered
// from the cache without spending budget.
class QueryBudget {
 public:
  QueryBudget(Evaluator eval, std::size_t budget);

  bool exhausted() const { return used_ >= budget_; }
  std::size_t used() const { return used_; }
  std::size_t budget() const { return budget_; }
  bool seen(const space::CellEncoding& enc) const;
  // nullopt if the encoding is new and the budget is spent.
  std::optional<Measurement> query(const space::CellEncoding& enc);
  std::optional<Measurement> cached(const space::CellEncoding& enc) const;

  const std::vector<TrajectoryStep>& trajectory() const { return trajectory_; }
  // Best by value; ties keep the earlier query.
  const TrajectoryStep* best() const;

 private:
  Evaluator eval_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::vector<std::optional<Measurement>> cache_;  // by ArchIndex
  std::vector<TrajectoryStep> trajectory_;
};

// Scans the whole domain; ties go to the lowest ArchIndex. Throws
// IncompleteTableError listing domain members missing from the table.
SearchResult exhaustive_search(const bench::BenchmarkTable& table, const SearchDomain& domain,
                               const ObjectiveSpec& spec = {});

SearchResult random_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget, std::uint64_t seed);

struct EvolutionConfig {
  std::size_t population = 20;
  std::size_t tournament = 5;
  // Probability that a step mutates the tournament winner; otherwise the
  // child is a fresh uniform sample.
  double mutate_rate = 1.0;
  void validate(std::size_t budget) const;
};

SearchResult evolutionary_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget,
                                 std::uint64_t seed, const EvolutionConfig& cfg = {});

// Gradient-boosted regression trees under squared loss.
struct GbtConfig {
  int rounds = 100;
  int max_depth = 3;
  double shrinkage = 0.1;
  int min_leaf = 1;
  void validate() const;
};

struct GbtTree {
  struct Node {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;
  double predict(std::span<const double> x) const;
};

struct GbtSurrogate {
  double base = 0.0;
  double shrinkage = 0.1;
  std::vector<GbtTree> trees;
  std::vector<double> train_rmse;  // after 0, 1, ..., trees.size() rounds

  double predict(std::span<const double> x) const;
  double predict(const space::CellEncoding& enc) const;
};

// 6 edges x 5 ops.
std::vector<double> one_hot(const space::CellEncoding& enc);

GbtSurrogate fit_gbt(const std::vector<std::vector<double>>& x, std::span<const double> y, const GbtConfig& cfg = {});
GbtSurrogate fit_gbt(std::span<const space::CellEncoding> archs, std::span<const double> y, const GbtConfig& cfg = {});

struct BayesConfig {
  std::size_t initial = 10;
  std::size_t ensemble = 5;  // bootstrap replicates
  double kappa = 1.0;
  std::size_t pool = 200;  // candidates scored per step; whole remainder if smaller
  GbtConfig gbt{50, 3, 0.2, 1};
};

SearchResult bayesian_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget, std::uint64_t seed,
                             const BayesConfig& cfg = {});

// Binary indicator per live op path of length 1-3 (ops other than zeroize):
// 4 + 16 + 64 features.
std::vector<double> path_encoding(const space::CellEncoding& enc);
std::vector<std::string> path_encoding_names();

struct BananasConfig {
  std::size_t initial = 10;
  std::size_t ensemble = 5;
  std::size_t hidden = 32;
  int epochs = 200;
  double learning_rate = 0.01;
  std::size_t candidates = 100;  // mutations of the archive's best
  std::size_t parents = 5;
};

SearchResult bananas_style_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget,
                                  std::uint64_t seed, const BananasConfig& cfg = {});

enum class AimcVariant { analognas, ga_imc };

struct AimcConfig {
  AimcVariant variant = AimcVariant::analognas;
  double avm_bound = std::numeric_limits<double>::infinity();
  std::optional<std::uint64_t> param_cap;
  // Parameter count of an unevaluated candidate; required with param_cap.
  std::function<std::uint64_t(const space::CellEncoding&)> params;
  std::size_t population = 20;
  std::size_t tournament = 5;
  std::size_t candidates = 50;  // children ranked by the surrogate per generation
  std::size_t evaluate_top = 1;  // true evaluations per generation
  GbtConfig gbt{50, 3, 0.2, 1};

  static AimcConfig defaults(AimcVariant v);
};

// Best evaluated architecture meeting both constraints. Throws
// InfeasibleError when the parameter cap excludes the whole domain or no
// evaluated architecture satisfies the constraints.
SearchResult aimc_evolutionary_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget,
                                      std::uint64_t seed, const AimcConfig& cfg);

std::vector<std::string> method_names();
// Dispatch by name on a frozen table; throws RangeError for an unknown name.
SearchResult run_method(std::string_view method, const bench::BenchmarkTable& table, const SearchDomain& domain,
                        std::size_t budget, std::uint64_t seed, const ObjectiveSpec& spec = {},
                        const AimcConfig* aimc = nullptr);

struct ComparisonRow {
  std::string method;
  std::size_t budget = 0;
  std::size_t seeds = 0;
  bench::MeanStd baseline, noisy, one_day, avm, params, search_seconds;
};

std::vector<ComparisonRow> compare_methods(const std::vector<std::string>& methods, const bench::BenchmarkTable& table,
                                           const SearchDomain& domain, const std::vector<std::size_t>& budgets,
                                           const std::vector<std::uint64_t>& seeds, const ObjectiveSpec& spec = {},
                                           const AimcConfig* aimc = nullptr);

void write_comparison_csv(std::span<const ComparisonRow> rows, std::ostream& out);
// One JSON object per line: step, index, arch, value, avm, param_count, best.
void write_trajectory_jsonl(const SearchResult& r, std::ostream& out);
// Whole result as one JSON document.
std::string to_json(const SearchResult& r);

}  // namespace analognas::search
