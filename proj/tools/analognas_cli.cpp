// analognas: search-space utilities, benchmark construction, queries,
// analyses and architecture search from the command line.
//
// Exit codes: 0 success, 1 runtime error, 2 bad arguments or unknown
// strategy, 3 missing input file, 4 architecture not in the benchmark.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "analognas/analysis.hpp"
#include "analognas/bench_store.hpp"
#include "analognas/config.hpp"
#include "analognas/errors.hpp"
#include "analognas/nas_search.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace analognas;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2, kMissingFile = 3, kNotFound = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

space::CellEncoding parse_arch(const std::string& text) {
  try {
    return space::parse_architecture(text);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

bench::BenchmarkTable load_table(const std::string& path) {
  if (!fs::exists(path)) throw FileNotFoundError("benchmark file not found: " + path);
  return bench::load(fs::path(path));
}

// Output file or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    file_.open(path, std::ios::binary);
    if (!file_) throw std::runtime_error("cannot write " + path);
  }
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void digest_comment(std::ostream& out, const bench::BenchmarkTable& t) {
  out << "# config_digest: " << t.metadata().config_digest << '\n';
}

json path_list_json(const space::CellEncoding& enc) {
  json a = json::array();
  for (const auto& p : space::extract_paths(enc)) a.push_back(p.to_string());
  return a;
}

// Smallest subspace pattern containing every record of the table.
search::SearchDomain table_domain(const bench::BenchmarkTable& t) {
  if (t.empty()) throw std::runtime_error("benchmark table is empty");
  SubspacePattern p;
  const auto recs = t.records();
  for (int e = 0; e < space::kNumEdges; ++e) {
    const auto op = recs.front()->arch.op(e);
    bool fixed = true;
    for (const auto* r : recs) fixed = fixed && r->arch.op(e) == op;
    p.fixed[static_cast<std::size_t>(e)] = fixed ? space::op_code(op) : -1;
  }
  return search::SearchDomain(p);
}

RunConfig resolve_config(const std::string& path, const std::string& preset) {
  if (!path.empty()) return load_run_config(path);
  if (!preset.empty()) return RunConfig::preset(preset);
  if (const char* env = std::getenv(std::string(kConfigEnvVar).c_str()); env && *env) return load_run_config(env);
  return RunConfig::desk();
}

std::string fmt1(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << v;
  return s.str();
}

// --- build-bench -------------------------------------------------------------

struct BuildOptions {
  std::string config, preset, output, scope, partition;
  std::vector<std::string> archs;
  int workers = 1;
  bool keep_going = false;
  bool quiet = false;
  std::optional<std::uint64_t> seed;
};

int build_bench(const BuildOptions& o) {
  RunConfig cfg = resolve_config(o.config, o.preset);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.output.empty()) cfg.output = o.output;
  if (!o.scope.empty()) {
    cfg.scope.kind = ScopeKind::subspace;
    cfg.scope.pattern = o.scope;
  }
  if (!o.archs.empty()) {
    cfg.scope.kind = ScopeKind::list;
    cfg.scope.archs.clear();
    for (const auto& a : o.archs) cfg.scope.archs.push_back(space::decode(parse_arch(a)));
  }
  cfg.validate();
  auto archs = resolve_scope(cfg.scope);
  if (!o.partition.empty()) {
    const auto parts = split(o.partition, '/');
    if (parts.size() != 2) throw UsageError("--partition expects k/N");
    const std::size_t k = std::stoul(parts[0]), n = std::stoul(parts[1]);
    if (n == 0 || k >= n) throw UsageError("--partition expects 0 <= k < N");
    std::vector<space::CellEncoding> mine;
    for (std::size_t i = k; i < archs.size(); i += n) mine.push_back(archs[i]);
    archs = std::move(mine);
  }
  const nn::DatasetPair data = load_dataset(cfg);
  const auto meta = bench::TableMetadata::from_config(cfg);

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(o.workers, archs.size()));
  std::vector<bench::BenchmarkTable> parts(workers, bench::BenchmarkTable(meta));
  std::vector<std::string> failures;
  std::exception_ptr fatal;
  std::mutex mu;
  std::size_t done = 0;
  const auto start = std::chrono::steady_clock::now();

  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < archs.size(); i += workers) {
      {
        std::lock_guard lock(mu);
        if (fatal) return;
      }
      const auto t0 = std::chrono::steady_clock::now();
      try {
        auto rec = bench::run_full_pipeline(archs[i], data, cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::lock_guard lock(mu);
        ++done;
        if (!o.quiet)
          std::cerr << "[" << done << "/" << archs.size() << "] " << rec.arch.to_tuple_string() << " baseline "
                    << fmt1(rec.baseline_acc) << " noisy " << fmt1(rec.noisy_acc.mean) << " analog "
                    << fmt1(rec.analog_acc.mean) << " (" << fmt1(secs) << " s)" << std::endl;
        parts[w].put(std::move(rec));
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        ++done;
        const std::string msg = archs[i].to_tuple_string() + ": " + e.what();
        if (!o.keep_going) {
          if (!fatal) fatal = std::current_exception();
          std::cerr << "error: " << msg << std::endl;
          return;
        }
        failures.push_back(msg);
        std::cerr << "[" << done << "/" << archs.size() << "] skipped " << msg << std::endl;
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  if (fatal) std::rethrow_exception(fatal);

  const auto table = bench::merge(parts);
  const fs::path out(cfg.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  bench::save(table, out);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "wrote " << table.size() << " records to " << out.string() << " (digest " << meta.config_digest
            << ", " << fmt1(total) << " s";
  if (!failures.empty()) std::cerr << ", " << failures.size() << " skipped";
  std::cerr << ")" << std::endl;
  return kOk;
}

// --- analyze -------------------------------------------------------------------

struct AnalyzeOptions {
  std::string bench, out_dir, kendall, output;
  double baseline_min = 90.0;
  double quantile = 0.25;
  std::optional<double> threshold;
  double drift_baseline_min = 80.0;
  double drift_noisy_min = 70.0;
  std::size_t top_k = 20;
  std::vector<std::string> targets;
};

template <typename F>
void write_file(const fs::path& path, const bench::BenchmarkTable& t, F&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  digest_comment(out, t);
  body(out);
}

int analyze(const AnalyzeOptions& o) {
  const auto table = load_table(o.bench);
  if (!o.kendall.empty()) {
    Sink sink(o.output);
    digest_comment(sink.out(), table);
    analysis::write_csv(analysis::kendall_matrix(table, split(o.kendall)), sink.out());
    return kOk;
  }
  const fs::path dir = o.out_dir.empty() ? fs::path("analysis") : fs::path(o.out_dir);
  fs::create_directories(dir);
  auto warn = [](const std::string& what, const std::exception& e) {
    std::cerr << "warning: " << what << " skipped: " << e.what() << std::endl;
  };

  write_file(dir / "kendall.csv", table, [&](std::ostream& out) {
    analysis::write_csv(analysis::kendall_matrix(table, {"baseline", "noisy", "analog", "ptq", "qat"}), out);
  });

  write_file(dir / "summary.csv", table, [&](std::ostream& out) {
    std::vector<std::pair<std::string, analysis::SummaryStats>> rows;
    for (const char* f : {"baseline", "ptq", "qat", "noisy", "analog", "noisy_drop", "avm"}) {
      std::vector<double> v;
      for (const auto* r : table.records()) v.push_back(bench::field_value(*r, f));
      rows.emplace_back(f, analysis::summarize(v));
    }
    for (auto b : {analysis::Branch::noisy, analysis::Branch::analog}) {
      const analysis::DriftRobustnessOptions d;
      const auto ref = b == analysis::Branch::noisy ? d.noisy_reference : d.analog_reference;
      for (std::size_t h = 0; h < 4; ++h) {
        std::vector<double> v;
        for (const auto* r : table.records()) v.push_back(analysis::drift_drops(*r, b, ref)[h]);
        rows.emplace_back(std::string(analysis::branch_name(b)) + "_drift_drop_" + std::string(analog::kDriftLabels[h]),
                          analysis::summarize(v));
      }
    }
    analysis::write_summary_csv(rows, out);
  });

  std::optional<analysis::NoiseRobustness> noise;
  try {
    analysis::NoiseRobustnessOptions n;
    n.baseline_min = o.baseline_min;
    n.quantile = o.quantile;
    n.fixed_threshold = o.threshold;
    noise = analysis::classify_noise_robustness(table, n);
    write_file(dir / "noise_robustness.csv", table, [&](std::ostream& out) { analysis::write_csv(*noise, out); });
  } catch (const EmptyInputError& e) {
    warn("noise robustness", e);
  }

  for (auto b : {analysis::Branch::noisy, analysis::Branch::analog}) {
    try {
      analysis::DriftRobustnessOptions d;
      d.baseline_min = o.drift_baseline_min;
      d.noisy_min = o.drift_noisy_min;
      const auto res = analysis::classify_drift_robustness(table, b, d);
      write_file(dir / ("drift_" + std::string(analysis::branch_name(b)) + ".csv"), table,
                 [&](std::ostream& out) { analysis::write_csv(res, out); });
    } catch (const EmptyInputError& e) {
      warn(std::string(analysis::branch_name(b)) + " drift robustness", e);
    }
  }

  write_file(dir / "hwt_categories.csv", table,
             [&](std::ostream& out) { analysis::write_csv(analysis::hwt_categories(table), out); });

  std::vector<space::CellEncoding> archs;
  std::vector<char> robust_flags;
  for (const auto* r : table.records()) archs.push_back(r->arch);
  std::vector<space::CellEncoding> filtered;
  std::vector<bool> robust;
  if (noise)
    for (std::size_t i = 0; i < noise->labels.size(); ++i)
      if (noise->labels[i].tag != analysis::Robustness::excluded) {
        filtered.push_back(archs[i]);
        robust.push_back(noise->labels[i].tag == analysis::Robustness::robust);
      }
  write_file(dir / "op_stats.csv", table, [&](std::ostream& out) {
    if (filtered.empty()) {
      analysis::write_csv(analysis::op_statistics(archs), out);
    } else {
      const std::unique_ptr<bool[]> flags(new bool[robust.size()]);
      for (std::size_t i = 0; i < robust.size(); ++i) flags[i] = robust[i];
      analysis::write_csv(analysis::op_statistics(filtered, std::span<const bool>(flags.get(), robust.size())), out);
    }
  });

  for (int len = 1; len <= 3; ++len)
    write_file(dir / ("paths_len" + std::to_string(len) + ".csv"), table, [&](std::ostream& out) {
      const auto paths = analysis::frequent_paths(archs, len, o.top_k);
      analysis::write_csv(std::span<const analysis::PathFrequency>(paths), out);
    });

  const auto family = analysis::default_subset_family();
  const auto targets = o.targets.empty() ? std::vector<std::string>{"noisy_drop", "hwt_improvement",
                                                                    "analog_drift_drop_30d"}
                                         : o.targets;
  for (const auto& target : targets) {
    try {
      const auto ranking = analysis::feature_correlations(table, target, o.top_k, family);
      write_file(dir / ("graf_" + target + ".csv"), table, [&](std::ostream& out) { analysis::write_csv(ranking, out); });
    } catch (const EmptyInputError& e) {
      warn("feature ranking for " + target, e);
    }
  }
  std::cerr << "wrote analysis CSVs to " << dir.string() << std::endl;
  return kOk;
}

// --- search ------------------------------------------------------------------

struct SearchOptions {
  std::string bench, method = "random", metric = "analog_1d", domain, output, trajectory;
  std::size_t budget = 40;
  std::uint64_t seed = 0;
  std::optional<double> avm_bound;
  std::optional<std::uint64_t> param_cap;
};

int run_search(const SearchOptions& o) {
  const auto names = search::method_names();
  if (std::find(names.begin(), names.end(), o.method) == names.end())
    throw UsageError("unknown search method '" + o.method + "'");
  const auto table = load_table(o.bench);
  const auto domain = o.domain.empty() ? table_domain(table) : search::SearchDomain::parse(o.domain);
  search::ObjectiveSpec spec;
  spec.metric = o.metric;
  std::optional<search::AimcConfig> aimc;
  if (o.avm_bound || o.param_cap) {
    aimc = search::AimcConfig::defaults(search::AimcVariant::analognas);
    if (o.avm_bound) aimc->avm_bound = *o.avm_bound;
    aimc->param_cap = o.param_cap;
  }
  const auto result = search::run_method(o.method, table, domain, o.budget, o.seed, spec, aimc ? &*aimc : nullptr);
  json j = json::parse(search::to_json(result));
  j["config_digest"] = table.metadata().config_digest;
  j["domain"] = domain.pattern().to_string();
  j["metric"] = spec.metric;
  Sink sink(o.output);
  sink.out() << j.dump(2) << '\n';
  if (!o.trajectory.empty()) {
    Sink traj(o.trajectory);
    search::write_trajectory_jsonl(result, traj.out());
  }
  return kOk;
}

struct CompareOptions {
  std::string bench, methods = "exhaustive,random,evolution,bayesian,bananas,analognas,ga_imc", budgets = "40",
                     seeds = "0,1,2,3,4,5,6,7,8,9", domain, output, metric = "analog_1d";
  std::optional<double> avm_bound;
};

int compare(const CompareOptions& o) {
  const auto table = load_table(o.bench);
  const auto domain = o.domain.empty() ? table_domain(table) : search::SearchDomain::parse(o.domain);
  std::vector<std::size_t> budgets;
  for (const auto& b : split(o.budgets)) budgets.push_back(std::stoul(b));
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split(o.seeds)) seeds.push_back(std::stoull(s));
  const auto methods = split(o.methods);
  const auto known = search::method_names();
  for (const auto& m : methods)
    if (std::find(known.begin(), known.end(), m) == known.end()) throw UsageError("unknown search method '" + m + "'");
  search::ObjectiveSpec spec;
  spec.metric = o.metric;
  std::optional<search::AimcConfig> aimc;
  if (o.avm_bound) {
    aimc = search::AimcConfig::defaults(search::AimcVariant::analognas);
    aimc->avm_bound = *o.avm_bound;
  }
  const auto rows = search::compare_methods(methods, table, domain, budgets, seeds, spec, aimc ? &*aimc : nullptr);
  Sink sink(o.output);
  digest_comment(sink.out(), table);
  search::write_comparison_csv(rows, sink.out());
  return kOk;
}

json record_json(const bench::BenchmarkRecord& r) {
  bench::BenchmarkTable t(bench::TableMetadata{bench::kSchemaVersion, std::string(bench::kCodeVersion), r.config_digest, ""});
  t.put(r);
  std::stringstream ss;
  bench::save(t, ss);
  std::string line;
  std::getline(ss, line);  // metadata
  std::getline(ss, line);
  return json::parse(line);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"analognas: NAS-Bench-201 analog robustness benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bench::kCodeVersion));

  bool json_out = false;
  std::uint64_t global_seed = 0;
  bool seed_given = false;

  // Space utilities.
  auto* enumerate = app.add_subcommand("enumerate", "List architectures (index, tuple, NB201 string)");
  bool count_only = false;
  std::string pattern = "(*,*,*,*,*,*)";
  enumerate->add_flag("--count", count_only, "Print only the number of architectures");
  enumerate->add_option("--pattern", pattern, "Subspace pattern such as (2,0,3,*,*,*)");
  enumerate->add_flag("--json", json_out, "JSON lines output");

  auto* encode = app.add_subcommand("encode", "ArchIndex to encoding");
  long long encode_index = 0;
  encode->add_option("index", encode_index, "Architecture index in [0, 15624]")->required();
  encode->add_flag("--json", json_out, "JSON output");

  auto* decode = app.add_subcommand("decode", "Encoding (tuple or NB201 string) to ArchIndex");
  std::string decode_arch;
  decode->add_option("arch", decode_arch, "Tuple, NB201 string or index")->required();
  decode->add_flag("--json", json_out, "JSON output");

  auto* paths = app.add_subcommand("paths", "Live input-to-output op paths of an architecture");
  std::string paths_arch;
  paths->add_option("arch", paths_arch, "Index, tuple or NB201 string")->required();
  paths->add_flag("--json", json_out, "JSON output");

  auto* config = app.add_subcommand("config", "Print a preset configuration");
  std::string config_preset = "desk";
  config->add_option("--preset", config_preset, "desk or paper");

  // Benchmark construction and access.
  auto* build = app.add_subcommand("build-bench", "Run the per-architecture pipeline over the configured scope");
  BuildOptions bo;
  build->add_option("--config", bo.config, "Run configuration JSON (default: $ANALOGNAS_CONFIG, else desk)");
  build->add_option("--preset", bo.preset, "desk or paper, used when --config is absent");
  build->add_option("--output,-o", bo.output, "Benchmark file (overrides the config)");
  build->add_option("--scope", bo.scope, "Subspace pattern overriding the config scope");
  build->add_option("--archs", bo.archs, "Explicit architectures overriding the scope")->delimiter(',');
  build->add_option("--workers", bo.workers, "Worker partitions run in parallel")->check(CLI::PositiveNumber);
  build->add_option("--partition", bo.partition, "Only build partition k of N (k/N) for external merging");
  build->add_flag("--keep-going", bo.keep_going, "Log and skip architectures whose pipeline fails");
  build->add_flag("--quiet", bo.quiet, "No per-architecture progress");

  auto* merge = app.add_subcommand("merge", "Merge benchmark partitions with identical configuration");
  std::vector<std::string> merge_inputs;
  std::string merge_output;
  merge->add_option("inputs", merge_inputs, "Partition files")->required();
  merge->add_option("--output,-o", merge_output, "Merged benchmark file")->required();

  auto* query = app.add_subcommand("query", "Print one benchmark record");
  std::string query_bench, query_arch;
  query->add_option("--bench,-b", query_bench, "Benchmark file")->required();
  query->add_option("arch", query_arch, "Index, tuple or NB201 string")->required();
  query->add_flag("--json", json_out, "JSON output");

  auto* analyze_cmd = app.add_subcommand("analyze", "Write the analysis CSVs");
  AnalyzeOptions ao;
  analyze_cmd->add_option("--bench,-b", ao.bench, "Benchmark file")->required();
  analyze_cmd->add_option("--out-dir", ao.out_dir, "Directory for the CSV files (default ./analysis)");
  analyze_cmd->add_option("--kendall", ao.kendall, "Only print the Kendall tau matrix of these fields");
  analyze_cmd->add_option("--output,-o", ao.output, "File for --kendall output (default stdout)");
  analyze_cmd->add_option("--baseline-min", ao.baseline_min, "Noise robustness pre-filter (baseline >)");
  analyze_cmd->add_option("--quantile", ao.quantile, "Noise drop quantile used as threshold")->check(CLI::Range(0.0, 1.0));
  analyze_cmd->add_option("--threshold", ao.threshold, "Fixed noise drop threshold instead of the quantile");
  analyze_cmd->add_option("--drift-baseline-min", ao.drift_baseline_min, "Drift pre-filter (baseline >)");
  analyze_cmd->add_option("--drift-noisy-min", ao.drift_noisy_min, "Drift pre-filter (noisy >)");
  analyze_cmd->add_option("--top-k", ao.top_k, "Rows kept in path and feature rankings");
  analyze_cmd->add_option("--targets", ao.targets, "Feature correlation targets")->delimiter(',');

  auto* search_cmd = app.add_subcommand("search", "Run one search strategy on a frozen benchmark");
  SearchOptions so;
  search_cmd->add_option("--bench,-b", so.bench, "Benchmark file")->required();
  search_cmd->add_option("--method,-m", so.method,
                         "exhaustive, random, evolution, bayesian, bananas, analognas or ga_imc");
  search_cmd->add_option("--budget", so.budget, "Maximum objective queries")->check(CLI::PositiveNumber);
  search_cmd->add_option("--metric", so.metric, "Objective field (default analog_1d)");
  search_cmd->add_option("--domain", so.domain, "Subspace pattern (default: smallest one covering the table)");
  search_cmd->add_option("--avm-bound", so.avm_bound, "AVM constraint for analognas/ga_imc");
  search_cmd->add_option("--param-cap", so.param_cap, "Parameter-count cap for analognas/ga_imc");
  search_cmd->add_option("--output,-o", so.output, "Result JSON (default stdout)");
  search_cmd->add_option("--trajectory", so.trajectory, "JSON-lines trajectory log");

  auto* compare_cmd = app.add_subcommand("compare", "Compare search strategies over seeds");
  CompareOptions co;
  compare_cmd->add_option("--bench,-b", co.bench, "Benchmark file")->required();
  compare_cmd->add_option("--methods", co.methods, "Comma-separated strategies");
  compare_cmd->add_option("--budgets", co.budgets, "Comma-separated budgets");
  compare_cmd->add_option("--seeds", co.seeds, "Comma-separated seeds");
  compare_cmd->add_option("--domain", co.domain, "Subspace pattern");
  compare_cmd->add_option("--metric", co.metric, "Objective field");
  compare_cmd->add_option("--avm-bound", co.avm_bound, "AVM constraint for analognas/ga_imc");
  compare_cmd->add_option("--output,-o", co.output, "CSV file (default stdout)");

  auto* export_cmd = app.add_subcommand("export", "Dump benchmark fields to CSV");
  std::string export_bench, export_fields = "index,arch,baseline,ptq,qat,noisy,analog,avm", export_output;
  export_cmd->add_option("--bench,-b", export_bench, "Benchmark file")->required();
  export_cmd->add_option("--fields", export_fields, "Comma-separated fields");
  export_cmd->add_option("--output,-o", export_output, "CSV file (default stdout)");

  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; }))
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& s) {
          global_seed = s;
          seed_given = true;
        },
        "Seed (build-bench: experiment seed; search: strategy seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*enumerate) {
      const auto members = SubspacePattern::parse(pattern).enumerate();
      if (count_only) {
        std::cout << members.size() << '\n';
        return kOk;
      }
      for (const auto& e : members) {
        if (json_out)
          std::cout << json{{"index", space::decode(e)}, {"arch", e.to_tuple_string()}, {"nb201", space::to_nb201_string(e)}}
                           .dump()
                    << '\n';
        else
          std::cout << space::decode(e) << '\t' << e.to_tuple_string() << '\t' << space::to_nb201_string(e) << '\n';
      }
    } else if (*encode) {
      if (encode_index < 0 || encode_index >= static_cast<long long>(space::kSpaceSize))
        throw UsageError("index must lie in [0, 15624]");
      const auto e = space::encode(static_cast<space::ArchIndex>(encode_index));
      if (json_out)
        std::cout << json{{"index", encode_index}, {"arch", e.to_tuple_string()}, {"nb201", space::to_nb201_string(e)}}
                         .dump()
                  << '\n';
      else
        std::cout << e.to_tuple_string() << '\n';
    } else if (*decode) {
      const auto e = parse_arch(decode_arch);
      if (json_out)
        std::cout << json{{"index", space::decode(e)}, {"arch", e.to_tuple_string()}, {"nb201", space::to_nb201_string(e)}}
                         .dump()
                  << '\n';
      else
        std::cout << space::decode(e) << '\n';
    } else if (*paths) {
      const auto e = parse_arch(paths_arch);
      if (json_out) {
        std::cout << json{{"index", space::decode(e)}, {"arch", e.to_tuple_string()}, {"paths", path_list_json(e)}}.dump()
                  << '\n';
      } else {
        for (const auto& p : space::extract_paths(e)) std::cout << p.to_string() << '\n';
      }
    } else if (*config) {
      std::cout << to_json(RunConfig::preset(config_preset)) << '\n';
    } else if (*build) {
      if (seed_given) bo.seed = global_seed;
      return build_bench(bo);
    } else if (*merge) {
      std::vector<bench::BenchmarkTable> parts;
      for (const auto& f : merge_inputs) parts.push_back(load_table(f));
      const auto merged = bench::merge(parts);
      bench::save(merged, fs::path(merge_output));
      std::cerr << "merged " << parts.size() << " partitions into " << merged.size() << " records" << std::endl;
    } else if (*query) {
      const auto table = load_table(query_bench);
      const auto& r = table.query(parse_arch(query_arch));
      if (json_out) {
        std::cout << record_json(r).dump() << '\n';
      } else {
        std::cout << "arch        " << r.arch.to_tuple_string() << "  #" << r.index << "  " << space::to_nb201_string(r.arch)
                  << "\nbaseline    " << r.baseline_acc << "\nptq         " << r.ptq_acc << "\nqat         " << r.qat_acc
                  << "\nnoisy       " << r.noisy_acc.mean << " +- " << r.noisy_acc.std << "\nanalog      "
                  << r.analog_acc.mean << " +- " << r.analog_acc.std << '\n';
        for (std::size_t h = 0; h < 4; ++h)
          std::cout << "drift " << std::left << std::setw(5) << analog::kDriftLabels[h] << " noisy "
                    << r.noisy_drift[h].mean << "  analog " << r.analog_drift[h].mean << '\n';
        std::cout << "avm         " << r.avm() << "\nparams      " << r.param_count << "\nconfig      "
                  << r.config_digest << '\n';
      }
    } else if (*analyze_cmd) {
      return analyze(ao);
    } else if (*search_cmd) {
      if (seed_given) so.seed = global_seed;
      return run_search(so);
    } else if (*compare_cmd) {
      return compare(co);
    } else if (*export_cmd) {
      const auto table = load_table(export_bench);
      Sink sink(export_output);
      digest_comment(sink.out(), table);
      bench::export_csv(table, split(export_fields), sink.out());
    }
    return kOk;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsage;
  } catch (const FileNotFoundError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kMissingFile;
  } catch (const NotFoundError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kNotFound;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kRuntime;
  }
}
