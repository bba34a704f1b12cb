#include "analognas/bench_store.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "analognas/analog.hpp"
#include "analognas/errors.hpp"
#include "analognas/nn/quant.hpp"

namespace analognas::bench {

using json = nlohmann::ordered_json;

namespace {

void check_percent(double v, const char* field, std::size_t line) {
  if (!std::isfinite(v)) throw ValidationError(field, line, "value is not finite");
  if (v < 0.0 || v > 100.0) throw ValidationError(field, line, "accuracy " + std::to_string(v) + " outside [0, 100]");
}

void check_mean_std(const MeanStd& m, const std::string& field, std::size_t line) {
  check_percent(m.mean, (field + ".mean").c_str(), line);
  if (!std::isfinite(m.std) || m.std < 0.0) throw ValidationError(field + ".std", line, "std must be finite and >= 0");
}

}  // namespace

void validate_record(const BenchmarkRecord& r, std::size_t line) {
  if (r.index >= space::kSpaceSize) throw ValidationError("index", line, "arch index outside the search space");
  if (space::decode(r.arch) != r.index) throw ValidationError("arch", line, "encoding does not match the index");
  check_percent(r.baseline_acc, "baseline_acc", line);
  check_percent(r.ptq_acc, "ptq_acc", line);
  check_percent(r.qat_acc, "qat_acc", line);
  check_mean_std(r.noisy_acc, "noisy_acc", line);
  check_mean_std(r.analog_acc, "analog_acc", line);
  for (std::size_t i = 0; i < 4; ++i) {
    check_mean_std(r.noisy_drift[i], "noisy_drift[" + std::to_string(i) + "]", line);
    check_mean_std(r.analog_drift[i], "analog_drift[" + std::to_string(i) + "]", line);
  }
  if (r.config_digest.empty()) throw ValidationError("config_digest", line, "provenance digest missing");
  if (r.schema_version != kSchemaVersion) throw SchemaVersionError(r.schema_version, kSchemaVersion);
}

TableMetadata TableMetadata::from_config(const RunConfig& cfg) {
  TableMetadata m;
  m.config_digest = analognas::config_digest(cfg);
  m.config_json = canonical_experiment_json(cfg);
  return m;
}

void BenchmarkTable::put(BenchmarkRecord r) {
  if (r.config_digest != meta_.config_digest)
    throw MetadataMismatchError("record for arch " + std::to_string(r.index) + " has config digest " +
                                r.config_digest + ", table has " + meta_.config_digest);
  auto it = records_.find(r.index);
  if (it != records_.end()) {
    if (it->second == r) return;
    throw MergeConflictError({r.index});
  }
  records_.emplace(r.index, std::move(r));
}

const BenchmarkRecord& BenchmarkTable::query(space::ArchIndex index) const {
  auto it = records_.find(index);
  if (it == records_.end()) throw NotFoundError(index);
  return it->second;
}

const BenchmarkRecord& BenchmarkTable::query(const space::CellEncoding& enc) const { return query(space::decode(enc)); }

std::vector<const BenchmarkRecord*> BenchmarkTable::records() const {
  std::vector<const BenchmarkRecord*> out;
  out.reserve(records_.size());
  for (const auto& [_, r] : records_) out.push_back(&r);
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

enum StreamTag : std::uint64_t {
  kInit = 1,
  kTrain,
  kQat,
  kProgramNoisy,
  kEvalNoisy,
  kHwt,
  kProgramAnalog,
  kEvalAnalog,
  kHwtInit,
};

template <typename F>
auto stage(const char* name, const PipelineStages* hooks, F&& f) {
  if (hooks && hooks->on_stage) hooks->on_stage(name);
  try {
    return f();
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

MeanStd percent(const analog::AnalogResult& r) { return {100.0 * r.mean, 100.0 * r.std}; }

struct BranchResult {
  MeanStd at_t0;
  std::array<MeanStd, 4> drift;
  std::vector<std::string> uncompensated;
};

BranchResult evaluate_branch(const analog::ProgrammedNetwork& pnet, const nn::Dataset& test, std::uint64_t seed) {
  BranchResult b;
  b.at_t0 = percent(analog::analog_evaluate(pnet, test, pnet.hw.drift_t0_seconds, derive_seed(seed, {0})));
  for (std::size_t i = 0; i < analog::kDriftTimes.size(); ++i)
    b.drift[i] = percent(analog::analog_evaluate(pnet, test, analog::kDriftTimes[i], derive_seed(seed, {i + 1})));
  for (const auto& L : pnet.layers)
    if (L.compensation_disabled) b.uncompensated.push_back(L.name);
  return b;
}

}  // namespace

BenchmarkRecord run_full_pipeline(const space::CellEncoding& enc, const nn::DatasetPair& data, const RunConfig& cfg,
                                  const PipelineStages* hooks) {
  const auto& p = cfg.pipeline;
  BenchmarkRecord r;
  r.arch = enc;
  r.index = space::decode(enc);
  r.seed = cfg.seed;
  r.config_digest = analognas::config_digest(cfg);
  const std::uint64_t base = derive_seed(cfg.seed, {r.index});

  nn::Network<float> net = stage("train", hooks, [&] {
    nn::Network<float> n(enc, p.macro, derive_seed(base, {kInit}));
    nn::TrainConfig tc = p.train;
    tc.seed = derive_seed(base, {kTrain});
    nn::sgd_train(n, data.train, tc);
    r.baseline_acc = 100.0 * nn::evaluate_accuracy(n, data.test);
    return n;
  });
  r.param_count = net.parameter_count();

  stage("ptq", hooks, [&] {
    const auto q = nn::ptq_int8(net, data.train, p.quant);
    r.ptq_acc = 100.0 * nn::evaluate_accuracy(q, data.test);
  });

  stage("qat", hooks, [&] {
    nn::Network<float> copy = net;
    nn::QatConfig qc = p.qat;
    qc.scheme = p.quant;
    qc.seed = derive_seed(base, {kQat});
    nn::qat_train(copy, data.train, qc);
    r.qat_acc = 100.0 * nn::evaluate_accuracy(nn::ptq_int8(copy, data.train, p.quant), data.test);
  });

  const BranchResult noisy = stage("noisy", hooks, [&] {
    const auto pnet = analog::program_network(net, data.train, p.hw, derive_seed(base, {kProgramNoisy}));
    return evaluate_branch(pnet, data.test, derive_seed(base, {kEvalNoisy}));
  });
  r.noisy_acc = noisy.at_t0;
  r.noisy_drift = noisy.drift;

  nn::Network<float> hwt_net = stage("hwt", hooks, [&] {
    nn::Network<float> n = p.hwt.from_pretrained ? net : nn::Network<float>(enc, p.macro, derive_seed(base, {kHwtInit}));
    analog::hwt_train(n, data.train, p.hw, p.hwt, derive_seed(base, {kHwt}));
    return n;
  });

  const BranchResult analog_branch = stage("analog", hooks, [&] {
    const auto pnet = analog::program_network(hwt_net, data.train, p.hw, derive_seed(base, {kProgramAnalog}));
    return evaluate_branch(pnet, data.test, derive_seed(base, {kEvalAnalog}));
  });
  r.analog_acc = analog_branch.at_t0;
  r.analog_drift = analog_branch.drift;

  r.provenance = {"quantized layers: all conv and affine, including stem and classifier",
                  "batch norm folded before programming; statistics not recalibrated",
                  "one programming per branch reused across drift horizons",
                  std::string("adc bound: ") + std::string(analog::adc_bound_name(p.hw.adc_bound))};
  for (const auto& name : noisy.uncompensated) r.provenance.push_back("noisy branch: drift compensation disabled for " + name);
  for (const auto& name : analog_branch.uncompensated)
    r.provenance.push_back("analog branch: drift compensation disabled for " + name);
  validate_record(r);
  return r;
}

// ---------------------------------------------------------------------------
// JSON lines

namespace {

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

json drift_json(const std::array<MeanStd, 4>& d) {
  json arr = json::array();
  for (std::size_t i = 0; i < d.size(); ++i)
    arr.push_back({{"t", analog::kDriftTimes[i]}, {"mean", d[i].mean}, {"std", d[i].std}});
  return arr;
}

json record_json(const BenchmarkRecord& r) {
  return {{"index", r.index},
          {"arch", r.arch.to_tuple_string()},
          {"nb201", space::to_nb201_string(r.arch)},
          {"baseline_acc", r.baseline_acc},
          {"ptq_acc", r.ptq_acc},
          {"qat_acc", r.qat_acc},
          {"noisy_acc", mean_std_json(r.noisy_acc)},
          {"analog_acc", mean_std_json(r.analog_acc)},
          {"noisy_drift", drift_json(r.noisy_drift)},
          {"analog_drift", drift_json(r.analog_drift)},
          {"param_count", r.param_count},
          {"seed", r.seed},
          {"config_digest", r.config_digest},
          {"schema_version", r.schema_version},
          {"provenance", r.provenance}};
}

template <typename T>
T field(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) throw ValidationError(key, line, "missing field");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(key, line, e.what());
  }
}

MeanStd mean_std_from(const json& j, const std::string& name, std::size_t line) {
  if (!j.is_object()) throw ValidationError(name, line, "expected an object with mean and std");
  return {field<double>(j, "mean", line), field<double>(j, "std", line)};
}

std::array<MeanStd, 4> drift_from(const json& j, const char* name, std::size_t line) {
  if (!j.contains(name) || !j.at(name).is_array()) throw ValidationError(name, line, "missing drift series");
  const json& arr = j.at(name);
  if (arr.size() != 4) throw ValidationError(name, line, "drift series must have exactly 4 entries");
  std::array<MeanStd, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double t = field<double>(arr[i], "t", line);
    if (t != analog::kDriftTimes[i]) throw ValidationError(name, line, "drift entries must follow the drift times");
    out[i] = mean_std_from(arr[i], name, line);
  }
  return out;
}

BenchmarkRecord record_from(const json& j, std::size_t line) {
  if (!j.is_object()) throw ValidationError("<record>", line, "expected a JSON object");
  BenchmarkRecord r;
  r.schema_version = field<int>(j, "schema_version", line);
  if (r.schema_version != kSchemaVersion) throw SchemaVersionError(r.schema_version, kSchemaVersion);
  r.index = field<space::ArchIndex>(j, "index", line);
  try {
    r.arch = space::from_tuple_string(field<std::string>(j, "arch", line));
  } catch (const ParseError& e) {
    throw ValidationError("arch", line, e.what());
  }
  r.baseline_acc = field<double>(j, "baseline_acc", line);
  r.ptq_acc = field<double>(j, "ptq_acc", line);
  r.qat_acc = field<double>(j, "qat_acc", line);
  if (!j.contains("noisy_acc")) throw ValidationError("noisy_acc", line, "missing field");
  if (!j.contains("analog_acc")) throw ValidationError("analog_acc", line, "missing field");
  r.noisy_acc = mean_std_from(j.at("noisy_acc"), "noisy_acc", line);
  r.analog_acc = mean_std_from(j.at("analog_acc"), "analog_acc", line);
  r.noisy_drift = drift_from(j, "noisy_drift", line);
  r.analog_drift = drift_from(j, "analog_drift", line);
  r.param_count = field<std::uint64_t>(j, "param_count", line);
  r.seed = field<std::uint64_t>(j, "seed", line);
  r.config_digest = field<std::string>(j, "config_digest", line);
  r.provenance = field<std::vector<std::string>>(j, "provenance", line);
  validate_record(r, line);
  return r;
}

}  // namespace

void save(const BenchmarkTable& table, std::ostream& out) {
  const auto& m = table.metadata();
  json meta = {{"kind", "analognas-benchmark"},
               {"schema_version", m.schema_version},
               {"code_version", m.code_version},
               {"config_digest", m.config_digest},
               {"config", m.config_json.empty() ? json(nullptr) : json::parse(m.config_json)}};
  out << meta.dump() << '\n';
  for (const auto* r : table.records()) out << record_json(*r).dump() << '\n';
}

void save(const BenchmarkTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write benchmark file " + path.string());
  save(table, out);
}

BenchmarkTable load(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  if (!std::getline(in, text)) throw ValidationError("<metadata>", 1, "benchmark file is empty");
  ++line_no;
  json meta;
  try {
    meta = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("<metadata>", line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!meta.is_object() || meta.value("kind", std::string()) != "analognas-benchmark")
    throw ValidationError("kind", line_no, "first line is not benchmark metadata");
  TableMetadata m;
  m.schema_version = field<int>(meta, "schema_version", line_no);
  if (m.schema_version != kSchemaVersion) throw SchemaVersionError(m.schema_version, kSchemaVersion);
  m.code_version = field<std::string>(meta, "code_version", line_no);
  m.config_digest = field<std::string>(meta, "config_digest", line_no);
  // null marks a table without an embedded configuration.
  if (meta.contains("config") && !meta.at("config").is_null()) m.config_json = meta.at("config").dump();
  BenchmarkTable table(m);
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError("<record>", line_no, std::string("malformed JSON: ") + e.what());
    }
    BenchmarkRecord r = record_from(j, line_no);
    if (r.config_digest != m.config_digest)
      throw ValidationError("config_digest", line_no, "record digest differs from the table metadata");
    if (table.contains(r.index)) throw ValidationError("index", line_no, "duplicate arch index");
    table.put(std::move(r));
  }
  return table;
}

BenchmarkTable load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError("cannot open benchmark file " + path.string());
  return load(in);
}

BenchmarkTable merge(const std::vector<BenchmarkTable>& parts) {
  if (parts.empty()) return {};
  BenchmarkTable out(parts.front().metadata());
  std::vector<space::ArchIndex> conflicts;
  for (const auto& t : parts) {
    if (!(t.metadata() == out.metadata()))
      throw MetadataMismatchError("cannot merge tables with config digests " + out.metadata().config_digest + " and " +
                                  t.metadata().config_digest);
    for (const auto* r : t.records()) {
      if (out.contains(r->index)) {
        if (!(out.query(r->index) == *r)) conflicts.push_back(r->index);
        continue;
      }
      out.put(*r);
    }
  }
  if (!conflicts.empty()) {
    std::sort(conflicts.begin(), conflicts.end());
    conflicts.erase(std::unique(conflicts.begin(), conflicts.end()), conflicts.end());
    throw MergeConflictError(conflicts);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

const std::vector<std::string>& exportable_fields() {
  static const std::vector<std::string> fields = [] {
    std::vector<std::string> f{"index", "arch", "nb201", "baseline", "ptq", "qat", "noisy", "noisy_std", "analog",
                               "analog_std"};
    for (auto label : analog::kDriftLabels) f.push_back("noisy_" + std::string(label));
    for (auto label : analog::kDriftLabels) f.push_back("analog_" + std::string(label));
    for (auto label : analog::kDriftLabels) f.push_back("noisy_" + std::string(label) + "_std");
    for (auto label : analog::kDriftLabels) f.push_back("analog_" + std::string(label) + "_std");
    f.insert(f.end(), {"param_count", "avm", "noisy_drop"});
    return f;
  }();
  return fields;
}

double field_value(const BenchmarkRecord& r, std::string_view f) {
  if (f == "index") return r.index;
  if (f == "baseline") return r.baseline_acc;
  if (f == "ptq") return r.ptq_acc;
  if (f == "qat") return r.qat_acc;
  if (f == "noisy") return r.noisy_acc.mean;
  if (f == "noisy_std") return r.noisy_acc.std;
  if (f == "analog") return r.analog_acc.mean;
  if (f == "analog_std") return r.analog_acc.std;
  if (f == "param_count") return static_cast<double>(r.param_count);
  if (f == "avm") return r.avm();
  if (f == "noisy_drop") return r.baseline_acc - r.noisy_acc.mean;
  for (std::size_t i = 0; i < analog::kDriftLabels.size(); ++i) {
    const std::string label(analog::kDriftLabels[i]);
    if (f == "noisy_" + label) return r.noisy_drift[i].mean;
    if (f == "analog_" + label) return r.analog_drift[i].mean;
    if (f == "noisy_" + label + "_std") return r.noisy_drift[i].std;
    if (f == "analog_" + label + "_std") return r.analog_drift[i].std;
  }
  throw RangeError("unknown benchmark field '" + std::string(f) + "'");
}

void export_csv(const BenchmarkTable& table, const std::vector<std::string>& fields, std::ostream& out) {
  for (const auto& f : fields)
    if (std::find(exportable_fields().begin(), exportable_fields().end(), f) == exportable_fields().end())
      throw RangeError("unknown benchmark field '" + f + "'");
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
  out << '\n';
  std::ostringstream num;
  num << std::setprecision(17);
  for (const auto* r : table.records()) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      const auto& f = fields[i];
      if (f == "arch")
        out << '"' << r->arch.to_tuple_string() << '"';
      else if (f == "nb201")
        out << space::to_nb201_string(r->arch);
      else if (f == "index" || f == "param_count")
        out << static_cast<std::uint64_t>(field_value(*r, f));
      else {
        num.str("");
        num << field_value(*r, f);
        out << num.str();
      }
    }
    out << '\n';
  }
}

}  // namespace analognas::bench
