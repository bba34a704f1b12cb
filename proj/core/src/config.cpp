#include "analognas/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "analognas/errors.hpp"

namespace analognas {

using json = nlohmann::ordered_json;

namespace {

// Reads a JSON object section, rejecting keys it does not know.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError("config section '" + path_ + "' must be an object");
  }
  ~Section() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParseError("config key '" + path_ + "." + key + "': " + e.what());
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ParseError("unknown config key '" + path_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string_view source_name(DatasetSource s) { return s == DatasetSource::synthetic ? "synthetic" : "cifar10"; }

DatasetSource source_from_name(const std::string& s) {
  if (s == "synthetic") return DatasetSource::synthetic;
  if (s == "cifar10") return DatasetSource::cifar10;
  throw ParseError("dataset.source must be 'synthetic' or 'cifar10', got '" + s + "'");
}

std::string_view scope_name(ScopeKind k) {
  switch (k) {
    case ScopeKind::list: return "list";
    case ScopeKind::sample: return "sample";
    case ScopeKind::subspace: return "subspace";
    case ScopeKind::full: return "full";
  }
  return "list";
}

ScopeKind scope_from_name(const std::string& s) {
  if (s == "list") return ScopeKind::list;
  if (s == "sample") return ScopeKind::sample;
  if (s == "subspace") return ScopeKind::subspace;
  if (s == "full") return ScopeKind::full;
  throw ParseError("scope.kind must be one of list, sample, subspace, full; got '" + s + "'");
}

json synth_json(const nn::SynthSpec& s) {
  return {{"num_classes", s.num_classes}, {"side", s.side},     {"channels", s.channels},
          {"train_size", s.train_size},   {"test_size", s.test_size}, {"margin", s.margin},
          {"max_shift", s.max_shift}};
}

void read_synth(const json& j, nn::SynthSpec& s) {
  Section sec(j, "dataset.synthetic");
  sec.get("num_classes", s.num_classes);
  sec.get("side", s.side);
  sec.get("channels", s.channels);
  sec.get("train_size", s.train_size);
  sec.get("test_size", s.test_size);
  sec.get("margin", s.margin);
  sec.get("max_shift", s.max_shift);
  sec.finish();
}

json dataset_json(const DatasetConfig& d) {
  return {{"source", source_name(d.source)},
          {"synthetic", synth_json(d.synthetic)},
          {"cifar10_dir", d.cifar10_dir},
          {"train_limit", d.train_limit},
          {"test_limit", d.test_limit}};
}

void read_dataset(const json& j, DatasetConfig& d) {
  Section sec(j, "dataset");
  std::string source(source_name(d.source));
  sec.get("source", source);
  d.source = source_from_name(source);
  if (const json* s = sec.child("synthetic")) read_synth(*s, d.synthetic);
  sec.get("cifar10_dir", d.cifar10_dir);
  sec.get("train_limit", d.train_limit);
  sec.get("test_limit", d.test_limit);
  sec.finish();
}

json macro_json(const nn::MacroConfig& m) {
  return {{"stem_channels", m.stem_channels},
          {"cells_per_stage", m.cells_per_stage},
          {"num_classes", m.num_classes},
          {"input_hw", m.input_hw},
          {"input_channels", m.input_channels}};
}

void read_macro(const json& j, nn::MacroConfig& m) {
  Section sec(j, "macro");
  sec.get("stem_channels", m.stem_channels);
  sec.get("cells_per_stage", m.cells_per_stage);
  sec.get("num_classes", m.num_classes);
  sec.get("input_hw", m.input_hw);
  sec.get("input_channels", m.input_channels);
  sec.finish();
}

json train_json(const nn::TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"base_lr", t.base_lr},
          {"momentum", t.momentum},
          {"nesterov", t.nesterov},
          {"weight_decay", t.weight_decay},
          {"batch_size", t.batch_size},
          {"schedule", t.schedule == nn::LrSchedule::cosine ? "cosine" : "constant"},
          {"flip_probability", t.augmentation.flip_probability},
          {"pad_crop", t.augmentation.pad_crop},
          {"normalize", t.normalize}};
}

void read_train(const json& j, nn::TrainConfig& t, const std::string& path) {
  Section sec(j, path);
  sec.get("epochs", t.epochs);
  sec.get("base_lr", t.base_lr);
  sec.get("momentum", t.momentum);
  sec.get("nesterov", t.nesterov);
  sec.get("weight_decay", t.weight_decay);
  sec.get("batch_size", t.batch_size);
  std::string schedule = t.schedule == nn::LrSchedule::cosine ? "cosine" : "constant";
  sec.get("schedule", schedule);
  if (schedule == "cosine")
    t.schedule = nn::LrSchedule::cosine;
  else if (schedule == "constant")
    t.schedule = nn::LrSchedule::constant;
  else
    throw ParseError("config key '" + path + ".schedule' must be 'cosine' or 'constant'");
  sec.get("flip_probability", t.augmentation.flip_probability);
  sec.get("pad_crop", t.augmentation.pad_crop);
  sec.get("normalize", t.normalize);
  sec.finish();
}

json quant_json(const nn::QuantScheme& q) {
  return {{"weight_bits", q.weight_bits},
          {"activation_bits", q.activation_bits},
          {"calibration_batches", q.calibration_batches},
          {"calibration_batch_size", q.calibration_batch_size}};
}

void read_quant(const json& j, nn::QuantScheme& q) {
  Section sec(j, "quant");
  sec.get("weight_bits", q.weight_bits);
  sec.get("activation_bits", q.activation_bits);
  sec.get("calibration_batches", q.calibration_batches);
  sec.get("calibration_batch_size", q.calibration_batch_size);
  sec.finish();
}

json qat_json(const nn::QatConfig& q) {
  json j = {{"epochs", q.epochs},
            {"lr", q.lr},
            {"weight_decay", q.weight_decay},
            {"plateau_factor", q.plateau_factor},
            {"plateau_patience", q.plateau_patience},
            {"range_momentum", q.range_momentum},
            {"batch_size", q.batch_size}};
  // Written only when set, so digests of configs without QAT augmentation
  // stay what they were before these keys existed.
  if (q.augmentation.active()) {
    j["flip_probability"] = q.augmentation.flip_probability;
    j["pad_crop"] = q.augmentation.pad_crop;
  }
  return j;
}

void read_qat(const json& j, nn::QatConfig& q) {
  Section sec(j, "qat");
  sec.get("epochs", q.epochs);
  sec.get("lr", q.lr);
  sec.get("weight_decay", q.weight_decay);
  sec.get("plateau_factor", q.plateau_factor);
  sec.get("plateau_patience", q.plateau_patience);
  sec.get("range_momentum", q.range_momentum);
  sec.get("batch_size", q.batch_size);
  sec.get("flip_probability", q.augmentation.flip_probability);
  sec.get("pad_crop", q.augmentation.pad_crop);
  sec.finish();
}

json hw_json(const analog::HardwareConfig& h) {
  return {{"dac_bits", h.dac_bits},
          {"adc_bits", h.adc_bits},
          {"output_noise_sigma", h.output_noise_sigma},
          {"g_max", h.g_max},
          {"prog_noise_scale", h.prog_noise_scale},
          {"prog_a0", h.prog_a0},
          {"prog_a1", h.prog_a1},
          {"read_noise_scale", h.read_noise_scale},
          {"read_b0", h.read_b0},
          {"drift_nu_mean", h.drift_nu_mean},
          {"drift_nu_std", h.drift_nu_std},
          {"drift_t0_seconds", h.drift_t0_seconds},
          {"global_drift_compensation", h.global_drift_compensation},
          {"eval_repeats", h.eval_repeats},
          {"adc_bound", analog::adc_bound_name(h.adc_bound)},
          {"adc_headroom", h.adc_headroom},
          {"calibration_batches", h.calibration_batches},
          {"calibration_batch_size", h.calibration_batch_size}};
}

void read_hw(const json& j, analog::HardwareConfig& h) {
  Section sec(j, "hardware");
  sec.get("dac_bits", h.dac_bits);
  sec.get("adc_bits", h.adc_bits);
  sec.get("output_noise_sigma", h.output_noise_sigma);
  sec.get("g_max", h.g_max);
  sec.get("prog_noise_scale", h.prog_noise_scale);
  sec.get("prog_a0", h.prog_a0);
  sec.get("prog_a1", h.prog_a1);
  sec.get("read_noise_scale", h.read_noise_scale);
  sec.get("read_b0", h.read_b0);
  sec.get("drift_nu_mean", h.drift_nu_mean);
  sec.get("drift_nu_std", h.drift_nu_std);
  sec.get("drift_t0_seconds", h.drift_t0_seconds);
  sec.get("global_drift_compensation", h.global_drift_compensation);
  sec.get("eval_repeats", h.eval_repeats);
  std::string bound(analog::adc_bound_name(h.adc_bound));
  sec.get("adc_bound", bound);
  h.adc_bound = analog::adc_bound_from_name(bound);
  sec.get("adc_headroom", h.adc_headroom);
  sec.get("calibration_batches", h.calibration_batches);
  sec.get("calibration_batch_size", h.calibration_batch_size);
  sec.finish();
}

json hwt_json(const analog::HwtConfig& h) {
  return {{"eta", h.eta},
          {"output_noise", h.output_noise},
          {"from_pretrained", h.from_pretrained},
          {"train", train_json(h.train)}};
}

void read_hwt(const json& j, analog::HwtConfig& h) {
  Section sec(j, "hwt");
  sec.get("eta", h.eta);
  sec.get("output_noise", h.output_noise);
  sec.get("from_pretrained", h.from_pretrained);
  if (const json* t = sec.child("train")) read_train(*t, h.train, "hwt.train");
  sec.finish();
}

json scope_json(const ScopeConfig& s) {
  return {{"kind", scope_name(s.kind)},
          {"archs", s.archs},
          {"sample_count", s.sample_count},
          {"sample_seed", s.sample_seed},
          {"pattern", s.pattern}};
}

void read_scope(const json& j, ScopeConfig& s) {
  Section sec(j, "scope");
  std::string kind(scope_name(s.kind));
  sec.get("kind", kind);
  s.kind = scope_from_name(kind);
  if (const json* a = sec.child("archs")) {
    if (!a->is_array()) throw ParseError("config key 'scope.archs' must be an array");
    s.archs.clear();
    for (const auto& v : *a) {
      if (v.is_number_unsigned())
        s.archs.push_back(v.get<space::ArchIndex>());
      else if (v.is_string())
        s.archs.push_back(space::decode(space::parse_architecture(v.get<std::string>())));
      else
        throw ParseError("scope.archs entries must be indices or architecture strings");
    }
  }
  sec.get("sample_count", s.sample_count);
  sec.get("sample_seed", s.sample_seed);
  sec.get("pattern", s.pattern);
  sec.finish();
}

json experiment_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"dataset", dataset_json(c.dataset)},
          {"macro", macro_json(c.pipeline.macro)},
          {"train", train_json(c.pipeline.train)},
          {"quant", quant_json(c.pipeline.quant)},
          {"qat", qat_json(c.pipeline.qat)},
          {"hardware", hw_json(c.pipeline.hw)},
          {"hwt", hwt_json(c.pipeline.hwt)}};
}

}  // namespace

void PipelineConfig::validate() const {
  macro.validate();
  train.validate();
  quant.validate();
  qat.validate();
  hw.validate();
  hwt.validate();
}

RunConfig RunConfig::desk() {
  RunConfig c;
  c.dataset.synthetic.train_size = 1000;
  c.dataset.synthetic.test_size = 250;
  c.dataset.synthetic.margin = 0.2;
  c.pipeline.macro = nn::MacroConfig::desk();
  c.pipeline.train = nn::TrainConfig::desk();
  c.pipeline.qat.epochs = 2;
  c.pipeline.hwt.train = nn::TrainConfig::desk();
  c.pipeline.hwt.train.epochs = 5;
  c.pipeline.hwt.train.base_lr = 0.02;
  return c;
}

RunConfig RunConfig::paper() {
  RunConfig c;
  c.dataset.source = DatasetSource::cifar10;
  c.dataset.cifar10_dir = "data/cifar-10-batches-bin";
  c.pipeline.macro = nn::MacroConfig::nb201();
  c.pipeline.train = nn::TrainConfig::paper();
  c.pipeline.qat.epochs = 10;
  c.pipeline.qat.batch_size = 256;
  c.pipeline.qat.augmentation = c.pipeline.train.augmentation;
  c.pipeline.hwt.train = nn::TrainConfig::paper();
  c.pipeline.hwt.train.epochs = 200;
  c.pipeline.hwt.from_pretrained = false;
  c.scope.kind = ScopeKind::full;
  return c;
}

RunConfig RunConfig::preset(std::string_view name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ParseError("unknown config preset '" + std::string(name) + "' (expected desk or paper)");
}

void RunConfig::validate() const {
  pipeline.validate();
  if (dataset.source == DatasetSource::synthetic) {
    dataset.synthetic.validate();
    if (dataset.synthetic.num_classes != pipeline.macro.num_classes)
      throw RangeError("dataset.synthetic.num_classes must equal macro.num_classes");
    if (dataset.synthetic.side != pipeline.macro.input_hw || dataset.synthetic.channels != pipeline.macro.input_channels)
      throw RangeError("synthetic image shape must match macro.input_hw and macro.input_channels");
  } else {
    if (dataset.cifar10_dir.empty()) throw RangeError("dataset.cifar10_dir is required for the cifar10 source");
    if (pipeline.macro.input_hw != 32 || pipeline.macro.input_channels != 3 || pipeline.macro.num_classes != 10)
      throw RangeError("cifar10 needs macro.input_hw 32, input_channels 3, num_classes 10");
  }
  if (scope.kind == ScopeKind::sample && (scope.sample_count < 1 || scope.sample_count > static_cast<int>(space::kSpaceSize)))
    throw RangeError("scope.sample_count must lie in [1, 15625]");
  if (scope.kind == ScopeKind::subspace) (void)SubspacePattern::parse(scope.pattern);
  for (auto a : scope.archs)
    if (a >= space::kSpaceSize) throw RangeError("scope.archs entry " + std::to_string(a) + " outside the space");
}

std::string to_json(const RunConfig& cfg, int indent) {
  json j = experiment_json(cfg);
  j["scope"] = scope_json(cfg.scope);
  j["output"] = cfg.output;
  return j.dump(indent) + "\n";
}

RunConfig run_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = RunConfig::desk();
  Section sec(j, "config");
  std::string preset;
  sec.get("preset", preset);
  if (!preset.empty()) c = RunConfig::preset(preset);
  sec.get("seed", c.seed);
  if (const json* d = sec.child("dataset")) read_dataset(*d, c.dataset);
  if (const json* m = sec.child("macro")) read_macro(*m, c.pipeline.macro);
  if (const json* t = sec.child("train")) read_train(*t, c.pipeline.train, "train");
  if (const json* q = sec.child("quant")) read_quant(*q, c.pipeline.quant);
  if (const json* q = sec.child("qat")) read_qat(*q, c.pipeline.qat);
  if (const json* h = sec.child("hardware")) read_hw(*h, c.pipeline.hw);
  if (const json* h = sec.child("hwt")) read_hwt(*h, c.pipeline.hwt);
  if (const json* s = sec.child("scope")) read_scope(*s, c.scope);
  sec.get("output", c.output);
  sec.finish();
  c.pipeline.qat.scheme = c.pipeline.quant;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config file " + path.string());
  out << to_json(cfg);
}

std::string canonical_experiment_json(const RunConfig& cfg) { return experiment_json(cfg).dump(); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, digest >>= 4) s[static_cast<std::size_t>(i)] = kHex[digest & 0xF];
  return s;
}

std::string config_digest(const RunConfig& cfg) { return digest_hex(fnv1a64(canonical_experiment_json(cfg))); }

SubspacePattern SubspacePattern::parse(std::string_view text) {
  SubspacePattern p;
  std::string body;
  for (char c : text)
    if (c != ' ') body += c;
  if (body.size() < 2 || body.front() != '(' || body.back() != ')')
    throw ParseError("subspace pattern must look like (2,0,3,*,*,*), got '" + std::string(text) + "'");
  body = body.substr(1, body.size() - 2);
  std::stringstream ss(body);
  std::string tok;
  int e = 0;
  while (std::getline(ss, tok, ',')) {
    if (e >= space::kNumEdges) throw ParseError("subspace pattern has more than six entries");
    if (tok == "*") {
      p.fixed[static_cast<std::size_t>(e)] = -1;
    } else if (tok.size() == 1 && tok[0] >= '0' && tok[0] <= '4') {
      p.fixed[static_cast<std::size_t>(e)] = tok[0] - '0';
    } else {
      throw ParseError("subspace pattern entry '" + tok + "' must be an op code 0-4 or *");
    }
    ++e;
  }
  if (e != space::kNumEdges) throw ParseError("subspace pattern needs six entries");
  return p;
}

std::string SubspacePattern::to_string() const {
  std::string s = "(";
  for (int e = 0; e < space::kNumEdges; ++e) {
    if (e) s += ",";
    const int v = fixed[static_cast<std::size_t>(e)];
    s += v < 0 ? std::string("*") : std::to_string(v);
  }
  return s + ")";
}

std::vector<int> SubspacePattern::free_edges() const {
  std::vector<int> out;
  for (int e = 0; e < space::kNumEdges; ++e)
    if (fixed[static_cast<std::size_t>(e)] < 0) out.push_back(e);
  return out;
}

bool SubspacePattern::contains(const space::CellEncoding& enc) const {
  for (int e = 0; e < space::kNumEdges; ++e) {
    const int v = fixed[static_cast<std::size_t>(e)];
    if (v >= 0 && space::op_code(enc.op(e)) != v) return false;
  }
  return true;
}

std::vector<space::CellEncoding> SubspacePattern::enumerate() const {
  std::vector<space::CellEncoding> out;
  for (auto enc : space::enumerate_space())
    if (contains(enc)) out.push_back(enc);
  return out;
}

std::vector<space::CellEncoding> resolve_scope(const ScopeConfig& scope) {
  std::vector<space::CellEncoding> out;
  switch (scope.kind) {
    case ScopeKind::list: {
      std::vector<space::ArchIndex> idx = scope.archs;
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      for (auto i : idx) out.push_back(space::encode(i));
      break;
    }
    case ScopeKind::sample: {
      // Partial Fisher-Yates over the index range.
      std::vector<space::ArchIndex> idx(space::kSpaceSize);
      for (space::ArchIndex i = 0; i < space::kSpaceSize; ++i) idx[i] = i;
      Rng rng(scope.sample_seed);
      const auto k = static_cast<std::size_t>(scope.sample_count);
      for (std::size_t i = 0; i < k; ++i)
        std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
      idx.resize(k);
      std::sort(idx.begin(), idx.end());
      for (auto i : idx) out.push_back(space::encode(i));
      break;
    }
    case ScopeKind::subspace:
      out = SubspacePattern::parse(scope.pattern).enumerate();
      break;
    case ScopeKind::full:
      for (auto enc : space::enumerate_space()) out.push_back(enc);
      break;
  }
  return out;
}

nn::DatasetPair load_dataset(const RunConfig& cfg) {
  nn::DatasetPair data;
  if (cfg.dataset.source == DatasetSource::synthetic) {
    data = nn::synth_dataset(cfg.dataset.synthetic, derive_seed(cfg.seed, {0x64617461}));
  } else {
    const std::filesystem::path dir(cfg.dataset.cifar10_dir);
    std::vector<std::filesystem::path> train_files;
    for (int i = 1; i <= 5; ++i) train_files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    data.train = nn::load_cifar10_binary(train_files, nn::Split::train);
    data.test = nn::load_cifar10_binary(dir / "test_batch.bin", nn::Split::test);
  }
  if (cfg.dataset.train_limit > 0) data.train = data.train.take(cfg.dataset.train_limit);
  if (cfg.dataset.test_limit > 0) data.test = data.test.take(cfg.dataset.test_limit);
  if (cfg.pipeline.train.normalize) {
    const auto stats = nn::channel_stats(data.train);
    nn::normalize_channels(data.train, stats);
    nn::normalize_channels(data.test, stats);
  }
  return data;
}

}  // namespace analognas
