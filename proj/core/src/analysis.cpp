#include "analognas/analysis.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "analognas/analog.hpp"
#include "analognas/errors.hpp"

namespace analognas::analysis {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw RangeError("kendall tau needs equal lengths, got " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()));
  if (x.size() < 2) throw RangeError("kendall tau needs at least two observations");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isnan(x[i]) || std::isnan(y[i])) throw RangeError("kendall tau input contains NaN");
}

// Pairs tied within runs of equal values of a sorted sequence.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq same) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && same(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Merge sort that counts strict inversions.
std::int64_t sort_count_inversions(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> buf(n);
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return swaps;
}

double tau_from_counts(std::int64_t n0, std::int64_t n1, std::int64_t n2, std::int64_t s) {
  if (n1 == n0 || n2 == n0) return kUndefined;
  return static_cast<double>(s) / std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t n1 = tied_pairs(n, [&](std::size_t i, std::size_t j) { return x[order[i]] == x[order[j]]; });
  const std::int64_t n3 = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return x[order[i]] == x[order[j]] && y[order[i]] == y[order[j]];
  });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::int64_t discordant = sort_count_inversions(ys);
  const std::int64_t n2 = tied_pairs(n, [&](std::size_t i, std::size_t j) { return ys[i] == ys[j]; });
  // concordant - discordant = n0 - n1 - n2 + n3 - 2 * discordant
  return tau_from_counts(n0, n1, n2, n0 - n1 - n2 + n3 - 2 * discordant);
}

double kendall_tau_b_pairwise(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const std::size_t n = x.size();
  std::int64_t concordant = 0, discordant = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0) ++tx;
      if (dy == 0.0) ++ty;
      if (dx == 0.0 || dy == 0.0) continue;
      ((dx > 0.0) == (dy > 0.0) ? concordant : discordant)++;
    }
  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  return tau_from_counts(n0, tx, ty, concordant - discordant);
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw EmptyInputError("quantile of an empty list");
  if (!(p >= 0.0 && p <= 1.0)) throw RangeError("quantile level must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw EmptyInputError("cannot summarize an empty list");
  SummaryStats s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  s.min = *mn;
  s.max = *mx;
  s.q25 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q75 = quantile(values, 0.75);
  return s;
}

std::string_view robustness_name(Robustness r) {
  switch (r) {
    case Robustness::robust: return "robust";
    case Robustness::non_robust: return "non_robust";
    case Robustness::excluded: return "excluded";
  }
  return "?";
}

std::size_t NoiseRobustness::robust_count() const {
  return static_cast<std::size_t>(
      std::ranges::count_if(labels, [](const NoiseLabel& l) { return l.tag == Robustness::robust; }));
}

NoiseRobustness classify_noise_robustness(const bench::BenchmarkTable& table, const NoiseRobustnessOptions& opt) {
  if (table.empty()) throw EmptyInputError("noise robustness needs a non-empty table");
  NoiseRobustness out;
  out.options = opt;
  std::vector<double> drops;
  for (const auto* r : table.records()) {
    NoiseLabel l{r->index, r->baseline_acc - r->noisy_acc.mean, Robustness::excluded};
    if (r->baseline_acc > opt.baseline_min) {
      l.tag = Robustness::non_robust;
      drops.push_back(l.drop);
    }
    out.labels.push_back(l);
  }
  if (drops.empty())
    throw EmptyInputError("no architecture has baseline accuracy above " + format_number(opt.baseline_min));
  out.threshold = opt.fixed_threshold ? *opt.fixed_threshold : quantile(drops, opt.quantile);
  for (auto& l : out.labels)
    if (l.tag == Robustness::non_robust && l.drop <= out.threshold) l.tag = Robustness::robust;
  return out;
}

std::string_view branch_name(Branch b) { return b == Branch::noisy ? "noisy" : "analog"; }

void DriftThresholds::validate() const {
  for (const auto* t : {&noisy, &analog})
    for (std::size_t i = 0; i < t->size(); ++i) {
      if (!((*t)[i] > 0.0)) throw RangeError("drift thresholds must be positive");
      if (i > 0 && (*t)[i] < (*t)[i - 1]) throw RangeError("drift thresholds must not decrease with the horizon");
    }
}

std::array<double, 4> drift_drops(const bench::BenchmarkRecord& r, Branch b, DriftReference ref) {
  const auto& series = b == Branch::noisy ? r.noisy_drift : r.analog_drift;
  const double t0 = b == Branch::noisy ? r.noisy_acc.mean : r.analog_acc.mean;
  const double from = ref == DriftReference::baseline ? r.baseline_acc : t0;
  std::array<double, 4> d{};
  for (std::size_t h = 0; h < 4; ++h) d[h] = from - series[h].mean;
  return d;
}

DriftRobustness classify_drift_robustness(const bench::BenchmarkTable& table, Branch branch,
                                          const DriftRobustnessOptions& opt) {
  opt.thresholds.validate();
  DriftRobustness out;
  out.branch = branch;
  out.options = opt;
  const auto ref = branch == Branch::noisy ? opt.noisy_reference : opt.analog_reference;
  const auto& thr = opt.thresholds.of(branch);
  std::array<std::vector<double>, 4> kept;
  for (const auto* r : table.records()) {
    DriftLabel l;
    l.index = r->index;
    l.drop = drift_drops(*r, branch, ref);
    const bool pass = r->baseline_acc > opt.baseline_min && r->noisy_acc.mean > opt.noisy_min;
    for (std::size_t h = 0; h < 4; ++h) {
      if (!pass) {
        l.tag[h] = Robustness::excluded;
        continue;
      }
      l.tag[h] = l.drop[h] <= thr[h] ? Robustness::robust : Robustness::non_robust;
      out.robust_count[h] += l.tag[h] == Robustness::robust;
      kept[h].push_back(l.drop[h]);
    }
    out.filtered += pass;
    out.labels.push_back(l);
  }
  if (out.filtered == 0) throw EmptyInputError("no architecture passes the drift robustness pre-filter");
  for (std::size_t h = 0; h < 4; ++h) out.drop_summary[h] = summarize(kept[h]);
  return out;
}

std::string_view hwt_group_name(HwtGroup g) {
  switch (g) {
    case HwtGroup::non_robust: return "non_robust";
    case HwtGroup::moderate: return "moderate";
    case HwtGroup::naturally_robust: return "naturally_robust";
  }
  return "?";
}

HwtGroup hwt_group(double noisy_acc) {
  if (noisy_acc < 20.0) return HwtGroup::non_robust;
  if (noisy_acc > 70.0) return HwtGroup::naturally_robust;
  return HwtGroup::moderate;
}

HwtCategories hwt_categories(const bench::BenchmarkTable& table, double high_performing_min) {
  HwtCategories out;
  out.high_performing_min = high_performing_min;
  std::array<std::vector<double>, 3> analog, improvement;
  std::vector<double> all_improvement;
  for (const auto* r : table.records()) {
    HwtRecord h;
    h.index = r->index;
    h.group = hwt_group(r->noisy_acc.mean);
    h.high_performing = r->analog_acc.mean > high_performing_min;
    const auto g = static_cast<std::size_t>(h.group);
    if (r->noisy_acc.mean == 0.0) {
      h.improvement = kUndefined;
      ++out.undefined_improvements;
    } else {
      h.improvement = 100.0 * (r->analog_acc.mean - r->noisy_acc.mean) / r->noisy_acc.mean;
      improvement[g].push_back(h.improvement);
      all_improvement.push_back(h.improvement);
    }
    analog[g].push_back(r->analog_acc.mean);
    ++out.groups[g].count;
    out.groups[g].high_performing += h.high_performing;
    out.records.push_back(h);
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? kUndefined : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (std::size_t g = 0; g < 3; ++g) {
    if (!analog[g].empty()) out.groups[g].analog = summarize(analog[g]);
    out.groups[g].mean_improvement = mean(improvement[g]);
  }
  out.mean_improvement = mean(all_improvement);
  return out;
}

OpStatistics op_statistics(std::span<const space::CellEncoding> group, std::span<const bool> robust) {
  if (group.empty()) throw EmptyInputError("op statistics need a non-empty group");
  if (!robust.empty() && robust.size() != group.size())
    throw RangeError("robustness flags must be parallel to the group");
  OpStatistics s;
  s.architectures = group.size();
  std::array<std::array<std::size_t, 7>, space::kNumOps> robust_hits{};
  std::array<std::uint64_t, space::kNumOps> totals{};
  for (std::size_t i = 0; i < group.size(); ++i)
    for (int op = 0; op < space::kNumOps; ++op) {
      const int c = group[i].count(static_cast<space::OpKind>(op));
      totals[static_cast<std::size_t>(op)] += static_cast<std::uint64_t>(c);
      ++s.count_histogram[static_cast<std::size_t>(op)][static_cast<std::size_t>(c)];
      if (!robust.empty() && robust[i]) ++robust_hits[static_cast<std::size_t>(op)][static_cast<std::size_t>(c)];
    }
  // Integer totals keep the mean exact and order independent.
  for (std::size_t op = 0; op < space::kNumOps; ++op)
    s.mean_share[op] = 100.0 * static_cast<double>(totals[op]) / (6.0 * static_cast<double>(group.size()));
  if (!robust.empty()) {
    s.robust_share.resize(space::kNumOps);
    for (std::size_t op = 0; op < space::kNumOps; ++op)
      for (std::size_t c = 0; c < 7; ++c)
        s.robust_share[op][c] = s.count_histogram[op][c] == 0
                                    ? kUndefined
                                    : static_cast<double>(robust_hits[op][c]) /
                                          static_cast<double>(s.count_histogram[op][c]);
  }
  return s;
}

std::vector<PathFrequency> frequent_paths(std::span<const space::CellEncoding> group, int length, std::size_t top_k) {
  if (length < 1 || length > 3) throw RangeError("path length must be 1, 2 or 3");
  std::map<space::OpPath, std::uint64_t> counts;
  for (const auto& enc : group)
    for (const auto& p : space::extract_paths(enc))
      if (p.length == length) ++counts[p];
  std::vector<PathFrequency> out;
  for (const auto& [p, c] : counts) out.push_back({p, c});
  std::stable_sort(out.begin(), out.end(), [](const PathFrequency& a, const PathFrequency& b) { return a.count > b.count; });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

std::string subset_name(OpSubset s) {
  std::string out = "{";
  bool first = true;
  for (int op = 0; op < space::kNumOps; ++op)
    if (s & (1u << op)) {
      if (!first) out += ",";
      out += space::op_label(static_cast<space::OpKind>(op));
      first = false;
    }
  return out + "}";
}

std::vector<OpSubset> default_subset_family() {
  using space::OpKind;
  std::vector<OpSubset> f;
  for (int op = 0; op < space::kNumOps; ++op) f.push_back(static_cast<OpSubset>(1u << op));
  f.push_back(subset_of({OpKind::conv3x3, OpKind::conv1x1}));
  f.push_back(subset_of({OpKind::skip, OpKind::conv3x3}));
  f.push_back(subset_of({OpKind::skip, OpKind::conv3x3, OpKind::conv1x1, OpKind::avg_pool3x3}));
  f.push_back(0x1f);
  return f;
}

SubsetFeatures subset_features(const space::CellEncoding& enc, OpSubset s) {
  auto in_s = [s](space::OpKind op) { return (s & (1u << space::op_code(op))) != 0; };
  SubsetFeatures f;
  f.subset = s;
  for (std::size_t r = 0; r < space::kRouteEdges.size(); ++r) {
    bool live = true, all_in = true;
    int hits = 0;
    for (int i = 0; i < space::kRouteLengths[r]; ++i) {
      const auto op = enc.op(space::kRouteEdges[r][static_cast<std::size_t>(i)]);
      if (op == space::OpKind::zeroize) live = false;
      if (in_s(op))
        ++hits;
      else
        all_in = false;
    }
    if (!live) continue;
    if (all_in) f.min_path_len = std::min(f.min_path_len, space::kRouteLengths[r]);
    f.max_op_on_path = std::max(f.max_op_on_path, hits);
  }
  std::array<int, space::kNumNodes> in{}, out{};
  for (int e = 0; e < space::kNumEdges; ++e)
    if (in_s(enc.op(e))) {
      ++out[static_cast<std::size_t>(space::kEdges[static_cast<std::size_t>(e)].from)];
      ++in[static_cast<std::size_t>(space::kEdges[static_cast<std::size_t>(e)].to)];
    }
  f.input_out_degree = out[0];
  f.output_in_degree = in[3];
  const int d1 = in[1] + out[1], d2 = in[2] + out[2];
  f.mean_intermediate_degree = 0.5 * (d1 + d2);
  f.max_intermediate_degree = std::max(d1, d2);
  return f;
}

GrafFeatureVector graf_features(const space::CellEncoding& enc, std::span<const OpSubset> family) {
  GrafFeatureVector v;
  for (int op = 0; op < space::kNumOps; ++op)
    v.op_count[static_cast<std::size_t>(op)] = enc.count(static_cast<space::OpKind>(op));
  for (OpSubset s : family) v.subsets.push_back(subset_features(enc, s));
  return v;
}

std::vector<double> GrafFeatureVector::values() const {
  std::vector<double> v(op_count.begin(), op_count.end());
  for (const auto& f : subsets)
    v.insert(v.end(), {static_cast<double>(f.min_path_len), static_cast<double>(f.max_op_on_path),
                       static_cast<double>(f.input_out_degree), static_cast<double>(f.output_in_degree),
                       f.mean_intermediate_degree, static_cast<double>(f.max_intermediate_degree)});
  return v;
}

std::vector<std::string> graf_feature_names(std::span<const OpSubset> family) {
  std::vector<std::string> names;
  for (int op = 0; op < space::kNumOps; ++op)
    names.push_back("op_count_" + std::string(space::op_label(static_cast<space::OpKind>(op))));
  for (OpSubset s : family) {
    const std::string n = subset_name(s);
    for (const char* f : {"min_path_len", "max_op_on_path", "input_out_degree", "output_in_degree",
                          "mean_intermediate_degree", "max_intermediate_degree"})
      names.push_back(std::string(f) + n);
  }
  return names;
}

std::vector<std::string> correlation_targets() {
  std::vector<std::string> t{"noisy_drop", "hwt_improvement"};
  for (auto b : {"noisy", "analog"})
    for (auto h : analog::kDriftLabels) t.push_back(std::string(b) + "_drift_drop_" + std::string(h));
  return t;
}

double target_value(const bench::BenchmarkRecord& r, std::string_view target) {
  if (target == "noisy_drop") return r.baseline_acc - r.noisy_acc.mean;
  if (target == "hwt_improvement")
    return r.noisy_acc.mean == 0.0 ? kUndefined : 100.0 * (r.analog_acc.mean - r.noisy_acc.mean) / r.noisy_acc.mean;
  const DriftRobustnessOptions defaults;
  for (Branch b : {Branch::noisy, Branch::analog}) {
    const auto ref = b == Branch::noisy ? defaults.noisy_reference : defaults.analog_reference;
    for (std::size_t h = 0; h < 4; ++h)
      if (target == std::string(branch_name(b)) + "_drift_drop_" + std::string(analog::kDriftLabels[h]))
        return drift_drops(r, b, ref)[h];
  }
  throw RangeError("unknown correlation target '" + std::string(target) + "'");
}

FeatureRanking rank_features(const std::vector<std::string>& names, const std::vector<std::vector<double>>& rows,
                             std::span<const double> target, std::size_t top_k) {
  if (rows.size() != target.size()) throw RangeError("feature rows and targets differ in length");
  FeatureRanking out;
  std::vector<double> column(rows.size());
  for (std::size_t f = 0; f < names.size(); ++f) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = rows[i].at(f);
    const double tau = kendall_tau_b(column, target);
    if (is_undefined(tau))
      out.skipped.push_back(names[f]);
    else
      out.ranked.push_back({names[f], tau});
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const FeatureCorrelation& a, const FeatureCorrelation& b) {
    return std::abs(a.tau) > std::abs(b.tau) || (std::abs(a.tau) == std::abs(b.tau) && a.feature < b.feature);
  });
  if (out.ranked.size() > top_k) out.ranked.resize(top_k);
  return out;
}

FeatureRanking feature_correlations(const bench::BenchmarkTable& table, std::string_view target, std::size_t top_k,
                                    std::span<const OpSubset> family) {
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (const auto* r : table.records()) {
    const double t = target_value(*r, target);
    if (is_undefined(t)) continue;
    rows.push_back(graf_features(r->arch, family).values());
    y.push_back(t);
  }
  if (rows.size() < 10)
    throw EmptyInputError("feature correlations need at least 10 records with a defined target, have " +
                          std::to_string(rows.size()));
  auto out = rank_features(graf_feature_names(family), rows, y, top_k);
  out.target = std::string(target);
  return out;
}

CorrelationMatrix kendall_matrix(const bench::BenchmarkTable& table, const std::vector<std::string>& fields) {
  CorrelationMatrix m;
  m.fields = fields;
  std::vector<std::vector<double>> cols(fields.size());
  for (const auto* r : table.records())
    for (std::size_t f = 0; f < fields.size(); ++f) cols[f].push_back(bench::field_value(*r, fields[f]));
  m.tau.assign(fields.size(), std::vector<double>(fields.size()));
  for (std::size_t i = 0; i < fields.size(); ++i)
    for (std::size_t j = i; j < fields.size(); ++j) m.tau[i][j] = m.tau[j][i] = kendall_tau_b(cols[i], cols[j]);
  return m;
}

void write_csv(const CorrelationMatrix& m, std::ostream& out) {
  out << "metric";
  for (const auto& f : m.fields) out << ',' << f;
  out << '\n';
  for (std::size_t i = 0; i < m.fields.size(); ++i) {
    out << m.fields[i];
    for (double v : m.tau[i]) out << ',' << format_number(v);
    out << '\n';
  }
}

void write_csv(const NoiseRobustness& r, std::ostream& out) {
  out << "index,noisy_drop,label,threshold\n";
  for (const auto& l : r.labels)
    out << l.index << ',' << format_number(l.drop) << ',' << robustness_name(l.tag) << ','
        << format_number(r.threshold) << '\n';
}

void write_csv(const DriftRobustness& r, std::ostream& out) {
  out << "index,branch";
  for (auto h : analog::kDriftLabels) out << ",drop_" << h << ",label_" << h;
  out << '\n';
  for (const auto& l : r.labels) {
    out << l.index << ',' << branch_name(r.branch);
    for (std::size_t h = 0; h < 4; ++h) out << ',' << format_number(l.drop[h]) << ',' << robustness_name(l.tag[h]);
    out << '\n';
  }
}

void write_csv(const HwtCategories& h, std::ostream& out) {
  out << "index,group,improvement_pct,high_performing\n";
  for (const auto& r : h.records)
    out << r.index << ',' << hwt_group_name(r.group) << ',' << format_number(r.improvement) << ','
        << (r.high_performing ? 1 : 0) << '\n';
}

void write_csv(const OpStatistics& s, std::ostream& out) {
  out << "op,mean_share_pct";
  for (int c = 0; c <= 6; ++c) out << ",count_" << c;
  if (!s.robust_share.empty())
    for (int c = 0; c <= 6; ++c) out << ",robust_share_" << c;
  out << '\n';
  for (std::size_t op = 0; op < space::kNumOps; ++op) {
    out << space::op_label(static_cast<space::OpKind>(op)) << ',' << format_number(s.mean_share[op]);
    for (auto c : s.count_histogram[op]) out << ',' << c;
    if (!s.robust_share.empty())
      for (double v : s.robust_share[op]) out << ',' << format_number(v);
    out << '\n';
  }
}

void write_csv(std::span<const PathFrequency> paths, std::ostream& out) {
  out << "path,length,count\n";
  for (const auto& p : paths) out << '"' << p.path.to_string() << "\"," << int{p.path.length} << ',' << p.count << '\n';
}

void write_csv(const FeatureRanking& r, std::ostream& out) {
  out << "rank,feature,tau,target\n";
  for (std::size_t i = 0; i < r.ranked.size(); ++i)
    out << i + 1 << ",\"" << r.ranked[i].feature << "\"," << format_number(r.ranked[i].tau) << ',' << r.target << '\n';
  for (const auto& s : r.skipped) out << "NA,\"" << s << "\",NA," << r.target << '\n';
}

void write_summary_csv(const std::vector<std::pair<std::string, SummaryStats>>& rows, std::ostream& out) {
  out << "metric,mean,std,min,q25,median,q75,max\n";
  for (const auto& [name, s] : rows)
    out << name << ',' << format_number(s.mean) << ',' << format_number(s.std) << ',' << format_number(s.min) << ','
        << format_number(s.q25) << ',' << format_number(s.median) << ',' << format_number(s.q75) << ','
        << format_number(s.max) << '\n';
}

}  // namespace analognas::analysis
