#include "analognas/nas_search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "analognas/errors.hpp"
#include "analognas/nn/network.hpp"

namespace analognas::search {

using json = nlohmann::ordered_json;
using space::CellEncoding;

namespace {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

SearchResult finish(std::string method, std::uint64_t seed, const QueryBudget& q, const Stopwatch& clock) {
  SearchResult r;
  r.method = std::move(method);
  r.seed = seed;
  r.budget = q.budget();
  r.trajectory = q.trajectory();
  r.queries_used = q.used();
  if (const auto* b = q.best()) {
    r.best = b->arch;
    r.best_value = b->measurement.value;
  }
  r.elapsed_seconds = clock.seconds();
  return r;
}

// Domain members in a seeded uniform order.
std::vector<CellEncoding> shuffled(const SearchDomain& domain, Rng& rng) {
  std::vector<CellEncoding> v = domain.members();
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
  return v;
}

std::vector<CellEncoding> unseen(const SearchDomain& domain, const QueryBudget& q) {
  std::vector<CellEncoding> out;
  for (const auto& e : domain.members())
    if (!q.seen(e)) out.push_back(e);
  return out;
}

// Up to n elements of v chosen uniformly without replacement, in draw order.
std::vector<CellEncoding> subsample(std::vector<CellEncoding> v, std::size_t n, Rng& rng) {
  if (v.size() <= n) return v;
  for (std::size_t i = 0; i < n; ++i) std::swap(v[i], v[i + uniform_index(rng, v.size() - i)]);
  v.resize(n);
  return v;
}

// Fills the budget from a random order when a strategy runs out of
// proposals (tiny domains).
void seed_random(const SearchDomain& domain, QueryBudget& q, Rng& rng, std::size_t count) {
  for (const auto& e : shuffled(domain, rng)) {
    if (count == 0 || q.exhausted()) break;
    if (q.seen(e)) continue;
    q.query(e);
    --count;
  }
}

bool domain_exhausted(const SearchDomain& domain, const QueryBudget& q) { return q.trajectory().size() >= domain.size(); }

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double normal_draw(Rng& rng) {
  // Box-Muller on the project's uniform; keeps trajectories identical across
  // standard libraries.
  const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace

double avm(const bench::BenchmarkRecord& r, AvmReference ref) {
  const double from = ref == AvmReference::sixty_seconds ? r.analog_drift[0].mean : r.analog_acc.mean;
  return from - r.analog_drift[3].mean;
}

Evaluator table_evaluator(const bench::BenchmarkTable& table, const ObjectiveSpec& spec) {
  bench::field_value(bench::BenchmarkRecord{}, spec.metric);  // rejects unknown metrics up front
  return [&table, spec](const CellEncoding& enc) {
    const auto& r = table.query(enc);
    return Measurement{bench::field_value(r, spec.metric), avm(r, spec.avm_reference), r.param_count};
  };
}

SearchDomain::SearchDomain(SubspacePattern pattern)
    : pattern_(pattern), free_(pattern.free_edges()), members_(pattern.enumerate()) {
  if (free_.empty()) throw RangeError("search domain needs at least one free edge");
}

SearchDomain SearchDomain::full() { return SearchDomain(SubspacePattern::parse("(*,*,*,*,*,*)")); }
SearchDomain SearchDomain::parse(std::string_view pattern) { return SearchDomain(SubspacePattern::parse(pattern)); }

CellEncoding SearchDomain::sample(Rng& rng) const { return members_[uniform_index(rng, members_.size())]; }

CellEncoding SearchDomain::mutate(const CellEncoding& enc, Rng& rng) const {
  const int edge = free_[uniform_index(rng, free_.size())];
  const int current = space::op_code(enc.op(edge));
  int next = static_cast<int>(uniform_index(rng, space::kNumOps - 1));
  if (next >= current) ++next;
  return enc.with_op(edge, static_cast<space::OpKind>(next));
}

QueryBudget::QueryBudget(Evaluator eval, std::size_t budget)
    : eval_(std::move(eval)), budget_(budget), cache_(space::kSpaceSize) {
  if (budget == 0) throw RangeError("search budget must be >= 1");
}

bool QueryBudget::seen(const CellEncoding& enc) const { return cache_[space::decode(enc)].has_value(); }

std::optional<Measurement> QueryBudget::cached(const CellEncoding& enc) const { return cache_[space::decode(enc)]; }

std::optional<Measurement> QueryBudget::query(const CellEncoding& enc) {
  auto& slot = cache_[space::decode(enc)];
  if (slot) return slot;
  if (exhausted()) return std::nullopt;
  slot = eval_(enc);
  ++used_;
  const double best = trajectory_.empty() ? slot->value : std::max(trajectory_.back().best_so_far, slot->value);
  trajectory_.push_back({used_, enc, *slot, best});
  return slot;
}

const TrajectoryStep* QueryBudget::best() const {
  const TrajectoryStep* b = nullptr;
  for (const auto& s : trajectory_)
    if (!b || s.measurement.value > b->measurement.value) b = &s;
  return b;
}

SearchResult exhaustive_search(const bench::BenchmarkTable& table, const SearchDomain& domain,
                               const ObjectiveSpec& spec) {
  Stopwatch clock;
  std::vector<std::uint32_t> missing;
  for (const auto& e : domain.members())
    if (!table.contains(space::decode(e))) missing.push_back(space::decode(e));
  if (!missing.empty()) throw IncompleteTableError(std::move(missing));
  QueryBudget q(table_evaluator(table, spec), domain.size());
  for (const auto& e : domain.members()) q.query(e);  // ascending index, so ties keep the lowest
  return finish("exhaustive", 0, q, clock);
}

SearchResult random_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget, std::uint64_t seed) {
  Stopwatch clock;
  Rng rng(seed);
  QueryBudget q(eval, budget);
  for (const auto& e : shuffled(domain, rng)) {
    if (q.exhausted()) break;
    q.query(e);
  }
  return finish("random", seed, q, clock);
}

void EvolutionConfig::validate(std::size_t budget) const {
  if (population < 1) throw RangeError("evolution population must be >= 1");
  if (tournament < 1 || tournament > population) throw RangeError("tournament size must lie in [1, population]");
  if (population > budget) throw RangeError("evolution population exceeds the budget");
  if (!(mutate_rate >= 0.0 && mutate_rate <= 1.0)) throw RangeError("mutate_rate must lie in [0, 1]");
}

namespace {

struct Member {
  CellEncoding arch;
  double value;
};

// Tournament without replacement; ties keep the first drawn.
const Member& tournament(const std::deque<Member>& pop, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(pop.size());
  std::iota(idx.begin(), idx.end(), 0);
  const Member* best = nullptr;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
    const Member& m = pop[idx[i]];
    if (!best || m.value > best->value) best = &m;
  }
  return *best;
}

// Steps that spend no budget (cache hits) before giving up.
std::size_t stall_limit(std::size_t budget) { return 1000 + 100 * budget; }

}  // namespace

SearchResult evolutionary_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget,
                                 std::uint64_t seed, const EvolutionConfig& cfg) {
  cfg.validate(budget);
  Stopwatch clock;
  Rng rng(seed);
  QueryBudget q(eval, budget);
  std::deque<Member> pop;
  for (const auto& e : shuffled(domain, rng)) {
    if (pop.size() == cfg.population || q.exhausted()) break;
    pop.push_back({e, q.query(e)->value});
  }
  std::size_t stalled = 0;
  while (!q.exhausted() && !domain_exhausted(domain, q) && stalled < stall_limit(budget)) {
    const Member& parent = tournament(pop, std::min(cfg.tournament, pop.size()), rng);
    const CellEncoding child = uniform01(rng) < cfg.mutate_rate ? domain.mutate(parent.arch, rng) : domain.sample(rng);
    const std::size_t before = q.used();
    const auto m = q.query(child);
    stalled = q.used() == before ? stalled + 1 : 0;
    pop.push_back({child, m->value});
    pop.pop_front();
  }
  return finish("evolution", seed, q, clock);
}

void GbtConfig::validate() const {
  if (rounds < 0) throw RangeError("gbt rounds must be >= 0");
  if (max_depth < 1) throw RangeError("gbt depth must be >= 1");
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw RangeError("gbt shrinkage must lie in (0, 1]");
  if (min_leaf < 1) throw RangeError("gbt min_leaf must be >= 1");
}

double GbtTree::predict(std::span<const double> x) const {
  int n = 0;
  while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(n)].value;
}

double GbtSurrogate::predict(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return base + shrinkage * s;
}

double GbtSurrogate::predict(const CellEncoding& enc) const { return predict(one_hot(enc)); }

std::vector<double> one_hot(const CellEncoding& enc) {
  std::vector<double> v(space::kNumEdges * space::kNumOps, 0.0);
  for (int e = 0; e < space::kNumEdges; ++e)
    v[static_cast<std::size_t>(e * space::kNumOps + space::op_code(enc.op(e)))] = 1.0;
  return v;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<double>& r, const GbtConfig& cfg)
      : x_(x), r_(r), cfg_(cfg) {}

  GbtTree build() {
    std::vector<std::size_t> idx(r_.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double sum = 0.0;
    for (auto i : idx) sum += r_[i];
    tree_.nodes.back().value = sum / static_cast<double>(idx.size());
    if (depth >= cfg_.max_depth || idx.size() < 2 * static_cast<std::size_t>(cfg_.min_leaf)) return id;

    const double n = static_cast<double>(idx.size());
    double best_gain = 1e-12, best_thr = 0.0;
    int best_f = -1;
    std::vector<std::size_t> order = idx;
    const std::size_t d = x_[idx[0]].size();
    for (std::size_t f = 0; f < d; ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x_[a][f] < x_[b][f] || (x_[a][f] == x_[b][f] && a < b);
      });
      double left = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left += r_[order[k]];
        const double v = x_[order[k]][f], next = x_[order[k + 1]][f];
        if (v == next) continue;
        const std::size_t nl = k + 1, nr = order.size() - nl;
        if (nl < static_cast<std::size_t>(cfg_.min_leaf) || nr < static_cast<std::size_t>(cfg_.min_leaf)) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - sum * sum / n;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_thr = 0.5 * (v + next);
        }
      }
    }
    if (best_f < 0) return id;
    std::vector<std::size_t> li, ri;
    for (auto i : idx) (x_[i][static_cast<std::size_t>(best_f)] <= best_thr ? li : ri).push_back(i);
    const int l = grow(li, depth + 1);
    const int r = grow(ri, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_thr;
    node.left = l;
    node.right = r;
    return id;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<double>& r_;
  const GbtConfig& cfg_;
  GbtTree tree_;
};

double rmse(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s / static_cast<double>(r.size()));
}

}  // namespace

GbtSurrogate fit_gbt(const std::vector<std::vector<double>>& x, std::span<const double> y, const GbtConfig& cfg) {
  cfg.validate();
  if (x.size() != y.size()) throw RangeError("gbt features and targets differ in length");
  if (y.size() < 2) throw RangeError("gbt needs at least two training points");
  GbtSurrogate m;
  m.shrinkage = cfg.shrinkage;
  m.base = mean_of(y);
  std::vector<double> resid(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - m.base;
  m.train_rmse.push_back(rmse(resid));
  for (int round = 0; round < cfg.rounds; ++round) {
    if (m.train_rmse.back() == 0.0) break;  // constant targets or exact fit
    GbtTree t = TreeBuilder(x, resid, cfg).build();
    if (t.nodes.size() == 1) break;  // no split reduces the loss any further
    for (std::size_t i = 0; i < y.size(); ++i) resid[i] -= cfg.shrinkage * t.predict(x[i]);
    m.trees.push_back(std::move(t));
    m.train_rmse.push_back(rmse(resid));
  }
  return m;
}

GbtSurrogate fit_gbt(std::span<const CellEncoding> archs, std::span<const double> y, const GbtConfig& cfg) {
  std::vector<std::vector<double>> x;
  x.reserve(archs.size());
  for (const auto& a : archs) x.push_back(one_hot(a));
  return fit_gbt(x, y, cfg);
}

namespace {

struct Observed {
  std::vector<CellEncoding> archs;
  std::vector<double> values;
};

Observed observed(const QueryBudget& q) {
  Observed o;
  for (const auto& s : q.trajectory()) {
    o.archs.push_back(s.arch);
    o.values.push_back(s.measurement.value);
  }
  return o;
}

// Index of the largest score; ties keep the first.
std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

SearchResult bayesian_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget, std::uint64_t seed,
                             const BayesConfig& cfg) {
  if (cfg.initial < 2) throw RangeError("bayesian search needs an initial design of at least 2");
  if (budget <= cfg.initial) throw RangeError("bayesian search budget must exceed the initial design");
  if (cfg.ensemble < 1) throw RangeError("bayesian ensemble must have at least one member");
  Stopwatch clock;
  Rng rng(seed);
  QueryBudget q(eval, budget);
  seed_random(domain, q, rng, cfg.initial);
  while (!q.exhausted() && !domain_exhausted(domain, q)) {
    const Observed obs = observed(q);
    std::vector<GbtSurrogate> models;
    for (std::size_t b = 0; b < cfg.ensemble; ++b) {
      std::vector<CellEncoding> xa;
      std::vector<double> ya;
      for (std::size_t i = 0; i < obs.archs.size(); ++i) {
        const std::size_t j = cfg.ensemble == 1 ? i : uniform_index(rng, obs.archs.size());
        xa.push_back(obs.archs[j]);
        ya.push_back(obs.values[j]);
      }
      models.push_back(fit_gbt(xa, ya, cfg.gbt));
    }
    const auto pool = subsample(unseen(domain, q), cfg.pool, rng);
    std::vector<double> score(pool.size());
    for (std::size_t c = 0; c < pool.size(); ++c) {
      const auto x = one_hot(pool[c]);
      std::vector<double> p;
      for (const auto& m : models) p.push_back(m.predict(x));
      const double mu = mean_of(p);
      double var = 0.0;
      for (double v : p) var += (v - mu) * (v - mu);
      score[c] = mu + cfg.kappa * std::sqrt(var / static_cast<double>(p.size()));
    }
    q.query(pool[argmax(score)]);
  }
  return finish("bayesian", seed, q, clock);
}

namespace {

// Live ops in path position order: skip, conv3, conv1, pool.
constexpr std::array<space::OpKind, 4> kLiveOps{space::OpKind::skip, space::OpKind::conv3x3, space::OpKind::conv1x1,
                                                space::OpKind::avg_pool3x3};

int live_slot(space::OpKind op) {
  for (int i = 0; i < 4; ++i)
    if (kLiveOps[static_cast<std::size_t>(i)] == op) return i;
  return -1;
}

std::size_t path_feature(const space::OpPath& p) {
  static constexpr std::array<std::size_t, 4> offset{0, 0, 4, 20};
  std::size_t code = 0;
  for (auto op : p.view()) code = code * 4 + static_cast<std::size_t>(live_slot(op));
  return offset[p.length] + code;
}

// Small fully connected regressor: in -> hidden (ReLU) -> 1, trained with
// Adam on standardized targets.
class Mlp {
 public:
  Mlp(std::size_t in, std::size_t hidden, Rng& rng) : in_(in), hidden_(hidden) {
    const double s1 = std::sqrt(2.0 / static_cast<double>(in)), s2 = std::sqrt(1.0 / static_cast<double>(hidden));
    w1_.resize(in * hidden);
    for (auto& w : w1_) w = s1 * normal_draw(rng);
    b1_.assign(hidden, 0.0);
    w2_.resize(hidden);
    for (auto& w : w2_) w = s2 * normal_draw(rng);
  }

  void fit(const std::vector<std::vector<double>>& x, std::span<const double> y, int epochs, double lr) {
    mu_ = mean_of(y);
    double var = 0.0;
    for (double v : y) var += (v - mu_) * (v - mu_);
    sd_ = std::sqrt(var / static_cast<double>(y.size()));
    if (sd_ == 0.0) sd_ = 1.0;
    const std::size_t np = w1_.size() + b1_.size() + w2_.size() + 1;
    std::vector<double> g(np), m(np, 0.0), v(np, 0.0);
    std::vector<double> h(hidden_);
    const double b1m = 0.9, b2m = 0.999;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double out = forward(x[i], h);
        const double d = 2.0 * (out - (y[i] - mu_) / sd_) / static_cast<double>(x.size());
        for (std::size_t j = 0; j < hidden_; ++j) {
          g[w1_.size() + b1_.size() + j] += d * h[j];
          if (h[j] <= 0.0) continue;
          const double dh = d * w2_[j];
          g[w1_.size() + j] += dh;
          for (std::size_t k = 0; k < in_; ++k)
            if (x[i][k] != 0.0) g[j * in_ + k] += dh * x[i][k];
        }
        g[np - 1] += d;
      }
      const double c1 = 1.0 - std::pow(b1m, epoch), c2 = 1.0 - std::pow(b2m, epoch);
      for (std::size_t p = 0; p < np; ++p) {
        m[p] = b1m * m[p] + (1 - b1m) * g[p];
        v[p] = b2m * v[p] + (1 - b2m) * g[p] * g[p];
        param(p) -= lr * (m[p] / c1) / (std::sqrt(v[p] / c2) + 1e-8);
      }
    }
  }

  double predict(std::span<const double> x) const {
    std::vector<double> h(hidden_);
    return forward(x, h) * sd_ + mu_;
  }

 private:
  double forward(std::span<const double> x, std::vector<double>& h) const {
    double out = b2_;
    for (std::size_t j = 0; j < hidden_; ++j) {
      double a = b1_[j];
      for (std::size_t k = 0; k < in_; ++k)
        if (x[k] != 0.0) a += w1_[j * in_ + k] * x[k];
      h[j] = std::max(a, 0.0);
      out += w2_[j] * h[j];
    }
    return out;
  }

  double& param(std::size_t p) {
    if (p < w1_.size()) return w1_[p];
    p -= w1_.size();
    if (p < b1_.size()) return b1_[p];
    p -= b1_.size();
    if (p < w2_.size()) return w2_[p];
    return b2_;
  }

  std::size_t in_, hidden_;
  std::vector<double> w1_, b1_, w2_;
  double b2_ = 0.0;
  double mu_ = 0.0, sd_ = 1.0;
};

}  // namespace

std::vector<double> path_encoding(const CellEncoding& enc) {
  std::vector<double> v(84, 0.0);
  for (const auto& p : space::extract_paths(enc)) v[path_feature(p)] = 1.0;
  return v;
}

std::vector<std::string> path_encoding_names() {
  std::vector<std::string> names(84);
  for (int len = 1; len <= 3; ++len) {
    const int count = len == 1 ? 4 : len == 2 ? 16 : 64;
    for (int code = 0; code < count; ++code) {
      space::OpPath p;
      p.length = static_cast<std::uint8_t>(len);
      int c = code;
      for (int i = len - 1; i >= 0; --i) {
        p.ops[static_cast<std::size_t>(i)] = kLiveOps[static_cast<std::size_t>(c % 4)];
        c /= 4;
      }
      names[path_feature(p)] = p.to_string();
    }
  }
  return names;
}

SearchResult bananas_style_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget,
                                  std::uint64_t seed, const BananasConfig& cfg) {
  if (cfg.initial < 2) throw RangeError("predictor search needs an initial design of at least 2");
  if (budget <= cfg.initial) throw RangeError("predictor search budget must exceed the initial design");
  if (cfg.ensemble < 1 || cfg.hidden < 1) throw RangeError("predictor ensemble and width must be >= 1");
  Stopwatch clock;
  Rng rng(seed);
  QueryBudget q(eval, budget);
  seed_random(domain, q, rng, cfg.initial);
  while (!q.exhausted() && !domain_exhausted(domain, q)) {
    const Observed obs = observed(q);
    std::vector<std::vector<double>> x;
    for (const auto& a : obs.archs) x.push_back(path_encoding(a));
    std::vector<Mlp> ensemble;
    for (std::size_t e = 0; e < cfg.ensemble; ++e) {
      ensemble.emplace_back(x[0].size(), cfg.hidden, rng);
      ensemble.back().fit(x, obs.values, cfg.epochs, cfg.learning_rate);
    }
    // Candidates: mutations of the best archived architectures.
    std::vector<std::size_t> rank(obs.archs.size());
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return obs.values[a] > obs.values[b]; });
    std::vector<CellEncoding> pool;
    std::vector<bool> taken(space::kSpaceSize, false);
    const std::size_t parents = std::min(cfg.parents, rank.size());
    for (std::size_t t = 0; t < cfg.candidates * 4 && pool.size() < cfg.candidates; ++t) {
      CellEncoding c = domain.mutate(obs.archs[rank[t % parents]], rng);
      if (uniform01(rng) < 0.5) c = domain.mutate(c, rng);
      const auto idx = space::decode(c);
      if (q.seen(c) || taken[idx]) continue;
      taken[idx] = true;
      pool.push_back(c);
    }
    if (pool.empty()) pool = subsample(unseen(domain, q), cfg.candidates, rng);
    // Independent Thompson sampling: one draw per candidate from the
    // ensemble's predictive normal.
    std::vector<double> score(pool.size());
    for (std::size_t c = 0; c < pool.size(); ++c) {
      const auto xc = path_encoding(pool[c]);
      std::vector<double> p;
      for (const auto& m : ensemble) p.push_back(m.predict(xc));
      const double mu = mean_of(p);
      double var = 0.0;
      for (double v : p) var += (v - mu) * (v - mu);
      const double sd = std::sqrt(var / static_cast<double>(p.size()));
      score[c] = sd > 0.0 ? mu + sd * normal_draw(rng) : mu;
    }
    q.query(pool[argmax(score)]);
  }
  return finish("bananas", seed, q, clock);
}

AimcConfig AimcConfig::defaults(AimcVariant v) {
  AimcConfig c;
  c.variant = v;
  if (v == AimcVariant::ga_imc) {
    c.population = 30;
    c.tournament = 3;
    c.candidates = 30;
    c.evaluate_top = 3;
  }
  return c;
}

SearchResult aimc_evolutionary_search(const Evaluator& eval, const SearchDomain& domain, std::size_t budget,
                                      std::uint64_t seed, const AimcConfig& cfg) {
  if (cfg.population < 2 || cfg.tournament < 1 || cfg.tournament > cfg.population)
    throw RangeError("aimc search needs population >= 2 and tournament in [1, population]");
  if (cfg.evaluate_top < 1 || cfg.candidates < cfg.evaluate_top)
    throw RangeError("aimc search needs 1 <= evaluate_top <= candidates");
  if (cfg.param_cap && !cfg.params) throw RangeError("a parameter cap needs a parameter-count function");
  if (std::isnan(cfg.avm_bound)) throw RangeError("AVM bound must not be NaN");
  Stopwatch clock;

  std::vector<bool> param_ok(space::kSpaceSize, true);
  if (cfg.param_cap) {
    bool any = false;
    for (const auto& e : domain.members()) {
      const bool ok = cfg.params(e) <= *cfg.param_cap;
      param_ok[space::decode(e)] = ok;
      any = any || ok;
    }
    if (!any)
      throw InfeasibleError("no architecture in the domain has at most " + std::to_string(*cfg.param_cap) +
                            " parameters");
  }
  auto allowed = [&](const CellEncoding& e) { return param_ok[space::decode(e)]; };
  auto feasible = [&](const Measurement& m) { return m.avm <= cfg.avm_bound; };

  Rng rng(seed);
  QueryBudget q(eval, budget);
  std::deque<Member> pop;
  for (const auto& e : shuffled(domain, rng)) {
    if (pop.size() == cfg.population || q.exhausted()) break;
    if (!allowed(e)) continue;
    const auto m = q.query(e);
    // Constraint violators stay in the population but lose every tournament.
    pop.push_back({e, feasible(*m) ? m->value : m->value - 1e6});
  }
  const bool constrained_avm = std::isfinite(cfg.avm_bound);
  std::size_t stalled = 0;
  while (!q.exhausted() && !domain_exhausted(domain, q) && stalled < stall_limit(budget)) {
    const Observed obs = observed(q);
    const GbtSurrogate value_model = fit_gbt(obs.archs, obs.values, cfg.gbt);
    std::optional<GbtSurrogate> avm_model;
    if (constrained_avm) {
      std::vector<double> avms;
      for (const auto& s : q.trajectory()) avms.push_back(s.measurement.avm);
      avm_model = fit_gbt(obs.archs, avms, cfg.gbt);
    }
    std::vector<CellEncoding> pool;
    std::vector<bool> taken(space::kSpaceSize, false);
    for (std::size_t t = 0; t < cfg.candidates * 4 && pool.size() < cfg.candidates; ++t) {
      const CellEncoding c = domain.mutate(tournament(pop, cfg.tournament, rng).arch, rng);
      const auto idx = space::decode(c);
      if (q.seen(c) || taken[idx] || !allowed(c)) continue;
      taken[idx] = true;
      pool.push_back(c);
    }
    if (pool.empty()) {
      for (const auto& e : subsample(unseen(domain, q), cfg.candidates, rng))
        if (allowed(e)) pool.push_back(e);
      if (pool.empty()) break;
    }
    // Predicted-feasible candidates first, each group by predicted value.
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      const auto x = one_hot(pool[c]);
      double s = value_model.predict(x);
      if (avm_model && avm_model->predict(x) > cfg.avm_bound) s -= 1e6;
      ranked.push_back({s, c});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t before = q.used();
    for (std::size_t k = 0; k < std::min(cfg.evaluate_top, ranked.size()) && !q.exhausted(); ++k) {
      const CellEncoding& c = pool[ranked[k].second];
      const auto m = q.query(c);
      pop.push_back({c, feasible(*m) ? m->value : m->value - 1e6});
      if (pop.size() > cfg.population) pop.pop_front();
    }
    stalled = q.used() == before ? stalled + 1 : 0;
  }

  SearchResult r = finish(cfg.variant == AimcVariant::analognas ? "analognas" : "ga_imc", seed, q, clock);
  const TrajectoryStep* best = nullptr;
  for (const auto& s : r.trajectory)
    if (feasible(s.measurement) && (!best || s.measurement.value > best->measurement.value)) best = &s;
  if (!best)
    throw InfeasibleError("no evaluated architecture has AVM <= " + std::to_string(cfg.avm_bound));
  r.best = best->arch;
  r.best_value = best->measurement.value;
  return r;
}

std::vector<std::string> method_names() {
  return {"exhaustive", "random", "evolution", "bayesian", "bananas", "analognas", "ga_imc"};
}

namespace {

std::function<std::uint64_t(const CellEncoding&)> table_params(const bench::BenchmarkTable& table) {
  try {
    const RunConfig cfg = run_config_from_json(table.metadata().config_json);
    return [macro = cfg.pipeline.macro](const CellEncoding& e) {
      return static_cast<std::uint64_t>(nn::closed_form_parameter_count(e, macro));
    };
  } catch (const std::exception&) {
    return [&table](const CellEncoding& e) { return table.query(e).param_count; };
  }
}

}  // namespace

SearchResult run_method(std::string_view method, const bench::BenchmarkTable& table, const SearchDomain& domain,
                        std::size_t budget, std::uint64_t seed, const ObjectiveSpec& spec, const AimcConfig* aimc) {
  const Evaluator eval = table_evaluator(table, spec);
  if (method == "exhaustive") return exhaustive_search(table, domain, spec);
  if (method == "random") return random_search(eval, domain, budget, seed);
  if (method == "evolution") return evolutionary_search(eval, domain, budget, seed);
  if (method == "bayesian") return bayesian_search(eval, domain, budget, seed);
  if (method == "bananas") return bananas_style_search(eval, domain, budget, seed);
  if (method == "analognas" || method == "ga_imc") {
    const auto variant = method == "analognas" ? AimcVariant::analognas : AimcVariant::ga_imc;
    AimcConfig cfg = aimc ? *aimc : AimcConfig::defaults(variant);
    if (aimc) {
      const AimcConfig d = AimcConfig::defaults(variant);
      cfg.variant = variant;
      cfg.population = d.population;
      cfg.tournament = d.tournament;
      cfg.candidates = d.candidates;
      cfg.evaluate_top = d.evaluate_top;
    }
    if (cfg.param_cap && !cfg.params) cfg.params = table_params(table);
    return aimc_evolutionary_search(eval, domain, budget, seed, cfg);
  }
  throw RangeError("unknown search method '" + std::string(method) + "'");
}

namespace {

bench::MeanStd mean_std(const std::vector<double>& v) {
  bench::MeanStd m;
  m.mean = mean_of(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(sq / static_cast<double>(v.size()));
  return m;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

std::vector<ComparisonRow> compare_methods(const std::vector<std::string>& methods, const bench::BenchmarkTable& table,
                                           const SearchDomain& domain, const std::vector<std::size_t>& budgets,
                                           const std::vector<std::uint64_t>& seeds, const ObjectiveSpec& spec,
                                           const AimcConfig* aimc) {
  if (seeds.empty() || budgets.empty()) throw RangeError("comparison needs at least one budget and one seed");
  std::vector<ComparisonRow> rows;
  for (const auto& method : methods)
    for (std::size_t budget : budgets) {
      std::vector<double> base, noisy, day, avms, params, secs;
      for (auto seed : seeds) {
        const SearchResult r = run_method(method, table, domain, budget, seed, spec, aimc);
        const auto& rec = table.query(r.best);
        base.push_back(rec.baseline_acc);
        noisy.push_back(rec.noisy_acc.mean);
        day.push_back(rec.analog_drift[2].mean);
        avms.push_back(avm(rec, spec.avm_reference));
        params.push_back(static_cast<double>(rec.param_count));
        secs.push_back(r.elapsed_seconds);
      }
      rows.push_back({method, method == "exhaustive" ? domain.size() : budget, seeds.size(), mean_std(base),
                      mean_std(noisy), mean_std(day), mean_std(avms), mean_std(params), mean_std(secs)});
    }
  return rows;
}

void write_comparison_csv(std::span<const ComparisonRow> rows, std::ostream& out) {
  out << "method,budget,seeds,baseline_mean,baseline_std,noisy_mean,noisy_std,analog_1d_mean,analog_1d_std,avm_mean,"
         "avm_std,params_mean,params_std,search_seconds_mean,search_seconds_std\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.budget << ',' << r.seeds;
    for (const auto* m : {&r.baseline, &r.noisy, &r.one_day, &r.avm, &r.params, &r.search_seconds})
      out << ',' << fmt(m->mean) << ',' << fmt(m->std);
    out << '\n';
  }
}

namespace {

json step_json(const TrajectoryStep& s) {
  return json{{"step", s.step},
              {"index", space::decode(s.arch)},
              {"arch", s.arch.to_tuple_string()},
              {"value", s.measurement.value},
              {"avm", s.measurement.avm},
              {"param_count", s.measurement.param_count},
              {"best", s.best_so_far}};
}

}  // namespace

void write_trajectory_jsonl(const SearchResult& r, std::ostream& out) {
  for (const auto& s : r.trajectory) out << step_json(s).dump() << '\n';
}

std::string to_json(const SearchResult& r) {
  json j{{"method", r.method},
         {"seed", r.seed},
         {"budget", r.budget},
         {"queries_used", r.queries_used},
         {"best_index", space::decode(r.best)},
         {"best_arch", r.best.to_tuple_string()},
         {"best_value", r.best_value}};
  j["trajectory"] = json::array();
  for (const auto& s : r.trajectory) j["trajectory"].push_back(step_json(s));
  return j.dump(2);
}

}  // namespace analognas::search
