#include "treelearn/dist.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <boost/multiprecision/cpp_int.hpp>

#include "treelearn/errors.hpp"
#include "treelearn/random.hpp"

namespace treelearn {

namespace {

constexpr std::size_t kMaxExactInputs = 20;

// Neumaier compensated sum; exact identities (E[y] = 0, total mass 1) then
// hold to a few ulps even over 2^16 support points.
class Sum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

bool point_less(const WeightedPoint& a, const WeightedPoint& b) {
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

}  // namespace

DiscreteDistribution::DiscreteDistribution(std::size_t dimension, std::vector<WeightedPoint> support)
    : dimension_(dimension) {
  for (const auto& pt : support) {
    if (pt.x.size() != dimension) {
      throw DimensionMismatch("support point of length " + std::to_string(pt.x.size()) +
                              " in a distribution of dimension " + std::to_string(dimension));
    }
    if (!(pt.p >= 0.0) || !std::isfinite(pt.p)) {
      throw PreconditionViolated("probabilities must be finite and nonnegative");
    }
    if (!is_bit(pt.y)) throw PreconditionViolated("label is not +-1");
  }
  std::sort(support.begin(), support.end(), point_less);
  for (auto& pt : support) {
    if (!support_.empty() && support_.back().x == pt.x && support_.back().y == pt.y) {
      support_.back().p += pt.p;
    } else {
      support_.push_back(std::move(pt));
    }
  }
  const double total = total_mass();
  if (std::abs(total - 1.0) > 1e-9) {
    throw PreconditionViolated("total mass " + std::to_string(total) + " is not 1");
  }
}

DiscreteDistribution DiscreteDistribution::empirical(const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw EmptyBatch("empirical distribution of an empty sample");
  std::map<std::pair<BitVector, Bit>, std::size_t> counts;
  for (const auto& s : samples) ++counts[{s.x, s.y}];
  const double n = static_cast<double>(samples.size());
  std::vector<WeightedPoint> pts;
  pts.reserve(counts.size());
  for (const auto& [key, count] : counts) {
    pts.push_back({key.first, key.second, static_cast<double>(count) / n});
  }
  return DiscreteDistribution(samples.front().x.size(), std::move(pts));
}

double DiscreteDistribution::total_mass() const {
  Sum s;
  for (const auto& pt : support_) s.add(pt.p);
  return s.value();
}

double DiscreteDistribution::mean_label() const {
  Sum s;
  for (const auto& pt : support_) s.add(pt.y > 0 ? pt.p : -pt.p);
  return s.value();
}

double DiscreteDistribution::correlation(std::size_t j) const {
  if (j >= dimension_) throw IndexOutOfRange("coordinate " + std::to_string(j));
  Sum s;
  for (const auto& pt : support_) s.add(pt.x[j] * pt.y > 0 ? pt.p : -pt.p);
  return s.value();
}

double DiscreteDistribution::marginal_plus(std::size_t j) const {
  if (j >= dimension_) throw IndexOutOfRange("coordinate " + std::to_string(j));
  Sum s;
  for (const auto& pt : support_) {
    if (pt.x[j] > 0) s.add(pt.p);
  }
  return s.value();
}

DiscreteDistribution DiscreteDistribution::with_flipped_labels() const {
  std::vector<WeightedPoint> pts = support_;
  for (auto& pt : pts) pt.y = static_cast<Bit>(-pt.y);
  return DiscreteDistribution(dimension_, std::move(pts));
}

double DiscreteDistribution::mass(std::span<const Bit> x, Bit y) const {
  WeightedPoint key{BitVector(x.begin(), x.end()), y, 0.0};
  auto it = std::lower_bound(support_.begin(), support_.end(), key, point_less);
  if (it != support_.end() && it->x == key.x && it->y == y) return it->p;
  return 0.0;
}

LabeledSample DiscreteDistribution::sample(Rng& rng) const {
  const double u = rng.uniform() * total_mass();
  double acc = 0.0;
  for (const auto& pt : support_) {
    acc += pt.p;
    if (u < acc) return {pt.x, pt.y};
  }
  for (auto it = support_.rbegin(); it != support_.rend(); ++it) {
    if (it->p > 0.0) return {it->x, it->y};
  }
  return {support_.back().x, support_.back().y};
}

double total_variation(const DiscreteDistribution& a, const DiscreteDistribution& b) {
  if (a.dimension() != b.dimension()) throw DimensionMismatch("total variation across dimensions");
  const auto& sa = a.support();
  const auto& sb = b.support();
  std::size_t i = 0, j = 0;
  double tv = 0.0;
  while (i < sa.size() || j < sb.size()) {
    if (j == sb.size() || (i < sa.size() && point_less(sa[i], sb[j]))) {
      tv += sa[i++].p;
    } else if (i == sa.size() || point_less(sb[j], sa[i])) {
      tv += sb[j++].p;
    } else {
      tv += std::abs(sa[i++].p - sb[j++].p);
    }
  }
  return tv / 2.0;
}

DiscreteDistribution pushforward(const DiscreteDistribution& dd, const Circuit& c, int level) {
  if (dd.dimension() != c.inputs()) {
    throw DimensionMismatch("distribution dimension " + std::to_string(dd.dimension()) +
                            " does not match circuit inputs " + std::to_string(c.inputs()));
  }
  if (level < 0 || level > c.depth()) throw DimensionMismatch("level " + std::to_string(level));
  if (level == c.depth()) return dd;
  std::map<std::pair<BitVector, Bit>, double> image;
  for (const auto& pt : dd.support()) {
    BitVector z = pt.x;
    for (int layer = c.depth(); layer > level; --layer) z = level_map(c, layer, z);
    image[{std::move(z), pt.y}] += pt.p;
  }
  std::vector<WeightedPoint> pts;
  pts.reserve(image.size());
  for (auto& [key, p] : image) pts.push_back({key.first, key.second, p});
  return DiscreteDistribution(std::size_t{1} << level, std::move(pts));
}

std::vector<DiscreteDistribution> distribution_chain(const DiscreteDistribution& dd,
                                                     const Circuit& c) {
  std::vector<DiscreteDistribution> chain;
  chain.reserve(c.depth() + 1);
  for (int level = 0; level <= c.depth(); ++level) chain.push_back(pushforward(dd, c, level));
  return chain;
}

// ---------------------------------------------------------------------------

ProductDistribution::ProductDistribution(std::vector<double> probs) : p(std::move(probs)) {
  if (p.empty()) throw DimensionMismatch("product distribution of dimension 0");
  for (double q : p) {
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidRange("product probability outside [0, 1]");
  }
}

ProductDistribution ProductDistribution::constant(std::size_t n, double value) {
  return ProductDistribution(std::vector<double>(n, value));
}

double ProductDistribution::nondegeneracy() const {
  double m = 1.0;
  for (double q : p) m = std::min({m, q, 1.0 - q});
  return m;
}

BitVector ProductDistribution::sample(Rng& rng) const {
  BitVector x(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) x[j] = rng.bernoulli_bit(p[j]);
  return x;
}

LabeledProduct::LabeledProduct(ProductDistribution pd, Circuit c) : pd_(std::move(pd)), c_(std::move(c)) {
  if (pd_.dimension() != c_.inputs()) {
    throw DimensionMismatch("product distribution has " + std::to_string(pd_.dimension()) +
                            " coordinates, circuit has " + std::to_string(c_.inputs()) + " inputs");
  }
}

LabeledSample LabeledProduct::sample(Rng& rng) const {
  LabeledSample s;
  s.x = pd_.sample(rng);
  s.y = eval_circuit(c_, s.x);
  return s;
}

DiscreteDistribution LabeledProduct::enumerate() const {
  const std::size_t n = pd_.dimension();
  if (n > kMaxExactInputs) {
    throw TooLargeForExact("exact enumeration needs n <= 20, got " + std::to_string(n));
  }
  std::vector<WeightedPoint> pts;
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
    BitVector x = cube_point(n, idx);
    double w = 1.0;
    for (std::size_t j = 0; j < n; ++j) w *= x[j] > 0 ? pd_.p[j] : 1.0 - pd_.p[j];
    if (w == 0.0) continue;
    const Bit y = eval_circuit(c_, x);
    pts.push_back({std::move(x), y, w});
  }
  return DiscreteDistribution(n, std::move(pts));
}

// ---------------------------------------------------------------------------

std::vector<std::pair<Bit, Bit>> pattern_set(const GateFn& g, Bit out) {
  std::vector<std::pair<Bit, Bit>> s;
  for (int t = 0; t < 4; ++t) {
    if (g.table()[t] == out) s.push_back(GateFn::kPatterns[t]);
  }
  return s;
}

GenerativeDistribution::GenerativeDistribution(Circuit c) : c_(std::move(c)) {
  for (int layer = 1; layer <= c_.depth(); ++layer) {
    for (std::size_t j = 0; j < c_.layer(layer).size(); ++j) {
      if (!c_.gate(layer, j).is_and_or_family()) {
        throw UnsupportedGate("gate (" + std::to_string(layer) + ", " + std::to_string(j) + ") = " +
                              c_.gate(layer, j).to_string() +
                              " is not AND, OR, NAND or NOR");
      }
    }
  }
}

LabeledSample GenerativeDistribution::sample(Rng& rng) const {
  LabeledSample s;
  s.y = rng.sign();
  BitVector z{s.y};
  for (int layer = 1; layer <= c_.depth(); ++layer) {
    BitVector next(2 * z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
      const auto options = pattern_set(c_.gate(layer, j), z[j]);
      const auto& [a, b] = options[rng.below(options.size())];
      next[2 * j] = a;
      next[2 * j + 1] = b;
    }
    z = std::move(next);
  }
  s.x = std::move(z);
  return s;
}

std::vector<DiscreteDistribution> GenerativeDistribution::enumerate_chain() const {
  using Rational = boost::multiprecision::cpp_rational;
  if (c_.inputs() > kMaxExactInputs) {
    throw TooLargeForExact("exact enumeration needs n <= 20, got " + std::to_string(c_.inputs()));
  }
  struct Entry {
    BitVector z;
    Bit y;
    Rational w;
  };
  auto to_dist = [](const std::vector<Entry>& entries, std::size_t dim) {
    std::vector<WeightedPoint> pts;
    pts.reserve(entries.size());
    for (const auto& e : entries) pts.push_back({e.z, e.y, e.w.convert_to<double>()});
    return DiscreteDistribution(dim, std::move(pts));
  };

  std::vector<Entry> level{{BitVector{1}, 1, Rational(1, 2)}, {BitVector{-1}, -1, Rational(1, 2)}};
  std::vector<DiscreteDistribution> chain;
  chain.push_back(to_dist(level, 1));
  for (int layer = 1; layer <= c_.depth(); ++layer) {
    const std::size_t gates = c_.layer(layer).size();
    std::vector<Entry> next;
    for (const auto& e : level) {
      std::vector<std::vector<std::pair<Bit, Bit>>> sets(gates);
      Rational w = e.w;
      for (std::size_t j = 0; j < gates; ++j) {
        sets[j] = pattern_set(c_.gate(layer, j), e.z[j]);
        w /= static_cast<int>(sets[j].size());
      }
      std::vector<std::size_t> odo(gates, 0);
      while (true) {
        BitVector x(2 * gates);
        for (std::size_t j = 0; j < gates; ++j) {
          x[2 * j] = sets[j][odo[j]].first;
          x[2 * j + 1] = sets[j][odo[j]].second;
        }
        next.push_back({std::move(x), e.y, w});
        bool done = true;
        for (std::size_t j = gates; j-- > 0;) {
          if (++odo[j] < sets[j].size()) {
            done = false;
            break;
          }
          odo[j] = 0;
        }
        if (done) break;
      }
    }
    level = std::move(next);
    chain.push_back(to_dist(level, 2 * gates));
  }
  return chain;
}

DiscreteDistribution GenerativeDistribution::enumerate() const { return enumerate_chain().back(); }

DiscreteDistribution GenerativeDistribution::enumerate_level(int level) const {
  if (level < 0 || level > c_.depth()) throw IndexOutOfRange("level " + std::to_string(level));
  return enumerate_chain()[level];
}

// ---------------------------------------------------------------------------

std::vector<PatternTable> pattern_tables(const DiscreteDistribution& d_level) {
  const std::size_t gates = d_level.dimension() / 2;
  if (gates == 0) throw DimensionMismatch("pattern tables need a level of dimension >= 2");
  std::vector<PatternTable> tables(gates);
  for (const auto& pt : d_level.support()) {
    for (std::size_t j = 0; j < gates; ++j) {
      const int t = GateFn::pattern_index(pt.x[2 * j], pt.x[2 * j + 1]);
      tables[j].weight[t][pt.y > 0 ? 1 : 0] += pt.p;
    }
  }
  return tables;
}

namespace {

std::vector<DiscreteDistribution> oriented(const std::vector<DiscreteDistribution>& chain,
                                           const Circuit& c, double tol, bool& flipped) {
  if (chain.size() != static_cast<std::size_t>(c.depth() + 1)) {
    throw DimensionMismatch("distribution chain must hold D^(0..d)");
  }
  for (int i = 0; i <= c.depth(); ++i) {
    if (chain[i].dimension() != (std::size_t{1} << i)) {
      throw DimensionMismatch("chain level " + std::to_string(i) + " has the wrong dimension");
    }
  }
  flipped = chain.back().mean_label() < -tol;
  if (!flipped) return chain;
  std::vector<DiscreteDistribution> out;
  for (const auto& d : chain) out.push_back(d.with_flipped_labels());
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void fill_gate_records(AnalysisReport& r, const std::vector<DiscreteDistribution>& chain,
                       const Circuit& c, const CertifyOptions& opts) {
  r.gates.clear();
  for (int level = 1; level <= c.depth(); ++level) {
    for (std::size_t j = 0; j < (std::size_t{1} << level); ++j) {
      GateRecord g;
      g.level = level;
      g.pos = j;
      g.correlation = chain[level].correlation(j);
      g.influence = influence(c, level, j, opts.influence).value;
      g.influencing = g.influence != 0.0;
      r.gates.push_back(g);
    }
  }
}

}  // namespace

AnalysisReport certify_lca(const std::vector<DiscreteDistribution>& chain_in, const Circuit& c,
                           double delta, const CertifyOptions& opts) {
  AnalysisReport r;
  const auto chain = oriented(chain_in, c, opts.margin_tolerance, r.labels_flipped);
  r.mean_label = chain.back().mean_label();
  r.delta = delta;
  r.lca_checked = true;
  fill_gate_records(r, chain, c, opts);
  bool ok = true;
  for (auto& g : r.gates) {
    g.lca_margin = std::abs(g.correlation) - r.mean_label - delta;
    if (!g.influencing) continue;
    r.lca_min_margin = std::min(r.lca_min_margin, g.lca_margin);
    if (g.lca_margin > opts.margin_tolerance) continue;
    if (g.level == c.depth() && std::abs(g.lca_margin) <= opts.margin_tolerance) {
      g.boundary = true;
      ++r.boundary_count;
      continue;
    }
    g.pass = false;
    ok = false;
    r.witnesses.push_back({"lca", g.level, g.pos,
                           "|c| - E[y] - delta = " + fmt(g.lca_margin)});
  }
  r.lca_holds = ok;
  return r;
}

AnalysisReport certify_properties(const std::vector<DiscreteDistribution>& chain_in,
                                  const Circuit& c, const CertifyOptions& opts) {
  AnalysisReport r;
  const auto chain = oriented(chain_in, c, opts.margin_tolerance, r.labels_flipped);
  r.mean_label = chain.back().mean_label();
  r.properties_checked = true;
  fill_gate_records(r, chain, c, opts);

  // Property 1: influence zero implies independence of the label; otherwise
  // the correlation must beat E[y].
  r.property1 = true;
  double sup_delta = 1.0;
  for (auto& g : r.gates) {
    const auto& d = chain[g.level];
    if (!g.influencing) {
      const double py = (1.0 + d.mean_label()) / 2.0;
      const double pz = d.marginal_plus(g.pos);
      double pzy = 0.0;
      for (const auto& pt : d.support()) {
        if (pt.x[g.pos] > 0 && pt.y > 0) pzy += pt.p;
      }
      // With binary variables one cell determines the others.
      const double gap = std::abs(pzy - pz * py);
      if (gap > opts.independence_tolerance) {
        r.property1 = false;
        g.pass = false;
        r.witnesses.push_back({"property1", g.level, g.pos,
                               "non-influencing value depends on the label (gap " + fmt(gap) + ")"});
      }
      continue;
    }
    const double slack = std::abs(g.correlation) - r.mean_label;
    sup_delta = std::min(sup_delta, slack);
    if (slack <= 0.0) {
      r.property1 = false;
      g.pass = false;
      r.witnesses.push_back({"property1", g.level, g.pos,
                             "|c| - E[y] = " + fmt(slack) + " is not positive"});
    }
  }
  r.delta_certified = std::max(sup_delta, 0.0);

  // Properties 2 and 3 over every gate's input pattern at D^(layer).
  r.property2 = true;
  double eps = 1.0;
  for (int layer = 1; layer <= c.depth(); ++layer) {
    const auto tables = pattern_tables(chain[layer]);
    for (std::size_t j = 0; j < tables.size(); ++j) {
      const auto& tab = tables[j];
      const GateFn& g = c.gate(layer, j);
      for (int t = 0; t < 4; ++t) {
        if (tab.pattern_mass(t) > 0.0) eps = std::min(eps, tab.pattern_mass(t));
      }
      for (Bit out : {Bit{-1}, Bit{1}}) {
        double po = 0.0, po_y[2] = {0.0, 0.0};
        for (int t = 0; t < 4; ++t) {
          if (g.table()[t] != out) continue;
          po += tab.pattern_mass(t);
          po_y[0] += tab.weight[t][0];
          po_y[1] += tab.weight[t][1];
        }
        if (po <= 0.0) continue;
        for (int t = 0; t < 4; ++t) {
          if (g.table()[t] != out) continue;
          for (int yi = 0; yi < 2; ++yi) {
            const double joint = tab.weight[t][yi] / po;
            const double prod = (tab.pattern_mass(t) / po) * (po_y[yi] / po);
            const double gap = std::abs(joint - prod);
            if (gap > opts.independence_tolerance) {
              r.property2 = false;
              r.witnesses.push_back({"property2", layer, j,
                                     "pattern " + std::to_string(t) + ", label " +
                                         (yi ? "+1" : "-1") + ", output " +
                                         (out > 0 ? "+1" : "-1") + ": gap " + fmt(gap)});
            }
          }
        }
      }
    }
  }
  r.epsilon_certified = eps;
  r.property3 = eps > 0.0;
  return r;
}

ParityBoundReport parity_correlation_bound(const ProductDistribution& pd,
                                           const std::vector<std::size_t>& relevant, double xi) {
  if (!(xi > 0.0 && xi < 0.25)) throw PreconditionViolated("xi must lie in (0, 1/4)");
  for (double q : pd.p) {
    const bool low = q > xi && q < 0.5 - xi;
    const bool high = q > 0.5 + xi && q < 1.0 - xi;
    if (!low && !high) {
      throw PreconditionViolated("p = " + fmt(q) + " lies outside (xi, 1/2 - xi) u (1/2 + xi, 1 - xi)");
    }
  }
  const int depth = exact_log2(pd.dimension());
  const Circuit c = build_parity_circuit(depth, relevant);
  const LabeledProduct lp(pd, c);
  std::vector<std::size_t> uniq = relevant;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  return parity_bound_from_chain(distribution_chain(lp.enumerate(), c), c, uniq.size(), xi);
}

ParityBoundReport parity_bound_from_chain(const std::vector<DiscreteDistribution>& chain, const Circuit& c,
                                          std::size_t k, double xi) {
  const int depth = c.depth();
  if (chain.size() != static_cast<std::size_t>(depth) + 1) {
    throw DimensionMismatch("chain must hold D^(0..d)");
  }
  ParityBoundReport rep;
  rep.xi = xi;
  rep.k = k;
  const double rhs = std::pow(2.0 * xi, static_cast<double>(rep.k));
  const double ey = std::abs(chain.back().mean_label());
  rep.pass = true;
  InfluenceOptions inf{InfluenceMode::kAnalytic};
  for (int level = 1; level <= depth; ++level) {
    for (std::size_t j = 0; j < (std::size_t{1} << level); ++j) {
      if (influence(c, level, j, inf).value == 0.0) continue;
      const double marginal = chain[level].marginal_plus(j);
      // A value that is constant on the support is a product over no
      // relevant bits; the bound is stated for the nonempty products only.
      if (marginal <= 1e-12 || marginal >= 1.0 - 1e-12) {
        ++rep.skipped_constant;
        continue;
      }
      ParityBoundRecord g;
      g.level = level;
      g.pos = j;
      g.lhs = std::abs(chain[level].correlation(j)) - ey;
      g.rhs = rhs;
      g.marginal = marginal;
      g.pass = g.lhs - g.rhs >= -1e-12 && g.marginal > xi && g.marginal < 1.0 - xi;
      rep.min_margin = std::min(rep.min_margin, g.lhs - g.rhs);
      rep.pass = rep.pass && g.pass;
      rep.gates.push_back(g);
    }
  }
  return rep;
}

nlohmann::json to_json(const AnalysisReport& r) {
  nlohmann::json j;
  j["mean_label"] = r.mean_label;
  j["labels_flipped"] = r.labels_flipped;
  if (r.lca_checked) {
    j["lca"] = {{"delta", r.delta},
                {"holds", r.lca_holds},
                {"min_margin", std::isfinite(r.lca_min_margin) ? nlohmann::json(r.lca_min_margin)
                                                               : nlohmann::json(nullptr)},
                {"boundary_count", r.boundary_count}};
  }
  if (r.properties_checked) {
    j["properties"] = {{"property1", r.property1},
                       {"property2", r.property2},
                       {"property3", r.property3},
                       {"delta_certified", r.delta_certified},
                       {"epsilon_certified", r.epsilon_certified}};
  }
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : r.gates) {
    gates.push_back({{"level", g.level},
                     {"pos", g.pos},
                     {"correlation", g.correlation},
                     {"influence", g.influence},
                     {"lca_margin", g.lca_margin},
                     {"influencing", g.influencing},
                     {"boundary", g.boundary},
                     {"pass", g.pass}});
  }
  j["gates"] = std::move(gates);
  nlohmann::json wit = nlohmann::json::array();
  for (const auto& w : r.witnesses) {
    wit.push_back({{"check", w.check}, {"level", w.level}, {"pos", w.pos}, {"detail", w.detail}});
  }
  j["witnesses"] = std::move(wit);
  return j;
}

}  // namespace treelearn
