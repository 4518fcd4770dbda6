#include "treelearn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <utility>

#include <boost/multiprecision/cpp_int.hpp>

#include "treelearn/circuit.hpp"
#include "treelearn/dist.hpp"
#include "treelearn/errors.hpp"
#include "treelearn/parallel.hpp"
#include "treelearn/random.hpp"
#include "treelearn/train.hpp"

namespace treelearn {

using Rational = boost::multiprecision::cpp_rational;
using RationalMatrix = std::vector<std::vector<Rational>>;

namespace {

double activate(Activation a, int s) {
  if (a == Activation::kRelu) return s > 0 ? static_cast<double>(s) : 0.0;
  return s > 0 ? 1.0 : 0.0;
}

int dot(const std::vector<int>& w, std::span<const Bit> x) {
  int s = 0;
  for (std::size_t t = 0; t < w.size(); ++t) s += w[t] * x[t];
  return s;
}

// Rows are scaled to integers (rank is unchanged), then eliminated
// fraction-free (Bareiss), so every division is exact.
std::size_t rational_rank(const RationalMatrix& q) {
  using boost::multiprecision::cpp_int;
  const std::size_t rows = q.size();
  const std::size_t cols = rows == 0 ? 0 : q[0].size();
  std::vector<std::vector<cpp_int>> m(rows, std::vector<cpp_int>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    cpp_int l = 1;
    for (const auto& e : q[r]) {
      const cpp_int den = boost::multiprecision::denominator(e);
      l = l / boost::multiprecision::gcd(l, den) * den;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m[r][c] = boost::multiprecision::numerator(q[r][c]) * (l / boost::multiprecision::denominator(q[r][c]));
    }
  }
  std::size_t rank = 0;
  cpp_int prev = 1;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t pivot = rank;
    while (pivot < rows && m[pivot][c] == 0) ++pivot;
    if (pivot == rows) continue;
    std::swap(m[pivot], m[rank]);
    for (std::size_t r = rank + 1; r < rows; ++r) {
      for (std::size_t t = c + 1; t < cols; ++t) {
        m[r][t] = (m[rank][c] * m[r][t] - m[r][c] * m[rank][t]) / prev;
      }
      m[r][c] = 0;
    }
    prev = m[rank][c];
    ++rank;
  }
  return rank;
}

void check_half_inputs(int half_inputs) {
  if (half_inputs < 1) throw InvalidRange("n' must be >= 1");
  if (half_inputs > 7) throw TooLarge("n' = " + std::to_string(half_inputs) + " exceeds 7");
}

}  // namespace

void QuantizedShallowNet::validate() const {
  check_half_inputs(half_inputs);
  const std::size_t k = u.size();
  if (w.size() != k || v.size() != k || b.size() != k) throw DimensionMismatch("w, v, b and u differ in length");
  if (B < 1) throw InvalidRange("B must be >= 1");
  auto in_range = [this](int q) { return q >= -B && q <= B; };
  for (std::size_t i = 0; i < k; ++i) {
    if (w[i].size() != static_cast<std::size_t>(half_inputs) || v[i].size() != static_cast<std::size_t>(half_inputs)) {
      throw DimensionMismatch("unit weights must have n' entries");
    }
    if (!std::all_of(w[i].begin(), w[i].end(), in_range) || !std::all_of(v[i].begin(), v[i].end(), in_range) ||
        !in_range(b[i])) {
      throw InvalidRange("first-layer entries must be integers in [-B, B]");
    }
    if (!std::isfinite(u[i])) throw InvalidRange("output weights must be finite");
  }
}

int QuantizedShallowNet::preactivation(std::size_t unit, std::span<const Bit> x, std::span<const Bit> y) const {
  return dot(w[unit], x) + dot(v[unit], y) + b[unit];
}

double QuantizedShallowNet::operator()(std::span<const Bit> x, std::span<const Bit> y) const {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * activate(activation, preactivation(i, x, y));
  return s;
}

nlohmann::json to_json(const QuantizedShallowNet& net) {
  return {{"n_half", net.half_inputs},
          {"B", net.B},
          {"w", net.w},
          {"v", net.v},
          {"b", net.b},
          {"u", net.u},
          {"activation", net.activation == Activation::kRelu ? "relu" : "threshold"}};
}

QuantizedShallowNet quantized_net_from_json(const nlohmann::json& j) {
  QuantizedShallowNet net;
  try {
    net.half_inputs = j.at("n_half").get<int>();
    net.B = j.at("B").get<int>();
    net.w = j.at("w").get<std::vector<std::vector<int>>>();
    net.v = j.at("v").get<std::vector<std::vector<int>>>();
    net.b = j.at("b").get<std::vector<int>>();
    net.u = j.at("u").get<std::vector<double>>();
    const std::string act = j.value("activation", "relu");
    if (act == "relu") net.activation = Activation::kRelu;
    else if (act == "threshold") net.activation = Activation::kThreshold;
    else throw ParseError("activation must be relu or threshold");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("quantized net: ") + e.what());
  }
  return net;
}

QuantizedShallowNet random_quantized_net(int half_inputs, std::size_t k, int B, Rng& rng) {
  QuantizedShallowNet net;
  net.half_inputs = half_inputs;
  net.B = B;
  const auto span = static_cast<std::uint64_t>(2 * B + 1);
  auto draw = [&] { return static_cast<int>(rng.below(span)) - B; };
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<int> wi(static_cast<std::size_t>(half_inputs)), vi(static_cast<std::size_t>(half_inputs));
    for (auto& q : wi) q = draw();
    for (auto& q : vi) q = draw();
    net.w.push_back(std::move(wi));
    net.v.push_back(std::move(vi));
    net.b.push_back(draw());
    net.u.push_back(rng.uniform(-1.0, 1.0));
  }
  net.validate();
  return net;
}

Eigen::MatrixXd build_value_matrix(const PairFunction& f, int half_inputs) {
  check_half_inputs(half_inputs);
  const auto side = std::size_t{1} << half_inputs;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
  for (std::size_t r = 0; r < side; ++r) {
    const BitVector x = cube_point(static_cast<std::size_t>(half_inputs), r);
    for (std::size_t c = 0; c < side; ++c) {
      const BitVector y = cube_point(static_cast<std::size_t>(half_inputs), c);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f(x, y);
    }
  }
  return m;
}

Eigen::MatrixXd build_value_matrix(const QuantizedShallowNet& net) {
  net.validate();
  return build_value_matrix([&net](std::span<const Bit> x, std::span<const Bit> y) { return net(x, y); },
                            net.half_inputs);
}

Eigen::MatrixXi sign_matrix(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double q) { return q < 0.0 ? -1 : 1; });
}

std::size_t exact_rank(const Eigen::MatrixXd& m) {
  RationalMatrix q(static_cast<std::size_t>(m.rows()), std::vector<Rational>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) throw InvalidRange("matrix entries must be finite");
      q[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = Rational(m(r, c));
    }
  }
  return rational_rank(q);
}

std::size_t numeric_rank(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double top = s.size() > 0 ? s(0) : 0.0;
  if (top == 0.0) return 0;
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > rel_tol * top ? 1 : 0;
  return r;
}

nlohmann::json to_json(const RankBoundReport& r) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : r.units) {
    units.push_back({{"unit", u.unit},
                     {"rank", u.rank},
                     {"row_groups", u.row_groups},
                     {"col_groups", u.col_groups},
                     {"block_constant", u.block_constant},
                     {"in_range", u.in_range}});
  }
  return {{"n_half", r.half_inputs}, {"k", r.k},
          {"B", r.B},                {"bound", r.bound},
          {"rank_exact", r.rank_exact}, {"rank_numeric", r.rank_numeric},
          {"unit_rank_sum", r.unit_rank_sum}, {"ranks_agree", r.ranks_agree},
          {"units", units},          {"pass", r.pass}};
}

RankBoundReport rank_bound_check(const QuantizedShallowNet& net) {
  net.validate();
  if (net.width() > 32) throw TooLarge("k = " + std::to_string(net.width()) + " exceeds 32");
  if (net.B > 7) throw TooLarge("B = " + std::to_string(net.B) + " exceeds 7");
  const auto np = static_cast<std::size_t>(net.half_inputs);
  const std::size_t side = std::size_t{1} << np;
  std::vector<BitVector> pts(side);
  for (std::size_t r = 0; r < side; ++r) pts[r] = cube_point(np, r);

  RankBoundReport rep;
  rep.half_inputs = net.half_inputs;
  rep.k = net.width();
  rep.B = net.B;
  rep.bound = 4 * static_cast<std::size_t>(net.B) * rep.k * np;
  const int range = 2 * net.B * net.half_inputs;

  RationalMatrix total(side, std::vector<Rational>(side));
  bool units_ok = true;
  for (std::size_t i = 0; i < rep.k; ++i) {
    UnitRankCheck uc;
    uc.unit = i;
    uc.in_range = true;
    std::vector<int> row_key(side), col_key(side);
    for (std::size_t r = 0; r < side; ++r) {
      row_key[r] = dot(net.w[i], pts[r]);
      col_key[r] = dot(net.v[i], pts[r]);
    }
    RationalMatrix mi(side, std::vector<Rational>(side));
    // Value of each (row group, column group) block; the first entry seen fixes it.
    std::map<std::pair<int, int>, double> blocks;
    uc.block_constant = true;
    const Rational ui(net.u[i]);
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        const int s = net.preactivation(i, pts[r], pts[c]);
        const double val = activate(net.activation, s);
        const int inner = row_key[r] + col_key[c];
        if (inner < -range || inner > range) uc.in_range = false;
        const auto [it, fresh] = blocks.emplace(std::make_pair(row_key[r], col_key[c]), val);
        if (!fresh && it->second != val) uc.block_constant = false;
        mi[r][c] = Rational(val);
        total[r][c] += ui * mi[r][c];
      }
    }
    std::vector<int> rows = row_key, cols = col_key;
    std::sort(rows.begin(), rows.end());
    std::sort(cols.begin(), cols.end());
    uc.row_groups = static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
    uc.col_groups = static_cast<std::size_t>(std::unique(cols.begin(), cols.end()) - cols.begin());
    uc.rank = rational_rank(mi);
    rep.unit_rank_sum += uc.rank;
    units_ok = units_ok && uc.block_constant && uc.in_range &&
               uc.rank <= std::min(uc.row_groups, uc.col_groups) &&
               uc.rank <= 4 * static_cast<std::size_t>(net.B) * np;
    rep.units.push_back(uc);
  }
  Eigen::MatrixXd numeric(static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c)
      numeric(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = total[r][c].convert_to<double>();
  rep.rank_exact = rational_rank(total);
  rep.rank_numeric = numeric_rank(numeric);
  rep.ranks_agree = rep.rank_exact == rep.rank_numeric;
  rep.pass = units_ok && rep.ranks_agree && rep.rank_exact <= rep.unit_rank_sum && rep.unit_rank_sum <= rep.bound;
  return rep;
}

nlohmann::json to_json(const std::vector<Verdict>& verdicts) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : verdicts) {
    out.push_back({{"lemma", v.lemma}, {"params", v.params}, {"margin", v.margin}, {"pass", v.pass}});
  }
  return out;
}

bool all_pass(const std::vector<Verdict>& verdicts) {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

namespace {

constexpr double kTol = 1e-12;

enum SuiteStream : std::uint64_t { kLemma1 = 1, kLemma2, kLemma3, kGenerative, kAlignment, kRank };

std::uint64_t instance_seed(std::uint64_t seed, SuiteStream stream, std::size_t t) {
  return derive_seed(derive_seed(seed, stream), t);
}

template <typename F>
std::vector<Verdict> run_instances(std::size_t count, int threads, F&& f) {
  std::vector<Verdict> out(count);
  parallel_for(count, threads, [&](std::size_t t) { out[t] = f(t); });
  return out;
}

std::vector<std::size_t> random_subset(std::size_t n, Rng& rng) {
  std::vector<std::size_t> s;
  while (s.empty()) {
    for (std::size_t j = 0; j < n; ++j)
      if (rng.sign() > 0) s.push_back(j);
  }
  return s;
}

Circuit truncate(const Circuit& c, int depth) {
  std::vector<std::vector<GateFn>> layers(c.layers().begin(), c.layers().begin() + depth);
  return Circuit(depth, std::move(layers));
}

// ---- Lemma 2: the parity circuit computes prod_{j in I} x_j.

double parity_mismatch(const Circuit& c, const std::vector<std::size_t>& I) {
  const std::size_t n = c.inputs();
  std::uint64_t bad = 0;
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
    const BitVector x = cube_point(n, idx);
    Bit prod = 1;
    for (std::size_t j : I) prod = static_cast<Bit>(prod * x[j]);
    if (eval_circuit(c, x) != prod) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(std::uint64_t{1} << n);
}

struct ParityInstance {
  int d;
  std::vector<std::size_t> I;
};

ParityInstance parity_instance(const SuiteOptions& o, std::size_t t) {
  Rng rng(instance_seed(o.seed, kLemma2, t));
  const int d = 1 + static_cast<int>(t % static_cast<std::size_t>(o.max_depth));
  return {d, random_subset(std::size_t{1} << d, rng)};
}

std::vector<Verdict> lemma2(const SuiteOptions& o) {
  auto out = run_instances(o.lemma2_instances, o.threads, [&](std::size_t t) {
    const auto inst = parity_instance(o, t);
    const double bad = parity_mismatch(build_parity_circuit(inst.d, inst.I), inst.I);
    return Verdict{"lemma2", {{"instance", t}, {"depth", inst.d}, {"relevant", inst.I}}, -bad, bad == 0.0};
  });
  if (o.negative_controls) {
    const auto inst = parity_instance(o, 0);
    const Circuit c = build_parity_circuit(inst.d, inst.I);
    const std::size_t pos = inst.I.front() / 2;
    const Circuit broken = c.with_gate(inst.d, pos, c.gate(inst.d, pos).negated());
    const double bad = parity_mismatch(broken, inst.I);
    out.push_back({"lemma2/negative_control",
                   {{"depth", inst.d}, {"relevant", inst.I}, {"mutation", "negate gate (" + std::to_string(inst.d) +
                                                                           ", " + std::to_string(pos) + ")"}},
                   bad,
                   bad > 0.0});
  }
  return out;
}

// ---- Lemma 3: |c| - |E[y]| >= (2 xi)^k for biased product parity.

struct BiasedInstance {
  int d;
  std::vector<std::size_t> I;
  std::vector<double> p;
  double xi;
};

BiasedInstance biased_instance(const SuiteOptions& o, std::size_t t) {
  Rng rng(instance_seed(o.seed, kLemma3, t));
  const int lo = std::min(2, o.max_depth);
  const int d = lo + static_cast<int>(t % static_cast<std::size_t>(o.max_depth - lo + 1));
  const std::size_t n = std::size_t{1} << d;
  BiasedInstance inst{d, random_subset(n, rng), std::vector<double>(n), 1.0};
  for (auto& q : inst.p) {
    const double off = rng.uniform(0.12, 0.38);
    q = rng.sign() > 0 ? 0.5 + off : 0.5 - off;
    inst.xi = std::min({inst.xi, q, 1.0 - q, std::abs(q - 0.5)});
  }
  inst.xi *= 0.999;
  return inst;
}

Verdict lemma3_verdict(const std::string& name, const ParityBoundReport& r, nlohmann::json params) {
  params["xi"] = r.xi;
  params["k"] = r.k;
  params["gates_checked"] = r.gates.size();
  params["skipped_constant"] = r.skipped_constant;
  const double margin = std::isfinite(r.min_margin) ? r.min_margin : 0.0;
  return {name, std::move(params), margin, r.pass && !r.gates.empty()};
}

std::vector<Verdict> lemma3(const SuiteOptions& o) {
  auto out = run_instances(o.lemma3_instances, o.threads, [&](std::size_t t) {
    const auto inst = biased_instance(o, t);
    const auto r = parity_correlation_bound(ProductDistribution(inst.p), inst.I, inst.xi);
    return lemma3_verdict("lemma3", r, {{"instance", t}, {"depth", inst.d}, {"relevant", inst.I}, {"p", inst.p}});
  });
  if (o.negative_controls) {
    // Same circuit and xi, chain taken from uniform inputs. A single relevant
    // bit stays correlated under uniform inputs, so the control uses |I| >= 2.
    std::size_t t = 0;
    while (biased_instance(o, t).I.size() < 2) ++t;
    const auto inst = biased_instance(o, t);
    const Circuit c = build_parity_circuit(inst.d, inst.I);
    const auto uniform = LabeledProduct(ProductDistribution::constant(inst.p.size(), 0.5), c).enumerate();
    const auto r = parity_bound_from_chain(distribution_chain(uniform, c), c, inst.I.size(), inst.xi);
    auto v = lemma3_verdict("lemma3/negative_control", r,
                            {{"depth", inst.d}, {"relevant", inst.I}, {"mutation", "chain from uniform inputs"}});
    v.pass = !v.pass;
    out.push_back(std::move(v));
  }
  return out;
}

// ---- Lemmas 4 and 5 on generative circuits.

Circuit generative_circuit(const SuiteOptions& o, std::size_t t) {
  Rng rng(instance_seed(o.seed, kGenerative, t));
  const int d = 1 + static_cast<int>(t % static_cast<std::size_t>(o.max_depth));
  return random_circuit(d, rng, and_or_gates());
}

// Largest | |c_{i,j}| - (2/3)^i | over all levels and coordinates, and |E[y]|.
double lemma4_deviation(const std::vector<DiscreteDistribution>& chain) {
  double dev = std::abs(chain.back().mean_label());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const double target = std::pow(2.0 / 3.0, static_cast<double>(i));
    for (std::size_t j = 0; j < chain[i].dimension(); ++j) {
      dev = std::max(dev, std::abs(std::abs(chain[i].correlation(j)) - target));
    }
  }
  return dev;
}

// Largest total variation between one-level pushforwards of D^(i) and the
// directly enumerated D^(i-1), and between D^(d) pushed to each level and D^(i).
double lemma5_deviation(const std::vector<DiscreteDistribution>& chain, const Circuit& c) {
  const int d = c.depth();
  double tv = 0.0;
  for (int i = 1; i <= d; ++i) {
    tv = std::max(tv, total_variation(pushforward(chain[i], truncate(c, i), i - 1), chain[i - 1]));
    tv = std::max(tv, total_variation(pushforward(chain[d], c, i - 1), chain[i - 1]));
  }
  return tv;
}

std::vector<Verdict> lemma4(const SuiteOptions& o) {
  auto out = run_instances(o.generative_instances, o.threads, [&](std::size_t t) {
    const Circuit c = generative_circuit(o, t);
    const auto chain = GenerativeDistribution(c).enumerate_chain();
    const double dev = lemma4_deviation(chain);
    const double delta = std::pow(2.0 / 3.0, c.depth());
    const auto lca = certify_lca(chain, c, delta);
    double inner = std::numeric_limits<double>::infinity(), bottom = 0.0;
    for (const auto& g : lca.gates) {
      if (g.level < c.depth()) inner = std::min(inner, g.lca_margin);
      else bottom = std::max(bottom, std::abs(g.lca_margin));
    }
    const bool ok = dev <= kTol && lca.lca_holds && bottom <= kTol && (c.depth() == 1 || inner > kTol);
    return Verdict{"lemma4",
                   {{"instance", t},
                    {"depth", c.depth()},
                    {"max_deviation", dev},
                    {"delta", delta},
                    {"min_margin_above_bottom", std::isfinite(inner) ? nlohmann::json(inner) : nlohmann::json(nullptr)},
                    {"max_abs_margin_bottom", bottom}},
                   -dev,
                   ok};
  });
  if (o.negative_controls) {
    // Uniform product inputs through the same circuit instead of the generative model.
    const Circuit c = generative_circuit(o, o.max_depth - 1);
    const auto uniform = LabeledProduct(ProductDistribution::constant(c.inputs(), 0.5), c).enumerate();
    const double dev = lemma4_deviation(distribution_chain(uniform, c));
    out.push_back({"lemma4/negative_control",
                   {{"depth", c.depth()}, {"mutation", "chain from uniform inputs"}, {"max_deviation", dev}},
                   dev,
                   dev > kTol});
  }
  return out;
}

DiscreteDistribution corrupt_mass(const DiscreteDistribution& dd) {
  auto pts = dd.support();
  pts.front().p *= 2.0;
  double total = 0.0;
  for (const auto& q : pts) total += q.p;
  // Renormalize everything except the boosted point.
  const double scale = (1.0 - pts.front().p) / (total - pts.front().p);
  for (std::size_t t = 1; t < pts.size(); ++t) pts[t].p *= scale;
  return DiscreteDistribution(dd.dimension(), std::move(pts));
}

std::vector<Verdict> lemma5(const SuiteOptions& o) {
  auto out = run_instances(o.generative_instances, o.threads, [&](std::size_t t) {
    const Circuit c = generative_circuit(o, t);
    const auto chain = GenerativeDistribution(c).enumerate_chain();
    const double tv = lemma5_deviation(chain, c);
    return Verdict{"lemma5", {{"instance", t}, {"depth", c.depth()}, {"max_total_variation", tv}}, -tv, tv < kTol};
  });
  if (o.negative_controls) {
    const Circuit c = generative_circuit(o, o.max_depth - 1);
    const auto chain = GenerativeDistribution(c).enumerate_chain();
    const int d = c.depth();
    const auto pushed = corrupt_mass(pushforward(chain[d], truncate(c, d), d - 1));
    const double tv = total_variation(pushed, chain[d - 1]);
    out.push_back({"lemma5/negative_control",
                   {{"depth", d}, {"mutation", "pushforward mass renormalized wrong"}, {"total_variation", tv}},
                   tv,
                   tv >= kTol});
  }
  return out;
}

// ---- Lemma 1: product distributions under LCA satisfy Property 3 with eps = Delta^2 / 4.

struct Lemma1Check {
  bool applicable = false;  ///< LCA holds for a positive Delta
  double delta = 0.0;
  double epsilon = 0.0;
  bool properties = false;
  bool marginals = false;
  double margin = 0.0;
};

Lemma1Check lemma1_check(const ProductDistribution& pd, const Circuit& c, double claimed_delta = -1.0) {
  Lemma1Check r;
  const auto chain = distribution_chain(LabeledProduct(pd, c).enumerate(), c);
  const auto props = certify_properties(chain, c);
  r.delta = claimed_delta > 0.0 ? claimed_delta : 0.999 * std::min(pd.nondegeneracy(), props.delta_certified);
  if (!(r.delta > 0.0)) return r;
  const auto lca = certify_lca(chain, c, r.delta);
  r.applicable = lca.lca_holds;
  r.epsilon = props.epsilon_certified;
  r.properties = props.property1 && props.property2 && props.property3;
  r.marginals = true;
  for (const auto& g : lca.gates) {
    if (!g.influencing) continue;
    const double q = chain[static_cast<std::size_t>(g.level)].marginal_plus(g.pos);
    r.marginals = r.marginals && q > r.delta / 2 && q < 1.0 - r.delta / 2;
  }
  r.margin = r.epsilon - r.delta * r.delta / 4;
  return r;
}

std::vector<Verdict> lemma1(const SuiteOptions& o) {
  struct Attempt {
    int d;
    std::vector<double> p;
    Circuit c;
  };
  auto attempt = [&](std::size_t a) {
    Rng rng(instance_seed(o.seed, kLemma1, a));
    const int d = 1 + static_cast<int>(a % static_cast<std::size_t>(o.max_depth));
    Circuit c = random_circuit(d, rng, and_or_gates());
    std::vector<double> p(c.inputs());
    for (auto& q : p) q = rng.uniform(0.1, 0.9);
    return Attempt{d, std::move(p), std::move(c)};
  };
  std::vector<Verdict> out;
  std::size_t passing = 0, a = 0;
  const std::size_t max_attempts = 50 * std::max<std::size_t>(o.lemma1_instances, 1);
  // Batches of attempts run in parallel; results are consumed in attempt order.
  while (passing < o.lemma1_instances && a < max_attempts) {
    const std::size_t batch = std::min<std::size_t>(16, max_attempts - a);
    std::vector<Lemma1Check> checks(batch);
    parallel_for(batch, o.threads, [&](std::size_t t) {
      const auto at = attempt(a + t);
      checks[t] = lemma1_check(ProductDistribution(at.p), at.c);
    });
    for (std::size_t t = 0; t < batch && passing < o.lemma1_instances; ++t) {
      const auto& r = checks[t];
      if (!r.applicable) continue;
      ++passing;
      const auto at = attempt(a + t);
      out.push_back({"lemma1",
                     {{"attempt", a + t},
                      {"depth", at.d},
                      {"p", at.p},
                      {"delta", r.delta},
                      {"epsilon_certified", r.epsilon},
                      {"properties_1_3", r.properties},
                      {"marginals_in_band", r.marginals}},
                     r.margin,
                     r.margin >= -kTol && r.properties && r.marginals});
    }
    a += batch;
  }
  if (passing < o.lemma1_instances) {
    out.push_back({"lemma1",
                   {{"attempts", a}, {"passing_instances", passing}, {"note", "too few instances satisfy LCA"}},
                   static_cast<double>(passing) - static_cast<double>(o.lemma1_instances),
                   false});
  }
  if (o.negative_controls && !out.empty() && out.front().lemma == "lemma1") {
    const auto at = attempt(out.front().params["attempt"].get<std::size_t>());
    const double delta = out.front().params["delta"].get<double>();
    auto p = at.p;
    p.front() = delta * delta / 10;
    const auto r = lemma1_check(ProductDistribution(p), at.c, delta);
    out.push_back({"lemma1/negative_control",
                   {{"depth", at.d}, {"mutation", "p_0 set to Delta^2/10 with Delta kept"}, {"delta", delta},
                    {"epsilon_certified", r.epsilon}},
                   -r.margin,
                   r.margin < -kTol});
  }
  return out;
}

// ---- Gradient alignment on one population-mode generative run.

std::vector<Verdict> alignment(const SuiteOptions& o) {
  Rng rng(instance_seed(o.seed, kAlignment, 0));
  const int d = std::min(3, o.max_depth);
  const Circuit c = random_circuit(d, rng, and_or_gates());
  const auto chain = GenerativeDistribution(c).enumerate_chain();
  const auto cert = certify_properties(chain, c);
  const double delta = std::min(cert.delta_certified, 0.49);
  const double eps = std::min(cert.epsilon_certified, 0.49);
  auto h = derive_hyperparams(c.inputs(), d, 0.01, delta, eps, TheoremVariant::kThm2);
  h.cfg.seed = rng.next();
  auto run = [&](double check_delta) {
    const AlignmentCheck al{c, chain, check_delta, eps};
    const auto res = train_layerwise(chain.back(), h.cfg, &al);
    std::uint64_t tuples = 0, violations = 0;
    double slack = std::numeric_limits<double>::infinity();
    bool checked = true;
    for (const auto& l : res.layers) {
      checked = checked && l.alignment_checked && l.alignment_note.empty();
      tuples += l.alignment_tuples;
      violations += l.alignment_violations;
      slack = std::min(slack, l.alignment_min_slack);
    }
    return std::make_tuple(checked, tuples, violations, slack);
  };
  std::vector<Verdict> out;
  const auto [checked, tuples, violations, slack] = run(delta);
  out.push_back({"alignment",
                 {{"depth", d}, {"delta", delta}, {"epsilon", eps}, {"k", h.cfg.k}, {"tuples", tuples},
                  {"violations", violations}},
                 std::isfinite(slack) ? slack : 0.0,
                 checked && tuples > 0 && violations == 0});
  if (o.negative_controls) {
    const auto [c2, t2, v2, s2] = run(delta * 1e3);
    out.push_back({"alignment/negative_control",
                   {{"depth", d}, {"mutation", "Delta in the bound inflated 1000x"}, {"tuples", t2},
                    {"violations", v2}},
                   static_cast<double>(v2),
                   v2 > 0});
  }
  return out;
}

// ---- Lemma 8 rank bound.

std::vector<Verdict> lemma8(const SuiteOptions& o) {
  auto out = run_instances(o.rank_instances, o.threads, [&](std::size_t t) {
    Rng rng(instance_seed(o.seed, kRank, t));
    const int np = 1 + static_cast<int>(rng.below(5));
    const std::size_t k = 1 + rng.below(16);
    const int B = 1 + static_cast<int>(rng.below(3));
    const auto r = rank_bound_check(random_quantized_net(np, k, B, rng));
    return Verdict{"lemma8",
                   {{"instance", t}, {"n_half", np}, {"k", k}, {"B", B}, {"rank_exact", r.rank_exact},
                    {"rank_numeric", r.rank_numeric}, {"bound", r.bound}},
                   static_cast<double>(r.bound) - static_cast<double>(r.rank_exact),
                   r.pass};
  });
  if (o.negative_controls) {
    // The 32 x 32 Hadamard sign matrix, rank 32, claimed as a k = 1, B = 1 net (bound 20).
    const auto m = build_value_matrix(
        [](std::span<const Bit> x, std::span<const Bit> y) {
          int s = 0;
          for (std::size_t t = 0; t < x.size(); ++t) s += (x[t] < 0 && y[t] < 0) ? 1 : 0;
          return s % 2 == 0 ? 1.0 : -1.0;
        },
        5);
    const std::size_t rank = exact_rank(m);
    const std::size_t bound = 4 * 1 * 1 * 5;
    out.push_back({"lemma8/negative_control",
                   {{"mutation", "unstructured sign matrix claimed as k = 1, B = 1, n' = 5"}, {"rank", rank},
                    {"bound", bound}},
                   static_cast<double>(rank) - static_cast<double>(bound),
                   rank > bound});
  }
  return out;
}

}  // namespace

std::vector<Verdict> run_lemma_suite(const SuiteOptions& o) {
  if (o.max_depth < 1 || o.max_depth > 4) throw InvalidRange("lemma suite depth must be in [1, 4]");
  static const std::vector<std::pair<std::string, std::vector<Verdict> (*)(const SuiteOptions&)>> kSuite{
      {"lemma1", lemma1}, {"lemma2", lemma2},       {"lemma3", lemma3}, {"lemma4", lemma4},
      {"lemma5", lemma5}, {"alignment", alignment}, {"lemma8", lemma8}};
  bool known = o.scope == "all";
  std::vector<Verdict> out;
  for (const auto& [name, fn] : kSuite) {
    if (o.scope != "all" && o.scope != name) continue;
    known = true;
    auto part = fn(o);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (!known) throw InvalidRange("unknown lemma scope '" + o.scope + "'");
  return out;
}

}  // namespace treelearn
