#include "treelearn/circuit.hpp"

#include <algorithm>
#include <cmath>

#include "treelearn/errors.hpp"
#include "treelearn/random.hpp"

namespace treelearn {

GateFn GateFn::from_table(const Table& table) {
  for (Bit b : table) {
    if (!is_bit(b)) throw PreconditionViolated("gate table entry is not +-1");
  }
  return GateFn(table);
}

GateFn GateFn::from_string(const std::string& s) {
  if (s.size() != 4 || s.find_first_not_of("+-") != std::string::npos) {
    throw ParseError("gate table must be 4 characters of '+'/'-', got '" + s + "'");
  }
  Table t{};
  for (int i = 0; i < 4; ++i) t[i] = s[i] == '+' ? Bit{1} : Bit{-1};
  return GateFn(t);
}

GateFn GateFn::constant(Bit value) {
  const Bit v = value > 0 ? Bit{1} : Bit{-1};
  return GateFn({v, v, v, v});
}

std::string GateFn::to_string() const {
  std::string s(4, '+');
  for (int i = 0; i < 4; ++i) s[i] = table_[i] > 0 ? '+' : '-';
  return s;
}

unsigned GateFn::code() const {
  unsigned c = 0;
  for (int i = 0; i < 4; ++i) {
    if (table_[i] > 0) c |= 1U << i;
  }
  return c;
}

GateFn GateFn::from_code(unsigned code) {
  if (code > 15) throw PreconditionViolated("gate code out of range");
  Table t{};
  for (int i = 0; i < 4; ++i) t[i] = (code >> i) & 1U ? Bit{1} : Bit{-1};
  return GateFn(t);
}

GateFn GateFn::negated() const {
  Table t{};
  for (int i = 0; i < 4; ++i) t[i] = static_cast<Bit>(-table_[i]);
  return GateFn(t);
}

bool GateFn::is_and_or_family() const {
  return *this == land() || *this == lor() || *this == lnand() || *this == lnor();
}

std::vector<GateFn> and_or_gates() {
  return {GateFn::land(), GateFn::lor(), GateFn::lnand(), GateFn::lnor()};
}

Circuit::Circuit(int depth, std::vector<std::vector<GateFn>> layers)
    : depth_(depth), layers_(std::move(layers)) {
  if (depth < 1 || depth > 30) throw DimensionMismatch("circuit depth must be in [1, 30]");
  if (layers_.size() != static_cast<std::size_t>(depth)) {
    throw DimensionMismatch("circuit has " + std::to_string(layers_.size()) +
                            " layers, expected " + std::to_string(depth));
  }
  for (int i = 1; i <= depth; ++i) {
    const std::size_t expected = std::size_t{1} << (i - 1);
    if (layers_[i - 1].size() != expected) {
      throw DimensionMismatch("layer " + std::to_string(i) + " has " +
                              std::to_string(layers_[i - 1].size()) + " gates, expected " +
                              std::to_string(expected));
    }
  }
}

Circuit Circuit::constant_one(int depth) {
  std::vector<std::vector<GateFn>> layers;
  for (int i = 1; i <= depth; ++i) layers.emplace_back(std::size_t{1} << (i - 1), GateFn{});
  return Circuit(depth, std::move(layers));
}

const std::vector<GateFn>& Circuit::layer(int layer) const {
  if (layer < 1 || layer > depth_) throw IndexOutOfRange("layer " + std::to_string(layer));
  return layers_[layer - 1];
}

const GateFn& Circuit::gate(int layer, std::size_t pos) const {
  const auto& l = this->layer(layer);
  if (pos >= l.size()) {
    throw IndexOutOfRange("gate (" + std::to_string(layer) + ", " + std::to_string(pos) + ")");
  }
  return l[pos];
}

Circuit Circuit::with_gate(int layer, std::size_t pos, const GateFn& g) const {
  (void)gate(layer, pos);
  Circuit out = *this;
  out.layers_[layer - 1][pos] = g;
  return out;
}

namespace {

void apply_layer(const std::vector<GateFn>& gates, std::span<const Bit> x, BitVector& out) {
  out.resize(gates.size());
  for (std::size_t j = 0; j < gates.size(); ++j) out[j] = gates[j](x[2 * j], x[2 * j + 1]);
}

}  // namespace

BitVector level_map(const Circuit& c, int layer, std::span<const Bit> x) {
  const auto& gates = c.layer(layer);
  if (x.size() != 2 * gates.size()) {
    throw DimensionMismatch("level_map layer " + std::to_string(layer) + " expects " +
                            std::to_string(2 * gates.size()) + " values, got " +
                            std::to_string(x.size()));
  }
  BitVector out;
  apply_layer(gates, x, out);
  return out;
}

Bit eval_from_level(const Circuit& c, int level, std::span<const Bit> z) {
  if (level < 0 || level > c.depth()) throw IndexOutOfRange("level " + std::to_string(level));
  if (z.size() != (std::size_t{1} << level)) {
    throw DimensionMismatch("level " + std::to_string(level) + " expects " +
                            std::to_string(std::size_t{1} << level) + " values, got " +
                            std::to_string(z.size()));
  }
  if (level == 0) return z[0];
  BitVector a, b;
  apply_layer(c.layers()[level - 1], z, a);
  for (int layer = level - 1; layer >= 1; --layer) {
    apply_layer(c.layers()[layer - 1], a, b);
    std::swap(a, b);
  }
  return a[0];
}

Bit eval_circuit(const Circuit& c, std::span<const Bit> x) {
  if (x.size() != c.inputs()) {
    throw DimensionMismatch("circuit expects " + std::to_string(c.inputs()) +
                            " inputs, got " + std::to_string(x.size()));
  }
  return eval_from_level(c, c.depth(), x);
}

std::vector<BitVector> level_values(const Circuit& c, std::span<const Bit> x) {
  if (x.size() != c.inputs()) {
    throw DimensionMismatch("circuit expects " + std::to_string(c.inputs()) +
                            " inputs, got " + std::to_string(x.size()));
  }
  std::vector<BitVector> levels(c.depth() + 1);
  levels[c.depth()].assign(x.begin(), x.end());
  for (int layer = c.depth(); layer >= 1; --layer) {
    apply_layer(c.layers()[layer - 1], levels[layer], levels[layer - 1]);
  }
  return levels;
}

// ---------------------------------------------------------------------------

namespace {

// P[value at (level, pos) = +1] when the values at `base` are uniform.
double prob_plus(const Circuit& c, int level, std::size_t pos, int base) {
  if (level == base) return 0.5;
  const double qa = prob_plus(c, level + 1, 2 * pos, base);
  const double qb = prob_plus(c, level + 1, 2 * pos + 1, base);
  const GateFn& g = c.gate(level + 1, pos);
  double q = 0.0;
  for (int t = 0; t < 4; ++t) {
    if (g.table()[t] < 0) continue;
    const auto [a, b] = GateFn::kPatterns[t];
    q += (a > 0 ? qa : 1.0 - qa) * (b > 0 ? qb : 1.0 - qb);
  }
  return q;
}

// P over the sibling value that gate g is sensitive to its input on `side`.
double sensitivity(const GateFn& g, bool left_side, double q_sibling) {
  double s = 0.0;
  for (Bit sib : {Bit{-1}, Bit{1}}) {
    const bool flips = left_side ? g(1, sib) != g(-1, sib) : g(sib, 1) != g(sib, -1);
    if (flips) s += sib > 0 ? q_sibling : 1.0 - q_sibling;
  }
  return s;
}

InfluenceEstimate analytic_influence(const Circuit& c, int level, std::size_t coord,
                                     InfluenceReading reading) {
  InfluenceEstimate est;
  if (level == 0) {
    est.value = 1.0;
    return est;
  }
  double value = 1.0;
  std::size_t pos = coord;
  for (int lv = level; lv >= 1; --lv) {
    const std::size_t sib = pos ^ 1U;
    const double q = prob_plus(c, lv, sib, level);
    value *= sensitivity(c.gate(lv, pos / 2), (pos & 1U) == 0, q);
    pos /= 2;
    if (reading == InfluenceReading::kSingleLevel || value == 0.0) break;
  }
  est.value = value;
  return est;
}

bool flip_changes(const Circuit& c, int level, std::size_t coord, BitVector& z,
                  InfluenceReading reading) {
  if (reading == InfluenceReading::kSingleLevel) {
    const GateFn& g = c.gate(level, coord / 2);
    const std::size_t base = coord & ~std::size_t{1};
    const Bit before = g(z[base], z[base + 1]);
    z[coord] = static_cast<Bit>(-z[coord]);
    const Bit after = g(z[base], z[base + 1]);
    z[coord] = static_cast<Bit>(-z[coord]);
    return before != after;
  }
  const Bit before = eval_from_level(c, level, z);
  z[coord] = static_cast<Bit>(-z[coord]);
  const Bit after = eval_from_level(c, level, z);
  z[coord] = static_cast<Bit>(-z[coord]);
  return before != after;
}

}  // namespace

InfluenceEstimate influence(const Circuit& c, int level, std::size_t coord,
                            const InfluenceOptions& opts) {
  if (level < 0 || level > c.depth()) throw IndexOutOfRange("level " + std::to_string(level));
  const std::size_t width = std::size_t{1} << level;
  if (coord >= width) {
    throw IndexOutOfRange("coordinate " + std::to_string(coord) + " at level " +
                          std::to_string(level));
  }
  if (opts.mode == InfluenceMode::kAnalytic) return analytic_influence(c, level, coord, opts.reading);
  if (level == 0) return InfluenceEstimate{1.0, 0.0, 0};

  InfluenceEstimate est;
  if (opts.mode == InfluenceMode::kExact) {
    if (width >= 64 || (std::uint64_t{1} << width) > opts.exact_cap) {
      throw TooLargeForExact("exact influence at level " + std::to_string(level) + " needs 2^" +
                             std::to_string(width) + " evaluations");
    }
    const std::uint64_t total = std::uint64_t{1} << width;
    std::uint64_t hits = 0;
    for (std::uint64_t idx = 0; idx < total; ++idx) {
      BitVector z = cube_point(width, idx);
      if (flip_changes(c, level, coord, z, opts.reading)) ++hits;
    }
    est.value = static_cast<double>(hits) / static_cast<double>(total);
    est.evaluations = total;
    return est;
  }

  if (opts.samples == 0) throw PreconditionViolated("monte-carlo influence needs samples > 0");
  Rng rng(opts.seed);
  std::uint64_t hits = 0;
  BitVector z(width);
  for (std::uint64_t s = 0; s < opts.samples; ++s) {
    for (auto& b : z) b = rng.sign();
    if (flip_changes(c, level, coord, z, opts.reading)) ++hits;
  }
  const double n = static_cast<double>(opts.samples);
  est.value = static_cast<double>(hits) / n;
  est.std_error = std::sqrt(est.value * (1.0 - est.value) / n);
  est.evaluations = opts.samples;
  return est;
}

Circuit normalize_constant_gates(const Circuit& c, const InfluenceOptions& opts) {
  Circuit out = c;
  // The value at (level, j) is the output of gate (level + 1, j). Its influence
  // depends only on layers 1..level, which are already final when visited.
  for (int level = 0; level < c.depth(); ++level) {
    const std::size_t width = std::size_t{1} << level;
    for (std::size_t j = 0; j < width; ++j) {
      if (out.gate(level + 1, j) == GateFn{}) continue;
      if (influence(out, level, j, opts).value == 0.0) out = out.with_gate(level + 1, j, GateFn{});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Circuit build_parity_circuit(int depth, const std::vector<std::size_t>& relevant) {
  if (relevant.empty()) throw EmptyIndexSet("parity circuit needs a nonempty index set");
  if (depth < 1 || depth > 30) throw DimensionMismatch("circuit depth must be in [1, 30]");
  const std::size_t n = std::size_t{1} << depth;
  std::vector<bool> in(n, false);
  for (std::size_t j : relevant) {
    if (j >= n) {
      throw IndexOutOfRange("parity index " + std::to_string(j) + " outside [0, " +
                            std::to_string(n) + ")");
    }
    in[j] = true;
  }
  std::vector<std::vector<GateFn>> layers;
  for (int i = 1; i < depth; ++i) layers.emplace_back(std::size_t{1} << (i - 1), GateFn::parity());
  std::vector<GateFn> bottom(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j) {
    const bool a = in[2 * j], b = in[2 * j + 1];
    if (a && b) {
      bottom[j] = GateFn::parity();
    } else if (a) {
      bottom[j] = GateFn::left();
    } else if (b) {
      bottom[j] = GateFn::right();
    } else {
      bottom[j] = GateFn{};
    }
  }
  layers.push_back(std::move(bottom));
  return Circuit(depth, std::move(layers));
}

namespace {

int ceil_log2(std::size_t v) {
  int d = 0;
  while ((std::size_t{1} << d) < v) ++d;
  return d;
}

}  // namespace

FmLayout fm_layout(int m) {
  if (m < 1 || m > 8) throw PreconditionViolated("f_m supported for 1 <= m <= 8");
  FmLayout L;
  L.m = m;
  const auto mm = static_cast<std::size_t>(m);
  L.slots = std::size_t{1} << ceil_log2(mm * mm);
  L.groups = std::size_t{1} << ceil_log2(mm);
  L.depth = 1 + ceil_log2(L.slots) + ceil_log2(L.groups);
  return L;
}

Circuit build_fm_circuit(int m) {
  const FmLayout L = fm_layout(m);
  const auto mm = static_cast<std::size_t>(m);
  const std::size_t terms = mm * mm;
  const int or_levels = ceil_log2(L.slots);
  const int and_levels = ceil_log2(L.groups);
  std::vector<std::vector<GateFn>> layers(L.depth);

  // Top and_levels layers: AND over groups. A subtree holding only padded
  // groups becomes constant +1.
  for (int i = 1; i <= and_levels; ++i) {
    const std::size_t count = std::size_t{1} << (i - 1);
    const std::size_t span = L.groups >> (i - 1);  // groups below one gate
    auto& layer = layers[i - 1];
    layer.resize(count);
    for (std::size_t p = 0; p < count; ++p) {
      layer[p] = p * span < mm ? GateFn::land() : GateFn{};
    }
  }
  // Next or_levels layers: OR within a group. A gate whose right subtree is
  // all padding selects its left input; a fully padded subtree is constant.
  for (int t = 0; t < or_levels; ++t) {
    const int i = and_levels + 1 + t;
    const std::size_t count = std::size_t{1} << (i - 1);
    const std::size_t per_group = std::size_t{1} << t;
    const std::size_t span = L.slots >> t;  // slots below one gate
    auto& layer = layers[i - 1];
    layer.resize(count);
    for (std::size_t p = 0; p < count; ++p) {
      const std::size_t group = p / per_group;
      const std::size_t first = (p % per_group) * span;
      const std::size_t half = span / 2;
      if (group >= mm || first >= terms) {
        layer[p] = GateFn{};
      } else if (first + half >= terms) {
        layer[p] = GateFn::left();
      } else {
        layer[p] = GateFn::lor();
      }
    }
  }
  // Bottom layer: x_ij AND y_ij.
  {
    const std::size_t count = L.groups * L.slots;
    auto& layer = layers[L.depth - 1];
    layer.resize(count);
    for (std::size_t p = 0; p < count; ++p) {
      const std::size_t group = p / L.slots, slot = p % L.slots;
      layer[p] = group < mm && slot < terms ? GateFn::land() : GateFn{};
    }
  }
  return Circuit(L.depth, std::move(layers));
}

Bit fm_formula(const FmLayout& layout, std::span<const Bit> leaves) {
  if (leaves.size() != layout.inputs()) {
    throw DimensionMismatch("f_m layout expects " + std::to_string(layout.inputs()) + " leaves");
  }
  const auto mm = static_cast<std::size_t>(layout.m);
  for (std::size_t i = 0; i < mm; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < mm * mm && !any; ++j) {
      const std::size_t at = layout.leaf(i, j);
      any = leaves[at] > 0 && leaves[at + 1] > 0;
    }
    if (!any) return -1;
  }
  return 1;
}

Bit fm_formula_xy(int m, std::span<const Bit> x, std::span<const Bit> y) {
  const auto mm = static_cast<std::size_t>(m);
  if (m < 1 || x.size() != mm * mm * mm || y.size() != x.size()) {
    throw DimensionMismatch("f_m expects x and y of length m^3");
  }
  for (std::size_t i = 0; i < mm; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < mm * mm && !any; ++j) {
      any = x[i * mm * mm + j] > 0 && y[i * mm * mm + j] > 0;
    }
    if (!any) return -1;
  }
  return 1;
}

Circuit random_circuit(int depth, Rng& rng, const std::vector<GateFn>& allowed) {
  std::vector<GateFn> pool = allowed;
  if (pool.empty()) {
    for (unsigned code = 0; code < 16; ++code) pool.push_back(GateFn::from_code(code));
  }
  std::vector<std::vector<GateFn>> layers;
  for (int i = 1; i <= depth; ++i) {
    std::vector<GateFn> layer(std::size_t{1} << (i - 1));
    for (auto& g : layer) g = pool[rng.below(pool.size())];
    layers.push_back(std::move(layer));
  }
  return Circuit(depth, std::move(layers));
}

}  // namespace treelearn
