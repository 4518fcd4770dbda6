#pragma once

// Brute-force reference implementations used only by tests. They share no
// code with the library beyond the Circuit accessors.

#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "treelearn/circuit.hpp"

namespace oracle {

using treelearn::Bit;
using treelearn::BitVector;
using treelearn::Circuit;

inline BitVector point(std::size_t m, std::uint64_t idx) {
  BitVector x(m);
  for (std::size_t t = 0; t < m; ++t) x[t] = (idx >> (m - 1 - t)) & 1U ? 1 : -1;
  return x;
}

// Value of the node at (layer, pos); leaves live at layer `leaf_layer`.
inline Bit node(const Circuit& c, int layer, std::size_t pos, int leaf_layer, const BitVector& z) {
  if (layer == leaf_layer) return z[pos];
  const Bit a = node(c, layer + 1, 2 * pos, leaf_layer, z);
  const Bit b = node(c, layer + 1, 2 * pos + 1, leaf_layer, z);
  const auto& t = c.gate(layer, pos).table();
  const int idx = (a == 1 ? 2 : 0) + (b == 1 ? 1 : 0);
  return t[idx];
}

inline Bit eval(const Circuit& c, const BitVector& x) { return node(c, 1, 0, c.depth() + 1, x); }

// Output computed from the 2^level values at `level`.
inline Bit eval_level(const Circuit& c, int level, const BitVector& z) {
  if (level == 0) return z[0];
  return node(c, 1, 0, level + 1, z);
}

inline double influence(const Circuit& c, int level, std::size_t j) {
  const std::size_t m = std::size_t{1} << level;
  const std::uint64_t total = std::uint64_t{1} << m;
  std::uint64_t hits = 0;
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    BitVector z = point(m, idx);
    const Bit a = eval_level(c, level, z);
    z[j] = static_cast<Bit>(-z[j]);
    if (eval_level(c, level, z) != a) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Joint law of (level values, y) for x drawn from a product distribution,
// enumerated over every input and keyed by the level bits.
struct Joint {
  std::map<std::pair<BitVector, Bit>, double> mass;
};

inline Joint product_joint(const Circuit& c, const std::vector<double>& p, int level) {
  Joint out;
  const std::size_t n = p.size();
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
    const BitVector x = point(n, idx);
    double w = 1.0;
    for (std::size_t t = 0; t < n; ++t) w *= x[t] == 1 ? p[t] : 1.0 - p[t];
    const Bit y = eval(c, x);
    BitVector z(std::size_t{1} << level);
    for (std::size_t q = 0; q < z.size(); ++q) z[q] = node(c, level + 1, q, c.depth() + 1, x);
    if (level == c.depth()) z = x;
    out.mass[{z, y}] += w;
  }
  return out;
}

inline double correlation(const Joint& j, std::size_t coord) {
  double s = 0.0;
  for (const auto& [key, w] : j.mass) s += w * key.first[coord] * key.second;
  return s;
}

inline double mean_label(const Joint& j) {
  double s = 0.0;
  for (const auto& [key, w] : j.mass) s += w * key.second;
  return s;
}

// P[(x, h_C(x))] under the generative model: one half times 1/|S| for the
// pattern set each gate had to draw from, read off the gate outputs of x.
inline double generative_mass(const Circuit& c, const BitVector& x) {
  double w = 0.5;
  const int d = c.depth();
  for (int layer = 1; layer <= d; ++layer) {
    for (std::size_t j = 0; j < (std::size_t{1} << (layer - 1)); ++j) {
      const Bit out = node(c, layer, j, d + 1, x);
      int count = 0;
      for (Bit t : c.gate(layer, j).table()) count += t == out ? 1 : 0;
      w /= count;
    }
  }
  return w;
}

}  // namespace oracle
