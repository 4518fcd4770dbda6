#include "treelearn/net.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "treelearn/errors.hpp"
#include "treelearn/random.hpp"

namespace treelearn {

double NeuralGate::preactivation(double a, double b) const {
  double s = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) s += v[l] * relu(w[l][0] * a + w[l][1] * b);
  return s;
}

NeuralGate plant_gate(const GateFn& g, std::size_t k) {
  if (k < 4) throw PreconditionViolated("planting a gate needs width >= 4");
  NeuralGate ng;
  ng.w.assign(k, {0.0, 0.0});
  ng.v.assign(k, 1);
  for (int t = 0; t < 4; ++t) {
    const auto [a, b] = GateFn::kPatterns[t];
    ng.w[t] = {static_cast<double>(a), static_cast<double>(b)};
    ng.v[t] = g.table()[t];
  }
  return ng;
}

std::vector<double> Block::forward(std::span<const double> in) const {
  if (in.size() != inputs()) {
    throw DimensionMismatch("block expects " + std::to_string(inputs()) + " inputs, got " +
                            std::to_string(in.size()));
  }
  std::vector<double> out(gates.size());
  for (std::size_t j = 0; j < gates.size(); ++j) out[j] = gates[j].forward(in[2 * j], in[2 * j + 1]);
  return out;
}

double default_init_scale(std::size_t k) {
  return 1.0 / (4.0 * std::sqrt(2.0) * static_cast<double>(k));
}

Block init_block(int layer, std::size_t k, std::uint64_t seed, const InitOptions& opts,
                 std::string* warning) {
  if (layer < 1 || layer > 30) throw DimensionMismatch("layer must be in [1, 30]");
  if (k < 1) throw PreconditionViolated("width must be >= 1");
  const double bound = default_init_scale(k);
  const double scale = opts.scale > 0.0 ? opts.scale : bound;
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw InvalidRange("init scale must be finite");
  if (scale > bound) {
    if (!opts.allow_large_scale) {
      throw ScaleTooLarge("init scale " + std::to_string(scale) + " exceeds 1/(4 sqrt(2) k) = " +
                          std::to_string(bound));
    }
    if (warning) {
      *warning = "init scale " + std::to_string(scale) + " exceeds the bound " +
                 std::to_string(bound) + " (override)";
    }
  }
  Rng rng(seed);
  Block b;
  b.gates.resize(std::size_t{1} << (layer - 1));
  for (auto& g : b.gates) {
    g.w.resize(k);
    g.v.resize(k);
    for (std::size_t l = 0; l < k; ++l) {
      g.w[l][0] = rng.uniform(-scale, scale);
      g.w[l][1] = rng.uniform(-scale, scale);
      g.v[l] = rng.sign();
    }
  }
  return b;
}

void LayeredNet::push(Block b) {
  const int level = boundary_level();
  if (level < 1) throw DimensionMismatch("net already has all of its blocks");
  if (b.gates.size() != (std::size_t{1} << (level - 1))) {
    throw DimensionMismatch("block for layer " + std::to_string(level) + " needs " +
                            std::to_string(std::size_t{1} << (level - 1)) + " gates");
  }
  blocks.push_back(std::move(b));
}

NetOutput net_forward(const LayeredNet& net, std::span<const double> x) {
  if (x.size() != (std::size_t{1} << net.depth)) {
    throw DimensionMismatch("net expects " + std::to_string(std::size_t{1} << net.depth) +
                            " inputs, got " + std::to_string(x.size()));
  }
  NetOutput out;
  out.values.assign(x.begin(), x.end());
  for (const auto& b : net.blocks) out.values = b.forward(out.values);
  double s = 0.0;
  for (double v : out.values) s += v;
  out.pooled = s / static_cast<double>(out.values.size());
  return out;
}

NetOutput net_forward(const LayeredNet& net, std::span<const Bit> x) {
  std::vector<double> in(x.begin(), x.end());
  return net_forward(net, std::span<const double>(in));
}

LayeredNet planted_net(const Circuit& c, std::size_t k) {
  LayeredNet net;
  net.depth = c.depth();
  for (int layer = c.depth(); layer >= 1; --layer) {
    Block b;
    for (const auto& g : c.layer(layer)) b.gates.push_back(plant_gate(g, k));
    net.push(std::move(b));
  }
  return net;
}

namespace {

void check_batch(const Block& block, const Batch& batch) {
  if (batch.size() == 0) throw EmptyBatch("empty batch");
  if (batch.labels.size() != batch.size()) throw DimensionMismatch("labels and inputs differ in length");
  if (!batch.weights.empty() && batch.weights.size() != batch.size()) {
    throw DimensionMismatch("weights and inputs differ in length");
  }
  for (const auto& in : batch.inputs) {
    if (in.size() != block.inputs()) {
      throw DimensionMismatch("block expects " + std::to_string(block.inputs()) + " inputs, got " +
                              std::to_string(in.size()));
    }
  }
}

}  // namespace

double pooled_loss(const Block& block, const Batch& batch, const LossParams& lp) {
  check_batch(block, batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto out = block.forward(batch.inputs[i]);
    double p = 0.0;
    for (double g : out) p += g;
    p /= static_cast<double>(out.size());
    const double y = batch.labels[i];
    const double loss = std::max(1.0 - y * p, 0.0) + lp.lambda * std::abs(1.0 - p);
    total += batch.weight(i) * loss;
  }
  if (!std::isfinite(total)) throw NonFiniteLoss("pooled loss is not finite");
  return total;
}

BlockGradient block_gradient(const Block& block, const Batch& batch, const LossParams& lp) {
  check_batch(block, batch);
  const std::size_t m = block.gates.size();
  BlockGradient grad(m);
  for (std::size_t j = 0; j < m; ++j) grad[j].assign(block.gates[j].width(), {0.0, 0.0});
  std::vector<double> s(m);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& in = batch.inputs[i];
    double p = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      s[j] = block.gates[j].preactivation(in[2 * j], in[2 * j + 1]);
      p += hard_tanh(s[j]);
    }
    p /= static_cast<double>(m);
    const double y = batch.labels[i];
    double dl = 0.0;
    if (y * p < 1.0) dl -= y;
    if (p < 1.0) dl -= lp.lambda;
    if (dl == 0.0) continue;
    const double scale = batch.weight(i) * dl / static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (!(s[j] > -1.0 && s[j] < 1.0)) continue;
      const auto& g = block.gates[j];
      const double a = in[2 * j], b = in[2 * j + 1];
      for (std::size_t l = 0; l < g.width(); ++l) {
        if (g.w[l][0] * a + g.w[l][1] * b > 0.0) {
          grad[j][l][0] += scale * g.v[l] * a;
          grad[j][l][1] += scale * g.v[l] * b;
        }
      }
    }
  }
  return grad;
}

std::vector<GateTable> gate_tables(const Batch& batch, std::size_t gates) {
  std::vector<GateTable> tables(gates);
  for (std::size_t j = 0; j < gates; ++j) {
    auto& t = tables[j];
    t.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      t.push_back({batch.inputs[i][2 * j], batch.inputs[i][2 * j + 1], batch.labels[i], batch.weight(i)});
    }
    std::sort(t.begin(), t.end(), [](const GateTableEntry& x, const GateTableEntry& y) {
      return std::tie(x.a, x.b, x.y) < std::tie(y.a, y.b, y.y);
    });
    GateTable merged;
    for (const auto& e : t) {
      if (!merged.empty() && merged.back().a == e.a && merged.back().b == e.b && merged.back().y == e.y) {
        merged.back().weight += e.weight;
      } else {
        merged.push_back(e);
      }
    }
    t = std::move(merged);
  }
  return tables;
}

std::vector<std::array<double, 2>> gate_gradient(const NeuralGate& g, const GateTable& table,
                                                 double lambda, std::size_t gates_in_block) {
  std::vector<std::array<double, 2>> grad(g.width(), {0.0, 0.0});
  const double inv_m = 1.0 / static_cast<double>(gates_in_block);
  for (const auto& e : table) {
    const double s = g.preactivation(e.a, e.b);
    if (!(s > -1.0 && s < 1.0)) continue;
    const double scale = e.weight * (-static_cast<double>(e.y) - lambda) * inv_m;
    for (std::size_t l = 0; l < g.width(); ++l) {
      if (g.w[l][0] * e.a + g.w[l][1] * e.b > 0.0) {
        grad[l][0] += scale * g.v[l] * e.a;
        grad[l][1] += scale * g.v[l] * e.b;
      }
    }
  }
  return grad;
}

ExtractResult extract_gate(const NeuralGate& g, double tol, std::array<bool, 4> support) {
  ExtractResult r;
  r.checked = support;
  r.saturated = true;
  GateFn::Table table{};
  for (int t = 0; t < 4; ++t) {
    const auto [a, b] = GateFn::kPatterns[t];
    r.outputs[t] = g.forward(a, b);
    table[t] = r.outputs[t] < 0.0 ? Bit{-1} : Bit{1};
    if (support[t] && std::abs(r.outputs[t]) < 1.0 - tol && r.saturated) {
      r.saturated = false;
      r.offending = t;
    }
  }
  r.gate = GateFn::from_table(table);
  return r;
}

}  // namespace treelearn
