#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "treelearn/errors.hpp"
#include "treelearn/net.hpp"
#include "treelearn/net_io.hpp"
#include "treelearn/random.hpp"

using namespace treelearn;

namespace {

Batch random_batch(Rng& rng, std::size_t inputs, std::size_t n, bool weighted) {
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> in(inputs);
    for (auto& v : in) v = rng.uniform(-1.0, 1.0);
    b.inputs.push_back(std::move(in));
    b.labels.push_back(rng.sign());
  }
  if (weighted) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      b.weights.push_back(rng.uniform(0.1, 1.0));
      total += b.weights.back();
    }
    for (auto& w : b.weights) w /= total;
  }
  return b;
}

bool away_from_kinks(const Block& block, const Batch& batch) {
  for (const auto& in : batch.inputs) {
    for (std::size_t j = 0; j < block.gates.size(); ++j) {
      const auto& g = block.gates[j];
      const double a = in[2 * j], b = in[2 * j + 1];
      for (const auto& w : g.w) {
        if (std::abs(w[0] * a + w[1] * b) <= 1e-3) return false;
      }
      if (std::abs(g.preactivation(a, b)) >= 0.99) return false;
    }
  }
  return true;
}

}  // namespace

TEST(NeuralGate, ForwardExamples) {
  NeuralGate zero{{{0.0, 0.0}, {0.0, 0.0}}, {1, -1}};
  EXPECT_EQ(zero.forward(0.3, -0.7), 0.0);
  NeuralGate half{{{1.0, 0.0}}, {1}};
  EXPECT_DOUBLE_EQ(half.forward(0.5, 123.0), 0.5);
  NeuralGate big{{{3.0, 3.0}}, {1}};
  EXPECT_EQ(big.forward(1.0, 1.0), 1.0);
  NeuralGate neg{{{3.0, 3.0}}, {-1}};
  EXPECT_EQ(neg.forward(1.0, 1.0), -1.0);
}

TEST(NeuralGate, PlantAllSixteen) {
  for (unsigned code = 0; code < 16; ++code) {
    const GateFn g = GateFn::from_code(code);
    for (std::size_t k : {4U, 6U}) {
      const NeuralGate ng = plant_gate(g, k);
      const auto r = extract_gate(ng);
      EXPECT_TRUE(r.saturated);
      EXPECT_EQ(r.gate, g);
      for (int t = 0; t < 4; ++t) EXPECT_EQ(std::abs(r.outputs[t]), 1.0);
    }
  }
  EXPECT_THROW(plant_gate(GateFn::land(), 3), PreconditionViolated);
}

TEST(NeuralGate, ExtractZeroAndRestricted) {
  NeuralGate zero{{{0.0, 0.0}}, {1}};
  const auto r = extract_gate(zero);
  EXPECT_FALSE(r.saturated);
  EXPECT_EQ(r.offending, 0);
  EXPECT_EQ(r.gate, GateFn{});

  // Saturated only on (+,+) and (-,-).
  NeuralGate diag{{{2.0, 2.0}, {-2.0, -2.0}}, {1, -1}};
  EXPECT_FALSE(extract_gate(diag).saturated);
  const auto rr = extract_gate(diag, 1e-9, {true, false, false, true});
  EXPECT_TRUE(rr.saturated);
  EXPECT_EQ(rr.gate.table()[0], -1);
  EXPECT_EQ(rr.gate.table()[3], 1);
}

TEST(Init, ScaleAndDeterminism) {
  EXPECT_NEAR(default_init_scale(24), 0.007366, 1e-6);
  const Block a = init_block(3, 24, 7);
  const Block b = init_block(3, 24, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, init_block(3, 24, 8));
  ASSERT_EQ(a.gates.size(), 4U);
  bool pos = false, neg = false;
  for (const auto& g : a.gates) {
    ASSERT_EQ(g.width(), 24U);
    for (std::size_t l = 0; l < g.width(); ++l) {
      EXPECT_LE(std::abs(g.w[l][0]), default_init_scale(24));
      EXPECT_LE(std::abs(g.w[l][1]), default_init_scale(24));
      EXPECT_TRUE(g.v[l] == 1 || g.v[l] == -1);
      (g.v[l] == 1 ? pos : neg) = true;
    }
  }
  EXPECT_TRUE(pos && neg);
  EXPECT_THROW(init_block(2, 4, 1, {0.1, false}), ScaleTooLarge);
  std::string warning;
  const Block c = init_block(2, 4, 1, {0.1, true}, &warning);
  EXPECT_FALSE(warning.empty());
  double mx = 0.0;
  for (const auto& g : c.gates)
    for (const auto& w : g.w) mx = std::max({mx, std::abs(w[0]), std::abs(w[1])});
  EXPECT_GT(mx, default_init_scale(4));
  EXPECT_LE(mx, 0.1);
}

TEST(Net, ForwardIdentityAndPlanted) {
  LayeredNet empty;
  empty.depth = 2;
  const BitVector x{1, -1, 1, -1};
  const auto out = net_forward(empty, std::span<const Bit>(x));
  EXPECT_EQ(out.values.size(), 4U);
  EXPECT_EQ(out.pooled, 0.0);

  LayeredNet zero;
  zero.depth = 1;
  zero.push(Block{{NeuralGate{{{0.0, 0.0}}, {1}}}});
  EXPECT_EQ(net_forward(zero, std::span<const Bit>(BitVector{1, 1})).pooled, 0.0);
  EXPECT_THROW(net_forward(zero, std::span<const Bit>(x)), DimensionMismatch);

  Rng rng(11);
  for (int d = 1; d <= 3; ++d) {
    for (int rep = 0; rep < 5; ++rep) {
      const Circuit c = random_circuit(d, rng);
      const LayeredNet net = planted_net(c, 4);
      EXPECT_EQ(net.boundary_level(), 0);
      const std::size_t n = c.inputs();
      for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
        const BitVector z = oracle::point(n, idx);
        EXPECT_EQ(net_forward(net, std::span<const Bit>(z)).pooled, oracle::eval(c, z));
      }
    }
  }
}

TEST(Net, PushValidatesShape) {
  LayeredNet net;
  net.depth = 2;
  EXPECT_THROW(net.push(init_block(1, 4, 1)), DimensionMismatch);
  net.push(init_block(2, 4, 1));
  net.push(init_block(1, 4, 2));
  EXPECT_THROW(net.push(init_block(1, 4, 3)), DimensionMismatch);
}

TEST(Loss, Examples) {
  const Block perfect{{plant_gate(GateFn::land())}};
  EXPECT_EQ(pooled_loss(perfect, Batch{{{1.0, 1.0}}, {1}, {}}, {0.0}), 0.0);
  const Block zero{{NeuralGate{{{0.0, 0.0}}, {1}}}};
  EXPECT_DOUBLE_EQ(pooled_loss(zero, Batch{{{1.0, 1.0}}, {1}, {}}, {0.25}), 1.25);
  EXPECT_EQ(pooled_loss(perfect, Batch{{{-1.0, 1.0}}, {-1}, {}}, {0.0}), 0.0);
  EXPECT_THROW(pooled_loss(perfect, Batch{}, {0.0}), EmptyBatch);
  EXPECT_THROW(block_gradient(perfect, Batch{}, {0.0}), EmptyBatch);
  EXPECT_THROW(pooled_loss(perfect, Batch{{{1.0}}, {1}, {}}, {0.0}), DimensionMismatch);
}

TEST(Gradient, ZeroWeightsAndSaturation) {
  Rng rng(3);
  Block zero = init_block(2, 5, 1);
  for (auto& g : zero.gates)
    for (auto& w : g.w) w = {0.0, 0.0};
  const Batch batch = random_batch(rng, 4, 10, false);
  for (const auto& gate : block_gradient(zero, batch, {0.3}))
    for (const auto& w : gate) EXPECT_TRUE(w[0] == 0.0 && w[1] == 0.0);

  // Gate 0 planted (saturated on +-1 inputs), gate 1 small.
  Block mixed{{plant_gate(GateFn::lor()), init_block(1, 4, 9).gates[0]}};
  Batch bits;
  for (int i = 0; i < 12; ++i) {
    bits.inputs.push_back({double(rng.sign()), double(rng.sign()), double(rng.sign()), double(rng.sign())});
    bits.labels.push_back(rng.sign());
  }
  const auto grad = block_gradient(mixed, bits, {0.1});
  for (const auto& w : grad[0]) EXPECT_TRUE(w[0] == 0.0 && w[1] == 0.0);
}

TEST(Gradient, MatchesFiniteDifferences) {
  Rng rng(2024);
  int checked = 0;
  while (checked < 100) {
    const int layer = 1 + static_cast<int>(rng.below(3));
    const std::size_t k = 1 + rng.below(5);
    Block block = init_block(layer, k, rng.next(), {0.6, true});
    const Batch batch = random_batch(rng, block.inputs(), 1 + rng.below(8), rng.below(2) == 1);
    if (!away_from_kinks(block, batch)) continue;
    const LossParams lp{rng.uniform(0.0, 1.0)};
    const auto grad = block_gradient(block, batch, lp);
    const double h = 1e-6;
    double diff = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < block.gates.size(); ++j) {
      for (std::size_t l = 0; l < k; ++l) {
        for (int c = 0; c < 2; ++c) {
          Block up = block, down = block;
          up.gates[j].w[l][c] += h;
          down.gates[j].w[l][c] -= h;
          const double fd = (pooled_loss(up, batch, lp) - pooled_loss(down, batch, lp)) / (2 * h);
          diff = std::max(diff, std::abs(fd - grad[j][l][c]));
          norm = std::max(norm, std::abs(grad[j][l][c]));
        }
      }
    }
    EXPECT_LE(diff, 1e-6 * std::max(norm, 1e-3)) << "config " << checked;
    ++checked;
  }
}

TEST(Gradient, GateTablesAgreeWithBlockGradient) {
  Rng rng(77);
  for (int rep = 0; rep < 30; ++rep) {
    const int layer = 1 + static_cast<int>(rng.below(3));
    Block block = init_block(layer, 4, rng.next(), {0.8, true});
    // Mix of exact +-1 inputs (duplicates) and one planted gate to hit saturation.
    Batch batch;
    for (int i = 0; i < 20; ++i) {
      std::vector<double> in(block.inputs());
      for (auto& v : in) v = rng.below(3) == 0 ? rng.uniform(-1.0, 1.0) : double(rng.sign());
      batch.inputs.push_back(std::move(in));
      batch.labels.push_back(rng.sign());
    }
    block.gates[0] = plant_gate(GateFn::from_code(static_cast<unsigned>(rng.below(16))), 4);
    const double lambda = rng.uniform(0.0, 1.0);
    const auto full = block_gradient(block, batch, {lambda});
    const auto tables = gate_tables(batch, block.gates.size());
    for (std::size_t j = 0; j < block.gates.size(); ++j) {
      const auto g = gate_gradient(block.gates[j], tables[j], lambda, block.gates.size());
      for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_NEAR(g[l][0], full[j][l][0], 1e-14);
        EXPECT_NEAR(g[l][1], full[j][l][1], 1e-14);
      }
    }
  }
}

TEST(NetIo, RoundTripByteStable) {
  LayeredNet net;
  net.depth = 3;
  net.push(init_block(3, 5, 1));
  net.push(init_block(2, 5, 2));
  const std::string text = net_to_text(net);
  const LayeredNet back = net_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, net);
  EXPECT_EQ(net_to_text(back), text);
  EXPECT_THROW(net_from_json(nlohmann::json::parse(R"({"depth":2,"blocks":[{"layer":1,"gates":[]}]})")),
               DimensionMismatch);
  EXPECT_THROW(net_from_json(nlohmann::json::parse(R"({"depth":1})")), ParseError);
  EXPECT_THROW(net_from_json(nlohmann::json::parse(
                   R"({"depth":1,"blocks":[{"layer":1,"gates":[{"W":[[0,0]],"v":[2]}]}]})")),
               ParseError);
}
