#include "treelearn/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "treelearn/errors.hpp"
#include "treelearn/parallel.hpp"
#include "treelearn/random.hpp"

namespace treelearn {

namespace {

constexpr double kFlipTolerance = 1e-12;
constexpr double kMatchTolerance = 1e-9;
constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

std::uint64_t steps_from(double x) {
  if (!(x < 1e18)) return kNever;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(x));
}

}  // namespace

std::string to_string(GradientSource s) {
  return s == GradientSource::kSample ? "sample" : "population";
}

std::string to_string(TheoremVariant v) { return v == TheoremVariant::kThm1 ? "thm1" : "thm2"; }

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"k", cfg.k},
          {"eta", cfg.eta},
          {"lambda", cfg.lambda},
          {"auto_lambda", cfg.auto_lambda},
          {"delta", cfg.delta},
          {"T", cfg.T},
          {"init_scale", cfg.init_scale},
          {"allow_large_scale", cfg.allow_large_scale},
          {"seed", cfg.seed},
          {"source", to_string(cfg.source)},
          {"per_layer_eta", cfg.per_layer_eta},
          {"step_cap", cfg.step_cap},
          {"fast_forward", cfg.fast_forward},
          {"last_layer", cfg.last_layer},
          {"threads", cfg.threads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
  if (!j.is_object()) throw ParseError("train config must be a JSON object");
  try {
    if (j.contains("k")) base.k = j["k"].get<std::size_t>();
    if (j.contains("eta")) base.eta = j["eta"].get<double>();
    if (j.contains("lambda")) base.lambda = j["lambda"].get<double>();
    if (j.contains("auto_lambda")) base.auto_lambda = j["auto_lambda"].get<bool>();
    if (j.contains("delta")) base.delta = j["delta"].get<double>();
    if (j.contains("T")) base.T = j["T"].get<std::uint64_t>();
    if (j.contains("init_scale")) base.init_scale = j["init_scale"].get<double>();
    if (j.contains("allow_large_scale")) base.allow_large_scale = j["allow_large_scale"].get<bool>();
    if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("source")) {
      const auto s = j["source"].get<std::string>();
      if (s == "sample") base.source = GradientSource::kSample;
      else if (s == "population") base.source = GradientSource::kPopulation;
      else throw ParseError("source must be sample or population");
    }
    if (j.contains("per_layer_eta")) base.per_layer_eta = j["per_layer_eta"].get<bool>();
    if (j.contains("step_cap")) base.step_cap = j["step_cap"].get<std::uint64_t>();
    if (j.contains("fast_forward")) base.fast_forward = j["fast_forward"].get<bool>();
    if (j.contains("last_layer")) base.last_layer = j["last_layer"].get<int>();
    if (j.contains("threads")) base.threads = j["threads"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  return base;
}

Hyperparams derive_hyperparams(std::size_t n, int d, double delta_fail, double Delta,
                               double epsilon, TheoremVariant variant, double mean_label) {
  auto open_half = [](double x) { return x > 0.0 && x < 0.5; };
  if (d < 1 || d > 30 || n != (std::size_t{1} << d)) throw InvalidRange("n must equal 2^d");
  if (!open_half(delta_fail)) throw InvalidRange("delta must be in (0, 1/2)");
  if (!open_half(Delta)) throw InvalidRange("Delta must be in (0, 1/2)");
  if (variant == TheoremVariant::kThm2 && !open_half(epsilon)) {
    throw InvalidRange("epsilon must be in (0, 1/2)");
  }
  const double nd = static_cast<double>(n) * d;
  Hyperparams h;
  auto& cfg = h.cfg;
  cfg.k = static_cast<std::size_t>(std::ceil(std::log(2.0 * nd / delta_fail) / std::log(4.0 / 3.0)));
  cfg.eta = 1.0 / (16.0 * std::sqrt(2.0) * static_cast<double>(cfg.k));
  cfg.delta = Delta;
  if (std::isnan(mean_label)) {
    cfg.auto_lambda = true;
  } else {
    cfg.auto_lambda = false;
    cfg.lambda = mean_label + Delta / 4.0;
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0) throw InvalidRange("lambda = E[y] + Delta/4 outside [0, 1]");
  }
  const double log_term = std::log(8.0 * nd / delta_fail);
  double t_bound = 0.0;
  double s_bound = 0.0;
  if (variant == TheoremVariant::kThm1) {
    t_bound = 24.0 * static_cast<double>(n) / (std::sqrt(2.0) * cfg.eta * Delta * Delta * Delta);
    s_bound = std::pow(2.0, 15) / std::pow(Delta, 6) * log_term;
  } else {
    t_bound = 6.0 * static_cast<double>(n) / (std::sqrt(2.0) * cfg.eta * epsilon * Delta);
    s_bound = std::pow(2.0, 11) / (epsilon * epsilon * Delta * Delta) * log_term;
  }
  h.T_exact = std::floor(t_bound) + 1.0;
  h.sample_size = std::floor(s_bound) + 1.0;
  cfg.T = h.T_exact >= 1.8e19 ? kNever : static_cast<std::uint64_t>(h.T_exact);
  return h;
}

SignMap sign_map_from_correlations(const DiscreteDistribution& d_level, const Circuit& c,
                                   double zero_tolerance) {
  const int level = exact_log2(d_level.dimension());
  if (level > c.depth()) throw DimensionMismatch("level exceeds circuit depth");
  SignMap s;
  const std::size_t width = d_level.dimension();
  s.nu.assign(width, 1);
  s.influencing.assign(width, false);
  const InfluenceOptions opts{InfluenceMode::kAnalytic};
  for (std::size_t j = 0; j < width; ++j) {
    const double corr = d_level.correlation(j);
    s.influencing[j] = influence(c, level, j, opts).value > 0.0;
    if (std::abs(corr) > zero_tolerance) {
      s.nu[j] = corr > 0.0 ? Bit{1} : Bit{-1};
    } else if (s.influencing[j]) {
      throw LcaViolated("value (" + std::to_string(level) + ", " + std::to_string(j) +
                        ") influences the output but has zero correlation with the label");
    }
  }
  return s;
}

Bit apply_sign_map(const SignMap& s, std::size_t j, Bit z) {
  return s.influencing[j] ? static_cast<Bit>(s.nu[j] * z) : Bit{1};
}

// ---------------------------------------------------------------------------
// Layerwise trainer

namespace {

struct Point {
  std::vector<double> z;
  Bit y;
  double p;
};

std::vector<Point> merge_points(std::vector<Point> pts) {
  std::map<std::pair<std::vector<double>, Bit>, double> acc;
  for (auto& pt : pts) acc[{std::move(pt.z), pt.y}] += pt.p;
  std::vector<Point> out;
  out.reserve(acc.size());
  for (auto& [key, p] : acc) out.push_back({key.first, key.second, p});
  return out;
}

struct Pattern {
  double a = 0.0;
  double b = 0.0;
  double coef = 0.0;  ///< sum of weight * (-y - lambda) / m
  double mass = 0.0;
};

struct AlignmentLayer {
  const AlignmentCheck* check = nullptr;
  int layer = 0;
  GateFn gate;
  bool gate_influencing = false;
  Bit nu = 1;
  Bit xi_a = 1;
  Bit xi_b = 1;
  double rhs = 0.0;
};

struct GateSim {
  NeuralGate g;
  std::vector<Pattern> pats;
  std::uint64_t steps = 0;
  bool stopped = false;
  bool saturated = false;
  std::size_t events = 0;
  AlignmentLayer align;
  bool align_active = false;
  std::uint64_t align_tuples = 0;
  std::uint64_t align_violations = 0;
  double align_min = std::numeric_limits<double>::infinity();

  void advance(std::uint64_t target, double eta, bool fast) {
    const std::size_t k = g.width();
    const std::size_t np = pats.size();
    std::vector<double> u(k * np);
    std::vector<double> s(np);
    std::vector<char> unsat(np);
    std::vector<std::array<double, 2>> grad(k);
    while (!stopped && steps < target) {
      for (std::size_t q = 0; q < np; ++q) {
        double sq = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
          const double val = g.w[l][0] * pats[q].a + g.w[l][1] * pats[q].b;
          u[l * np + q] = val;
          if (val > 0.0) sq += g.v[l] * val;
        }
        s[q] = sq;
        unsat[q] = sq > -1.0 && sq < 1.0;
      }
      bool zero = true;
      for (std::size_t l = 0; l < k; ++l) {
        grad[l] = {0.0, 0.0};
        for (std::size_t q = 0; q < np; ++q) {
          if (!unsat[q] || !(u[l * np + q] > 0.0)) continue;
          grad[l][0] += pats[q].coef * g.v[l] * pats[q].a;
          grad[l][1] += pats[q].coef * g.v[l] * pats[q].b;
        }
        if (grad[l][0] != 0.0 || grad[l][1] != 0.0) zero = false;
      }
      ++events;
      if (align_active) check_alignment(u, unsat, grad);
      if (zero) {
        stopped = true;
        saturated = true;
        for (std::size_t q = 0; q < np; ++q) {
          if (pats[q].mass > 0.0 && unsat[q]) saturated = false;
        }
        break;
      }
      const std::uint64_t remaining = target - steps;
      std::uint64_t jump = 1;
      if (fast) {
        std::uint64_t tau = kNever;
        for (std::size_t q = 0; q < np; ++q) {
          double ds = 0.0;
          for (std::size_t l = 0; l < k; ++l) {
            const double dl = eta * (grad[l][0] * pats[q].a + grad[l][1] * pats[q].b);
            const double ul = u[l * np + q];
            if (ul > 0.0) {
              ds -= g.v[l] * dl;
              if (dl > 0.0) tau = std::min(tau, steps_from(std::ceil(ul / dl)));
            } else if (dl < 0.0) {
              tau = std::min(tau, steps_from(std::floor(ul / dl) + 1.0));
            }
          }
          const double sq = s[q];
          if (unsat[q]) {
            if (ds > 0.0) tau = std::min(tau, steps_from(std::ceil((1.0 - sq) / ds)));
            if (ds < 0.0) tau = std::min(tau, steps_from(std::ceil((sq + 1.0) / -ds)));
          } else if (sq >= 1.0 && ds < 0.0) {
            tau = std::min(tau, steps_from(std::floor((sq - 1.0) / -ds) + 1.0));
          } else if (sq <= -1.0 && ds > 0.0) {
            tau = std::min(tau, steps_from(std::floor((-1.0 - sq) / ds) + 1.0));
          }
        }
        jump = std::min(tau, remaining);
      }
      const double step = static_cast<double>(jump) * eta;
      for (std::size_t l = 0; l < k; ++l) {
        g.w[l][0] -= step * grad[l][0];
        g.w[l][1] -= step * grad[l][1];
      }
      steps += jump;
    }
  }

  void check_alignment(const std::vector<double>& u, const std::vector<char>& unsat,
                       const std::vector<std::array<double, 2>>& grad) {
    const std::size_t np = pats.size();
    for (std::size_t q = 0; q < np; ++q) {
      if (!(pats[q].mass > 0.0) || !unsat[q]) continue;
      const Bit a = pats[q].a > 0.0 ? Bit{1} : Bit{-1};
      const Bit b = pats[q].b > 0.0 ? Bit{1} : Bit{-1};
      const Bit gamma = align.gate(static_cast<Bit>(align.xi_a * a), static_cast<Bit>(align.xi_b * b));
      for (std::size_t l = 0; l < g.width(); ++l) {
        if (!(u[l * np + q] > 0.0)) continue;
        const double inner = grad[l][0] * pats[q].a + grad[l][1] * pats[q].b;
        const double slack = -static_cast<double>(gamma) * g.v[l] * align.nu * inner - align.rhs;
        ++align_tuples;
        if (slack <= -align.check->tolerance) ++align_violations;
        align_min = std::min(align_min, slack);
      }
    }
  }
};

std::vector<Pattern> gate_patterns(const std::vector<Point>& pts, std::size_t j, double lambda,
                                   std::size_t m) {
  std::map<std::pair<double, double>, Pattern> acc;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (const auto& pt : pts) {
    auto& pat = acc[{pt.z[2 * j], pt.z[2 * j + 1]}];
    pat.a = pt.z[2 * j];
    pat.b = pt.z[2 * j + 1];
    pat.coef += pt.p * (-static_cast<double>(pt.y) - lambda) * inv_m;
    pat.mass += pt.p;
  }
  std::vector<Pattern> out;
  out.reserve(acc.size());
  for (auto& [key, pat] : acc) out.push_back(pat);
  return out;
}

std::vector<std::uint64_t> checkpoint_grid(std::uint64_t cap) {
  std::vector<std::uint64_t> grid{0};
  for (std::uint64_t decade = 1; decade <= cap && decade < kNever / 10; decade *= 10) {
    for (std::uint64_t f : {1, 2, 5}) {
      if (decade * f < cap) grid.push_back(decade * f);
    }
  }
  grid.push_back(cap);
  return grid;
}

bool is_sign(double v) { return v == 1.0 || v == -1.0; }

}  // namespace

TrainResult train_layerwise(const DiscreteDistribution& data, const TrainConfig& cfg,
                            const AlignmentCheck* alignment) {
  const int d = exact_log2(data.dimension());
  if (d < 1) throw DimensionMismatch("training data must have dimension 2^d with d >= 1");
  if (cfg.k < 1) throw InvalidRange("k must be >= 1");
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw InvalidRange("eta must be positive");
  if (cfg.T < 1) throw InvalidRange("T must be >= 1");
  if (cfg.last_layer < 1 || cfg.last_layer > d) throw InvalidRange("last_layer must be in [1, d]");
  if (alignment && alignment->circuit.depth() != d) {
    throw DimensionMismatch("alignment circuit depth differs from the data");
  }

  TrainResult res;
  res.net.depth = d;
  const DiscreteDistribution flipped_data =
      data.mean_label() < -kFlipTolerance ? data.with_flipped_labels() : data;
  res.labels_flipped = data.mean_label() < -kFlipTolerance;
  res.mean_label = flipped_data.mean_label();
  res.lambda = cfg.auto_lambda ? res.mean_label + cfg.delta / 4.0 : cfg.lambda;
  if (!(res.lambda >= 0.0 && res.lambda <= 1.0)) throw InvalidRange("lambda must be in [0, 1]");

  std::vector<Point> pts;
  pts.reserve(flipped_data.size());
  for (const auto& wp : flipped_data.support()) {
    pts.push_back({std::vector<double>(wp.x.begin(), wp.x.end()), wp.y, wp.p});
  }
  pts = merge_points(std::move(pts));

  const std::uint64_t cap = std::min(cfg.T, cfg.step_cap);
  const auto grid = checkpoint_grid(cap);

  for (int layer = d; layer >= cfg.last_layer; --layer) {
    const std::size_t m = std::size_t{1} << (layer - 1);
    LayerTrace trace;
    trace.layer = layer;
    trace.eta = cfg.per_layer_eta ? cfg.eta * static_cast<double>(std::size_t{1} << layer) : cfg.eta;

    const Block init = init_block(layer, cfg.k, derive_seed(cfg.seed, static_cast<std::uint64_t>(layer)),
                                  InitOptions{cfg.init_scale, cfg.allow_large_scale});
    std::vector<GateSim> sims(m);
    for (std::size_t j = 0; j < m; ++j) {
      sims[j].g = init.gates[j];
      sims[j].pats = gate_patterns(pts, j, res.lambda, m);
    }

    if (alignment) {
      trace.alignment_checked = true;
      bool exact_inputs = true;
      for (const auto& pt : pts)
        for (double v : pt.z) exact_inputs = exact_inputs && is_sign(v);
      std::optional<SignMap> upper, lower;
      try {
        upper = sign_map_from_correlations(alignment->chain[layer - 1], alignment->circuit);
        if (layer < d) lower = sign_map_from_correlations(alignment->chain[layer], alignment->circuit);
      } catch (const LcaViolated& e) {
        trace.alignment_note = e.what();
      }
      if (!exact_inputs) {
        trace.alignment_note = "inputs to this layer are not all +-1";
      } else if (upper) {
        const double rhs = alignment->epsilon * alignment->delta /
                           (std::sqrt(2.0) * static_cast<double>(std::size_t{1} << layer));
        for (std::size_t j = 0; j < m; ++j) {
          auto& al = sims[j].align;
          al.check = alignment;
          al.layer = layer;
          al.gate = alignment->circuit.gate(layer, j);
          al.gate_influencing = upper->influencing[j];
          al.nu = upper->nu[j];
          if (lower) {
            al.xi_a = lower->influencing[2 * j] ? lower->nu[2 * j] : Bit{1};
            al.xi_b = lower->influencing[2 * j + 1] ? lower->nu[2 * j + 1] : Bit{1};
          }
          al.rhs = rhs;
          sims[j].align_active = al.gate_influencing;
        }
      }
    }

    Batch batch;
    batch.inputs.reserve(pts.size());
    for (const auto& pt : pts) {
      batch.inputs.push_back(pt.z);
      batch.labels.push_back(pt.y);
      batch.weights.push_back(pt.p);
    }
    auto current_block = [&] {
      Block b;
      b.gates.reserve(m);
      for (const auto& sim : sims) b.gates.push_back(sim.g);
      return b;
    };

    bool all_stopped = false;
    for (std::uint64_t target : grid) {
      parallel_for(m, cfg.threads, [&](std::size_t j) {
        sims[j].advance(target, trace.eta, cfg.fast_forward);
      });
      all_stopped = std::all_of(sims.begin(), sims.end(), [](const GateSim& s) { return s.stopped; });
      std::uint64_t at = target;
      if (all_stopped) {
        at = 0;
        for (const auto& s : sims) at = std::max(at, s.steps);
      }
      if (trace.loss_curve.empty() || trace.loss_curve.back().step != at) {
        trace.loss_curve.push_back({at, pooled_loss(current_block(), batch, {res.lambda})});
      }
      if (all_stopped) break;
    }

    for (const auto& s : sims) {
      trace.steps = std::max(trace.steps, s.steps);
      trace.events += s.events;
      if (s.saturated) ++trace.gates_saturated;
      trace.alignment_tuples += s.align_tuples;
      trace.alignment_violations += s.align_violations;
      trace.alignment_min_slack = std::min(trace.alignment_min_slack, s.align_min);
    }
    if (all_stopped) {
      trace.stop_reason = trace.gates_saturated == m ? "saturated" : "stationary";
    } else {
      trace.stop_reason = cap == cfg.T ? "T" : "step_cap";
    }

    Block block = current_block();
    for (auto& pt : pts) pt.z = block.forward(pt.z);
    pts = merge_points(std::move(pts));
    res.net.push(std::move(block));
    res.layers.push_back(std::move(trace));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Recovery

bool RecoveryReport::all_layers_match() const {
  return !layers.empty() && std::all_of(layers.begin(), layers.end(), [](const LayerMatch& l) { return l.match; });
}

bool RecoveryReport::influencing_gates_match() const {
  return std::all_of(gates.begin(), gates.end(),
                     [](const GateMatch& g) { return !g.influencing || g.match; });
}

RecoveryReport verify_recovery(const LayeredNet& net, const Circuit& c, const DiscreteDistribution& dd,
                               std::optional<bool> labels_flipped) {
  const int d = c.depth();
  if (net.depth != d || dd.dimension() != c.inputs()) {
    throw DimensionMismatch("net, circuit and distribution dimensions differ");
  }
  RecoveryReport r;
  r.labels_flipped = labels_flipped.value_or(dd.mean_label() < -kFlipTolerance);
  const DiscreteDistribution data = r.labels_flipped ? dd.with_flipped_labels() : dd;
  const Circuit target = r.labels_flipped ? c.with_gate(1, 0, c.gate(1, 0).negated()) : c;
  const auto chain = distribution_chain(data, target);
  r.complete = net.boundary_level() == 0;

  std::vector<std::optional<SignMap>> maps(d + 1);
  for (int level = net.boundary_level(); level < d; ++level) {
    try {
      maps[level] = sign_map_from_correlations(chain[level], target);
    } catch (const LcaViolated& e) {
      r.witnesses.push_back({"sign_map", level, 0, e.what()});
    }
  }
  auto phi = [&](int level, std::size_t j, Bit z) -> Bit {
    if (level == d) return z;
    return apply_sign_map(*maps[level], j, z);
  };

  const std::size_t trained = net.blocks.size();
  for (std::size_t t = 0; t < trained; ++t) r.layers.push_back({d - static_cast<int>(t), false, 0});

  double error = 0.0;
  r.exact = true;
  for (const auto& wp : data.support()) {
    if (!(wp.p > 0.0)) continue;
    const auto truth = level_values(target, wp.x);
    std::vector<double> cur(wp.x.begin(), wp.x.end());
    for (std::size_t t = 0; t < trained; ++t) {
      cur = net.blocks[t].forward(cur);
      const int level = d - 1 - static_cast<int>(t);
      if (!maps[level]) continue;
      for (std::size_t j = 0; j < cur.size(); ++j) {
        const Bit expect = phi(level, j, truth[level][j]);
        if (std::abs(cur[j] - expect) > kMatchTolerance) {
          if (r.layers[t].mismatches++ == 0) {
            r.witnesses.push_back({"layer", level + 1, j,
                                   "x=" + format_bits(wp.x) + " got " + std::to_string(cur[j]) +
                                       " expected " + std::to_string(static_cast<int>(expect))});
          }
        }
      }
    }
    double pooled = 0.0;
    for (double v : cur) pooled += v;
    pooled /= static_cast<double>(cur.size());
    const Bit pred = pooled < 0.0 ? Bit{-1} : Bit{1};
    if (pred != wp.y) error += wp.p;
    if (std::abs(pooled - wp.y) > kMatchTolerance) r.exact = false;
  }
  r.error_rate = std::clamp(error, 0.0, 1.0);
  for (std::size_t t = 0; t < trained; ++t) {
    const int level = d - 1 - static_cast<int>(t);
    r.layers[t].match = maps[level].has_value() && r.layers[t].mismatches == 0;
  }

  for (std::size_t t = 0; t < trained; ++t) {
    const int layer = d - static_cast<int>(t);
    const auto tables = pattern_tables(chain[layer]);
    const bool maps_ok = maps[layer - 1].has_value() && (layer == d || maps[layer].has_value());
    for (std::size_t j = 0; j < tables.size(); ++j) {
      GateMatch gm;
      gm.layer = layer;
      gm.pos = j;
      const auto& ng = net.blocks[t].gates[j];
      gm.influencing = maps[layer - 1] ? maps[layer - 1]->influencing[j]
                                       : influence(target, layer - 1, j, {InfluenceMode::kAnalytic}).value > 0.0;
      std::array<bool, 4> seen{};
      gm.match = maps_ok;
      gm.saturated = true;
      for (int tp = 0; tp < 4; ++tp) {
        if (!(tables[j].pattern_mass(tp) > 0.0)) continue;
        const auto [a, b] = GateFn::kPatterns[tp];
        const Bit ia = maps_ok ? phi(layer, 2 * j, a) : a;
        const Bit ib = maps_ok ? phi(layer, 2 * j + 1, b) : b;
        seen[GateFn::pattern_index(ia, ib)] = true;
        const double out = ng.forward(ia, ib);
        if (std::abs(out) < 1.0 - kMatchTolerance) gm.saturated = false;
        if (maps_ok) {
          const Bit expect = phi(layer - 1, j, target.gate(layer, j)(a, b));
          if (std::abs(out - expect) > kMatchTolerance) gm.match = false;
        }
      }
      gm.extracted = extract_gate(ng, kMatchTolerance, seen).gate;
      if (gm.influencing && !gm.match) {
        r.witnesses.push_back({"gate", layer, j, "extracted " + gm.extracted.to_string() +
                                                     " does not match " + target.gate(layer, j).to_string() +
                                                     " under the sign maps"});
      }
      r.gates.push_back(gm);
    }
  }
  return r;
}

nlohmann::json to_json(const RecoveryReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"layer", l.layer}, {"match", l.match}, {"mismatches", l.mismatches}});
  }
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : r.gates) {
    gates.push_back({{"layer", g.layer},
                     {"pos", g.pos},
                     {"influencing", g.influencing},
                     {"saturated", g.saturated},
                     {"match", g.match},
                     {"extracted", g.extracted.to_string()}});
  }
  nlohmann::json wit = nlohmann::json::array();
  for (const auto& w : r.witnesses) {
    wit.push_back({{"check", w.check}, {"level", w.level}, {"pos", w.pos}, {"detail", w.detail}});
  }
  return {{"labels_flipped", r.labels_flipped},
          {"complete", r.complete},
          {"error_rate", r.error_rate},
          {"exact", r.exact},
          {"all_layers_match", r.all_layers_match()},
          {"influencing_gates_match", r.influencing_gates_match()},
          {"layers", layers},
          {"gates", gates},
          {"witnesses", wit}};
}

nlohmann::json to_json(const TrainResult& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : r.layers) {
    nlohmann::json j{{"layer", l.layer},
                     {"eta", l.eta},
                     {"steps", l.steps},
                     {"stop_reason", l.stop_reason},
                     {"gates_saturated", l.gates_saturated},
                     {"events", l.events}};
    if (l.alignment_checked) {
      j["alignment"] = {{"tuples", l.alignment_tuples},
                        {"violations", l.alignment_violations},
                        {"min_slack", std::isfinite(l.alignment_min_slack) ? nlohmann::json(l.alignment_min_slack)
                                                                           : nlohmann::json(nullptr)},
                        {"note", l.alignment_note}};
    }
    layers.push_back(std::move(j));
  }
  return {{"labels_flipped", r.labels_flipped},
          {"mean_label", r.mean_label},
          {"lambda", r.lambda},
          {"layers", layers}};
}

TrainingMargins training_margins(const std::vector<DiscreteDistribution>& chain, const Circuit& c) {
  const int d = c.depth();
  if (chain.size() != static_cast<std::size_t>(d) + 1) throw DimensionMismatch("chain must hold D^(0..d)");
  const double ey = std::abs(chain.back().mean_label());
  const InfluenceOptions inf{InfluenceMode::kAnalytic};
  double lo = 1.0 - ey;
  for (int level = 1; level <= d; ++level) {
    for (std::size_t j = 0; j < chain[level].dimension(); ++j) {
      const double q = chain[level].marginal_plus(j);
      if (q <= 1e-12 || q >= 1.0 - 1e-12) continue;
      if (influence(c, level, j, inf).value == 0.0) continue;
      lo = std::min(lo, std::abs(chain[level].correlation(j)) - ey);
    }
  }
  TrainingMargins m;
  m.delta = std::min(0.99 * lo, 0.49);
  m.epsilon = std::min(certify_properties(chain, c).epsilon_certified, 0.49);
  return m;
}

}  // namespace treelearn
