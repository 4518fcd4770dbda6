#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "treelearn/analysis.hpp"
#include "treelearn/baseline.hpp"
#include "treelearn/circuit.hpp"
#include "treelearn/circuit_io.hpp"
#include "treelearn/dist.hpp"
#include "treelearn/dist_io.hpp"
#include "treelearn/errors.hpp"
#include "treelearn/net_io.hpp"
#include "treelearn/random.hpp"
#include "treelearn/train.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace treelearn;

// Structured values cross the boundary as JSON text; the Python package
// decodes them.
namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
}

InfluenceOptions influence_options(const std::string& mode, const std::string& reading, std::uint64_t samples,
                                   std::uint64_t seed) {
  InfluenceOptions o;
  if (mode == "exact") o.mode = InfluenceMode::kExact;
  else if (mode == "analytic") o.mode = InfluenceMode::kAnalytic;
  else if (mode == "montecarlo") o.mode = InfluenceMode::kMonteCarlo;
  else throw ParseError("mode must be exact, analytic or montecarlo");
  if (reading == "whole") o.reading = InfluenceReading::kWholeCircuit;
  else if (reading == "single") o.reading = InfluenceReading::kSingleLevel;
  else throw ParseError("reading must be whole or single");
  o.samples = samples;
  o.seed = seed;
  return o;
}

BitVector to_bits(const std::vector<int>& x) {
  BitVector out;
  out.reserve(x.size());
  for (int v : x) {
    if (!is_bit(v)) throw PreconditionViolated("inputs must be -1 or +1");
    out.push_back(static_cast<Bit>(v));
  }
  return out;
}

std::vector<int> from_bits(const BitVector& x) { return {x.begin(), x.end()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "treelearn C++ core";
  m.attr("__version__") = TREELEARN_VERSION;

  py::register_exception<Error>(m, "TreelearnError", PyExc_ValueError);

  py::class_<Circuit>(m, "Circuit")
      .def_static("from_json", [](const std::string& text) { return circuit_from_json(parse(text)); })
      .def("to_json", [](const Circuit& c) { return circuit_to_json(c).dump(); })
      .def_property_readonly("depth", &Circuit::depth)
      .def_property_readonly("inputs", &Circuit::inputs)
      .def("gate", [](const Circuit& c, int layer, std::size_t pos) { return c.gate(layer, pos).to_string(); })
      .def("eval", [](const Circuit& c, const std::vector<int>& x) { return int(eval_circuit(c, to_bits(x))); })
      .def("level_values",
           [](const Circuit& c, const std::vector<int>& x) {
             std::vector<std::vector<int>> out;
             for (const auto& lv : level_values(c, to_bits(x))) out.push_back(from_bits(lv));
             return out;
           })
      .def(
          "influence",
          [](const Circuit& c, int level, std::size_t coord, const std::string& mode, const std::string& reading,
             std::uint64_t samples, std::uint64_t seed) {
            const auto e = influence(c, level, coord, influence_options(mode, reading, samples, seed));
            return py::make_tuple(e.value, e.std_error);
          },
          py::arg("level"), py::arg("coord"), py::arg("mode") = "analytic", py::arg("reading") = "whole",
          py::arg("samples") = 100000, py::arg("seed") = 0)
      .def("__eq__", [](const Circuit& a, const Circuit& b) { return a == b; });

  m.def(
      "random_circuit",
      [](int depth, std::uint64_t seed, bool and_or) {
        Rng rng(seed);
        return random_circuit(depth, rng, and_or ? and_or_gates() : std::vector<GateFn>{});
      },
      py::arg("depth"), py::arg("seed") = 0, py::arg("and_or") = true);
  m.def("parity_circuit", &build_parity_circuit, py::arg("depth"), py::arg("relevant"));
  m.def("fm_circuit", &build_fm_circuit, py::arg("m"));

  m.def(
      "sample",
      [](const std::string& spec, std::size_t count, std::uint64_t seed) {
        const DistSpec s = dist_spec_from_json(parse(spec));
        Rng rng(seed);
        std::vector<std::pair<std::vector<int>, int>> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
          const auto smp = s.sample(rng);
          out.emplace_back(from_bits(smp.x), int(smp.y));
        }
        return out;
      },
      py::arg("spec"), py::arg("count"), py::arg("seed") = 0);

  m.def("distribution_chain", [](const std::string& spec) {
    json out = json::array();
    for (const auto& d : dist_spec_from_json(parse(spec)).chain()) out.push_back(to_json(d));
    return out.dump();
  });

  m.def(
      "certify",
      [](const std::string& spec, double delta) {
        const DistSpec s = dist_spec_from_json(parse(spec));
        const auto chain = s.chain();
        const auto margins = training_margins(chain, s.circuit);
        json out{{"properties", to_json(certify_properties(chain, s.circuit))},
                 {"training_margins", {{"delta", margins.delta}, {"epsilon", margins.epsilon}}}};
        if (delta > 0.0) out["lca"] = to_json(certify_lca(chain, s.circuit, delta));
        return out.dump();
      },
      py::arg("spec"), py::arg("delta") = 0.0);

  m.def(
      "train_layerwise",
      [](const std::string& spec, std::uint64_t seed, double delta_fail, const std::string& overrides,
         int threads) {
        const DistSpec s = dist_spec_from_json(parse(spec));
        const auto chain = s.chain();
        const auto margins = training_margins(chain, s.circuit);
        if (!(margins.delta > 0.0)) throw LcaViolated("no positive Delta for this distribution");
        const auto h = derive_hyperparams(s.circuit.inputs(), s.circuit.depth(), delta_fail, margins.delta,
                                          margins.epsilon, TheoremVariant::kThm2);
        TrainConfig cfg = train_config_from_json(parse(overrides), h.cfg);
        cfg.seed = derive_seed(seed, 2);
        cfg.threads = threads;
        const auto res = train_layerwise(chain.back(), cfg);
        const auto rec = verify_recovery(res.net, s.circuit, chain.back(), res.labels_flipped);
        return json{{"config", to_json(cfg)},
                    {"train", to_json(res)},
                    {"recovery", to_json(rec)},
                    {"checkpoint", net_to_json(res.net)}}
            .dump();
      },
      py::arg("spec"), py::arg("seed") = 0, py::arg("delta_fail") = 0.01, py::arg("overrides") = "{}",
      py::arg("threads") = 1);

  m.def(
      "verify_recovery",
      [](const std::string& checkpoint, const std::string& spec) {
        const DistSpec s = dist_spec_from_json(parse(spec));
        return to_json(verify_recovery(net_from_json(parse(checkpoint)), s.circuit, s.chain().back())).dump();
      },
      py::arg("checkpoint"), py::arg("spec"));

  m.def(
      "run_lemma_suite",
      [](const std::string& scope, int depth, std::uint64_t seed, int threads, bool controls) {
        SuiteOptions o;
        o.scope = scope;
        o.max_depth = depth;
        o.seed = seed;
        o.threads = threads;
        o.negative_controls = controls;
        return to_json(run_lemma_suite(o)).dump();
      },
      py::arg("scope") = "all", py::arg("depth") = 3, py::arg("seed") = 0, py::arg("threads") = 1,
      py::arg("negative_controls") = true);

  m.def("rank_bound_check",
        [](const std::string& net) { return to_json(rank_bound_check(quantized_net_from_json(parse(net)))).dump(); });
  m.def(
      "random_quantized_net",
      [](int half_inputs, std::size_t k, int B, std::uint64_t seed) {
        Rng rng(seed);
        return to_json(random_quantized_net(half_inputs, k, B, rng)).dump();
      },
      py::arg("half_inputs"), py::arg("k"), py::arg("B"), py::arg("seed") = 0);

  m.def("run_figure1", [](const std::string& config) {
    const Figure1Config cfg = figure1_config_from_json(parse(config));
    const auto r = run_figure1(cfg);
    json curve = json::array();
    for (const auto& pt : r.curve) curve.push_back({{"iteration", pt.iteration}, {"accuracy", pt.accuracy}});
    return json{{"config", to_json(cfg)}, {"relevant", r.relevant}, {"test_label_mean", r.test_label_mean},
                {"curve", curve}}
        .dump();
  });
}
