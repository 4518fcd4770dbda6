// treelearn: circuits, distributions, layerwise training and verification.
//
// Every command writes its artifacts and a manifest.json under --out.
// Exit status: 0 success, 1 verification failure, 2 usage or input error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

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

namespace fs = std::filesystem;
using nlohmann::json;
using namespace treelearn;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;

std::string sha256_file(const fs::path& path) {
  const std::string data = read_text_file(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out = ".";
  int threads = 1;
};

// Collects what the manifest records while a command runs.
class Run {
 public:
  Run(std::string command, const Globals& g) : command_(std::move(command)), g_(g) {
    start_ = std::chrono::steady_clock::now();
    fs::create_directories(g_.out);
    if (!g_.config_path.empty()) {
      input(g_.config_path);
      try {
        config_file_ = json::parse(read_text_file(g_.config_path));
      } catch (const json::parse_error& e) {
        throw ParseError(g_.config_path + ": " + e.what());
      }
      if (!config_file_.is_object()) throw ParseError("--config must hold a JSON object");
    }
  }

  /// Section of the --config document, empty object when absent.
  json section(const std::string& name) const {
    return config_file_.contains(name) ? config_file_[name] : json::object();
  }

  void input(const fs::path& p) { inputs_.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}}); }
  void config(const std::string& key, json value) { config_[key] = std::move(value); }
  void seed(const std::string& key, std::uint64_t value) { seeds_[key] = value; }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = fs::path(g_.out) / name;
    write_text_file(p, text);
    outputs_.push_back(p.string());
    return p;
  }

  void finish(const std::string& status) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m{{"command", command_},
           {"version", TREELEARN_VERSION},
           {"config", config_},
           {"seeds", seeds_},
           {"threads", g_.threads},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"status", status},
           {"wall_clock_seconds", secs}};
    write_text_file(fs::path(g_.out) / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  Globals g_;
  json config_file_ = json::object();
  json config_ = json::object();
  json seeds_ = json::object();
  json inputs_ = json::array();
  json outputs_ = json::array();
  std::chrono::steady_clock::time_point start_;
};

json read_json_file(const fs::path& p) {
  try {
    return json::parse(read_text_file(p));
  } catch (const json::parse_error& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("not an index: '" + tok + "'");
    }
  }
  return out;
}

std::string loss_curves_csv(const TrainResult& r) {
  std::string out = "layer,step,loss\n";
  char buf[96];
  for (const auto& l : r.layers) {
    for (const auto& pt : l.loss_curve) {
      std::snprintf(buf, sizeof buf, "%d,%llu,%.17g\n", l.layer, static_cast<unsigned long long>(pt.step), pt.loss);
      out += buf;
    }
  }
  return out;
}

// ---------------------------------------------------------------- circuit

struct CircuitGenArgs {
  std::string kind = "random";
  int depth = 3;
  std::string relevant;
  int m = 1;
  std::string gates = "and-or";
};

int circuit_gen(const Globals& g, const CircuitGenArgs& a) {
  Run run("circuit gen", g);
  Circuit c = Circuit::constant_one(1);
  if (a.kind == "random") {
    Rng rng(g.seed);
    if (a.gates != "and-or" && a.gates != "all") throw ParseError("--gates must be and-or or all");
    c = random_circuit(a.depth, rng, a.gates == "and-or" ? and_or_gates() : std::vector<GateFn>{});
    run.seed("circuit", g.seed);
  } else if (a.kind == "parity") {
    c = build_parity_circuit(a.depth, parse_index_list(a.relevant));
  } else if (a.kind == "fm") {
    c = build_fm_circuit(a.m);
  } else {
    throw ParseError("--kind must be random, parity or fm");
  }
  run.config("kind", a.kind);
  run.config("depth", c.depth());
  if (a.kind == "parity") run.config("relevant", a.relevant);
  if (a.kind == "fm") run.config("m", a.m);
  if (a.kind == "random") run.config("gates", a.gates);
  const auto p = run.write("circuit.json", circuit_to_text(c));
  std::cout << p.string() << "\n";
  run.finish("ok");
  return kOk;
}

int circuit_eval(const Globals& g, const std::string& circuit_path, const std::string& x) {
  Run run("circuit eval", g);
  run.input(circuit_path);
  const Circuit c = read_circuit_file(circuit_path);
  const BitVector bits = parse_bits(x);
  const Bit y = eval_circuit(c, bits);
  run.config("x", x);
  json out{{"x", format_bits(bits)}, {"y", y}};
  json levels = json::array();
  for (const auto& lv : level_values(c, bits)) levels.push_back(format_bits(lv));
  out["levels"] = levels;
  run.write("eval.json", out.dump(2) + "\n");
  std::cout << int(y) << "\n";
  run.finish("ok");
  return kOk;
}

int circuit_influence(const Globals& g, const std::string& circuit_path, const std::string& mode,
                      const std::string& reading, std::uint64_t samples) {
  Run run("circuit influence", g);
  run.input(circuit_path);
  const Circuit c = read_circuit_file(circuit_path);
  InfluenceOptions opts;
  if (mode == "exact") opts.mode = InfluenceMode::kExact;
  else if (mode == "analytic") opts.mode = InfluenceMode::kAnalytic;
  else if (mode == "montecarlo") opts.mode = InfluenceMode::kMonteCarlo;
  else throw ParseError("--mode must be exact, analytic or montecarlo");
  if (reading == "whole") opts.reading = InfluenceReading::kWholeCircuit;
  else if (reading == "single") opts.reading = InfluenceReading::kSingleLevel;
  else throw ParseError("--reading must be whole or single");
  opts.samples = samples;
  opts.seed = g.seed;
  run.config("mode", mode);
  run.config("reading", reading);
  if (opts.mode == InfluenceMode::kMonteCarlo) {
    run.config("samples", samples);
    run.seed("influence", g.seed);
  }
  json rows = json::array();
  std::string csv = "level,coord,influence,std_error\n";
  char buf[128];
  for (int level = 0; level <= c.depth(); ++level) {
    for (std::size_t j = 0; j < (std::size_t{1} << level); ++j) {
      const auto est = influence(c, level, j, opts);
      rows.push_back({{"level", level}, {"coord", j}, {"influence", est.value}, {"std_error", est.std_error}});
      std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g\n", level, j, est.value, est.std_error);
      csv += buf;
    }
  }
  run.write("influence.json", rows.dump(2) + "\n");
  run.write("influence.csv", csv);
  std::cout << csv;
  run.finish("ok");
  return kOk;
}

// ---------------------------------------------------------------- dist

int dist_sample(const Globals& g, const std::string& spec_path, std::size_t count) {
  Run run("dist sample", g);
  run.input(spec_path);
  const DistSpec spec = read_dist_spec(spec_path);
  Rng rng(g.seed);
  std::vector<LabeledSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(spec.sample(rng));
  run.config("count", count);
  run.seed("sampler", g.seed);
  std::cout << run.write("samples.csv", samples_csv(out)).string() << "\n";
  run.finish("ok");
  return kOk;
}

int dist_enumerate(const Globals& g, const std::string& spec_path, int level) {
  Run run("dist enumerate", g);
  run.input(spec_path);
  const DistSpec spec = read_dist_spec(spec_path);
  const auto chain = spec.chain();
  const int d = spec.circuit.depth();
  if (level < 0) level = d;
  if (level > d) throw InvalidRange("--level must be in [0, depth]");
  run.config("level", level);
  const auto& dd = chain[static_cast<std::size_t>(level)];
  json out = to_json(dd);
  out["level"] = level;
  out["mean_label"] = dd.mean_label();
  std::cout << run.write("distribution.json", out.dump(2) + "\n").string() << "\n";
  run.finish("ok");
  return kOk;
}

int dist_certify(const Globals& g, const std::string& spec_path, double delta) {
  Run run("dist certify", g);
  run.input(spec_path);
  const DistSpec spec = read_dist_spec(spec_path);
  const auto chain = spec.chain();
  const auto props = certify_properties(chain, spec.circuit);
  json out{{"properties", to_json(props)}};
  const auto margins = training_margins(chain, spec.circuit);
  out["training_margins"] = {{"delta", margins.delta}, {"epsilon", margins.epsilon}};
  bool ok = true;
  if (delta > 0.0) {
    const auto lca = certify_lca(chain, spec.circuit, delta);
    out["lca"] = to_json(lca);
    ok = lca.lca_holds;
    run.config("delta", delta);
  }
  run.write("certificate.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  run.finish(ok ? "ok" : "verification_failed");
  return ok ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------- train

struct LayerwiseArgs {
  std::string dist;
  std::string mode = "population";
  std::size_t samples = 50000;
  double delta_fail = 0.01;
  double Delta = 0.0;
  double epsilon = 0.0;
  std::string variant = "thm2";
  bool alignment = false;
  CLI::App* cmd = nullptr;
  // Overrides of derived TrainConfig fields.
  std::size_t k = 0;
  double eta = 0.0;
  double lambda = -1.0;
  std::uint64_t T = 0;
  std::uint64_t step_cap = 0;
  bool per_layer_eta = false;
  bool no_fast_forward = false;
};

int train_layerwise_cmd(const Globals& g, const LayerwiseArgs& a) {
  Run run("train layerwise", g);
  run.input(a.dist);
  const DistSpec spec = read_dist_spec(a.dist);
  const Circuit& c = spec.circuit;
  const auto chain = spec.chain();
  const auto margins = training_margins(chain, c);
  const double Delta = a.Delta > 0.0 ? a.Delta : margins.delta;
  const double eps = a.epsilon > 0.0 ? a.epsilon : margins.epsilon;
  if (!(Delta > 0.0)) throw LcaViolated("no positive Delta for this distribution; pass --Delta");
  const TheoremVariant variant = a.variant == "thm1" ? TheoremVariant::kThm1 : TheoremVariant::kThm2;
  if (a.variant != "thm1" && a.variant != "thm2") throw ParseError("--variant must be thm1 or thm2");
  auto h = derive_hyperparams(c.inputs(), c.depth(), a.delta_fail, Delta, eps, variant);
  TrainConfig cfg = train_config_from_json(run.section("train"), h.cfg);
  cfg.seed = derive_seed(g.seed, 2);
  cfg.threads = g.threads;
  if (a.k) cfg.k = a.k;
  if (a.eta > 0.0) cfg.eta = a.eta;
  if (a.lambda >= 0.0) {
    cfg.lambda = a.lambda;
    cfg.auto_lambda = false;
  }
  if (a.T) cfg.T = a.T;
  if (a.step_cap) cfg.step_cap = a.step_cap;
  if (a.per_layer_eta) cfg.per_layer_eta = true;
  if (a.no_fast_forward) cfg.fast_forward = false;

  DiscreteDistribution data = chain.back();
  if (a.mode == "sample") {
    cfg.source = GradientSource::kSample;
    Rng rng(derive_seed(g.seed, 1));
    std::vector<LabeledSample> S;
    S.reserve(a.samples);
    for (std::size_t i = 0; i < a.samples; ++i) S.push_back(spec.sample(rng));
    data = DiscreteDistribution::empirical(S);
    run.config("samples", a.samples);
    run.seed("sample", derive_seed(g.seed, 1));
  } else if (a.mode == "population") {
    cfg.source = GradientSource::kPopulation;
  } else {
    throw ParseError("--mode must be population or sample");
  }
  run.seed("seed", g.seed);
  run.seed("init", cfg.seed);
  run.config("distribution", to_json(spec));
  json train_echo = to_json(cfg);
  train_echo.erase("threads");
  run.config("train", train_echo);
  run.config("delta_fail", a.delta_fail);
  run.config("Delta", Delta);
  run.config("epsilon", eps);
  run.config("variant", a.variant);
  run.config("alignment", a.alignment);

  std::optional<AlignmentCheck> al;
  if (a.alignment) al = AlignmentCheck{c, chain, Delta, eps};
  const auto res = train_layerwise(data, cfg, al ? &*al : nullptr);
  const auto rec = verify_recovery(res.net, c, chain.back(), res.labels_flipped);

  run.write("checkpoint.json", net_to_text(res.net));
  run.write("loss_curves.csv", loss_curves_csv(res));
  json report{{"train", to_json(res)},
              {"recovery", to_json(rec)},
              {"theorem", {{"T", h.T_exact}, {"sample_size", h.sample_size}}}};
  run.write("train_report.json", report.dump(2) + "\n");
  std::cout << "error_rate " << rec.error_rate << " exact " << (rec.exact ? "true" : "false") << "\n";
  run.finish("ok");
  return kOk;
}

struct BaselineArgs {
  CLI::App* cmd = nullptr;
  double p = 0.6;
  std::size_t n = 128, k = 5, h = 128, batch = 50, test_size = 10000, train_size = 0;
  std::uint64_t iters = 10000, eval_every = 1000;
  std::string loss = "hinge";
  double alpha = 1e-3;
};

int train_baseline_cmd(const Globals& g, const BaselineArgs& a) {
  Run run("train baseline", g);
  Figure1Config cfg = figure1_config_from_json(run.section("baseline"));
  auto given = [&](const char* name) { return a.cmd->count(name) > 0; };
  if (given("--p")) cfg.p = a.p;
  if (given("--n")) cfg.n = a.n;
  if (given("--k")) cfg.k = a.k;
  if (given("--hidden")) cfg.h = a.h;
  if (given("--batch")) cfg.batch = a.batch;
  if (given("--iters")) cfg.iters = a.iters;
  if (given("--eval-every")) cfg.eval_every = a.eval_every;
  if (given("--test-size")) cfg.test_size = a.test_size;
  if (given("--train-size")) cfg.train_size = a.train_size;
  if (given("--alpha")) cfg.alpha = a.alpha;
  if (given("--loss")) cfg = figure1_config_from_json(json{{"loss", a.loss}}, cfg);
  cfg.seed = g.seed;
  run.config("baseline", to_json(cfg));
  run.seed("seed", g.seed);
  const auto r = run_figure1(cfg);
  const std::string csv = figure1_csv(r);
  run.write("curve.csv", csv);
  json curve = json::array();
  for (const auto& pt : r.curve) curve.push_back({{"iteration", pt.iteration}, {"accuracy", pt.accuracy}});
  run.write("baseline_report.json",
            json{{"config", to_json(cfg)}, {"relevant", r.relevant}, {"test_label_mean", r.test_label_mean},
                 {"curve", curve}}
                    .dump(2) +
                "\n");
  std::cout << csv;
  run.finish("ok");
  return kOk;
}

// ---------------------------------------------------------------- verify

int verify_lemmas(const Globals& g, const std::string& scope, int depth, bool controls) {
  Run run("verify lemmas", g);
  SuiteOptions o;
  const json sec = run.section("suite");
  if (sec.contains("lemma1_instances")) o.lemma1_instances = sec["lemma1_instances"].get<std::size_t>();
  if (sec.contains("lemma2_instances")) o.lemma2_instances = sec["lemma2_instances"].get<std::size_t>();
  if (sec.contains("lemma3_instances")) o.lemma3_instances = sec["lemma3_instances"].get<std::size_t>();
  if (sec.contains("generative_instances")) o.generative_instances = sec["generative_instances"].get<std::size_t>();
  if (sec.contains("rank_instances")) o.rank_instances = sec["rank_instances"].get<std::size_t>();
  o.scope = scope;
  o.max_depth = depth;
  o.seed = g.seed;
  o.threads = g.threads;
  o.negative_controls = controls;
  run.config("suite", {{"scope", o.scope},
                       {"depth", o.max_depth},
                       {"negative_controls", o.negative_controls},
                       {"lemma1_instances", o.lemma1_instances},
                       {"lemma2_instances", o.lemma2_instances},
                       {"lemma3_instances", o.lemma3_instances},
                       {"generative_instances", o.generative_instances},
                       {"rank_instances", o.rank_instances}});
  run.seed("seed", g.seed);
  const auto v = run_lemma_suite(o);
  const std::string text = to_json(v).dump(2) + "\n";
  run.write("verdicts.json", text);
  std::cout << text;
  const bool ok = all_pass(v);
  run.finish(ok ? "ok" : "verification_failed");
  return ok ? kOk : kVerifyFailed;
}

int verify_recovery_cmd(const Globals& g, const std::string& checkpoint, const std::string& spec_path,
                        const std::string& flipped) {
  Run run("verify recovery", g);
  run.input(checkpoint);
  run.input(spec_path);
  const LayeredNet net = read_net_file(checkpoint);
  const DistSpec spec = read_dist_spec(spec_path);
  std::optional<bool> flip;
  if (flipped == "true") flip = true;
  else if (flipped == "false") flip = false;
  else if (flipped != "auto") throw ParseError("--labels-flipped must be auto, true or false");
  run.config("labels_flipped", flipped);
  const auto chain = spec.chain();
  const auto rec = verify_recovery(net, spec.circuit, chain.back(), flip);
  const std::string text = to_json(rec).dump(2) + "\n";
  run.write("recovery.json", text);
  std::cout << text;
  run.finish(rec.exact ? "ok" : "verification_failed");
  return rec.exact ? kOk : kVerifyFailed;
}

struct RankArgs {
  std::string net_path;
  std::size_t count = 200;
  int max_n = 5;
  std::size_t max_k = 16;
  int max_B = 3;
};

int verify_rankbound(const Globals& g, const RankArgs& a) {
  Run run("verify rankbound", g);
  json reports = json::array();
  bool ok = true;
  if (!a.net_path.empty()) {
    run.input(a.net_path);
    const auto r = rank_bound_check(quantized_net_from_json(read_json_file(a.net_path)));
    ok = r.pass;
    reports.push_back(to_json(r));
  } else {
    if (a.max_n < 1 || a.max_k < 1 || a.max_B < 1) throw InvalidRange("--max-n, --max-k and --max-B must be >= 1");
    run.config("count", a.count);
    run.config("max_n", a.max_n);
    run.config("max_k", a.max_k);
    run.config("max_B", a.max_B);
    run.seed("seed", g.seed);
    Rng rng(g.seed);
    for (std::size_t t = 0; t < a.count; ++t) {
      const int np = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(a.max_n)));
      const std::size_t k = 1 + rng.below(a.max_k);
      const int B = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(a.max_B)));
      const auto r = rank_bound_check(random_quantized_net(np, k, B, rng));
      ok = ok && r.pass;
      json j = to_json(r);
      j.erase("units");
      reports.push_back(std::move(j));
    }
  }
  run.write("rankbound.json", reports.dump(2) + "\n");
  std::size_t passed = 0;
  for (const auto& r : reports) passed += r["pass"].get<bool>() ? 1 : 0;
  std::cout << passed << "/" << reports.size() << " pass\n";
  run.finish(ok ? "ok" : "verification_failed");
  return ok ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------- report

int report_render(const Globals& g, const std::string& input) {
  Run run("report render", g);
  run.input(input);
  const json j = read_json_file(input);
  std::string csv;
  char buf[160];
  if (j.is_array()) {
    csv = "lemma,margin,pass\n";
    for (const auto& v : j) {
      std::snprintf(buf, sizeof buf, "%s,%.17g,%d\n", v.at("lemma").get<std::string>().c_str(),
                    v.at("margin").get<double>(), v.at("pass").get<bool>() ? 1 : 0);
      csv += buf;
    }
  } else if (j.contains("curve")) {
    csv = "iteration,accuracy\n";
    for (const auto& pt : j["curve"]) {
      std::snprintf(buf, sizeof buf, "%llu,%.4f\n", pt.at("iteration").get<unsigned long long>(),
                    pt.at("accuracy").get<double>());
      csv += buf;
    }
  } else if (j.contains("train")) {
    csv = "layer,steps,stop_reason,gates_saturated,alignment_violations\n";
    for (const auto& l : j["train"].at("layers")) {
      const auto viol = l.contains("alignment") ? l["alignment"].at("violations").get<long long>() : -1;
      std::snprintf(buf, sizeof buf, "%d,%llu,%s,%zu,%lld\n", l.at("layer").get<int>(),
                    l.at("steps").get<unsigned long long>(), l.at("stop_reason").get<std::string>().c_str(),
                    l.at("gates_saturated").get<std::size_t>(), viol);
      csv += buf;
    }
  } else {
    throw ParseError("report render understands verdicts.json, baseline_report.json and train_report.json");
  }
  run.write("report.csv", csv);
  std::cout << csv;
  run.finish("ok");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn tree-structured Boolean circuits with layerwise gradient descent"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--config", g.config_path, "JSON config with sections train, baseline, suite")
      ->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::function<int()> action;

  auto* circuit = app.add_subcommand("circuit", "Build, evaluate and analyze circuits")->require_subcommand(1);
  circuit->fallthrough();
  CircuitGenArgs gen;
  auto* c_gen = circuit->add_subcommand("gen", "Write a circuit file");
  c_gen->fallthrough();
  c_gen->add_option("--kind", gen.kind, "random | parity | fm")->capture_default_str();
  c_gen->add_option("--depth", gen.depth, "Depth d (n = 2^d)")->capture_default_str();
  c_gen->add_option("--relevant", gen.relevant, "Parity index set, comma separated, 0-based");
  c_gen->add_option("--m", gen.m, "f_m parameter")->capture_default_str();
  c_gen->add_option("--gates", gen.gates, "Random gate set: and-or | all")->capture_default_str();
  c_gen->callback([&] { action = [&] { return circuit_gen(g, gen); }; });

  std::string circuit_path, x_bits;
  auto* c_eval = circuit->add_subcommand("eval", "Evaluate a circuit on one input");
  c_eval->fallthrough();
  c_eval->add_option("--circuit", circuit_path, "Circuit file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--x", x_bits, "Input as +-+- or 1,-1,...")->required();
  c_eval->callback([&] { action = [&] { return circuit_eval(g, circuit_path, x_bits); }; });

  std::string inf_mode = "analytic", inf_reading = "whole";
  std::uint64_t inf_samples = 100000;
  auto* c_inf = circuit->add_subcommand("influence", "Influence of every value at every level");
  c_inf->fallthrough();
  c_inf->add_option("--circuit", circuit_path, "Circuit file")->required()->check(CLI::ExistingFile);
  c_inf->add_option("--mode", inf_mode, "exact | analytic | montecarlo")->capture_default_str();
  c_inf->add_option("--reading", inf_reading, "whole | single")->capture_default_str();
  c_inf->add_option("--samples", inf_samples, "Monte Carlo samples")->capture_default_str();
  c_inf->callback([&] { action = [&] { return circuit_influence(g, circuit_path, inf_mode, inf_reading, inf_samples); }; });

  auto* dist = app.add_subcommand("dist", "Sample, enumerate and certify distributions")->require_subcommand(1);
  dist->fallthrough();
  std::string spec_path;
  std::size_t count = 1000;
  auto* d_sample = dist->add_subcommand("sample", "Write samples.csv");
  d_sample->fallthrough();
  d_sample->add_option("--dist", spec_path, "Distribution spec")->required()->check(CLI::ExistingFile);
  d_sample->add_option("--count", count, "Number of samples")->capture_default_str();
  d_sample->callback([&] { action = [&] { return dist_sample(g, spec_path, count); }; });

  int level = -1;
  auto* d_enum = dist->add_subcommand("enumerate", "Write the exact law D^(level)");
  d_enum->fallthrough();
  d_enum->add_option("--dist", spec_path, "Distribution spec")->required()->check(CLI::ExistingFile);
  d_enum->add_option("--level", level, "Level (default d)");
  d_enum->callback([&] { action = [&] { return dist_enumerate(g, spec_path, level); }; });

  double cert_delta = 0.0;
  auto* d_cert = dist->add_subcommand("certify", "Properties 1-3 and, with --delta, LCA");
  d_cert->fallthrough();
  d_cert->add_option("--dist", spec_path, "Distribution spec")->required()->check(CLI::ExistingFile);
  d_cert->add_option("--delta", cert_delta, "Check LCA at this Delta");
  d_cert->callback([&] { action = [&] { return dist_certify(g, spec_path, cert_delta); }; });

  auto* train = app.add_subcommand("train", "Layerwise training and the baseline")->require_subcommand(1);
  train->fallthrough();
  LayerwiseArgs lw;
  auto* t_lw = train->add_subcommand("layerwise", "Layerwise gradient descent with recovery check");
  t_lw->fallthrough();
  lw.cmd = t_lw;
  t_lw->add_option("--dist", lw.dist, "Distribution spec")->required()->check(CLI::ExistingFile);
  t_lw->add_option("--mode", lw.mode, "population | sample")->capture_default_str();
  t_lw->add_option("--samples", lw.samples, "Sample size in sample mode")->capture_default_str();
  t_lw->add_option("--delta-fail", lw.delta_fail, "Failure probability for k")->capture_default_str();
  t_lw->add_option("--Delta", lw.Delta, "Override the certified Delta");
  t_lw->add_option("--epsilon", lw.epsilon, "Override the certified epsilon");
  t_lw->add_option("--variant", lw.variant, "thm1 | thm2")->capture_default_str();
  t_lw->add_flag("--alignment", lw.alignment, "Run the gradient-alignment diagnostic");
  t_lw->add_option("--width", lw.k, "Override k");
  t_lw->add_option("--eta", lw.eta, "Override eta");
  t_lw->add_option("--lambda", lw.lambda, "Fixed lambda instead of E[y] + Delta/4");
  t_lw->add_option("--T", lw.T, "Override T");
  t_lw->add_option("--step-cap", lw.step_cap, "Steps per layer cap");
  t_lw->add_flag("--per-layer-eta", lw.per_layer_eta, "Use eta * 2^i at layer i");
  t_lw->add_flag("--no-fast-forward", lw.no_fast_forward, "Step one gradient at a time");
  t_lw->callback([&] { action = [&] { return train_layerwise_cmd(g, lw); }; });

  BaselineArgs bl;
  auto* t_bl = train->add_subcommand("baseline", "Depth-two ReLU network with Adam on k-parity");
  t_bl->fallthrough();
  bl.cmd = t_bl;
  t_bl->add_option("--p", bl.p, "P[x_j = +1]")->capture_default_str();
  t_bl->add_option("--n", bl.n, "Input dimension")->capture_default_str();
  t_bl->add_option("--k", bl.k, "Parity size")->capture_default_str();
  t_bl->add_option("--hidden", bl.h, "Hidden width")->capture_default_str();
  t_bl->add_option("--batch", bl.batch, "Batch size")->capture_default_str();
  t_bl->add_option("--iters", bl.iters, "Iterations")->capture_default_str();
  t_bl->add_option("--eval-every", bl.eval_every, "Evaluation period")->capture_default_str();
  t_bl->add_option("--test-size", bl.test_size, "Test set size")->capture_default_str();
  t_bl->add_option("--train-size", bl.train_size, "Fixed training set size, 0 for online")->capture_default_str();
  t_bl->add_option("--loss", bl.loss, "hinge | logistic")->capture_default_str();
  t_bl->add_option("--alpha", bl.alpha, "Adam step size")->capture_default_str();
  t_bl->callback([&] { action = [&] { return train_baseline_cmd(g, bl); }; });

  auto* verify = app.add_subcommand("verify", "Lemma suite, recovery and rank bound")->require_subcommand(1);
  verify->fallthrough();
  std::string scope = "all";
  int suite_depth = 3;
  bool no_controls = false;
  auto* v_lem = verify->add_subcommand("lemmas", "Run the lemma suite");
  v_lem->fallthrough();
  v_lem->add_option("--scope", scope, "all | lemma1..lemma5 | alignment | lemma8")->capture_default_str();
  v_lem->add_option("--depth", suite_depth, "Largest circuit depth (1..4)")->capture_default_str();
  v_lem->add_flag("--no-controls", no_controls, "Skip the negative controls");
  v_lem->callback([&] { action = [&] { return verify_lemmas(g, scope, suite_depth, !no_controls); }; });

  std::string checkpoint, flipped = "auto";
  auto* v_rec = verify->add_subcommand("recovery", "Check a checkpoint against its circuit");
  v_rec->fallthrough();
  v_rec->add_option("--checkpoint", checkpoint, "Network checkpoint")->required()->check(CLI::ExistingFile);
  v_rec->add_option("--dist", spec_path, "Distribution spec")->required()->check(CLI::ExistingFile);
  v_rec->add_option("--labels-flipped", flipped, "auto | true | false")->capture_default_str();
  v_rec->callback([&] { action = [&] { return verify_recovery_cmd(g, checkpoint, spec_path, flipped); }; });

  RankArgs ra;
  auto* v_rank = verify->add_subcommand("rankbound", "Rank bound for quantized shallow nets");
  v_rank->fallthrough();
  v_rank->add_option("--net", ra.net_path, "Net JSON {n_half, B, w, v, b, u, activation}")->check(CLI::ExistingFile);
  v_rank->add_option("--count", ra.count, "Random nets")->capture_default_str();
  v_rank->add_option("--max-n", ra.max_n, "Largest n'")->capture_default_str();
  v_rank->add_option("--max-k", ra.max_k, "Largest k")->capture_default_str();
  v_rank->add_option("--max-B", ra.max_B, "Largest B")->capture_default_str();
  v_rank->callback([&] { action = [&] { return verify_rankbound(g, ra); }; });

  std::string report_input;
  auto* report = app.add_subcommand("report", "Render reports as CSV")->require_subcommand(1);
  report->fallthrough();
  auto* r_render = report->add_subcommand("render", "verdicts / baseline / train report to CSV");
  r_render->fallthrough();
  r_render->add_option("--input", report_input, "Report JSON")->required()->check(CLI::ExistingFile);
  r_render->callback([&] { action = [&] { return report_render(g, report_input); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  try {
    return action();
  } catch (const treelearn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
