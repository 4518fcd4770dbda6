#include "treelearn/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "treelearn/errors.hpp"
#include "treelearn/random.hpp"

namespace treelearn {

Mlp2 Mlp2::zeros_like() const {
  Mlp2 z;
  z.W1 = Eigen::MatrixXd::Zero(W1.rows(), W1.cols());
  z.b1 = Eigen::VectorXd::Zero(b1.size());
  z.W2 = Eigen::VectorXd::Zero(W2.size());
  z.b2 = 0.0;
  return z;
}

Mlp2 init_mlp(std::size_t n, std::size_t h, std::uint64_t seed) {
  if (n == 0 || h == 0) throw DimensionMismatch("MLP needs n >= 1 and h >= 1");
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(n));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  Mlp2 m;
  m.W1.resize(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(n));
  m.b1.resize(static_cast<Eigen::Index>(h));
  m.W2.resize(static_cast<Eigen::Index>(h));
  for (Eigen::Index r = 0; r < m.W1.rows(); ++r)
    for (Eigen::Index c = 0; c < m.W1.cols(); ++c) m.W1(r, c) = rng.uniform(-s1, s1);
  for (Eigen::Index r = 0; r < m.b1.size(); ++r) m.b1(r) = rng.uniform(-s1, s1);
  for (Eigen::Index r = 0; r < m.W2.size(); ++r) m.W2(r) = rng.uniform(-s2, s2);
  m.b2 = rng.uniform(-s2, s2);
  return m;
}

double mlp_forward(const Mlp2& m, std::span<const double> x) {
  if (x.size() != m.inputs()) {
    throw DimensionMismatch("MLP expects " + std::to_string(m.inputs()) + " inputs, got " +
                            std::to_string(x.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd pre = m.W1 * xv + m.b1;
  return m.W2.dot(pre.cwiseMax(0.0)) + m.b2;
}

std::string to_string(BaselineLoss l) { return l == BaselineLoss::kHinge ? "hinge" : "logistic"; }

double mlp_loss(const Mlp2& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, BaselineLoss loss,
                Mlp2* grad) {
  const Eigen::Index b = X.rows();
  if (b == 0) throw EmptyBatch("empty batch");
  if (y.size() != b) throw DimensionMismatch("labels and inputs differ in length");
  if (static_cast<std::size_t>(X.cols()) != m.inputs()) throw DimensionMismatch("input width mismatch");
  // Rows are samples: pre is b x h.
  Eigen::MatrixXd pre = X * m.W1.transpose();
  pre.rowwise() += m.b1.transpose();
  const Eigen::MatrixXd act = pre.cwiseMax(0.0);
  const Eigen::VectorXd out = (act * m.W2).array() + m.b2;
  Eigen::VectorXd dout(b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double margin = y(i) * out(i);
    if (loss == BaselineLoss::kHinge) {
      total += std::max(1.0 - margin, 0.0);
      dout(i) = margin < 1.0 ? -y(i) : 0.0;
    } else {
      // log(1 + exp(-margin)) computed stably.
      total += margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
      dout(i) = -y(i) / (1.0 + std::exp(margin));
    }
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  if (grad) {
    dout *= inv_b;
    grad->b2 = dout.sum();
    grad->W2 = act.transpose() * dout;
    Eigen::MatrixXd dpre = dout * m.W2.transpose();
    dpre = dpre.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    grad->W1 = dpre.transpose() * X;
    grad->b1 = dpre.colwise().sum().transpose();
  }
  return total * inv_b;
}

AdamState make_adam(const Mlp2& params, double alpha) {
  AdamState s;
  s.alpha = alpha;
  s.m1 = params.zeros_like();
  s.m2 = params.zeros_like();
  return s;
}

namespace {

template <typename M>
void adam_update(M& param, const M& g, M& m1, M& m2, double b1, double b2, double lr, double eps) {
  m1 = b1 * m1 + (1.0 - b1) * g;
  m2 = b2 * m2 + (1.0 - b2) * g.cwiseProduct(g);
  param.array() -= lr * m1.array() / (m2.array().sqrt() + eps);
}

}  // namespace

void adam_step(AdamState& s, const Mlp2& g, Mlp2& p) {
  auto same = [](const auto& a, const auto& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (!same(g.W1, p.W1) || !same(g.b1, p.b1) || !same(g.W2, p.W2) || !same(s.m1.W1, p.W1) ||
      !same(s.m1.b1, p.b1) || !same(s.m1.W2, p.W2)) {
    throw ShapeMismatch("Adam state, gradient and parameters differ in shape");
  }
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  // Folding the bias corrections into the step size keeps eps on the corrected scale.
  const double lr = s.alpha * std::sqrt(c2) / c1;
  const double eps = s.eps * std::sqrt(c2);
  adam_update(p.W1, g.W1, s.m1.W1, s.m2.W1, s.beta1, s.beta2, lr, eps);
  adam_update(p.b1, g.b1, s.m1.b1, s.m2.b1, s.beta1, s.beta2, lr, eps);
  adam_update(p.W2, g.W2, s.m1.W2, s.m2.W2, s.beta1, s.beta2, lr, eps);
  s.m1.b2 = s.beta1 * s.m1.b2 + (1.0 - s.beta1) * g.b2;
  s.m2.b2 = s.beta2 * s.m2.b2 + (1.0 - s.beta2) * g.b2 * g.b2;
  p.b2 -= lr * s.m1.b2 / (std::sqrt(s.m2.b2) + eps);
}

nlohmann::json to_json(const Figure1Config& c) {
  return {{"n", c.n},         {"k", c.k},
          {"h", c.h},         {"p", c.p},
          {"iters", c.iters}, {"batch", c.batch},
          {"eval_every", c.eval_every},
          {"test_size", c.test_size},
          {"train_size", c.train_size},
          {"loss", to_string(c.loss)},
          {"alpha", c.alpha}, {"adam_beta1", 0.9},
          {"adam_beta2", 0.999},
          {"adam_eps", 1e-8}, {"seed", c.seed}};
}

Figure1Config figure1_config_from_json(const nlohmann::json& j, Figure1Config c) {
  if (!j.is_object()) throw ParseError("baseline config must be a JSON object");
  try {
    if (j.contains("n")) c.n = j["n"].get<std::size_t>();
    if (j.contains("k")) c.k = j["k"].get<std::size_t>();
    if (j.contains("h")) c.h = j["h"].get<std::size_t>();
    if (j.contains("p")) c.p = j["p"].get<double>();
    if (j.contains("iters")) c.iters = j["iters"].get<std::uint64_t>();
    if (j.contains("batch")) c.batch = j["batch"].get<std::size_t>();
    if (j.contains("eval_every")) c.eval_every = j["eval_every"].get<std::uint64_t>();
    if (j.contains("test_size")) c.test_size = j["test_size"].get<std::size_t>();
    if (j.contains("train_size")) c.train_size = j["train_size"].get<std::size_t>();
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("loss")) {
      const auto s = j["loss"].get<std::string>();
      if (s == "hinge") c.loss = BaselineLoss::kHinge;
      else if (s == "logistic") c.loss = BaselineLoss::kLogistic;
      else throw ParseError("loss must be hinge or logistic");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("baseline config: ") + e.what());
  }
  return c;
}

namespace {

void draw(Rng& rng, const Figure1Config& cfg, const std::vector<std::size_t>& rel, Eigen::MatrixXd& X,
          Eigen::VectorXd& y, std::size_t rows) {
  X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cfg.n));
  y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < cfg.n; ++j) X(r, static_cast<Eigen::Index>(j)) = rng.bernoulli_bit(cfg.p);
    double label = 1.0;
    for (std::size_t j : rel) label *= X(r, static_cast<Eigen::Index>(j));
    y(r) = label;
  }
}

double accuracy(const Mlp2& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::MatrixXd pre = X * m.W1.transpose();
  pre.rowwise() += m.b1.transpose();
  const Eigen::VectorXd out = (pre.cwiseMax(0.0) * m.W2).array() + m.b2;
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pred = out(i) < 0.0 ? -1.0 : 1.0;
    if (pred == y(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

Figure1Result run_figure1(const Figure1Config& cfg) {
  if (!(cfg.p > 0.0 && cfg.p < 1.0)) throw InvalidRange("p must be in (0, 1)");
  if (cfg.k == 0 || cfg.k > cfg.n) throw InvalidRange("k must be in [1, n]");
  if (cfg.batch == 0 || cfg.test_size == 0 || cfg.eval_every == 0) {
    throw InvalidRange("batch, test_size and eval_every must be positive");
  }
  Figure1Result res;
  Rng index_rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> perm(cfg.n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < cfg.k; ++i) {
    std::swap(perm[i], perm[i + index_rng.below(cfg.n - i)]);
  }
  res.relevant.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cfg.k));
  std::sort(res.relevant.begin(), res.relevant.end());

  Mlp2 model = init_mlp(cfg.n, cfg.h, derive_seed(cfg.seed, 2));
  AdamState adam = make_adam(model, cfg.alpha);

  Rng test_rng(derive_seed(cfg.seed, 3));
  Eigen::MatrixXd Xt;
  Eigen::VectorXd yt;
  draw(test_rng, cfg, res.relevant, Xt, yt, cfg.test_size);
  res.test_label_mean = yt.mean();

  Rng train_rng(derive_seed(cfg.seed, 4));
  Eigen::MatrixXd Xtrain;
  Eigen::VectorXd ytrain;
  if (cfg.train_size > 0) draw(train_rng, cfg, res.relevant, Xtrain, ytrain, cfg.train_size);

  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Mlp2 grad = model.zeros_like();
  res.curve.push_back({0, accuracy(model, Xt, yt)});
  for (std::uint64_t it = 1; it <= cfg.iters; ++it) {
    if (cfg.train_size == 0) {
      draw(train_rng, cfg, res.relevant, X, y, cfg.batch);
    } else {
      X.resize(static_cast<Eigen::Index>(cfg.batch), static_cast<Eigen::Index>(cfg.n));
      y.resize(static_cast<Eigen::Index>(cfg.batch));
      for (std::size_t i = 0; i < cfg.batch; ++i) {
        const auto row = static_cast<Eigen::Index>(train_rng.below(cfg.train_size));
        X.row(static_cast<Eigen::Index>(i)) = Xtrain.row(row);
        y(static_cast<Eigen::Index>(i)) = ytrain(row);
      }
    }
    mlp_loss(model, X, y, cfg.loss, &grad);
    adam_step(adam, grad, model);
    if (it % cfg.eval_every == 0 || it == cfg.iters) res.curve.push_back({it, accuracy(model, Xt, yt)});
  }
  return res;
}

std::string figure1_csv(const Figure1Result& r) {
  std::string out = "iteration,accuracy\n";
  char buf[64];
  for (const auto& pt : r.curve) {
    std::snprintf(buf, sizeof buf, "%llu,%.4f\n", static_cast<unsigned long long>(pt.iteration), pt.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace treelearn
