#include "dyged/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dyged/error.hpp"
#include "dyged/graph.hpp"

namespace dyged::gradcheck {

double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor) {
  if (!analytic.same_shape(numeric)) {
    fail(ErrorKind::dimension, "gradcheck: " + analytic.shape_str() + " vs " + numeric.shape_str());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

Matrix numeric_gradient(const std::function<double()>& f, Matrix& param, double step) {
  Matrix grad(param.rows(), param.cols());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + step;
    const double up = f();
    param[i] = saved - step;
    const double down = f();
    param[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

namespace {

DynamicGraph toy_graph(const Options& o, std::mt19937_64& rng) {
  const std::size_t T = o.k + o.windows;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::bernoulli_distribution coin(0.5);

  DynamicGraph g;
  g.n = o.n;
  Matrix x(o.n, o.d);
  for (auto& v : x.data()) v = unit(rng);
  for (std::size_t t = 0; t < T; ++t) {
    Snapshot s;
    s.timestamp = static_cast<std::int64_t>(t);
    s.features = x;
    for (VertexId u = 0; u < o.n; ++u)
      for (VertexId v = u + 1; v < o.n; ++v)
        if (coin(rng)) s.edges.push_back(Edge{u, v, weight(rng)});
    g.snapshots.push_back(std::move(s));
    g.labels.push_back(0);
  }
  // Alternate labels across the windows so both loss terms are exercised.
  for (std::size_t t = o.k; t < T; ++t) g.labels[t] = static_cast<int>((t - o.k) % 2);
  return g;
}

}  // namespace

std::vector<TensorCheck> check_model(const Options& o) {
  if (o.n > 8 || o.embed > 8 || o.hidden > 8) {
    fail(ErrorKind::config, "gradcheck is limited to n <= 8 and h, h' <= 8");
  }
  if (o.windows < 2) fail(ErrorKind::config, "gradcheck needs at least 2 windows");

  std::mt19937_64 rng(o.seed);
  const DynamicGraph g = toy_graph(o, rng);
  const auto prepared = serial::prepare_graph(g, FeatureMode::static_only);
  std::vector<int> labels(g.labels.begin() + static_cast<long>(o.k), g.labels.end());
  const double positive_ratio =
      static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / static_cast<double>(labels.size());

  std::vector<TensorCheck> out;
  for (Variant variant : o.variants) {
    ModelConfig config;
    config.d_in = o.d;
    config.hidden = o.hidden;
    config.embed = o.embed;
    config.k = o.k;
    config.variant = variant;
    ModelParams params = init_params(config, o.seed + 1);
    // Non-zero biases so every bias path is exercised away from symmetric points.
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    for (Matrix* m : params.tensors())
      for (auto& v : m->data()) v += jitter(rng);

    auto build_loss = [&](ad::Tape& tape, const BoundParams& bound) {
      std::vector<ad::Var> rows;
      for (std::size_t w = 0; w < labels.size(); ++w) {
        std::span<const PreparedSnapshot> window(prepared.data() + w, o.k + 1);
        rows.push_back(forward_on_tape(tape, bound, config, window, Mode::eval, nullptr));
      }
      return ad::weighted_xent(ad::concat_rows(rows), labels, positive_ratio);
    };

    ad::Tape tape;
    if (o.corrupt) tape.corrupt_adjoint(*o.corrupt);
    const BoundParams bound = bind(tape, params);
    tape.backward(build_loss(tape, bound));

    std::vector<const ad::Var*> leaves;
    for_each_param(variant, bound, [&](const std::string&, const ad::Var& v) { leaves.push_back(&v); });
    const auto names = params.tensor_names();
    auto tensors = params.tensors();

    auto loss_value = [&]() {
      ad::Tape probe;
      const BoundParams b = bind(probe, params);
      return build_loss(probe, b).value()[0];
    };

    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const Matrix numeric = numeric_gradient(loss_value, *tensors[i], o.step);
      const double err = max_relative_error(leaves[i]->grad(), numeric);
      out.push_back(TensorCheck{variant, names[i], err, err < o.tolerance});
    }
  }
  return out;
}

}  // namespace dyged::gradcheck
