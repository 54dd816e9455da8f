#include "dyged/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dyged/error.hpp"

namespace dyged {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorKind::config, "lr must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::config, "dropout must lie in [0,1)");
  if (batch_size < 1) fail(ErrorKind::config, "batch_size must be >= 1");
  if (epochs < 1) fail(ErrorKind::config, "epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::config, "Adam betas must lie in [0,1)");
  }
  if (!(eps > 0.0)) fail(ErrorKind::config, "Adam eps must be positive");
}

ModelConfig TrainConfig::model_config(std::size_t d_in) const {
  ModelConfig c;
  c.d_in = d_in;
  c.hidden = hidden;
  c.embed = embed;
  c.k = k;
  c.mlp_layers = mlp_layers;
  c.variant = variant;
  c.dropout = dropout;
  c.validate();
  return c;
}

namespace {

std::size_t count_value(const text::KeyValues& kv, const std::string& key) {
  const auto v = text::parse_int(kv.values.at(key), kv.where(key));
  if (v < 0) fail(ErrorKind::config, kv.where(key) + ": '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig parse_experiment_config(const text::KeyValues& kv) {
  ExperimentConfig c;
  TrainConfig& t = c.train;
  for (const auto& [key, value] : kv.values) {
    const auto where = kv.where(key);
    try {
      if (key == "lr") t.lr = text::parse_real(value, where);
      else if (key == "dropout") t.dropout = text::parse_real(value, where);
      else if (key == "batch_size") t.batch_size = count_value(kv, key);
      else if (key == "epochs") t.epochs = count_value(kv, key);
      else if (key == "k") t.k = count_value(kv, key);
      else if (key == "seed") t.seed = static_cast<std::uint64_t>(text::parse_int(value, where));
      else if (key == "variant") t.variant = parse_variant(value);
      else if (key == "features") t.feature_mode = parse_feature_mode(value);
      else if (key == "beta1") t.beta1 = text::parse_real(value, where);
      else if (key == "beta2") t.beta2 = text::parse_real(value, where);
      else if (key == "eps") t.eps = text::parse_real(value, where);
      else if (key == "hidden") t.hidden = count_value(kv, key);
      else if (key == "embed") t.embed = count_value(kv, key);
      else if (key == "mlp_layers") t.mlp_layers = count_value(kv, key);
      else if (key == "folds") c.folds = count_value(kv, key);
      else if (key == "repetitions") c.repetitions = count_value(kv, key);
      else if (key == "jobs") c.jobs = count_value(kv, key);
      else if (key == "dataset") c.dataset = value;
      else fail(ErrorKind::config, where + ": unknown config key '" + key + "'");
    } catch (const Error& e) {
      // Malformed numbers in a config file are configuration errors.
      if (e.kind() == ErrorKind::parse) fail(ErrorKind::config, e.what());
      throw;
    }
  }
  return c;
}

std::string echo_config(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  std::ostringstream os;
  os << "lr=" << text::format_real(t.lr) << '\n'
     << "dropout=" << text::format_real(t.dropout) << '\n'
     << "batch_size=" << t.batch_size << '\n'
     << "epochs=" << t.epochs << '\n'
     << "k=" << t.k << '\n'
     << "seed=" << t.seed << '\n'
     << "variant=" << to_string(t.variant) << '\n'
     << "features=" << to_string(t.feature_mode) << '\n'
     << "beta1=" << text::format_real(t.beta1) << '\n'
     << "beta2=" << text::format_real(t.beta2) << '\n'
     << "eps=" << text::format_real(t.eps) << '\n'
     << "hidden=" << t.hidden << '\n'
     << "embed=" << t.embed << '\n'
     << "mlp_layers=" << t.mlp_layers << '\n'
     << "folds=" << c.folds << '\n'
     << "repetitions=" << c.repetitions << '\n'
     << "jobs=" << c.jobs << '\n';
  if (!c.dataset.empty()) os << "dataset=" << c.dataset << '\n';
  return os.str();
}

std::span<const PreparedSnapshot> Dataset::window(std::size_t t, std::size_t k) const {
  if (t < k || t >= prepared.size()) {
    fail(ErrorKind::config, "window ending at t=" + std::to_string(t) + " with k=" + std::to_string(k) +
                                " is outside T=" + std::to_string(prepared.size()));
  }
  return std::span<const PreparedSnapshot>(prepared).subspan(t - k, k + 1);
}

Dataset make_dataset(DynamicGraph graph, FeatureMode mode) {
  graph.validate();
  Dataset d;
  d.prepared = parallel::prepare_graph(graph, mode);
  d.graph = std::move(graph);
  d.mode = mode;
  return d;
}

AdamState make_adam_state(const ModelParams& params) {
  AdamState s;
  for (const Matrix* m : params.tensors()) {
    s.m.emplace_back(m->rows(), m->cols());
    s.v.emplace_back(m->rows(), m->cols());
  }
  return s;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    fail(ErrorKind::contract, "adam_step: " + std::to_string(params.size()) + " params, " +
                                  std::to_string(grads.size()) + " grads, " +
                                  std::to_string(state.m.size()) + " moments");
  }
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, step);
  const double c2 = 1.0 - std::pow(cfg.beta2, step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    if (!p.same_shape(g) || !p.same_shape(m)) {
      fail(ErrorKind::contract, "adam_step: tensor " + std::to_string(i) + " is " + p.shape_str() +
                                    " but its gradient is " + g.shape_str());
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

WindowGradient window_gradient(const ModelParams& params, std::span<const PreparedSnapshot> window,
                               int label, double positive_ratio, Mode mode, std::mt19937_64* rng) {
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  ad::Var scores = forward_on_tape(tape, bound, params.config, window, mode, rng);
  const int labels[1] = {label};
  ad::Var l = ad::weighted_xent(scores, labels, positive_ratio);
  tape.backward(l);
  WindowGradient out;
  out.loss = l.value()[0];
  for_each_param(params.config.variant, bound,
                 [&](const std::string&, const ad::Var& v) { out.grads.push_back(v.grad()); });
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double positive_ratio_of(const Dataset& data, std::span<const std::size_t> ts) {
  std::size_t pos = 0;
  for (auto t : ts) pos += data.graph.labels.at(t) == 1 ? 1 : 0;
  const double x = ts.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(ts.size());
  if (pos == 0 || pos == ts.size()) {
    fail(ErrorKind::config, "training windows hold a single class (positive ratio x=" +
                                std::to_string(x) + "); need at least one event and one non-event");
  }
  return x;
}

// Runs body(i) for i in [0, count) under OpenMP and rethrows the first failure.
template <class F>
void parallel_for(std::size_t count, F&& body) {
  std::exception_ptr error;
  const long n = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(dyged_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::size_t fold, std::size_t repetition) {
  return splitmix64(splitmix64(seed ^ splitmix64(fold + 1)) ^ splitmix64((repetition + 1) << 20));
}

TrainResult train(const Dataset& data, std::span<const std::size_t> train_t, const TrainConfig& cfg) {
  cfg.validate();
  return train(data, train_t, cfg, init_params(cfg.model_config(data.feature_dim()), cfg.seed));
}

TrainResult train(const Dataset& data, std::span<const std::size_t> train_t, const TrainConfig& cfg,
                  ModelParams init) {
  cfg.validate();
  if (train_t.empty()) fail(ErrorKind::config, "no training windows");
  for (auto t : train_t) data.window(t, cfg.k);
  const double x = positive_ratio_of(data, train_t);

  TrainResult result{std::move(init), {}};
  ModelParams& params = result.params;
  if (params.config.k != cfg.k) fail(ErrorKind::config, "initial params were built for a different k");
  AdamState adam = make_adam_state(params);
  const auto tensors = params.tensors();
  const AdamConfig adam_cfg = cfg.adam();

  std::vector<std::size_t> order(train_t.begin(), train_t.end());
  std::mt19937_64 shuffle_rng(splitmix64(cfg.seed ^ 0x5348554646ULL));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<WindowGradient> parts(count);
      parallel_for(count, [&](std::size_t i) {
        const std::size_t t = order[start + i];
        std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(epoch * 0x100000001ULL + start + i)));
        parts[i] = window_gradient(params, data.window(t, cfg.k), data.graph.labels[t], x, Mode::train, &rng);
      });

      // Batch mean, reduced in batch order so the result is thread-count independent.
      std::vector<Matrix> grads = std::move(parts[0].grads);
      double batch_loss = parts[0].loss;
      for (std::size_t i = 1; i < count; ++i) {
        batch_loss += parts[i].loss;
        for (std::size_t j = 0; j < grads.size(); ++j)
          for (std::size_t e = 0; e < grads[j].size(); ++e) grads[j][e] += parts[i].grads[j][e];
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (auto& g : grads)
        for (auto& v : g.data()) v *= inv;
      adam_step(tensors, grads, adam, adam_cfg);
      epoch_loss += batch_loss * inv;
      ++batches;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
    spdlog::debug("epoch {} loss {:.6f}", epoch, result.loss_trace.back());
  }
  return result;
}

EvalReport evaluate(const ModelParams& params, const Dataset& data, std::span<const std::size_t> ts) {
  const std::size_t k = params.config.k;
  if (data.feature_dim() != params.config.d_in) {
    fail(ErrorKind::dimension, "dataset features have d=" + std::to_string(data.feature_dim()) +
                                   " but the model expects d_in=" + std::to_string(params.config.d_in));
  }
  std::vector<ForwardResult> results(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    results[i] = forward(data.window(ts[i], k), params, Mode::eval);
  });

  EvalReport report;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    auto& diag = results[i].diagnostics;
    report.t.push_back(ts[i]);
    report.scores.push_back(results[i].event_probability());
    report.labels.push_back(data.graph.labels.at(ts[i]));
    report.node_attention.push_back(diag.node_attention.empty() ? std::vector<double>{}
                                                                : std::move(diag.node_attention.back()));
    report.time_attention.push_back(std::move(diag.time_attention));
    report.embeddings.push_back(std::move(diag.embedding));
  }
  const auto positives = std::count(report.labels.begin(), report.labels.end(), 1);
  if (positives > 0 && static_cast<std::size_t>(positives) < report.labels.size()) {
    report.auc = auc(report.scores, report.labels);
  }
  return report;
}

FoldSpec make_folds(std::size_t count, std::size_t p) {
  if (p < 2) fail(ErrorKind::config, "need p >= 2 folds, got p=" + std::to_string(p));
  const std::size_t warmup = count / 2;
  const std::size_t rest = count - warmup;
  if (count < p || rest < p || warmup == 0) {
    fail(ErrorKind::config, "cannot cut " + std::to_string(count) + " windows into p=" + std::to_string(p) +
                                " nested folds (need ceil(T/2) >= p and T >= 2)");
  }
  FoldSpec spec;
  std::size_t begin = warmup;
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t size = rest / p + (i < rest % p ? 1 : 0);
    spec.folds.push_back(Fold{0, begin, begin, begin + size});
    begin += size;
  }
  return spec;
}

ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& config) {
  config.train.validate();
  const std::size_t k = config.train.k;
  if (data.graph.length() <= k) {
    fail(ErrorKind::config, "k=" + std::to_string(k) + " needs more than T=" +
                                std::to_string(data.graph.length()) + " snapshots");
  }
  const std::size_t count = data.graph.length() - k;
  const FoldSpec spec = make_folds(count, config.folds);
  const std::size_t reps = std::max<std::size_t>(config.repetitions, 1);

  ExperimentResult result;
  result.runs.resize(spec.folds.size() * reps);
  std::exception_ptr error;
  const long jobs = static_cast<long>(result.runs.size());
  const int threads = static_cast<int>(std::max<std::size_t>(config.jobs, 1));
  (void)threads;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long job = 0; job < jobs; ++job) {
    const std::size_t fold = static_cast<std::size_t>(job) / reps;
    const std::size_t rep = static_cast<std::size_t>(job) % reps;
    const Fold& f = spec.folds[fold];
    try {
      std::vector<std::size_t> train_t;
      std::vector<std::size_t> test_t;
      for (std::size_t i = f.train_begin; i < f.train_end; ++i) train_t.push_back(k + i);
      for (std::size_t i = f.test_begin; i < f.test_end; ++i) test_t.push_back(k + i);

      TrainConfig cfg = config.train;
      cfg.seed = derive_seed(config.train.seed, fold, rep);
      TrainResult trained = train(data, train_t, cfg);
      FoldRun& run = result.runs[static_cast<std::size_t>(job)];
      run.fold = fold;
      run.repetition = rep;
      run.seed = cfg.seed;
      run.positive_ratio = positive_ratio_of(data, train_t);
      run.loss_trace = std::move(trained.loss_trace);
      run.report = evaluate(trained.params, data, test_t);
    } catch (const Error& e) {
#pragma omp critical(dyged_experiment_error)
      if (!error) {
        error = std::make_exception_ptr(Error(e.kind(), "fold " + std::to_string(fold) + ", repetition " +
                                                            std::to_string(rep) + ": " + e.what()));
      }
    } catch (...) {
#pragma omp critical(dyged_experiment_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  double total = 0.0;
  for (const auto& run : result.runs) {
    if (run.report.auc) {
      total += *run.report.auc;
      ++result.auc_count;
    }
  }
  if (result.auc_count > 0) {
    result.mean_auc = total / static_cast<double>(result.auc_count);
    double var = 0.0;
    for (const auto& run : result.runs) {
      if (run.report.auc) var += (*run.report.auc - result.mean_auc) * (*run.report.auc - result.mean_auc);
    }
    result.stdev_auc = std::sqrt(var / static_cast<double>(result.auc_count));
  }
  return result;
}

}  // namespace dyged
