#include "dyged/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "dyged/error.hpp"

namespace dyged {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::ct: return "CT";
    case Variant::nl: return "NL";
    case Variant::na: return "NA";
    case Variant::mean_pool: return "mean";
    case Variant::max_pool: return "max";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "full") return Variant::full;
  if (lower == "ct") return Variant::ct;
  if (lower == "nl") return Variant::nl;
  if (lower == "na") return Variant::na;
  if (lower == "mean" || lower == "mean-pool") return Variant::mean_pool;
  if (lower == "max" || lower == "max-pool") return Variant::max_pool;
  fail(ErrorKind::config,
       "unknown variant '" + std::string(text) + "' (valid: full, CT, NL, NA, mean, max)");
}

bool uses_node_attention(Variant v) { return v != Variant::mean_pool && v != Variant::max_pool; }
bool uses_lstm(Variant v) { return v != Variant::ct && v != Variant::nl; }
bool uses_time_attention(Variant v) { return v != Variant::ct && v != Variant::na; }

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) fail(ErrorKind::config, std::string(name) + " must be positive");
  };
  positive(d_in, "d_in");
  positive(hidden, "hidden (h')");
  positive(embed, "embed (h)");
  positive(mlp_layers, "mlp_layers");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::config, "dropout must lie in [0,1)");
}

std::vector<Matrix*> ModelParams::tensors() {
  std::vector<Matrix*> out;
  for_each_param(config.variant, tree, [&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> ModelParams::tensors() const {
  std::vector<const Matrix*> out;
  for_each_param(config.variant, tree, [&](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> out;
  for_each_param(config.variant, tree, [&](const std::string& name, const Matrix&) { out.push_back(name); });
  return out;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (!(a.config == b.config)) return false;
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!(*ta[i] == *tb[i])) return false;
  }
  return true;
}

std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> param_shapes(
    const ModelConfig& c) {
  c.validate();
  ParamTree<std::pair<std::size_t, std::size_t>> shapes;
  const std::size_t h = c.embed;
  shapes.gcn.w0 = {c.d_in, c.hidden};
  shapes.gcn.w1 = {c.hidden, h};
  shapes.v_att.phi = shapes.t_att.phi = {h, h};
  shapes.v_att.w = shapes.t_att.w = {1, h};
  auto& l = shapes.lstm;
  l.w_i = l.w_f = l.w_o = l.w_c = l.u_i = l.u_f = l.u_o = l.u_c = {h, h};
  l.b_i = l.b_f = l.b_o = l.b_c = {1, h};
  std::size_t width = c.mlp_input_width();
  for (std::size_t i = 0; i < c.mlp_layers; ++i) {
    const std::size_t out = i + 1 == c.mlp_layers ? 2 : h;
    shapes.mlp.weights.push_back({width, out});
    shapes.mlp.biases.push_back({1, out});
    width = out;
  }
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> out;
  for_each_param(c.variant, shapes,
                 [&](const std::string& name, const std::pair<std::size_t, std::size_t>& s) {
                   out.emplace_back(name, s);
                 });
  return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.tree.mlp.weights.resize(config.mlp_layers);
  p.tree.mlp.biases.resize(config.mlp_layers);
  const auto shapes = param_shapes(config);

  std::mt19937_64 rng(seed);
  std::size_t idx = 0;
  for_each_param(config.variant, p.tree, [&](const std::string& name, Matrix& m) {
    const auto [rows, cols] = shapes[idx++].second;
    m = Matrix(rows, cols);
    const bool is_bias = name.starts_with("lstm.b_") || (name.starts_with("mlp.") && name.ends_with(".b"));
    if (is_bias) {
      if (name == "lstm.b_f") std::fill(m.data().begin(), m.data().end(), 1.0);
      return;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : m.data()) v = dist(rng);
  });
  return p;
}

BoundParams bind(ad::Tape& tape, const ModelParams& params) {
  BoundParams bound;
  bound.mlp.weights.resize(params.tree.mlp.weights.size());
  bound.mlp.biases.resize(params.tree.mlp.biases.size());
  std::vector<ad::Var*> slots;
  for_each_param(params.config.variant, bound,
                 [&](const std::string&, ad::Var& v) { slots.push_back(&v); });
  std::size_t i = 0;
  for_each_param(params.config.variant, params.tree, [&](const std::string& name, const Matrix& m) {
    *slots[i++] = tape.leaf(m, name);
  });
  return bound;
}

namespace {

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64& rng) {
  Matrix mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (auto& v : mask.data()) v = keep(rng) ? scale : 0.0;
  return mask;
}

std::vector<double> row_values(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

}  // namespace

ad::Var gcn_forward(const std::shared_ptr<const SparseMatrix>& a_hat, ad::Var x,
                    const GcnParamsT<ad::Var>& p, double dropout, std::mt19937_64* rng) {
  ad::Var hidden = ad::relu(ad::spmm(a_hat, ad::matmul(x, p.w0)));
  if (rng != nullptr && dropout > 0.0) {
    const Matrix& hv = hidden.value();
    hidden = ad::dropout(hidden, dropout_mask(hv.rows(), hv.cols(), dropout, *rng));
  }
  return ad::relu(ad::spmm(a_hat, ad::matmul(hidden, p.w1)));
}

Pooled attention_pool(ad::Var z, const AttentionParamsT<ad::Var>& p) {
  if (z.value().rows() == 0) fail(ErrorKind::dimension, "attention pooling over zero rows");
  ad::Var scores = ad::matmul(p.w, ad::tanh(ad::matmul(p.phi, ad::transpose(z))));
  ad::Var alpha = ad::softmax_row(scores);
  return Pooled{ad::matmul(alpha, z), alpha};
}

ad::Var pool_variant(ad::Var z, PoolKind kind) {
  return kind == PoolKind::mean ? ad::mean_rows(z) : ad::max_rows(z);
}

LstmState lstm_step(const LstmState& prev, ad::Var z, const LstmParamsT<ad::Var>& p) {
  auto gate_input = [&](ad::Var w, ad::Var u, ad::Var b) {
    return ad::add_row(ad::add(ad::matmul(z, w), ad::matmul(prev.h, u)), b);
  };
  ad::Var i = ad::sigmoid(gate_input(p.w_i, p.u_i, p.b_i));
  ad::Var f = ad::sigmoid(gate_input(p.w_f, p.u_f, p.b_f));
  ad::Var o = ad::sigmoid(gate_input(p.w_o, p.u_o, p.b_o));
  ad::Var g = ad::tanh(gate_input(p.w_c, p.u_c, p.b_c));
  ad::Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
  ad::Var h = ad::mul(o, ad::tanh(c));
  return LstmState{h, c};
}

ad::Var mlp_forward(ad::Var in, const MlpParamsT<ad::Var>& p, double dropout, std::mt19937_64* rng) {
  ad::Var x = in;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    x = ad::add_row(ad::matmul(x, p.weights[i]), p.biases[i]);
    if (i + 1 < p.weights.size()) {
      x = ad::relu(x);
      if (rng != nullptr && dropout > 0.0) {
        x = ad::dropout(x, dropout_mask(x.value().rows(), x.value().cols(), dropout, *rng));
      }
    }
  }
  return x;
}

ad::Var forward_on_tape(ad::Tape& tape, const BoundParams& bound, const ModelConfig& config,
                        std::span<const PreparedSnapshot> window, Mode mode, std::mt19937_64* rng,
                        ForwardDiagnostics* diagnostics) {
  if (window.size() != config.k + 1) {
    fail(ErrorKind::config, "window holds " + std::to_string(window.size()) +
                                " snapshots but the model expects k+1=" + std::to_string(config.k + 1));
  }
  if (mode == Mode::train && rng == nullptr && config.dropout > 0.0) {
    fail(ErrorKind::contract, "train mode needs an rng for dropout masks");
  }
  std::mt19937_64* drop_rng = mode == Mode::train ? rng : nullptr;
  const Variant variant = config.variant;

  std::vector<ad::Var> pooled;
  pooled.reserve(window.size());
  for (const auto& snap : window) {
    if (snap.features.cols() != config.d_in) {
      fail(ErrorKind::dimension, "snapshot features have d=" + std::to_string(snap.features.cols()) +
                                     " but the model expects d_in=" + std::to_string(config.d_in));
    }
    ad::Var x = tape.constant(snap.features);
    ad::Var z = gcn_forward(snap.a_hat, x, bound.gcn, config.dropout, drop_rng);
    if (uses_node_attention(variant)) {
      Pooled p = v_att_pool(z, bound.v_att);
      pooled.push_back(p.pooled);
      if (diagnostics) diagnostics->node_attention.push_back(row_values(p.attention.value()));
    } else {
      pooled.push_back(pool_variant(z, variant == Variant::mean_pool ? PoolKind::mean : PoolKind::max));
    }
  }

  std::vector<ad::Var> dynamic;
  if (uses_lstm(variant)) {
    const std::size_t h = config.embed;
    LstmState state{tape.constant(Matrix(1, h)), tape.constant(Matrix(1, h))};
    for (ad::Var z : pooled) {
      state = lstm_step(state, z, bound.lstm);
      dynamic.push_back(state.h);
    }
  } else {
    dynamic = pooled;
  }

  ad::Var embedding;
  if (variant == Variant::ct) {
    embedding = ad::concat_cols(dynamic);
  } else if (uses_time_attention(variant)) {
    Pooled p = t_att(ad::concat_rows(dynamic), bound.t_att);
    embedding = p.pooled;
    if (diagnostics) diagnostics->time_attention = row_values(p.attention.value());
  } else {
    embedding = dynamic.back();
  }
  if (diagnostics) diagnostics->embedding = row_values(embedding.value());

  return mlp_forward(embedding, bound.mlp, config.dropout, drop_rng);
}

double ForwardResult::event_probability() const {
  const double hi = std::max(scores[0], scores[1]);
  const double e0 = std::exp(scores[0] - hi);
  const double e1 = std::exp(scores[1] - hi);
  return e0 / (e0 + e1);
}

ForwardResult forward(std::span<const PreparedSnapshot> window, const ModelParams& params, Mode mode,
                      std::mt19937_64* rng) {
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  ForwardResult result;
  ad::Var out = forward_on_tape(tape, bound, params.config, window, mode, rng, &result.diagnostics);
  result.scores = {out.value()[0], out.value()[1]};
  return result;
}

ForwardResult forward(const SnapshotWindow& window, std::size_t n, FeatureMode features,
                      const ModelParams& params, Mode mode, std::mt19937_64* rng) {
  std::vector<PreparedSnapshot> prepared;
  prepared.reserve(window.snapshots.size());
  for (const auto& s : window.snapshots) prepared.push_back(prepare_snapshot(s, n, features));
  return forward(prepared, params, mode, rng);
}

double loss(std::span<const std::array<double, 2>> scores, std::span<const int> labels,
            double positive_ratio) {
  if (!(positive_ratio > 0.0 && positive_ratio < 1.0)) {
    fail(ErrorKind::config, "positive ratio x=" + std::to_string(positive_ratio) + " must lie in (0,1)");
  }
  if (scores.size() != labels.size() || scores.empty()) {
    fail(ErrorKind::dimension, "loss: " + std::to_string(scores.size()) + " score rows vs " +
                                   std::to_string(labels.size()) + " labels");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    const double hi = std::max(scores[r][0], scores[r][1]);
    const double lse = hi + std::log(std::exp(scores[r][0] - hi) + std::exp(scores[r][1] - hi));
    const double p_event = std::max(std::exp(scores[r][0] - lse), ad::kProbFloor);
    const double p_none = std::max(std::exp(scores[r][1] - lse), ad::kProbFloor);
    total -= (1.0 - positive_ratio) * labels[r] * std::log(p_event) +
             positive_ratio * (1 - labels[r]) * std::log(p_none);
  }
  return total / static_cast<double>(scores.size());
}

}  // namespace dyged
