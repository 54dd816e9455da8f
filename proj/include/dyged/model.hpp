#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dyged/graph.hpp"
#include "dyged/matrix.hpp"
#include "dyged/tape.hpp"

namespace dyged {

/// Architecture variants. CT concatenates pooled embeddings (no LSTM, no
/// t-Att); NL drops the LSTM; NA drops t-Att; mean/max swap v-Att for a
/// fixed pooling but keep LSTM and t-Att.
enum class Variant { full, ct, nl, na, mean_pool, max_pool };

inline constexpr std::array<Variant, 6> kAllVariants = {
    Variant::full, Variant::ct, Variant::nl, Variant::na, Variant::mean_pool, Variant::max_pool};

std::string_view to_string(Variant v);
/// Accepts full, CT, NL, NA, mean, max (case-insensitive). Throws ErrorKind::config.
Variant parse_variant(std::string_view text);

bool uses_node_attention(Variant v);
bool uses_lstm(Variant v);
bool uses_time_attention(Variant v);

struct ModelConfig {
  std::size_t d_in = 0;
  std::size_t hidden = 64;  // GCN hidden width h′
  std::size_t embed = 64;   // embedding width h
  std::size_t k = 3;        // window order; windows hold k+1 snapshots
  std::size_t mlp_layers = 2;
  Variant variant = Variant::full;
  double dropout = 0.2;

  void validate() const;
  std::size_t mlp_input_width() const { return variant == Variant::ct ? (k + 1) * embed : embed; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class T>
struct GcnParamsT {
  T w0;  // d_in × h′
  T w1;  // h′ × h
};

template <class T>
struct AttentionParamsT {
  T phi;  // h × h
  T w;    // 1 × h
};

template <class T>
struct LstmParamsT {
  T w_i, w_f, w_o, w_c;  // input weights, h × h
  T u_i, u_f, u_o, u_c;  // recurrent weights, h × h
  T b_i, b_f, b_o, b_c;  // 1 × h
};

template <class T>
struct MlpParamsT {
  std::vector<T> weights;
  std::vector<T> biases;
};

template <class T>
struct ParamTree {
  GcnParamsT<T> gcn;
  AttentionParamsT<T> v_att;
  LstmParamsT<T> lstm;
  AttentionParamsT<T> t_att;
  MlpParamsT<T> mlp;
};

/// Visits the tensors the variant actually uses, in declared order, as
/// f(name, tensor). Unused groups are skipped (and left empty).
template <class Tree, class F>
void for_each_param(Variant variant, Tree& tree, F&& f) {
  f("gcn.w0", tree.gcn.w0);
  f("gcn.w1", tree.gcn.w1);
  if (uses_node_attention(variant)) {
    f("v_att.phi", tree.v_att.phi);
    f("v_att.w", tree.v_att.w);
  }
  if (uses_lstm(variant)) {
    auto& l = tree.lstm;
    f("lstm.w_i", l.w_i);
    f("lstm.w_f", l.w_f);
    f("lstm.w_o", l.w_o);
    f("lstm.w_c", l.w_c);
    f("lstm.u_i", l.u_i);
    f("lstm.u_f", l.u_f);
    f("lstm.u_o", l.u_o);
    f("lstm.u_c", l.u_c);
    f("lstm.b_i", l.b_i);
    f("lstm.b_f", l.b_f);
    f("lstm.b_o", l.b_o);
    f("lstm.b_c", l.b_c);
  }
  if (uses_time_attention(variant)) {
    f("t_att.phi", tree.t_att.phi);
    f("t_att.w", tree.t_att.w);
  }
  for (std::size_t i = 0; i < tree.mlp.weights.size(); ++i) {
    f("mlp." + std::to_string(i) + ".w", tree.mlp.weights[i]);
    f("mlp." + std::to_string(i) + ".b", tree.mlp.biases[i]);
  }
}

struct ModelParams {
  ModelConfig config;
  ParamTree<Matrix> tree;

  /// Pointers to the used tensors in declared order.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::vector<std::string> tensor_names() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Glorot-uniform weights, zero biases, forget-gate bias 1. Deterministic in seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Shapes each used tensor must have under `config`, in declared order.
std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> param_shapes(
    const ModelConfig& config);

enum class Mode { train, eval };

using BoundParams = ParamTree<ad::Var>;

/// Registers every used tensor as a tape leaf.
BoundParams bind(ad::Tape& tape, const ModelParams& params);

/// Per-window byproducts of the forward pass.
struct ForwardDiagnostics {
  std::vector<std::vector<double>> node_attention;  // one n-vector per snapshot; empty for mean/max
  std::vector<double> time_attention;               // k+1 weights; empty for CT/NA
  std::vector<double> embedding;                    // z″_t, the MLP input
};

// Building blocks. Each appends to the tape of its inputs.

/// ReLU(Â·ReLU(Â·X·W0)·W1); in train mode the hidden layer is multiplied by
/// an inverted-dropout mask drawn from `rng`.
ad::Var gcn_forward(const std::shared_ptr<const SparseMatrix>& a_hat, ad::Var x,
                    const GcnParamsT<ad::Var>& p, double dropout, std::mt19937_64* rng);

struct Pooled {
  ad::Var pooled;     // 1 × h
  ad::Var attention;  // 1 × rows
};

/// softmax(w·tanh(Φ·Zᵀ))·Z, used for both node (v-Att) and time (t-Att) attention.
Pooled attention_pool(ad::Var z, const AttentionParamsT<ad::Var>& p);
inline Pooled v_att_pool(ad::Var z, const AttentionParamsT<ad::Var>& p) { return attention_pool(z, p); }
inline Pooled t_att(ad::Var zs, const AttentionParamsT<ad::Var>& p) { return attention_pool(zs, p); }

enum class PoolKind { mean, max };
ad::Var pool_variant(ad::Var z, PoolKind kind);

struct LstmState {
  ad::Var h;
  ad::Var c;
};

LstmState lstm_step(const LstmState& prev, ad::Var z, const LstmParamsT<ad::Var>& p);

/// ReLU hidden layers (with dropout in train mode), linear 2-wide output.
ad::Var mlp_forward(ad::Var in, const MlpParamsT<ad::Var>& p, double dropout, std::mt19937_64* rng);

/// Full forward pass on one window; returns the 1×2 score row
/// (column 0 = event, column 1 = no event). LSTM state starts at zero.
ad::Var forward_on_tape(ad::Tape& tape, const BoundParams& bound, const ModelConfig& config,
                        std::span<const PreparedSnapshot> window, Mode mode, std::mt19937_64* rng,
                        ForwardDiagnostics* diagnostics = nullptr);

struct ForwardResult {
  std::array<double, 2> scores{};
  ForwardDiagnostics diagnostics;

  /// Softmax probability of the event class.
  double event_probability() const;
};

ForwardResult forward(std::span<const PreparedSnapshot> window, const ModelParams& params, Mode mode,
                      std::mt19937_64* rng = nullptr);
ForwardResult forward(const SnapshotWindow& window, std::size_t n, FeatureMode features,
                      const ModelParams& params, Mode mode, std::mt19937_64* rng = nullptr);

/// Batch mean of the class-ratio weighted cross-entropy over score rows.
double loss(std::span<const std::array<double, 2>> scores, std::span<const int> labels,
            double positive_ratio);

}  // namespace dyged
