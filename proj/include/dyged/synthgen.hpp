#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dyged/graph.hpp"
#include "dyged/text.hpp"

namespace dyged::synth {

enum class Mechanism { densify_clique, hub, shuffle };

std::string_view to_string(Mechanism m);
Mechanism parse_mechanism(std::string_view text);

struct GenSpec {
  std::size_t n = 40;
  std::size_t T = 600;
  std::size_t d = 4;                // static feature width
  double base_edge_prob = 0.1;
  double event_prob = 0.1;
  Mechanism mechanism = Mechanism::densify_clique;
  std::size_t clique_size = 8;      // densify_clique: s
  double boost = 0.8;               // densify_clique: chance an absent clique pair is added
  std::size_t hub_degree = 10;      // hub: extra edges attached to the hub vertex
  double feature_noise = 1.0;       // static features are N(0, feature_noise²) per node
  /// Snapshots perturbed for an event at t are t - offset. {0} perturbs only
  /// the labelled snapshot; {1} is a pure lead-in one step earlier.
  std::vector<std::size_t> perturb_offsets{0};
  std::uint64_t seed = 1;

  /// Throws ErrorKind::config on degenerate specs.
  void validate() const;
};

GenSpec parse_gen_spec(const text::KeyValues& kv);
std::string echo_gen_spec(const GenSpec& spec);

/// Erdős–Rényi base snapshots with weights uniform on [0.5, 1.5], Bernoulli
/// event labels and the chosen structural perturbation. Deterministic in seed.
DynamicGraph generate(const GenSpec& spec);

/// Vertices touched by the planted mechanism (clique members or the hub).
std::vector<VertexId> planted_vertices(const GenSpec& spec);

enum class Separability { trivial, hard, null };
std::string_view to_string(Separability s);

/// Signal-to-noise of the planted change: the expected number of extra edges
/// it adds, in standard deviations of the same count under the base model.
/// null when nothing is planted, trivial at z >= 6, hard otherwise.
Separability expected_separability(const GenSpec& spec);
double planted_signal_z(const GenSpec& spec);

}  // namespace dyged::synth
