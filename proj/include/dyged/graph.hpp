#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dyged/matrix.hpp"

namespace dyged {

using VertexId = std::uint32_t;

struct Edge {
  VertexId u = 0;
  VertexId v = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// One timestamped weighted undirected graph over the fixed vertex set.
/// Edges are stored once per unordered pair, without self-loops.
struct Snapshot {
  std::int64_t timestamp = 0;
  std::vector<Edge> edges;
  Matrix features;  // n×d static features; may be n×0

  /// Throws ErrorKind::contract when any invariant is broken.
  void validate(std::size_t n) const;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct DynamicGraph {
  std::size_t n = 0;
  std::vector<std::string> node_names;  // empty or length n
  std::vector<Snapshot> snapshots;
  std::vector<int> labels;              // one per snapshot, 0 or 1

  std::size_t length() const noexcept { return snapshots.size(); }
  std::size_t feature_dim() const noexcept {
    return snapshots.empty() ? 0 : snapshots.front().features.cols();
  }
  void validate() const;

  friend bool operator==(const DynamicGraph&, const DynamicGraph&) = default;
};

/// k+1 consecutive snapshots ending at index t, labelled with labels[t].
struct SnapshotWindow {
  std::span<const Snapshot> snapshots;
  int label = 0;
  std::size_t t = 0;
};

/// Windows for t = k … T-1. Throws ErrorKind::config when T <= k.
std::vector<SnapshotWindow> windows(const DynamicGraph& g, std::size_t k);

/// Â = D̃^{-1/2}(I + A)D̃^{-1/2} with weighted degrees, in CSR form.
SparseMatrix normalized_adjacency_sparse(const Snapshot& s, std::size_t n);
Matrix normalized_adjacency(const Snapshot& s, std::size_t n);

std::vector<double> degree_feature(const Snapshot& s, std::size_t n);
/// Brandes betweenness on the unweighted skeleton, normalised by (n-1)(n-2)/2.
std::vector<double> betweenness_feature(const Snapshot& s, std::size_t n);
std::vector<double> clustering_feature(const Snapshot& s, std::size_t n);

enum class FeatureMode { static_only, dynamic_only, both };

std::string_view to_string(FeatureMode mode);
FeatureMode parse_feature_mode(std::string_view text);

/// static: X_t; dynamic: standardized [degree | betweenness | clustering];
/// both: [X_t, dynamic].
Matrix assemble_features(const Snapshot& s, std::size_t n, FeatureMode mode);

/// Model-ready form of a snapshot: sparse Â and the assembled feature matrix.
struct PreparedSnapshot {
  std::shared_ptr<const SparseMatrix> a_hat;
  Matrix features;
};

PreparedSnapshot prepare_snapshot(const Snapshot& s, std::size_t n, FeatureMode mode);

// Per-snapshot preparation over a whole graph; serial reference and OpenMP
// version produce identical output.
namespace serial {
std::vector<PreparedSnapshot> prepare_graph(const DynamicGraph& g, FeatureMode mode);
}
namespace parallel {
std::vector<PreparedSnapshot> prepare_graph(const DynamicGraph& g, FeatureMode mode);
}

/// Relabels vertices: new id of vertex v is perm[v].
Snapshot permute_snapshot(const Snapshot& s, std::span<const VertexId> perm);

}  // namespace dyged
