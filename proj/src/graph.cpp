#include "dyged/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <utility>

#include "dyged/error.hpp"

namespace dyged {

void Snapshot::validate(std::size_t n) const {
  std::set<std::pair<VertexId, VertexId>> seen;
  for (const Edge& e : edges) {
    if (e.u >= n || e.v >= n) {
      fail(ErrorKind::contract, "snapshot " + std::to_string(timestamp) + ": vertex id out of range [0," +
                                    std::to_string(n) + ")");
    }
    if (e.u == e.v) fail(ErrorKind::contract, "snapshot " + std::to_string(timestamp) + ": self-loop");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      fail(ErrorKind::contract, "snapshot " + std::to_string(timestamp) + ": non-positive weight");
    }
    if (!seen.emplace(std::min(e.u, e.v), std::max(e.u, e.v)).second) {
      fail(ErrorKind::contract, "snapshot " + std::to_string(timestamp) + ": duplicate edge " +
                                    std::to_string(e.u) + "-" + std::to_string(e.v));
    }
  }
  if (features.rows() != n) {
    fail(ErrorKind::contract, "snapshot " + std::to_string(timestamp) + ": feature rows " +
                                  std::to_string(features.rows()) + " != n=" + std::to_string(n));
  }
}

void DynamicGraph::validate() const {
  if (!node_names.empty() && node_names.size() != n) {
    fail(ErrorKind::contract, "node name count does not match n");
  }
  if (labels.size() != snapshots.size()) {
    fail(ErrorKind::contract, "label count " + std::to_string(labels.size()) + " != snapshot count " +
                                  std::to_string(snapshots.size()));
  }
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    snapshots[t].validate(n);
    if (t > 0 && snapshots[t].timestamp <= snapshots[t - 1].timestamp) {
      fail(ErrorKind::contract, "snapshot timestamps must strictly increase");
    }
    if (snapshots[t].features.cols() != snapshots.front().features.cols()) {
      fail(ErrorKind::contract, "feature dimension changes across snapshots");
    }
    if (labels[t] != 0 && labels[t] != 1) fail(ErrorKind::contract, "labels must be 0 or 1");
  }
}

std::vector<SnapshotWindow> windows(const DynamicGraph& g, std::size_t k) {
  const std::size_t T = g.length();
  if (T <= k) {
    fail(ErrorKind::config, "window order k=" + std::to_string(k) + " needs more than T=" +
                                std::to_string(T) + " snapshots");
  }
  std::vector<SnapshotWindow> out;
  out.reserve(T - k);
  const std::span<const Snapshot> all(g.snapshots);
  for (std::size_t t = k; t < T; ++t) {
    out.push_back(SnapshotWindow{all.subspan(t - k, k + 1), g.labels.at(t), t});
  }
  return out;
}

SparseMatrix normalized_adjacency_sparse(const Snapshot& s, std::size_t n) {
  // Ã = I + A; entries gathered per row then sorted by column.
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
  std::vector<double> degree(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) rows[i].emplace_back(i, 1.0);
  for (const Edge& e : s.edges) {
    rows[e.u].emplace_back(e.v, e.weight);
    rows[e.v].emplace_back(e.u, e.weight);
    degree[e.u] += e.weight;
    degree[e.v] += e.weight;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

  SparseMatrix a;
  a.rows = a.cols = n;
  a.row_ptr.reserve(n + 1);
  a.row_ptr.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    for (const auto& [j, w] : rows[i]) {
      a.col_idx.push_back(j);
      a.values.push_back(w * (inv_sqrt[i] * inv_sqrt[j]));
    }
    a.row_ptr.push_back(a.col_idx.size());
  }
  return a;
}

Matrix normalized_adjacency(const Snapshot& s, std::size_t n) {
  return normalized_adjacency_sparse(s, n).to_dense();
}

namespace {

std::vector<std::vector<VertexId>> skeleton(const Snapshot& s, std::size_t n) {
  std::vector<std::vector<VertexId>> adj(n);
  for (const Edge& e : s.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

}  // namespace

std::vector<double> degree_feature(const Snapshot& s, std::size_t n) {
  std::vector<double> deg(n, 0.0);
  for (const Edge& e : s.edges) {
    deg[e.u] += 1.0;
    deg[e.v] += 1.0;
  }
  return deg;
}

std::vector<double> betweenness_feature(const Snapshot& s, std::size_t n) {
  std::vector<double> bc(n, 0.0);
  if (n < 3) return bc;
  const auto adj = skeleton(s, n);

  std::vector<VertexId> order;
  std::vector<std::vector<VertexId>> preds(n);
  std::vector<double> sigma(n);
  std::vector<long> dist(n);
  std::vector<double> delta(n);
  order.reserve(n);

  for (std::size_t src = 0; src < n; ++src) {
    order.clear();
    for (std::size_t v = 0; v < n; ++v) {
      preds[v].clear();
      sigma[v] = 0.0;
      dist[v] = -1;
      delta[v] = 0.0;
    }
    sigma[src] = 1.0;
    dist[src] = 0;
    std::queue<VertexId> frontier;
    frontier.push(static_cast<VertexId>(src));
    while (!frontier.empty()) {
      const VertexId v = frontier.front();
      frontier.pop();
      order.push_back(v);
      for (VertexId w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          frontier.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const VertexId w = *it;
      for (VertexId v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != src) bc[w] += delta[w];
    }
  }
  // Each unordered pair is counted from both endpoints.
  const double pairs = static_cast<double>(n - 1) * static_cast<double>(n - 2) / 2.0;
  for (auto& v : bc) v = v / 2.0 / pairs;
  return bc;
}

std::vector<double> clustering_feature(const Snapshot& s, std::size_t n) {
  const auto adj = skeleton(s, n);
  std::vector<double> cc(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    const auto& nv = adj[v];
    const std::size_t deg = nv.size();
    if (deg < 2) continue;
    std::size_t links = 0;
    for (std::size_t a = 0; a < deg; ++a) {
      const auto& na = adj[nv[a]];
      for (std::size_t b = a + 1; b < deg; ++b) {
        if (std::binary_search(na.begin(), na.end(), nv[b])) ++links;
      }
    }
    cc[v] = 2.0 * static_cast<double>(links) / static_cast<double>(deg * (deg - 1));
  }
  return cc;
}

std::string_view to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::static_only: return "static";
    case FeatureMode::dynamic_only: return "dynamic";
    case FeatureMode::both: return "both";
  }
  return "?";
}

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "static") return FeatureMode::static_only;
  if (text == "dynamic") return FeatureMode::dynamic_only;
  if (text == "both") return FeatureMode::both;
  fail(ErrorKind::config, "unknown feature mode '" + std::string(text) + "' (valid: static, dynamic, both)");
}

namespace {

void standardize_into(const std::vector<double>& raw, Matrix& out, std::size_t col) {
  const double n = static_cast<double>(raw.size());
  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out(i, col) = sd > 1e-12 ? (raw[i] - mean) / sd : 0.0;
  }
}

}  // namespace

Matrix assemble_features(const Snapshot& s, std::size_t n, FeatureMode mode) {
  const std::size_t d = s.features.cols();
  if (mode != FeatureMode::dynamic_only && d == 0) {
    fail(ErrorKind::config, std::string("feature mode '") + std::string(to_string(mode)) +
                                "' needs static features but the dataset has d=0");
  }
  if (mode == FeatureMode::static_only) return s.features;

  Matrix dyn(n, 3);
  standardize_into(degree_feature(s, n), dyn, 0);
  standardize_into(betweenness_feature(s, n), dyn, 1);
  standardize_into(clustering_feature(s, n), dyn, 2);
  if (mode == FeatureMode::dynamic_only) return dyn;

  Matrix out(n, d + 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out(i, j) = s.features(i, j);
    for (std::size_t j = 0; j < 3; ++j) out(i, d + j) = dyn(i, j);
  }
  return out;
}

PreparedSnapshot prepare_snapshot(const Snapshot& s, std::size_t n, FeatureMode mode) {
  return PreparedSnapshot{std::make_shared<const SparseMatrix>(normalized_adjacency_sparse(s, n)),
                          assemble_features(s, n, mode)};
}

namespace serial {
std::vector<PreparedSnapshot> prepare_graph(const DynamicGraph& g, FeatureMode mode) {
  std::vector<PreparedSnapshot> out;
  out.reserve(g.length());
  for (const auto& s : g.snapshots) out.push_back(prepare_snapshot(s, g.n, mode));
  return out;
}
}  // namespace serial

namespace parallel {
std::vector<PreparedSnapshot> prepare_graph(const DynamicGraph& g, FeatureMode mode) {
  // Validate the mode once up front so no exception escapes the parallel region.
  if (mode != FeatureMode::dynamic_only && g.feature_dim() == 0 && g.length() > 0) {
    return serial::prepare_graph(g, mode);
  }
  std::vector<PreparedSnapshot> out(g.length());
  const long T = static_cast<long>(g.length());
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < T; ++t) out[t] = prepare_snapshot(g.snapshots[t], g.n, mode);
  return out;
}
}  // namespace parallel

Snapshot permute_snapshot(const Snapshot& s, std::span<const VertexId> perm) {
  Snapshot out;
  out.timestamp = s.timestamp;
  out.edges.reserve(s.edges.size());
  for (const Edge& e : s.edges) out.edges.push_back(Edge{perm[e.u], perm[e.v], e.weight});
  out.features = Matrix(s.features.rows(), s.features.cols());
  for (std::size_t i = 0; i < s.features.rows(); ++i)
    for (std::size_t j = 0; j < s.features.cols(); ++j) out.features(perm[i], j) = s.features(i, j);
  return out;
}

}  // namespace dyged
