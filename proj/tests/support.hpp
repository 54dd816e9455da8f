#pragma once

// Generators and independent oracles shared by the test binaries. Nothing here
// calls into the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "dyged/graph.hpp"
#include "dyged/matrix.hpp"

namespace support {

using dyged::Edge;
using dyged::Matrix;
using dyged::Snapshot;
using dyged::VertexId;

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

inline Snapshot random_snapshot(std::size_t n, double p, std::size_t d, std::mt19937_64& rng,
                                std::int64_t timestamp = 0) {
  std::bernoulli_distribution coin(p);
  std::uniform_real_distribution<double> w(0.2, 2.0);
  Snapshot s;
  s.timestamp = timestamp;
  for (VertexId u = 0; u < n; ++u)
    for (VertexId v = u + 1; v < n; ++v)
      if (coin(rng)) s.edges.push_back(Edge{u, v, w(rng)});
  s.features = random_matrix(n, d, rng);
  return s;
}

inline dyged::DynamicGraph random_graph(std::size_t n, std::size_t T, std::size_t d, double p,
                                        std::mt19937_64& rng) {
  dyged::DynamicGraph g;
  g.n = n;
  const Matrix x = random_matrix(n, d, rng);
  for (std::size_t t = 0; t < T; ++t) {
    auto s = random_snapshot(n, p, 0, rng, static_cast<std::int64_t>(t));
    s.features = x;
    g.snapshots.push_back(std::move(s));
    g.labels.push_back(static_cast<int>(t % 3 == 0));
  }
  return g;
}

inline std::vector<VertexId> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<VertexId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

inline std::vector<std::vector<bool>> adjacency(const Snapshot& s, std::size_t n) {
  std::vector<std::vector<bool>> a(n, std::vector<bool>(n, false));
  for (const auto& e : s.edges) a[e.u][e.v] = a[e.v][e.u] = true;
  return a;
}

/// Betweenness by listing every simple path between every pair and keeping
/// the shortest ones. Exponential; meant for n <= 8.
inline std::vector<double> brute_betweenness(const Snapshot& s, std::size_t n) {
  const auto adj = adjacency(s, n);
  std::vector<double> bc(n, 0.0);
  if (n < 3) return bc;
  for (std::size_t src = 0; src < n; ++src) {
    for (std::size_t dst = src + 1; dst < n; ++dst) {
      std::vector<std::vector<std::size_t>> paths;
      std::vector<std::size_t> path{src};
      std::vector<bool> used(n, false);
      used[src] = true;
      std::function<void(std::size_t)> dfs = [&](std::size_t v) {
        if (v == dst) {
          paths.push_back(path);
          return;
        }
        for (std::size_t w = 0; w < n; ++w) {
          if (!adj[v][w] || used[w]) continue;
          used[w] = true;
          path.push_back(w);
          dfs(w);
          path.pop_back();
          used[w] = false;
        }
      };
      dfs(src);
      if (paths.empty()) continue;
      std::size_t shortest = paths.front().size();
      for (const auto& p : paths) shortest = std::min(shortest, p.size());
      std::vector<double> through(n, 0.0);
      double count = 0.0;
      for (const auto& p : paths) {
        if (p.size() != shortest) continue;
        count += 1.0;
        for (std::size_t i = 1; i + 1 < p.size(); ++i) through[p[i]] += 1.0;
      }
      for (std::size_t v = 0; v < n; ++v) bc[v] += through[v] / count;
    }
  }
  const double pairs = static_cast<double>((n - 1) * (n - 2)) / 2.0;
  for (auto& v : bc) v /= pairs;
  return bc;
}

inline std::vector<double> brute_clustering(const Snapshot& s, std::size_t n) {
  const auto adj = adjacency(s, n);
  std::vector<double> cc(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t deg = 0;
    std::size_t tri = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (!adj[v][a]) continue;
      ++deg;
      for (std::size_t b = a + 1; b < n; ++b)
        if (adj[v][b] && adj[a][b]) ++tri;
    }
    if (deg >= 2) cc[v] = static_cast<double>(tri) / (static_cast<double>(deg * (deg - 1)) / 2.0);
  }
  return cc;
}

/// D̃^{-1/2}(I + A)D̃^{-1/2} built densely from the edge list.
inline Matrix dense_normalized_adjacency(const Snapshot& s, std::size_t n) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  for (const auto& e : s.edges) {
    a(e.u, e.v) += e.weight;
    a(e.v, e.u) += e.weight;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j) / std::sqrt(deg[i] * deg[j]);
  return out;
}

/// O(P·N) pairwise AUC with half credit for ties, as an exact fraction.
inline double brute_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  long twice_wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) twice_wins += 2;
      else if (scores[i] == scores[j]) twice_wins += 1;
    }
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pairs));
}

// Plain dense algebra used by the forward-pass oracles.
namespace dense {

inline Matrix mul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
      out(i, j) = acc;
    }
  return out;
}

inline Matrix map(Matrix m, double (*f)(double)) {
  for (auto& v : m.data()) v = f(v);
  return m;
}

inline double relu(double v) { return v > 0.0 ? v : 0.0; }
inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double tanh(double v) { return std::tanh(v); }

inline Matrix softmax(const Matrix& row) {
  double hi = row[0];
  for (std::size_t j = 0; j < row.cols(); ++j) hi = std::max(hi, row[j]);
  Matrix out(1, row.cols());
  double z = 0.0;
  for (std::size_t j = 0; j < row.cols(); ++j) z += out[j] = std::exp(row[j] - hi);
  for (std::size_t j = 0; j < row.cols(); ++j) out[j] /= z;
  return out;
}

/// softmax(w·tanh(Φ·Zᵀ)) and the pooled row, computed entry by entry.
struct Attention {
  Matrix alpha;
  Matrix pooled;
};

inline Attention attention(const Matrix& z, const Matrix& phi, const Matrix& w) {
  const std::size_t n = z.rows();
  const std::size_t h = z.cols();
  Matrix scores(1, n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < h; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < h; ++c) acc += phi(r, c) * z(i, c);
      s += w(0, r) * std::tanh(acc);
    }
    scores[i] = s;
  }
  Attention a{softmax(scores), Matrix(1, h)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < h; ++c) a.pooled[c] += a.alpha[i] * z(i, c);
  return a;
}

}  // namespace dense

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dyged_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace support
