#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dyged/error.hpp"
#include "dyged/graph.hpp"
#include "dyged/graph_io.hpp"
#include "dyged/text.hpp"
#include "support.hpp"

using namespace dyged;

namespace {

Snapshot with_edges(std::vector<Edge> edges, std::size_t n, std::size_t d = 0) {
  Snapshot s;
  s.edges = std::move(edges);
  s.features = Matrix(n, d);
  return s;
}

const Snapshot kPath = with_edges({{0, 1, 1.0}, {1, 2, 1.0}}, 3);
const Snapshot kTriangle = with_edges({{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}, 3);
const Snapshot kStar = with_edges({{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}, {0, 4, 1.0}}, 5);

DynamicGraph line_graph(std::size_t T) {
  DynamicGraph g;
  g.n = 3;
  for (std::size_t t = 0; t < T; ++t) {
    Snapshot s = kPath;
    s.timestamp = static_cast<std::int64_t>(t);
    s.features = Matrix(3, 1, 1.0);
    g.snapshots.push_back(s);
    g.labels.push_back(static_cast<int>(t % 2));
  }
  return g;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::contract;
}

}  // namespace

TEST_CASE("normalized adjacency hand values") {
  const Matrix single = normalized_adjacency(with_edges({}, 1), 1);
  CHECK(single == Matrix{{1.0}});

  const Matrix a = normalized_adjacency(kPath, 3);
  CHECK(std::abs(a(0, 0) - 0.5) <= 1e-12);
  CHECK(std::abs(a(0, 1) - 1.0 / std::sqrt(6.0)) <= 1e-12);
  CHECK(std::abs(a(1, 1) - 1.0 / 3.0) <= 1e-12);
  CHECK(a(0, 2) == 0.0);
}

TEST_CASE("normalized adjacency properties on random weighted graphs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 9;
    const auto s = support::random_snapshot(n, 0.4, 0, rng);
    const Matrix a = normalized_adjacency(s, n);
    CHECK(max_abs_diff(a, support::dense_normalized_adjacency(s, n)) <= 1e-14);
    std::vector<double> deg(n, 1.0);
    for (const auto& e : s.edges) {
      deg[e.u] += e.weight;
      deg[e.v] += e.weight;
    }
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(a(i, i) - 1.0 / deg[i]) <= 1e-14);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(a(i, j) >= 0.0);
        CHECK(a(i, j) == a(j, i));
      }
    }
    // Power iteration bounds the spectral radius.
    Matrix v(n, 1, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
      Matrix next = support::dense::mul(a, v);
      double norm = 0.0;
      for (auto x : next.data()) norm += x * x;
      norm = std::sqrt(norm);
      lambda = norm;
      for (auto& x : next.data()) x /= norm;
      v = next;
    }
    CHECK(lambda <= 1.0 + 1e-9);
  }
}

TEST_CASE("degree, betweenness and clustering hand values") {
  CHECK(degree_feature(with_edges({}, 4), 4) == std::vector<double>(4, 0.0));
  CHECK(degree_feature(kTriangle, 3) == std::vector<double>{2, 2, 2});
  CHECK(degree_feature(kStar, 5) == std::vector<double>{4, 1, 1, 1, 1});

  CHECK(betweenness_feature(kTriangle, 3) == std::vector<double>{0, 0, 0});
  CHECK(betweenness_feature(kPath, 3) == std::vector<double>{0, 1, 0});
  CHECK(betweenness_feature(kStar, 5)[0] == 1.0);

  CHECK(clustering_feature(kTriangle, 3) == std::vector<double>{1, 1, 1});
  CHECK(clustering_feature(kPath, 3) == std::vector<double>{0, 0, 0});
  // K4 minus the edge 2-3: vertices 0 and 1 have degree 3.
  const auto k4m = with_edges({{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {1, 2, 1}, {1, 3, 1}}, 4);
  const auto cc = clustering_feature(k4m, 4);
  CHECK(cc[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(cc[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("betweenness and clustering match exhaustive enumeration for n <= 8") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> density(0.1, 0.9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const auto s = support::random_snapshot(n, density(rng), 0, rng);
    const auto bc = betweenness_feature(s, n);
    const auto bc_ref = support::brute_betweenness(s, n);
    const auto cc = clustering_feature(s, n);
    const auto cc_ref = support::brute_clustering(s, n);
    for (std::size_t v = 0; v < n; ++v) {
      CHECK(std::abs(bc[v] - bc_ref[v]) <= 1e-12);
      CHECK(bc[v] >= 0.0);
      CHECK(bc[v] <= 1.0 + 1e-12);
      CHECK(std::abs(cc[v] - cc_ref[v]) <= 1e-12);
    }
  }
}

TEST_CASE("windows") {
  CHECK(windows(line_graph(5), 0).size() == 5);
  const auto last = windows(line_graph(5), 4);
  REQUIRE(last.size() == 1);
  CHECK(last[0].t == 4);

  const auto g = line_graph(10);
  const auto ws = windows(g, 3);
  REQUIRE(ws.size() == 7);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    CHECK(ws[i].t == i + 3);
    CHECK(ws[i].label == g.labels[i + 3]);
    REQUIRE(ws[i].snapshots.size() == 4);
    for (std::size_t j = 0; j < 4; ++j) CHECK(ws[i].snapshots[j].timestamp == static_cast<std::int64_t>(i + j));
  }
  try {
    windows(g, 10);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    const std::string what = e.what();
    CHECK(what.find("k=10") != std::string::npos);
    CHECK(what.find("T=10") != std::string::npos);
  }
}

TEST_CASE("feature assembly") {
  Snapshot tri = kTriangle;
  tri.features = Matrix{{1, 2}, {3, 4}, {5, 6}};
  CHECK(assemble_features(tri, 3, FeatureMode::static_only) == tri.features);

  const Matrix dyn = assemble_features(tri, 3, FeatureMode::dynamic_only);
  CHECK(dyn == Matrix(3, 3));

  const Matrix both = assemble_features(tri, 3, FeatureMode::both);
  CHECK(both.rows() == 3);
  CHECK(both.cols() == 5);

  // Standardized columns have zero mean and unit population variance.
  std::mt19937_64 rng(4);
  const auto s = support::random_snapshot(12, 0.3, 2, rng);
  const Matrix f = assemble_features(s, 12, FeatureMode::dynamic_only);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < 12; ++i) mean += f(i, c);
    mean /= 12.0;
    for (std::size_t i = 0; i < 12; ++i) sq += (f(i, c) - mean) * (f(i, c) - mean);
    CHECK(std::abs(mean) <= 1e-12);
    if (sq > 0.0) CHECK(std::abs(sq / 12.0 - 1.0) <= 1e-12);
  }

  CHECK(kind_of([&] { assemble_features(kPath, 3, FeatureMode::static_only); }) == ErrorKind::config);
  CHECK(assemble_features(kPath, 3, FeatureMode::dynamic_only).cols() == 3);
}

TEST_CASE("feature assembly is permutation-equivariant") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + trial % 10;
    const auto s = support::random_snapshot(n, 0.35, 2, rng);
    const auto perm = support::random_permutation(n, rng);
    const auto ps = permute_snapshot(s, perm);
    for (auto mode : {FeatureMode::static_only, FeatureMode::dynamic_only, FeatureMode::both}) {
      const Matrix f = assemble_features(s, n, mode);
      const Matrix pf = assemble_features(ps, n, mode);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t c = 0; c < f.cols(); ++c) CHECK(std::abs(pf(perm[v], c) - f(v, c)) <= 1e-12);
    }
    const Matrix a = normalized_adjacency(s, n);
    const Matrix pa = normalized_adjacency(ps, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(pa(perm[i], perm[j]) - a(i, j)) <= 1e-15);
  }
}

TEST_CASE("serial and parallel graph preparation agree") {
  std::mt19937_64 rng(6);
  const auto g = support::random_graph(15, 12, 3, 0.3, rng);
  for (auto mode : {FeatureMode::static_only, FeatureMode::dynamic_only, FeatureMode::both}) {
    const auto a = serial::prepare_graph(g, mode);
    const auto b = parallel::prepare_graph(g, mode);
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
      CHECK(a[t].features == b[t].features);
      CHECK(a[t].a_hat->values == b[t].a_hat->values);
      CHECK(a[t].a_hat->col_idx == b[t].a_hat->col_idx);
    }
  }
}

TEST_CASE("snapshot invariants") {
  CHECK(kind_of([] { with_edges({{0, 0, 1.0}}, 2).validate(2); }) == ErrorKind::contract);
  CHECK(kind_of([] { with_edges({{0, 5, 1.0}}, 2).validate(2); }) == ErrorKind::contract);
  CHECK(kind_of([] { with_edges({{0, 1, 0.0}}, 2).validate(2); }) == ErrorKind::contract);
  CHECK(kind_of([] { with_edges({{0, 1, 1.0}, {1, 0, 2.0}}, 2).validate(2); }) == ErrorKind::contract);
  auto g = line_graph(3);
  g.labels[1] = 2;
  CHECK(kind_of([&] { g.validate(); }) == ErrorKind::contract);
  g = line_graph(3);
  g.snapshots[2].timestamp = 0;
  CHECK(kind_of([&] { g.validate(); }) == ErrorKind::contract);
}

TEST_CASE("dataset round trip is exact") {
  std::mt19937_64 rng(7);
  for (std::size_t d : {0u, 3u}) {
    auto g = support::random_graph(9, 6, d, 0.4, rng);
    const auto dir = support::temp_dir("roundtrip" + std::to_string(d));
    io::write_dataset(g, dir / "data");
    const auto back = io::read_dataset(dir / "data");
    CHECK(back == g);
    // A second write of the parsed graph is byte-identical.
    io::write_dataset(back, dir / "again");
    for (const char* f : {"meta", "edges.tsv", "labels.tsv"}) {
      CHECK(text::read_file(dir / "data" / f) == text::read_file(dir / "again" / f));
    }
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("dataset parse errors carry line numbers") {
  const auto dir = support::temp_dir("parse");
  auto g = line_graph(3);
  io::write_dataset(g, dir / "ok");

  auto expect_parse_error = [&](const std::string& file, const std::string& content, const std::string& needle) {
    const auto bad = dir / "bad";
    std::filesystem::remove_all(bad);
    std::filesystem::copy(dir / "ok", bad);
    text::write_file(bad / file, content);
    try {
      io::read_dataset(bad);
      FAIL("expected a parse error for " << needle);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::parse);
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  expect_parse_error("edges.tsv", "0\t0\t1\t1\n0\t1\t0\t2\n", "edges.tsv:2");
  expect_parse_error("edges.tsv", "0\t0\t7\t1\n", "edges.tsv:1");
  expect_parse_error("edges.tsv", "0\t0\t1\t1\n1\t2\t2\t1\n", "edges.tsv:2");
  expect_parse_error("edges.tsv", "0\t0\t1\t-1\n", "edges.tsv:1");
  expect_parse_error("edges.tsv", "0\t0\t1\tabc\n", "edges.tsv:1");
  expect_parse_error("labels.tsv", "0\t0\n1\t1\n1\t0\n", "labels.tsv:3");
  expect_parse_error("labels.tsv", "0\t0\n1\t1\n", "label");
  expect_parse_error("meta", "n=3 T=x d=1\n", "meta");

  try {
    io::read_dataset(dir / "missing");
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("text helpers") {
  for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.1 + 0.2}) {
    const auto s = text::format_real(v);
    CHECK(text::parse_real(s, "x") == v);
  }
  CHECK_THROWS_AS(text::parse_real("1.5x", "x"), Error);
  CHECK_THROWS_AS(text::parse_int("", "x"), Error);
  const auto kv = text::parse_key_values("# comment\na=1\n\nb = two \n", "cfg");
  CHECK(kv.values.at("a") == "1");
  CHECK(kv.values.at("b") == "two");
  CHECK(kv.where("b") == "cfg:4");
  CHECK_THROWS_AS(text::parse_key_values("a=1\na=2\n", "cfg"), Error);
  CHECK_THROWS_AS(text::parse_key_values("novalue\n", "cfg"), Error);
}
