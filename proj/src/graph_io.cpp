#include "dyged/graph_io.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "dyged/error.hpp"
#include "dyged/text.hpp"

namespace dyged::io {

namespace {

namespace fs = std::filesystem;

struct Meta {
  std::size_t n = 0;
  std::size_t T = 0;
  std::size_t d = 0;
};

std::size_t non_negative(const text::KeyValues& kv, const std::string& key) {
  if (!kv.has(key)) fail(ErrorKind::parse, kv.source + ": missing '" + key + "'");
  const auto v = text::parse_int(kv.values.at(key), kv.where(key));
  if (v < 0) fail(ErrorKind::parse, kv.where(key) + ": '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

Meta read_meta(const fs::path& path) {
  const auto content = text::read_file(path);
  const auto line = text::trim(content);
  if (line.find('\n') != std::string_view::npos) {
    fail(ErrorKind::parse, path.string() + ":2: meta must be a single line");
  }
  const auto kv = text::parse_key_value_line(line, path.string());
  for (const auto& [key, value] : kv.values) {
    if (key != "n" && key != "T" && key != "d") {
      fail(ErrorKind::parse, kv.where(key) + ": unknown meta key '" + key + "'");
    }
  }
  return Meta{non_negative(kv, "n"), non_negative(kv, "T"), non_negative(kv, "d")};
}

template <class F>
void for_each_row(const fs::path& path, F&& on_row) {
  const auto content = text::read_file(path);
  int line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty()) continue;
    on_row(text::split(line, '\t'), path.string() + ":" + std::to_string(line_no));
  }
}

std::size_t index_in(std::string_view tok, std::size_t bound, const std::string& where,
                     const char* what) {
  const auto v = text::parse_int(tok, where);
  if (v < 0 || static_cast<std::size_t>(v) >= bound) {
    fail(ErrorKind::parse, where + ": " + what + " " + std::string(text::trim(tok)) +
                               " out of range [0," + std::to_string(bound) + ")");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

DynamicGraph read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::io, "dataset directory " + dir.string() + " not found");
  const Meta meta = read_meta(dir / "meta");

  DynamicGraph g;
  g.n = meta.n;
  g.snapshots.resize(meta.T);
  for (std::size_t t = 0; t < meta.T; ++t) g.snapshots[t].timestamp = static_cast<std::int64_t>(t);

  Matrix features(meta.n, meta.d);
  if (meta.d > 0) {
    std::vector<bool> seen(meta.n, false);
    for_each_row(dir / "features.tsv", [&](const auto& cols, const std::string& where) {
      if (cols.size() != meta.d + 1) {
        fail(ErrorKind::parse, where + ": expected " + std::to_string(meta.d + 1) + " columns, got " +
                                   std::to_string(cols.size()));
      }
      const auto u = index_in(cols[0], meta.n, where, "vertex id");
      if (seen[u]) fail(ErrorKind::parse, where + ": duplicate feature row for vertex " + std::to_string(u));
      seen[u] = true;
      for (std::size_t j = 0; j < meta.d; ++j) features(u, j) = text::parse_real(cols[j + 1], where);
    });
    for (std::size_t u = 0; u < meta.n; ++u) {
      if (!seen[u]) fail(ErrorKind::parse, (dir / "features.tsv").string() + ": no row for vertex " + std::to_string(u));
    }
  }
  for (auto& s : g.snapshots) s.features = features;

  std::vector<std::set<std::pair<std::size_t, std::size_t>>> pairs(meta.T);
  for_each_row(dir / "edges.tsv", [&](const auto& cols, const std::string& where) {
    if (cols.size() != 4) {
      fail(ErrorKind::parse, where + ": expected 4 columns (t, u, v, w), got " + std::to_string(cols.size()));
    }
    const auto t = index_in(cols[0], meta.T, where, "timestamp");
    const auto u = index_in(cols[1], meta.n, where, "vertex id");
    const auto v = index_in(cols[2], meta.n, where, "vertex id");
    const double w = text::parse_real(cols[3], where);
    if (u == v) fail(ErrorKind::parse, where + ": self-loop on vertex " + std::to_string(u));
    if (!(w > 0.0) || !std::isfinite(w)) fail(ErrorKind::parse, where + ": edge weight must be positive");
    if (!pairs[t].emplace(std::min(u, v), std::max(u, v)).second) {
      fail(ErrorKind::parse, where + ": duplicate edge " + std::to_string(u) + "-" + std::to_string(v) +
                                 " in snapshot " + std::to_string(t));
    }
    g.snapshots[t].edges.push_back(Edge{static_cast<VertexId>(u), static_cast<VertexId>(v), w});
  });

  g.labels.assign(meta.T, -1);
  for_each_row(dir / "labels.tsv", [&](const auto& cols, const std::string& where) {
    if (cols.size() != 2) fail(ErrorKind::parse, where + ": expected 2 columns (t, label)");
    const auto t = index_in(cols[0], meta.T, where, "timestamp");
    const auto l = text::parse_int(cols[1], where);
    if (l != 0 && l != 1) fail(ErrorKind::parse, where + ": label must be 0 or 1");
    if (g.labels[t] != -1) fail(ErrorKind::parse, where + ": duplicate label for t=" + std::to_string(t));
    g.labels[t] = static_cast<int>(l);
  });
  for (std::size_t t = 0; t < meta.T; ++t) {
    if (g.labels[t] == -1) {
      fail(ErrorKind::parse, (dir / "labels.tsv").string() + ": missing label for t=" + std::to_string(t));
    }
  }
  return g;
}

void write_dataset(const DynamicGraph& g, const fs::path& dir) {
  g.validate();
  if (!fs::is_directory(dir)) {
    std::error_code ec;
    fs::create_directory(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  }
  for (std::size_t t = 0; t < g.length(); ++t) {
    if (g.snapshots[t].timestamp != static_cast<std::int64_t>(t)) {
      fail(ErrorKind::contract, "write_dataset: timestamps must be 0..T-1");
    }
    if (!(g.snapshots[t].features == g.snapshots.front().features)) {
      fail(ErrorKind::contract, "write_dataset: features must be static across snapshots");
    }
  }
  const std::size_t d = g.feature_dim();

  text::write_file(dir / "meta", "n=" + std::to_string(g.n) + " T=" + std::to_string(g.length()) +
                                     " d=" + std::to_string(d) + "\n");

  std::ostringstream edges;
  for (std::size_t t = 0; t < g.length(); ++t) {
    for (const Edge& e : g.snapshots[t].edges) {
      edges << t << '\t' << e.u << '\t' << e.v << '\t' << text::format_real(e.weight) << '\n';
    }
  }
  text::write_file(dir / "edges.tsv", edges.str());

  if (d > 0) {
    std::ostringstream feats;
    const Matrix& x = g.snapshots.front().features;
    for (std::size_t u = 0; u < g.n; ++u) {
      feats << u;
      for (std::size_t j = 0; j < d; ++j) feats << '\t' << text::format_real(x(u, j));
      feats << '\n';
    }
    text::write_file(dir / "features.tsv", feats.str());
  }

  std::ostringstream labels;
  for (std::size_t t = 0; t < g.length(); ++t) labels << t << '\t' << g.labels[t] << '\n';
  text::write_file(dir / "labels.tsv", labels.str());
}

}  // namespace dyged::io
