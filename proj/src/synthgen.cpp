#include "dyged/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dyged/error.hpp"

namespace dyged::synth {

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::densify_clique: return "densify_clique";
    case Mechanism::hub: return "hub";
    case Mechanism::shuffle: return "shuffle";
  }
  return "?";
}

Mechanism parse_mechanism(std::string_view text) {
  if (text == "densify_clique") return Mechanism::densify_clique;
  if (text == "hub") return Mechanism::hub;
  if (text == "shuffle") return Mechanism::shuffle;
  fail(ErrorKind::config, "unknown mechanism '" + std::string(text) + "' (valid: densify_clique, hub, shuffle)");
}

std::string_view to_string(Separability s) {
  switch (s) {
    case Separability::trivial: return "trivial";
    case Separability::hard: return "hard";
    case Separability::null: return "null";
  }
  return "?";
}

void GenSpec::validate() const {
  auto open_unit = [](double p) { return p > 0.0 && p < 1.0; };
  if (n < 2) fail(ErrorKind::config, "n must be at least 2");
  if (T < 1) fail(ErrorKind::config, "T must be at least 1");
  if (!open_unit(base_edge_prob)) fail(ErrorKind::config, "base_edge_prob must lie in (0,1)");
  if (!(event_prob >= 0.0 && event_prob < 1.0)) fail(ErrorKind::config, "event_prob must lie in [0,1)");
  if (!(boost >= 0.0 && boost <= 1.0)) fail(ErrorKind::config, "boost must lie in [0,1]");
  if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise)) {
    fail(ErrorKind::config, "feature_noise must be a non-negative stdev");
  }
  if (mechanism == Mechanism::densify_clique && (clique_size < 2 || clique_size > n)) {
    fail(ErrorKind::config, "clique_size must lie in [2, n]");
  }
  if (mechanism == Mechanism::hub && hub_degree >= n) fail(ErrorKind::config, "hub_degree must be < n");
  if (perturb_offsets.empty()) fail(ErrorKind::config, "perturb_offsets must not be empty");
  for (auto off : perturb_offsets) {
    if (off >= T) fail(ErrorKind::config, "perturb offset " + std::to_string(off) + " is not < T");
  }
}

GenSpec parse_gen_spec(const text::KeyValues& kv) {
  GenSpec s;
  auto count = [&](const std::string& key) {
    const auto v = text::parse_int(kv.values.at(key), kv.where(key));
    if (v < 0) fail(ErrorKind::config, kv.where(key) + ": '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
  };
  for (const auto& [key, value] : kv.values) {
    const auto where = kv.where(key);
    try {
      if (key == "n") s.n = count(key);
      else if (key == "T") s.T = count(key);
      else if (key == "d") s.d = count(key);
      else if (key == "base_edge_prob") s.base_edge_prob = text::parse_real(value, where);
      else if (key == "event_prob") s.event_prob = text::parse_real(value, where);
      else if (key == "mechanism") s.mechanism = parse_mechanism(value);
      else if (key == "clique_size") s.clique_size = count(key);
      else if (key == "boost") s.boost = text::parse_real(value, where);
      else if (key == "hub_degree") s.hub_degree = count(key);
      else if (key == "feature_noise") s.feature_noise = text::parse_real(value, where);
      else if (key == "seed") s.seed = static_cast<std::uint64_t>(text::parse_int(value, where));
      else if (key == "perturb_offsets") {
        s.perturb_offsets.clear();
        for (auto tok : text::split(value, ',')) {
          const auto v = text::parse_int(tok, where);
          if (v < 0) fail(ErrorKind::config, where + ": perturb offsets must be non-negative");
          s.perturb_offsets.push_back(static_cast<std::size_t>(v));
        }
      } else {
        fail(ErrorKind::config, where + ": unknown spec key '" + key + "'");
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parse) fail(ErrorKind::config, e.what());
      throw;
    }
  }
  s.validate();
  return s;
}

std::string echo_gen_spec(const GenSpec& s) {
  std::ostringstream os;
  os << "n=" << s.n << '\n'
     << "T=" << s.T << '\n'
     << "d=" << s.d << '\n'
     << "base_edge_prob=" << text::format_real(s.base_edge_prob) << '\n'
     << "event_prob=" << text::format_real(s.event_prob) << '\n'
     << "mechanism=" << to_string(s.mechanism) << '\n'
     << "clique_size=" << s.clique_size << '\n'
     << "boost=" << text::format_real(s.boost) << '\n'
     << "hub_degree=" << s.hub_degree << '\n'
     << "feature_noise=" << text::format_real(s.feature_noise) << '\n'
     << "perturb_offsets=";
  for (std::size_t i = 0; i < s.perturb_offsets.size(); ++i) os << (i ? "," : "") << s.perturb_offsets[i];
  os << '\n' << "seed=" << s.seed << '\n';
  return os.str();
}

namespace {

// Independent streams per concern so changing one knob does not reshuffle the others.
enum Stream : std::uint64_t { kPlant = 1, kFeatures, kLabels, kEdges, kEvents };

std::mt19937_64 stream(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

}  // namespace

std::vector<VertexId> planted_vertices(const GenSpec& spec) {
  spec.validate();
  std::vector<VertexId> all(spec.n);
  std::iota(all.begin(), all.end(), 0);
  auto rng = stream(spec.seed, kPlant);
  std::shuffle(all.begin(), all.end(), rng);
  switch (spec.mechanism) {
    case Mechanism::densify_clique:
      all.resize(spec.clique_size);
      break;
    case Mechanism::hub:
      all.resize(1);
      break;
    case Mechanism::shuffle:
      all.clear();
      break;
  }
  std::sort(all.begin(), all.end());
  return all;
}

DynamicGraph generate(const GenSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  const auto planted = planted_vertices(spec);

  DynamicGraph g;
  g.n = n;

  Matrix features(n, spec.d);
  {
    auto rng = stream(spec.seed, kFeatures);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& v : features.data()) v = spec.feature_noise * noise(rng);
  }

  g.labels.assign(spec.T, 0);
  {
    auto rng = stream(spec.seed, kLabels);
    std::bernoulli_distribution event(spec.event_prob);
    for (auto& l : g.labels) l = event(rng) ? 1 : 0;
  }

  std::vector<bool> perturbed(spec.T, false);
  if (spec.mechanism != Mechanism::shuffle) {
    for (std::size_t t = 0; t < spec.T; ++t) {
      if (g.labels[t] != 1) continue;
      for (auto off : spec.perturb_offsets) {
        if (off <= t) perturbed[t - off] = true;
      }
    }
  }

  auto edge_rng = stream(spec.seed, kEdges);
  auto event_rng = stream(spec.seed, kEvents);
  std::bernoulli_distribution base(spec.base_edge_prob);
  std::bernoulli_distribution boosted(spec.boost);
  std::uniform_real_distribution<double> weight(0.5, 1.5);

  for (std::size_t t = 0; t < spec.T; ++t) {
    Snapshot s;
    s.timestamp = static_cast<std::int64_t>(t);
    s.features = features;
    std::set<std::pair<VertexId, VertexId>> present;
    for (VertexId u = 0; u < n; ++u) {
      for (VertexId v = u + 1; v < n; ++v) {
        // Draw both the coin and the weight unconditionally to keep streams aligned.
        const bool on = base(edge_rng);
        const double w = weight(edge_rng);
        if (on) {
          s.edges.push_back(Edge{u, v, w});
          present.emplace(u, v);
        }
      }
    }
    if (perturbed[t]) {
      if (spec.mechanism == Mechanism::densify_clique) {
        for (std::size_t a = 0; a < planted.size(); ++a) {
          for (std::size_t b = a + 1; b < planted.size(); ++b) {
            const VertexId u = planted[a];
            const VertexId v = planted[b];
            const bool add = boosted(event_rng);
            const double w = weight(event_rng);
            if (add && !present.count({u, v})) s.edges.push_back(Edge{u, v, w});
          }
        }
      } else if (spec.mechanism == Mechanism::hub) {
        const VertexId hub = planted.front();
        std::vector<VertexId> candidates;
        for (VertexId v = 0; v < n; ++v) {
          if (v != hub && !present.count({std::min(hub, v), std::max(hub, v)})) candidates.push_back(v);
        }
        std::shuffle(candidates.begin(), candidates.end(), event_rng);
        candidates.resize(std::min(candidates.size(), spec.hub_degree));
        for (VertexId v : candidates) s.edges.push_back(Edge{std::min(hub, v), std::max(hub, v), weight(event_rng)});
      }
    }
    g.snapshots.push_back(std::move(s));
  }
  return g;
}

double planted_signal_z(const GenSpec& spec) {
  spec.validate();
  const double p = spec.base_edge_prob;
  switch (spec.mechanism) {
    case Mechanism::shuffle:
      return 0.0;
    case Mechanism::densify_clique: {
      const double pairs = static_cast<double>(spec.clique_size * (spec.clique_size - 1) / 2);
      const double added = pairs * (1.0 - p) * spec.boost;
      return added / std::sqrt(pairs * p * (1.0 - p));
    }
    case Mechanism::hub: {
      const double others = static_cast<double>(spec.n - 1);
      return static_cast<double>(spec.hub_degree) / std::sqrt(others * p * (1.0 - p));
    }
  }
  return 0.0;
}

Separability expected_separability(const GenSpec& spec) {
  if (spec.mechanism == Mechanism::shuffle || spec.event_prob == 0.0) return Separability::null;
  const double z = planted_signal_z(spec);
  if (z <= 0.0) return Separability::null;
  return z >= 6.0 ? Separability::trivial : Separability::hard;
}

}  // namespace dyged::synth
