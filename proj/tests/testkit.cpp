#include "testkit.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <map>

namespace qcode::testkit {

namespace {
std::atomic<int> g_temp_counter{0};
}

ScopedTempDir::ScopedTempDir(const std::string& tag) {
  path_ = std::filesystem::temp_directory_path() /
          ("qcode-" + tag + "-" + std::to_string(::getpid()) + "-" +
           std::to_string(g_temp_counter.fetch_add(1)));
  std::filesystem::create_directories(path_);
}

ScopedTempDir::~ScopedTempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses, std::size_t dim)
    : responses_(std::move(responses)), dim_(dim) {
  if (responses_.empty()) responses_.push_back("");
}

std::string ScriptedBackend::complete(const ChatRequest&) {
  std::lock_guard<std::mutex> lock(mutex_);
  const std::size_t i = std::min(static_cast<std::size_t>(served_), responses_.size() - 1);
  ++served_;
  const std::string& r = responses_[i];
  if (r == "<<500>>") throw TransportError("HTTP 500 (scripted)", true);
  return r;
}

std::vector<EmbeddingVector> ScriptedBackend::embed(const std::vector<std::string>& texts) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++embed_batches_;
  std::vector<EmbeddingVector> out;
  for (const auto& t : texts) {
    DetRng rng(fnv1a64(t));
    EmbeddingVector v(dim_);
    for (auto& x : v) x = rng.next_gaussian();
    out.push_back(std::move(v));
  }
  return out;
}

std::set<DirectedFact> brute_closure(const std::vector<RelEdge>& edges) {
  std::set<std::string> nodes;
  for (const auto& e : edges) {
    nodes.insert(e.a);
    nodes.insert(e.b);
  }
  if (nodes.size() > 60) throw ValidationError("brute_closure is capped at 60 nodes");

  std::set<std::pair<std::string, std::string>> sub;  // directed x -> y
  std::set<std::pair<std::string, std::string>> eq;   // unordered, stored min/max
  std::set<std::pair<std::string, std::string>> orth;
  auto unordered = [](const std::string& x, const std::string& y) {
    return x < y ? std::make_pair(x, y) : std::make_pair(y, x);
  };
  for (const auto& e : edges) {
    if (e.a == e.b) continue;
    switch (e.relation) {
      case Relation::forward: sub.insert({e.a, e.b}); break;
      case Relation::backward: sub.insert({e.b, e.a}); break;
      case Relation::equivalent: eq.insert(unordered(e.a, e.b)); break;
      case Relation::orthogonal: orth.insert(unordered(e.a, e.b)); break;
    }
  }

  // Fixed point of both inference rules.
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::pair<std::string, std::string>> new_sub;
    for (const auto& [x, y] : sub) {
      for (const auto& [y2, z] : sub) {
        if (y == y2 && x != z && !sub.count({x, z})) new_sub.emplace_back(x, z);
      }
    }
    for (const auto& e : new_sub) {
      if (sub.insert(e).second) changed = true;
    }
    std::vector<std::pair<std::string, std::string>> new_eq;
    for (const auto& [x, y] : eq) {
      for (const auto& [u, v] : eq) {
        for (const auto& [p, q] : {std::make_pair(x, y), std::make_pair(y, x)}) {
          for (const auto& [r, s] : {std::make_pair(u, v), std::make_pair(v, u)}) {
            if (q == r && p != s && !eq.count(unordered(p, s))) {
              new_eq.push_back(unordered(p, s));
            }
          }
        }
      }
    }
    for (const auto& e : new_eq) {
      if (eq.insert(e).second) changed = true;
    }
  }

  std::set<DirectedFact> out;
  for (const auto& [x, y] : sub) {
    if (x < y) {
      out.insert({x, y, Relation::forward});
    } else {
      out.insert({y, x, Relation::backward});
    }
  }
  for (const auto& [x, y] : eq) out.insert({x, y, Relation::equivalent});
  for (const auto& [x, y] : orth) out.insert({x, y, Relation::orthogonal});
  return out;
}

std::vector<RelEdge> to_rel_edges(const std::vector<ClassifiedPair>& pairs) {
  std::vector<RelEdge> out;
  for (const auto& p : pairs) out.push_back({p.a, p.b, p.label});
  return out;
}

namespace {

std::string node_name(std::size_t i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "n%02zu", i);
  return buf;
}

ClassifiedPair make_pair_for(const std::string& x, const std::string& y, Relation rel) {
  ClassifiedPair p;
  if (x < y) {
    p.a = x;
    p.b = y;
    p.label = rel;
  } else {
    p.a = y;
    p.b = x;
    p.label = flip(rel);
  }
  p.similarity = 0.7;
  return p;
}

// Consistent ground truth: nodes partitioned into equivalence groups laid out
// on a random DAG; sampled pair labels are the true relations, so the closure
// never conflicts.
RelationCase consistent_case(DetRng& rng) {
  RelationCase c;
  c.built_consistent = true;
  const std::size_t n = 4 + rng.next_below(37);  // 4..40 nodes
  const std::size_t n_groups = 2 + rng.next_below(std::max<std::size_t>(2, n / 2));
  std::vector<int> group(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.nodes.push_back(node_name(i));
    group[i] = static_cast<int>(rng.next_below(n_groups));
  }
  // reach[g][h]: group g is-a group h, transitively closed over a DAG in
  // topological order g < h.
  std::vector<std::vector<bool>> reach(n_groups, std::vector<bool>(n_groups, false));
  for (std::size_t g = 0; g < n_groups; ++g) {
    for (std::size_t h = g + 1; h < n_groups; ++h) {
      if (rng.next_double() < 0.3) reach[g][h] = true;
    }
  }
  for (std::size_t k = 0; k < n_groups; ++k) {
    for (std::size_t g = 0; g < n_groups; ++g) {
      for (std::size_t h = 0; h < n_groups; ++h) {
        if (reach[g][k] && reach[k][h]) reach[g][h] = true;
      }
    }
  }
  auto true_relation = [&](std::size_t i, std::size_t j) {
    const auto gi = static_cast<std::size_t>(group[i]);
    const auto gj = static_cast<std::size_t>(group[j]);
    if (gi == gj) return Relation::equivalent;
    if (reach[gi][gj]) return Relation::forward;
    if (reach[gj][gi]) return Relation::backward;
    return Relation::orthogonal;
  };

  const std::size_t max_pairs = n * (n - 1) / 2;
  const std::size_t m = std::min<std::size_t>(2 + rng.next_below(2 * n), max_pairs);
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  while (chosen.size() < m) {
    std::size_t i = rng.next_below(n);
    std::size_t j = rng.next_below(n);
    if (i == j) continue;
    if (j < i) std::swap(i, j);
    chosen.insert({i, j});
  }
  for (const auto& [i, j] : chosen) {
    c.pairs.push_back(make_pair_for(c.nodes[i], c.nodes[j], true_relation(i, j)));
  }
  return c;
}

RelationCase arbitrary_case(DetRng& rng) {
  RelationCase c;
  const std::size_t n = 4 + rng.next_below(37);
  for (std::size_t i = 0; i < n; ++i) c.nodes.push_back(node_name(i));
  const std::size_t m = std::min<std::size_t>(3 + rng.next_below(3 * n), n * (n - 1) / 2);
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  while (chosen.size() < m) {
    std::size_t i = rng.next_below(n);
    std::size_t j = rng.next_below(n);
    if (i == j) continue;
    if (j < i) std::swap(i, j);
    chosen.insert({i, j});
  }
  static const Relation kAll[] = {Relation::forward, Relation::backward, Relation::equivalent,
                                  Relation::orthogonal};
  for (const auto& [i, j] : chosen) {
    c.pairs.push_back(make_pair_for(c.nodes[i], c.nodes[j], kAll[rng.next_below(4)]));
  }
  return c;
}

void label_case(RelationCase& c, DetRng& rng) {
  // Deterministic pair order inside the case, then 1..3 round boundaries.
  std::sort(c.pairs.begin(), c.pairs.end(), [](const ClassifiedPair& x, const ClassifiedPair& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  const int n_rounds = 1 + static_cast<int>(rng.next_below(3));
  c.rounds.resize(c.pairs.size());
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    c.rounds[i] = 1 + static_cast<int>(i * static_cast<std::size_t>(n_rounds) / c.pairs.size());
  }

  // Conflict: some unordered pair closes to more than one relation.
  const std::set<DirectedFact> closure = brute_closure(to_rel_edges(c.pairs));
  std::map<std::pair<std::string, std::string>, std::set<Relation>> per_pair;
  for (const auto& f : closure) per_pair[{f.a, f.b}].insert(f.relation);
  for (const auto& [_, rels] : per_pair) {
    if (rels.size() > 1) {
      c.has_conflict = true;
      break;
    }
  }
  // Cycle: mutual subsumption inside the closure.
  for (const auto& [pair, rels] : per_pair) {
    (void)pair;
    if (rels.count(Relation::forward) && rels.count(Relation::backward)) {
      c.has_cycle = true;
      break;
    }
  }
}

}  // namespace

std::vector<RelationCase> random_relation_suite(std::uint64_t seed, int n_cases) {
  DetRng rng(seed ^ fnv1a64("relation-suite"));
  std::vector<RelationCase> cases;
  cases.reserve(static_cast<std::size_t>(n_cases));
  for (int i = 0; i < n_cases; ++i) {
    RelationCase c = (i % 2 == 0) ? consistent_case(rng) : arbitrary_case(rng);
    label_case(c, rng);
    cases.push_back(std::move(c));
  }
  return cases;
}

CodeGraph graph_from_case(const RelationCase& c) {
  CodeGraph graph;
  for (const auto& node : c.nodes) {
    CodeRecord rec;
    rec.id = node;
    rec.label = node;
    graph.add_code(rec);
  }
  return graph;
}

void assign_random_frequencies(CodeGraph& graph, std::uint64_t seed) {
  DetRng rng(seed ^ fnv1a64("frequencies"));
  for (const auto& [id, _] : graph.records()) {
    graph.set_frequency(id, static_cast<int>(rng.next_below(13)));
  }
}

std::string testdata_path(const std::string& name) {
  return std::string(QCODE_TESTDATA_DIR) + "/" + name;
}

}  // namespace qcode::testkit
