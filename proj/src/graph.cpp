#include "qcode/graph.hpp"

#include <algorithm>
#include <deque>

namespace qcode {

std::string to_string(Provenance p) {
  return p == Provenance::classified ? "classified" : "deduced";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "classified") return Provenance::classified;
  if (s == "deduced") return Provenance::deduced;
  throw ValidationError("unknown provenance: " + s);
}

namespace {

struct Strength {
  int provenance;  // deduced = 1 beats classified = 0
  int round;       // smaller wins

  bool stronger_than(const Strength& o) const {
    if (provenance != o.provenance) return provenance > o.provenance;
    return round < o.round;
  }
  bool operator==(const Strength& o) const {
    return provenance == o.provenance && round == o.round;
  }
};

int relation_priority(Relation r) {
  switch (r) {
    case Relation::equivalent: return 3;
    case Relation::forward: return 2;
    case Relation::backward: return 1;
    case Relation::orthogonal: return 0;
  }
  return 0;
}

Strength strength_of(const EdgeState& e) {
  return {e.provenance == Provenance::deduced ? 1 : 0, e.round};
}

// Resolves a set of per-relation candidate strengths into one edge.
EdgeState resolve_candidates(const std::vector<std::pair<Relation, Strength>>& candidates) {
  Strength best{-1, 0};
  for (const auto& [rel, s] : candidates) {
    (void)rel;
    if (best.provenance < 0 || s.stronger_than(best)) best = s;
  }
  bool has_forward = false;
  bool has_backward = false;
  Relation top = Relation::orthogonal;
  int top_priority = -1;
  for (const auto& [rel, s] : candidates) {
    if (!(s == best)) continue;
    if (rel == Relation::forward) has_forward = true;
    if (rel == Relation::backward) has_backward = true;
    if (relation_priority(rel) > top_priority) {
      top_priority = relation_priority(rel);
      top = rel;
    }
  }
  EdgeState out;
  out.provenance = best.provenance == 1 ? Provenance::deduced : Provenance::classified;
  out.round = best.round;
  // Opposed subsumption claims at equal strength mean mutual containment.
  out.relation = (has_forward && has_backward) ? Relation::equivalent : top;
  return out;
}

}  // namespace

EdgeState resolve_conflict(const EdgeState& existing, const EdgeState& incoming) {
  return resolve_candidates(
      {{existing.relation, strength_of(existing)}, {incoming.relation, strength_of(incoming)}});
}

void CodeGraph::add_code(const CodeRecord& record) {
  if (record.id.empty()) throw ValidationError("code record requires an id");
  auto [it, inserted] = records_.emplace(record.id, record);
  if (!inserted) {
    it->second.frequency = record.frequency;
    it->second.label = record.label;
    it->second.origin = record.origin;
  }
}

const CodeRecord& CodeGraph::record(const CodeId& id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw ValidationError("unknown code in graph: " + id);
  return it->second;
}

void CodeGraph::set_frequency(const CodeId& id, int frequency) {
  auto it = records_.find(id);
  if (it == records_.end()) throw ValidationError("unknown code in graph: " + id);
  it->second.frequency = frequency;
}

int CodeGraph::insert_relation(const ClassifiedPair& pair) {
  const int round = round_counter_ + 1;
  insert_relation(pair, round);
  return round;
}

void CodeGraph::insert_relation(const ClassifiedPair& pair, int round) {
  if (!has_code(pair.a)) throw ValidationError("unknown code in graph: " + pair.a);
  if (!has_code(pair.b)) throw ValidationError("unknown code in graph: " + pair.b);
  insert_edge(pair.a, pair.b, pair.label, Provenance::classified, round);
}

void CodeGraph::insert_edge(const CodeId& a, const CodeId& b, Relation relation,
                            Provenance provenance, int round) {
  if (!has_code(a)) throw ValidationError("unknown code in graph: " + a);
  if (!has_code(b)) throw ValidationError("unknown code in graph: " + b);
  if (a == b) throw ValidationError("self-relations are not allowed: " + a);
  closure_round_ = round;
  switch (relation) {
    case Relation::forward:
      insert_fact(a, b, Relation::forward, provenance, round);
      break;
    case Relation::backward:
      insert_fact(b, a, Relation::forward, provenance, round);
      break;
    case Relation::equivalent:
      insert_fact(a, b, Relation::equivalent, provenance, round);
      break;
    case Relation::orthogonal:
      insert_fact(a, b, Relation::orthogonal, provenance, round);
      break;
  }
  run_closure();
  round_counter_ = std::max(round_counter_, round);
  recompute_view();
}

// x and y are in actual direction here: forward means x -> y.
void CodeGraph::insert_fact(CodeId x, CodeId y, Relation relation, Provenance provenance,
                            int round) {
  if (x == y) return;
  CodeId a = x;
  CodeId b = y;
  Relation stored = relation;
  if (relation == Relation::forward) {
    if (b < a) {
      std::swap(a, b);
      stored = Relation::backward;
    }
  } else if (b < a) {
    std::swap(a, b);
  }
  PairFacts& facts = facts_[{a, b}];
  const auto rel_idx = static_cast<std::size_t>(stored);
  const auto prov_idx = provenance == Provenance::deduced ? 1u : 0u;
  FactSlot& slot = facts.slots[rel_idx][prov_idx];
  const bool relation_known =
      facts.slots[rel_idx][0].present || facts.slots[rel_idx][1].present;
  if (slot.present) {
    slot.round = std::min(slot.round, round);
  } else {
    slot.present = true;
    slot.round = round;
  }
  if (relation_known) return;

  // First fact for this (pair, relation): index it and let deduction run.
  if (relation == Relation::forward) {
    sub_out_[x].insert(y);
    sub_in_[y].insert(x);
    worklist_.push_back({x, y, Relation::forward});
  } else if (relation == Relation::equivalent) {
    equiv_[a].insert(b);
    equiv_[b].insert(a);
    worklist_.push_back({a, b, Relation::equivalent});
  }
  // Orthogonality participates in conflict resolution but never in deduction.
}

void CodeGraph::run_closure() {
  while (!worklist_.empty()) {
    const DirectedFact item = worklist_.back();
    worklist_.pop_back();
    if (item.relation == Relation::forward) {
      const std::vector<CodeId> preds(sub_in_[item.a].begin(), sub_in_[item.a].end());
      for (const CodeId& z : preds) {
        if (z != item.b) {
          insert_fact(z, item.b, Relation::forward, Provenance::deduced, closure_round_);
        }
      }
      const std::vector<CodeId> succs(sub_out_[item.b].begin(), sub_out_[item.b].end());
      for (const CodeId& z : succs) {
        if (z != item.a) {
          insert_fact(item.a, z, Relation::forward, Provenance::deduced, closure_round_);
        }
      }
    } else if (item.relation == Relation::equivalent) {
      const std::vector<CodeId> left(equiv_[item.a].begin(), equiv_[item.a].end());
      for (const CodeId& z : left) {
        if (z != item.b) {
          insert_fact(z, item.b, Relation::equivalent, Provenance::deduced, closure_round_);
        }
      }
      const std::vector<CodeId> right(equiv_[item.b].begin(), equiv_[item.b].end());
      for (const CodeId& z : right) {
        if (z != item.a) {
          insert_fact(item.a, z, Relation::equivalent, Provenance::deduced, closure_round_);
        }
      }
    }
  }
}

void CodeGraph::recompute_view() {
  view_.clear();
  for (auto& [_, rec] : records_) rec.in_degree = 0;
  for (const auto& [key, facts] : facts_) {
    std::vector<std::pair<Relation, Strength>> candidates;
    for (std::size_t rel = 0; rel < 4; ++rel) {
      const FactSlot& classified = facts.slots[rel][0];
      const FactSlot& deduced = facts.slots[rel][1];
      if (!classified.present && !deduced.present) continue;
      Strength s{deduced.present ? 1 : 0, deduced.present ? deduced.round : classified.round};
      candidates.emplace_back(static_cast<Relation>(rel), s);
    }
    if (candidates.empty()) continue;
    const EdgeState state = resolve_candidates(candidates);
    view_[key] = state;
    if (state.relation == Relation::forward) {
      records_.at(key.second).in_degree += 1;
    } else if (state.relation == Relation::backward) {
      records_.at(key.first).in_degree += 1;
    }
  }
}

std::set<DirectedFact> CodeGraph::fact_set() const {
  std::set<DirectedFact> out;
  for (const auto& [key, facts] : facts_) {
    for (std::size_t rel = 0; rel < 4; ++rel) {
      if (facts.slots[rel][0].present || facts.slots[rel][1].present) {
        out.insert({key.first, key.second, static_cast<Relation>(rel)});
      }
    }
  }
  return out;
}

std::vector<CodeId> CodeGraph::parents_of(const CodeId& id) const {
  std::vector<CodeId> out;
  for (const auto& [key, state] : view_) {
    if (state.relation == Relation::forward && key.first == id) out.push_back(key.second);
    if (state.relation == Relation::backward && key.second == id) out.push_back(key.first);
  }
  return out;
}

std::vector<CodeId> CodeGraph::children_of(const CodeId& id) const {
  std::vector<CodeId> out;
  for (const auto& [key, state] : view_) {
    if (state.relation == Relation::forward && key.second == id) out.push_back(key.first);
    if (state.relation == Relation::backward && key.first == id) out.push_back(key.second);
  }
  return out;
}

bool CodeGraph::connected(const CodeId& id) const {
  for (const auto& [key, state] : view_) {
    if (state.relation != Relation::forward && state.relation != Relation::backward) continue;
    if (key.first == id || key.second == id) return true;
  }
  return false;
}

nlohmann::json CodeGraph::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, rec] : records_) {
    nodes.push_back({{"id", id},
                     {"label", rec.label},
                     {"frequency", rec.frequency},
                     {"in_degree", rec.in_degree},
                     {"origin", qcode::to_string(rec.origin)}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [key, state] : view_) {
    edges.push_back({{"a", key.first},
                     {"b", key.second},
                     {"relation", qcode::to_string(state.relation)},
                     {"provenance", qcode::to_string(state.provenance)},
                     {"round", state.round}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

CodeGraph CodeGraph::from_json(const nlohmann::json& j) {
  CodeGraph graph;
  for (const auto& node : j.at("nodes")) {
    CodeRecord rec;
    rec.id = node.at("id").get<std::string>();
    rec.label = node.at("label").get<std::string>();
    rec.frequency = node.at("frequency").get<int>();
    rec.origin = node.contains("origin")
                     ? code_origin_from_string(node.at("origin").get<std::string>())
                     : CodeOrigin::open;
    graph.add_code(rec);
  }
  struct Loaded {
    CodeId a, b;
    Relation relation;
    Provenance provenance;
    int round;
  };
  std::vector<Loaded> edges;
  for (const auto& edge : j.at("edges")) {
    edges.push_back({edge.at("a").get<std::string>(), edge.at("b").get<std::string>(),
                     relation_from_string(edge.at("relation").get<std::string>()),
                     provenance_from_string(edge.at("provenance").get<std::string>()),
                     edge.at("round").get<int>()});
  }
  // Replay in round order so re-derived facts pick up the rounds they had in
  // the original run.
  std::sort(edges.begin(), edges.end(), [](const Loaded& x, const Loaded& y) {
    return std::tie(x.round, x.a, x.b) < std::tie(y.round, y.a, y.b);
  });
  for (const auto& e : edges) {
    graph.insert_edge(e.a, e.b, e.relation, e.provenance, e.round);
  }
  return graph;
}

CodeId CleanupRemap::resolve(const CodeId& id) const {
  auto it = moved.find(id);
  return it == moved.end() ? id : it->second;
}

CleanupRemap CleanupRemap::then(const CleanupRemap& next) const {
  CleanupRemap out;
  out.dropped = dropped;
  for (const auto& [from, to] : moved) {
    if (next.is_dropped(to)) {
      out.dropped.insert(from);
    } else {
      out.moved[from] = next.resolve(to);
    }
  }
  for (const auto& [from, to] : next.moved) {
    if (!moved.count(from) && !dropped.count(from)) out.moved[from] = to;
  }
  for (const auto& d : next.dropped) {
    if (!moved.count(d) && !dropped.count(d)) out.dropped.insert(d);
  }
  return out;
}

namespace {

// Directed subsumption adjacency of the resolved view.
std::map<CodeId, std::vector<CodeId>> view_digraph(const CodeGraph& graph) {
  std::map<CodeId, std::vector<CodeId>> adj;
  for (const auto& [id, _] : graph.records()) adj[id];
  for (const auto& [key, state] : graph.edges()) {
    if (state.relation == Relation::forward) {
      adj[key.first].push_back(key.second);
    } else if (state.relation == Relation::backward) {
      adj[key.second].push_back(key.first);
    }
  }
  return adj;
}

// Iterative Kosaraju strongly connected components.
std::map<CodeId, int> strongly_connected(const std::map<CodeId, std::vector<CodeId>>& adj) {
  std::vector<CodeId> order;
  std::set<CodeId> visited;
  for (const auto& [start, _] : adj) {
    if (visited.count(start)) continue;
    std::vector<std::pair<CodeId, std::size_t>> stack{{start, 0}};
    visited.insert(start);
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& succs = adj.at(node);
      if (next < succs.size()) {
        const CodeId succ = succs[next++];
        if (!visited.count(succ)) {
          visited.insert(succ);
          stack.emplace_back(succ, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }
  std::map<CodeId, std::vector<CodeId>> rev;
  for (const auto& [node, succs] : adj) {
    rev[node];
    for (const auto& s : succs) rev[s].push_back(node);
  }
  std::map<CodeId, int> component;
  int next_component = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (component.count(*it)) continue;
    std::vector<CodeId> stack{*it};
    component[*it] = next_component;
    while (!stack.empty()) {
      const CodeId node = stack.back();
      stack.pop_back();
      for (const auto& pred : rev.at(node)) {
        if (!component.count(pred)) {
          component[pred] = next_component;
          stack.push_back(pred);
        }
      }
    }
    ++next_component;
  }
  return component;
}

CodeGraph rebuild_graph(const CodeGraph& source,
                        const std::function<const CodeRecord*(const CodeId&)>& keep_record,
                        const std::function<bool(CodeId&, CodeId&, EdgeState&)>& map_edge) {
  CodeGraph out;
  for (const auto& [id, rec] : source.records()) {
    const CodeRecord* kept = keep_record(id);
    if (kept != nullptr) out.add_code(*kept);
  }
  struct Pending {
    CodeId a, b;
    EdgeState state;
  };
  std::vector<Pending> pending;
  for (const auto& [key, state] : source.edges()) {
    CodeId a = key.first;
    CodeId b = key.second;
    EdgeState s = state;
    if (!map_edge(a, b, s)) continue;
    if (a == b) continue;
    pending.push_back({a, b, s});
  }
  std::sort(pending.begin(), pending.end(), [](const Pending& x, const Pending& y) {
    return std::tie(x.state.round, x.a, x.b) < std::tie(y.state.round, y.a, y.b);
  });
  for (const auto& p : pending) {
    out.insert_edge(p.a, p.b, p.state.relation, p.state.provenance, p.state.round);
  }
  return out;
}

}  // namespace

bool subsumption_acyclic(const CodeGraph& graph) {
  const auto adj = view_digraph(graph);
  const auto component = strongly_connected(adj);
  std::map<int, int> sizes;
  for (const auto& [_, c] : component) ++sizes[c];
  for (const auto& [_, size] : sizes) {
    if (size > 1) return false;
  }
  return true;
}

CodeGraph collapse_cycles(const CodeGraph& graph) {
  const auto adj = view_digraph(graph);
  const auto component = strongly_connected(adj);
  std::map<int, int> sizes;
  for (const auto& [_, c] : component) ++sizes[c];
  bool has_cycle = false;
  for (const auto& [_, size] : sizes) {
    if (size > 1) {
      has_cycle = true;
      break;
    }
  }
  if (!has_cycle) return graph;

  return rebuild_graph(
      graph,
      [&](const CodeId& id) { return &graph.record(id); },
      [&](CodeId& a, CodeId& b, EdgeState& state) {
        const bool directed =
            state.relation == Relation::forward || state.relation == Relation::backward;
        if (directed && component.at(a) == component.at(b)) {
          // Mutual reachability means the pair is semantically equivalent.
          state.relation = Relation::equivalent;
          state.provenance = Provenance::deduced;
        }
        return true;
      });
}

GraphTransform merge_equivalents(const CodeGraph& graph, double w_n, double w_i) {
  // Equivalence classes = connected components over equivalent view edges.
  std::map<CodeId, std::vector<CodeId>> eq_adj;
  for (const auto& [key, state] : graph.edges()) {
    if (state.relation != Relation::equivalent) continue;
    eq_adj[key.first].push_back(key.second);
    eq_adj[key.second].push_back(key.first);
  }
  GraphTransform result;
  if (eq_adj.empty()) {
    result.graph = graph;
    return result;
  }

  std::set<CodeId> seen;
  for (const auto& [start, _] : eq_adj) {
    if (seen.count(start)) continue;
    std::vector<CodeId> members;
    std::vector<CodeId> stack{start};
    seen.insert(start);
    while (!stack.empty()) {
      const CodeId node = stack.back();
      stack.pop_back();
      members.push_back(node);
      auto it = eq_adj.find(node);
      if (it == eq_adj.end()) continue;
      for (const auto& next : it->second) {
        if (seen.insert(next).second) stack.push_back(next);
      }
    }
    if (members.size() < 2) continue;

    const CodeId* canonical = nullptr;
    double best_score = 0.0;
    for (const auto& id : members) {
      const CodeRecord& rec = graph.record(id);
      const double score = w_n * rec.frequency + w_i * rec.in_degree;
      if (canonical == nullptr || score > best_score ||
          (score == best_score &&
           std::tie(rec.label, id) <
               std::tie(graph.record(*canonical).label, *canonical))) {
        canonical = &id;
        best_score = score;
      }
    }
    for (const auto& id : members) {
      if (id != *canonical) result.remap.moved[id] = *canonical;
    }
  }

  std::map<CodeId, int> merged_frequency;
  for (const auto& [id, rec] : graph.records()) {
    merged_frequency[result.remap.resolve(id)] += rec.frequency;
  }

  result.graph = rebuild_graph(
      graph,
      [&](const CodeId& id) -> const CodeRecord* {
        static thread_local CodeRecord scratch;
        if (result.remap.moved.count(id)) return nullptr;
        scratch = graph.record(id);
        scratch.frequency = merged_frequency.at(id);
        return &scratch;
      },
      [&](CodeId& a, CodeId& b, EdgeState& state) {
        CodeId ra = result.remap.resolve(a);
        CodeId rb = result.remap.resolve(b);
        if (ra == rb) return false;
        // Re-orient a directed relation if canonical order flipped.
        if (rb < ra &&
            (state.relation == Relation::forward || state.relation == Relation::backward)) {
          state.relation = flip(state.relation);
          std::swap(ra, rb);
        }
        a = std::move(ra);
        b = std::move(rb);
        return true;
      });
  return result;
}

GraphTransform subsume_low_frequency(const CodeGraph& graph, int threshold) {
  struct Decision {
    bool drop = false;
    CodeId target;
  };
  std::map<CodeId, Decision> decisions;
  for (const auto& [id, rec] : graph.records()) {
    if (rec.frequency >= threshold) continue;
    const std::vector<CodeId> parents = graph.parents_of(id);
    Decision d;
    if (parents.empty()) {
      d.drop = true;
    } else {
      const CodeId* best = nullptr;
      for (const auto& p : parents) {
        if (best == nullptr) {
          best = &p;
          continue;
        }
        const CodeRecord& cand = graph.record(p);
        const CodeRecord& cur = graph.record(*best);
        if (std::tie(cur.frequency) < std::tie(cand.frequency) ||
            (cand.frequency == cur.frequency &&
             std::tie(cand.label, p) < std::tie(cur.label, *best))) {
          best = &p;
        }
      }
      d.target = *best;
    }
    decisions[id] = std::move(d);
  }

  GraphTransform result;
  if (decisions.empty()) {
    result.graph = graph;
    return result;
  }

  // Resolve chains of absorbed codes against the entry-state decisions; a
  // chain ending in a dropped code drops its whole tail.
  constexpr const char* kDropped = "";
  std::map<CodeId, CodeId> final_target;
  std::function<const CodeId&(const CodeId&)> resolve = [&](const CodeId& id) -> const CodeId& {
    auto memo = final_target.find(id);
    if (memo != final_target.end()) return memo->second;
    auto it = decisions.find(id);
    if (it == decisions.end()) return final_target.emplace(id, id).first->second;
    if (it->second.drop) return final_target.emplace(id, kDropped).first->second;
    const CodeId target = resolve(it->second.target);
    return final_target.emplace(id, target).first->second;
  };

  std::map<CodeId, int> absorbed_mass;
  for (const auto& [id, decision] : decisions) {
    (void)decision;
    const CodeId& target = resolve(id);
    if (target == kDropped) {
      result.remap.dropped.insert(id);
    } else {
      result.remap.moved[id] = target;
      absorbed_mass[target] += graph.record(id).frequency;
    }
  }

  result.graph = rebuild_graph(
      graph,
      [&](const CodeId& id) -> const CodeRecord* {
        static thread_local CodeRecord scratch;
        if (decisions.count(id)) return nullptr;
        scratch = graph.record(id);
        auto it = absorbed_mass.find(id);
        if (it != absorbed_mass.end()) scratch.frequency += it->second;
        return &scratch;
      },
      [&](CodeId& a, CodeId& b, EdgeState& state) {
        if (result.remap.is_dropped(a) || result.remap.is_dropped(b)) return false;
        CodeId ra = result.remap.resolve(a);
        CodeId rb = result.remap.resolve(b);
        if (ra == rb) return false;
        if (rb < ra &&
            (state.relation == Relation::forward || state.relation == Relation::backward)) {
          state.relation = flip(state.relation);
          std::swap(ra, rb);
        }
        a = std::move(ra);
        b = std::move(rb);
        return true;
      });
  return result;
}

GraphTransform cleanup(const CodeGraph& graph, const CleanupOptions& options) {
  GraphTransform result;
  result.graph = graph;

  // Merging re-pointed edges can close new cycles (and cycle collapse feeds
  // new equivalences), so iterate to a fixpoint; node count strictly drops on
  // every productive pass.
  auto stabilize = [&]() {
    for (;;) {
      CodeGraph collapsed = collapse_cycles(result.graph);
      GraphTransform merged =
          merge_equivalents(collapsed, options.merge_weight_frequency,
                            options.merge_weight_in_degree);
      const bool changed = !merged.remap.moved.empty();
      result.graph = std::move(merged.graph);
      result.remap = result.remap.then(merged.remap);
      if (!changed) break;
    }
  };

  stabilize();
  GraphTransform subsumed = subsume_low_frequency(result.graph, options.frequency_threshold);
  result.graph = std::move(subsumed.graph);
  result.remap = result.remap.then(subsumed.remap);
  stabilize();
  return result;
}

bool Codebook::contains(const CodeId& id) const { return find(id) != nullptr; }

const Code* Codebook::find(const CodeId& id) const {
  auto it = std::lower_bound(codes.begin(), codes.end(), id,
                             [](const Code& c, const CodeId& v) { return c.id < v; });
  if (it == codes.end() || it->id != id) return nullptr;
  return &*it;
}

nlohmann::json Codebook::to_json() const {
  nlohmann::json codes_json = nlohmann::json::array();
  for (const auto& code : codes) {
    codes_json.push_back({{"id", code.id},
                          {"label", code.label},
                          {"frequency", code.frequency},
                          {"origin", qcode::to_string(code.origin)}});
  }
  nlohmann::json rel_json = nlohmann::json::array();
  for (const auto& [child, parent] : subsumptions) {
    rel_json.push_back({{"child", child}, {"parent", parent}});
  }
  return {{"codes", codes_json}, {"subsumptions", rel_json}};
}

Codebook Codebook::from_json(const nlohmann::json& j) {
  Codebook book;
  for (const auto& c : j.at("codes")) {
    Code code;
    code.id = c.at("id").get<std::string>();
    code.label = c.at("label").get<std::string>();
    code.frequency = c.at("frequency").get<int>();
    code.origin = code_origin_from_string(c.at("origin").get<std::string>());
    book.codes.push_back(std::move(code));
  }
  std::sort(book.codes.begin(), book.codes.end(),
            [](const Code& a, const Code& b) { return a.id < b.id; });
  for (const auto& r : j.at("subsumptions")) {
    book.subsumptions.emplace_back(r.at("child").get<std::string>(),
                                   r.at("parent").get<std::string>());
  }
  return book;
}

Codebook extract_codebook(const CodeGraph& graph) {
  Codebook book;
  for (const auto& [id, rec] : graph.records()) {
    Code code;
    code.id = id;
    code.label = rec.label;
    code.frequency = rec.frequency;
    code.origin = rec.origin;
    book.codes.push_back(std::move(code));
  }
  for (const auto& [key, state] : graph.edges()) {
    if (state.relation == Relation::forward) {
      book.subsumptions.emplace_back(key.first, key.second);
    } else if (state.relation == Relation::backward) {
      book.subsumptions.emplace_back(key.second, key.first);
    } else if (state.relation == Relation::equivalent) {
      log_warn("extracting codebook from a graph that still has equivalent edges");
    }
  }
  return book;
}

}  // namespace qcode
