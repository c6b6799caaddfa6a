#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "qcode/relations.hpp"

namespace qcode {

enum class Provenance { classified, deduced };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct CodeRecord {
  CodeId id;
  std::string label;
  int frequency = 0;
  int in_degree = 0;  // incoming subsumption edges in the resolved view
  CodeOrigin origin = CodeOrigin::open;
};

using PairKey = std::pair<CodeId, CodeId>;  // first < second

struct EdgeState {
  Relation relation = Relation::orthogonal;  // oriented for the canonical pair
  Provenance provenance = Provenance::classified;
  int round = 0;
};

// One directed fact in the closure: forward means a -> b for the canonical
// (a, b); equivalent and orthogonal are symmetric.
struct DirectedFact {
  CodeId a;
  CodeId b;
  Relation relation;

  bool operator<(const DirectedFact& o) const {
    return std::tie(a, b, relation) < std::tie(o.a, o.b, o.relation);
  }
  bool operator==(const DirectedFact& o) const {
    return a == o.a && b == o.b && relation == o.relation;
  }
};

// Pairwise conflict rule for one unordered pair: deduced beats classified,
// then the earlier round wins. At equal strength, opposed subsumption
// directions collapse to an equivalence (mutual containment), and otherwise a
// fixed relation priority (equivalent > forward > backward > orthogonal)
// decides. Associative and commutative, so the stored view never depends on
// arrival order within a round.
EdgeState resolve_conflict(const EdgeState& existing, const EdgeState& incoming);

// Labeled relation graph with active deduction. Every inserted relation is
// kept as a fact; transitivity (A->B, B->C => A->C) and equivalence chaining
// (X<->Y, Y<->Z => X<->Z) run to fixpoint via BFS after each insertion, and
// the stored per-pair view is resolved from the accumulated facts.
class CodeGraph {
 public:
  void add_code(const CodeRecord& record);
  bool has_code(const CodeId& id) const { return records_.count(id) > 0; }
  const CodeRecord& record(const CodeId& id) const;
  const std::map<CodeId, CodeRecord>& records() const { return records_; }
  std::size_t node_count() const { return records_.size(); }

  void set_frequency(const CodeId& id, int frequency);

  // Inserts a classified pair; the overload without a round assigns the next
  // insertion ordinal. Unknown endpoints are an error.
  int insert_relation(const ClassifiedPair& pair);
  void insert_relation(const ClassifiedPair& pair, int round);

  // Seeds an arbitrary fact (used by cleanup rebuilds and persistence).
  void insert_edge(const CodeId& a, const CodeId& b, Relation relation, Provenance provenance,
                   int round);

  // Resolved one-relation-per-pair view.
  const std::map<PairKey, EdgeState>& edges() const { return view_; }

  // All accumulated facts, including ones shadowed by conflict resolution.
  std::set<DirectedFact> fact_set() const;

  std::vector<CodeId> parents_of(const CodeId& id) const;   // targets of outgoing subsumption
  std::vector<CodeId> children_of(const CodeId& id) const;  // sources of incoming subsumption
  bool connected(const CodeId& id) const;  // has at least one subsumption edge

  int next_round() const { return round_counter_ + 1; }

  nlohmann::json to_json() const;
  static CodeGraph from_json(const nlohmann::json& j);

 private:
  struct FactSlot {
    bool present = false;
    int round = 0;
  };
  struct PairFacts {
    // Indexed [relation][provenance].
    FactSlot slots[4][2];
  };

  void insert_fact(CodeId x, CodeId y, Relation relation, Provenance provenance, int round);
  void run_closure();
  void recompute_view();

  std::map<CodeId, CodeRecord> records_;
  std::map<PairKey, PairFacts> facts_;
  std::map<PairKey, EdgeState> view_;
  // Directed adjacency over facts (not the view), driving the deductions.
  std::map<CodeId, std::set<CodeId>> sub_out_;  // x -> {y : fact x->y}
  std::map<CodeId, std::set<CodeId>> sub_in_;
  std::map<CodeId, std::set<CodeId>> equiv_;
  std::vector<DirectedFact> worklist_;
  int round_counter_ = 0;
  int closure_round_ = 0;
};

// Node-id rewrite produced by a cleanup stage; absent keys map to themselves.
struct CleanupRemap {
  std::map<CodeId, CodeId> moved;
  std::set<CodeId> dropped;

  CodeId resolve(const CodeId& id) const;
  bool is_dropped(const CodeId& id) const { return dropped.count(id) > 0; }
  // Applies `next` after this remap.
  CleanupRemap then(const CleanupRemap& next) const;
};

struct GraphTransform {
  CodeGraph graph;
  CleanupRemap remap;
};

// Collapses every directed subsumption cycle in the view into equivalences,
// leaving acyclic graphs untouched.
CodeGraph collapse_cycles(const CodeGraph& graph);

// Replaces each equivalence class by its best-scoring member
// (w_n * frequency + w_i * in_degree, ties to the smallest label). The
// canonical code absorbs class frequencies and re-pointed edges.
GraphTransform merge_equivalents(const CodeGraph& graph, double w_n = 0.5, double w_i = 0.5);

// Absorbs codes below the frequency threshold into their highest-frequency
// parent; parentless ones are dropped. Decisions are taken against the entry
// state, so the result does not depend on processing order.
GraphTransform subsume_low_frequency(const CodeGraph& graph, int threshold = 6);

struct CleanupOptions {
  double merge_weight_frequency = 0.5;
  double merge_weight_in_degree = 0.5;
  int frequency_threshold = 6;
};

// Full cleanup: cycle collapse and equivalence merging to fixpoint, then
// low-frequency subsumption, then another collapse/merge fixpoint (re-pointed
// edges can close new cycles). Post-conditions: no equivalent edges, acyclic
// subsumption, no surviving code below the threshold.
GraphTransform cleanup(const CodeGraph& graph, const CleanupOptions& options = {});

// The frozen artifact of a fitted run: cleaned code set plus subsumption
// hierarchy as (child, parent) pairs.
struct Codebook {
  std::vector<Code> codes;  // sorted by id
  std::vector<std::pair<CodeId, CodeId>> subsumptions;

  bool contains(const CodeId& id) const;
  const Code* find(const CodeId& id) const;
  std::size_t size() const { return codes.size(); }

  nlohmann::json to_json() const;
  static Codebook from_json(const nlohmann::json& j);
};

Codebook extract_codebook(const CodeGraph& graph);

// True when the view's subsumption relation contains no directed cycle.
bool subsumption_acyclic(const CodeGraph& graph);

}  // namespace qcode
