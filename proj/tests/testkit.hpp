#pragma once

#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "qcode/graph.hpp"
#include "qcode/llm.hpp"

namespace qcode::testkit {

// Self-deleting scratch directory for test artifacts.
class ScopedTempDir {
 public:
  explicit ScopedTempDir(const std::string& tag);
  ~ScopedTempDir();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Backend with canned completion responses (consumed in order; the last one
// repeats) and hash embeddings. A negative sentinel response of "<<500>>"
// throws a retryable transport error instead.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> responses, std::size_t dim = 8);
  std::string complete(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::string name() const override { return "scripted"; }
  int completions_served() const { return served_; }
  int embed_batches_served() const { return embed_batches_; }

 private:
  std::vector<std::string> responses_;
  std::size_t dim_;
  std::mutex mutex_;
  int served_ = 0;
  int embed_batches_ = 0;
};

// Directed input edge for the brute-force oracle; forward means a -> b.
struct RelEdge {
  std::string a;
  std::string b;
  Relation relation = Relation::forward;
};

// Independent fixed-point closure: applies the transitivity and equivalence
// rules until nothing changes. Capped at 60 nodes.
std::set<DirectedFact> brute_closure(const std::vector<RelEdge>& edges);

// One seeded relation scenario for the incremental engine.
struct RelationCase {
  std::vector<std::string> nodes;
  std::vector<ClassifiedPair> pairs;
  std::vector<int> rounds;  // one round tag per pair, non-decreasing
  bool built_consistent = false;
  bool has_conflict = false;  // some pair closes to more than one relation
  bool has_cycle = false;     // the closed subsumption relation has a cycle
};

// Deterministic mixed suite: half consistent-by-construction cases, half
// arbitrary (usually conflicting) ones.
std::vector<RelationCase> random_relation_suite(std::uint64_t seed, int n_cases);

std::vector<RelEdge> to_rel_edges(const std::vector<ClassifiedPair>& pairs);

// Graph with the case's nodes added (frequency 0, label = id).
CodeGraph graph_from_case(const RelationCase& c);

// Seeded per-node frequencies in [0, 12] for cleanup tests.
void assign_random_frequencies(CodeGraph& graph, std::uint64_t seed);

std::string testdata_path(const std::string& name);

}  // namespace qcode::testkit
