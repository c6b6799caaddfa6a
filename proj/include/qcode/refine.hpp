#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qcode/cluster.hpp"
#include "qcode/graph.hpp"
#include "qcode/llm.hpp"
#include "qcode/prompts.hpp"

namespace qcode {

struct Candidate {
  CodeId id;
  double score = 0.0;  // hybrid = w_s * similarity + w_f * normalized frequency
};

struct CandidatePool {
  std::vector<Candidate> entries;  // deduplicated, sorted by score descending
  std::map<CodeId, std::vector<Candidate>> keyed_view;  // anchor -> its candidates

  bool contains(const CodeId& id) const;
};

struct RefineOptions {
  int max_candidates_per_code = 10;
  int pool_cap = 200;
  double semantic_floor = 0.6;
  double weight_semantic = 0.5;
  double weight_frequency = 0.5;
  int max_codes = 20;
  int prompt_token_budget = 10000;
  int retries = 2;
};

// Retrieval anchor: a fitted code (member = true) or a transient query code
// from test-time open coding (member = false, never excluded from matching
// its own label in the codebook).
struct PoolAnchor {
  CodeId id;
  EmbeddingVector embedding;
  bool member = true;
};

// Candidates for one code. Graph-connected codes take up to 5 semantic
// neighbors at or above the similarity floor (hybrid-ranked) plus up to 5
// one-layer graph neighbors (parents, children, siblings; frequency-ranked);
// unconnected codes fall back to the top 10 hybrid-ranked semantic codes.
std::vector<Candidate> generate_candidates(const PoolAnchor& anchor, const CodeGraph& graph,
                                           const EmbeddingIndex& index,
                                           const RefineOptions& options = {});

// Convenience overload for codes that live in the index/graph.
std::vector<Candidate> generate_candidates(const CodeId& code_id, const CodeGraph& graph,
                                           const EmbeddingIndex& index,
                                           const RefineOptions& options = {});

// Union of per-anchor candidates, deduplicated (max score wins), ranked by
// hybrid score, pruned to the pool cap. At most 20 anchors.
CandidatePool assemble_pool(const std::vector<PoolAnchor>& anchors, const CodeGraph& graph,
                            const EmbeddingIndex& index, const RefineOptions& options = {});

// Four sections in order: role/goal, datapoint, candidate pool, instructions.
// The datapoint text is tail-truncated to honor the token budget; a pool over
// the cap is an internal invariant violation.
ChatRequest build_revision_prompt(const std::string& datapoint, const CandidatePool& pool,
                                  const CodeRegistry& registry,
                                  const prompts::PromptSet& prompts,
                                  const RefineOptions& options, bool allow_new);

struct RevisionResult {
  std::vector<CodeId> codes;
  int new_codes = 0;
  bool fell_back = false;  // validation failed; previous codes retained
};

// LLM revision for one datapoint: pool labels map to existing ids, "NEW:"
// labels register as refined codes, output is capped at max_codes. After the
// retry budget the previous codes are kept unchanged.
RevisionResult revise_datapoint(LlmClient& client, const std::string& datapoint,
                                const std::vector<CodeId>& previous_codes,
                                const CandidatePool& pool, CodeRegistry& registry,
                                const prompts::PromptSet& prompts, const RefineOptions& options);

// Test-time selection against a frozen codebook: NEW codes are disallowed and
// dropped with a warning; empty output is a valid (uncovered) prediction.
std::vector<CodeId> select_codes(LlmClient& client, const std::string& datapoint,
                                 const CandidatePool& pool, const CodeRegistry& registry,
                                 const prompts::PromptSet& prompts, const RefineOptions& options);

}  // namespace qcode
