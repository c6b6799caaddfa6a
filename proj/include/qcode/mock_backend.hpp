#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "qcode/llm.hpp"

namespace qcode {

// Deterministic offline backend. Completions are scripted per prompt kind
// (dispatching on the default templates' task lines):
//   - open coding: the most frequent non-stopword unigrams and bigrams of the
//     datapoint, interleaved, as a JSON array
//   - high-level codes: "<top token> theme" labels derived from the cluster
//   - pair classification: equal labels -> equivalent; strict token-superset
//     -> the superset side is the subtype; otherwise orthogonal
//   - judge prompts: a planted "SCORE=n" marker wins, else a seeded hash score
//   - revision/selection: candidate-pool labels ranked by token overlap with
//     the datapoint; never invents codes unless the pool is empty
//   - alignment matching and report generation: token-overlap heuristics
// Embeddings are seeded hash projections of the token bag onto the unit
// sphere, so equal texts embed identically and token overlap drives cosine
// similarity.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::uint64_t seed, std::size_t embedding_dim = 64);

  std::string complete(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::string name() const override { return "mock"; }

  std::uint64_t seed() const { return seed_; }
  std::size_t embedding_dim() const { return embedding_dim_; }

 private:
  std::string open_coding_reply(const std::string& user) const;
  std::string high_level_reply(const std::string& user) const;
  std::string classify_reply(const std::string& user) const;
  std::string judge_reply(const std::string& user) const;
  std::string revise_reply(const std::string& user, bool allow_new) const;
  std::string align_reply(const std::string& user) const;
  std::string report_reply(const std::string& user) const;

  EmbeddingVector token_vector(const std::string& token) const;

  std::uint64_t seed_;
  std::size_t embedding_dim_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, EmbeddingVector> token_cache_;
};

// Section helpers shared with tests: returns the body of a "## name" section
// (until the next "## " heading), or "" when absent.
std::string extract_section(const std::string& text, const std::string& name);

// Ranked salient terms of a text: most frequent non-stopword unigrams and
// bigrams, interleaved, at most max_terms.
std::vector<std::string> salient_terms(const std::string& text, std::size_t max_terms);

}  // namespace qcode
