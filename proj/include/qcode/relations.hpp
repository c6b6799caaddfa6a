#pragma once

#include <string>
#include <vector>

#include "qcode/cluster.hpp"
#include "qcode/coder.hpp"
#include "qcode/llm.hpp"
#include "qcode/prompts.hpp"

namespace qcode {

enum class Relation { forward, backward, equivalent, orthogonal };

std::string to_string(Relation r);
Relation relation_from_string(const std::string& s);

// Canonical pair re-orientation: swapping endpoints flips forward/backward.
Relation flip(Relation r);

enum class PairSource { llm_prompt, remote_classifier };

std::string to_string(PairSource s);
PairSource pair_source_from_string(const std::string& s);

// A candidate pair inside the similarity band, canonical with a < b.
struct ScoredPair {
  CodeId a;
  CodeId b;
  double similarity = 0.0;
};

struct ClassifiedPair {
  CodeId a;
  CodeId b;
  Relation label = Relation::orthogonal;
  double similarity = 0.0;
  PairSource source = PairSource::llm_prompt;
};

struct RelationOptions {
  double band_low = 0.5;
  double band_high = 0.90;
  double top_fraction = 0.10;
};

// All pairwise cosine similarities inside one cluster, kept when they land in
// [band_low, band_high] (inclusive), then cut to the top
// ceil(top_fraction * m) by similarity (at least 1 when any survive). Pairs
// not returned are implicitly orthogonal.
std::vector<ScoredPair> filter_pairs(const std::vector<CodeId>& cluster_codes,
                                     const EmbeddingIndex& index,
                                     const RelationOptions& options = {});

// One-pair classifier contract. Implementations must label every pair or
// throw; there is no silent partial output.
class PairClassifier {
 public:
  virtual ~PairClassifier() = default;
  virtual Relation classify(const std::string& label_a, const std::string& label_b) = 0;
  virtual PairSource source() const = 0;
};

// Default route: a single-pair prompt that demands one of four tokens.
// Unrecognized responses map to orthogonal.
class LlmPairClassifier : public PairClassifier {
 public:
  LlmPairClassifier(LlmClient& client, const prompts::PromptSet& prompts);
  Relation classify(const std::string& label_a, const std::string& label_b) override;
  PairSource source() const override { return PairSource::llm_prompt; }

 private:
  LlmClient& client_;
  const prompts::PromptSet& prompts_;
};

// Remote fine-tuned classifier speaking the one-token wire contract:
// POST endpoint with {"a": label, "b": label} -> {"label": "forward|..."}.
class RemotePairClassifier : public PairClassifier {
 public:
  explicit RemotePairClassifier(std::string endpoint);
  Relation classify(const std::string& label_a, const std::string& label_b) override;
  PairSource source() const override { return PairSource::remote_classifier; }

 private:
  std::string endpoint_;
};

// Labels every filtered pair via the classifier; transport errors propagate.
std::vector<ClassifiedPair> classify_pairs(const std::vector<ScoredPair>& pairs,
                                           PairClassifier& classifier,
                                           const CodeRegistry& registry, int workers = 1);

}  // namespace qcode
