#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcode/cluster.hpp"
#include "qcode/coder.hpp"
#include "qcode/graph.hpp"
#include "qcode/llm.hpp"
#include "qcode/prompts.hpp"

namespace qcode {

struct MetricWeights {
  std::array<double, 5> values{1.0, 1.0, 1.0, 1.0, 1.0};
};

struct MetricReport {
  double reusability = 0.0;
  double fitness = 0.0;
  double coverage = 0.0;
  double parsimony = 0.0;
  double stability = 0.0;
  double composite = 0.0;
  MetricWeights weights;
  int sample_size = 0;
  std::vector<std::string> sample_ids;
  int codebook_size = 0;
  int used_codes = 0;
  int fitness_judged = 0;
  int coverage_judged = 0;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Relative code frequencies over one datapoint set; values sum to 1.
struct CodeDistribution {
  std::map<CodeId, double> probabilities;

  void validate() const;  // non-negative, sums to 1 within 1e-9
};

CodeDistribution distribution_from_assignments(const std::vector<Assignment>& assignments);

// Fraction of codebook codes appearing in at least one test assignment.
double reusability(const Codebook& codebook, const std::vector<Assignment>& test_assignments);

struct JudgeOptions {
  int retries = 2;
  int prompt_token_budget = 10000;
};

// One judge call scored 1..10; out-of-range or unparseable output is retried,
// then the datapoint is excluded (nullopt).
std::optional<int> judge_fitness(LlmClient& client, const prompts::PromptSet& prompts,
                                 const ResearchQuestion& question, const std::string& datapoint,
                                 const std::vector<std::string>& code_labels,
                                 const JudgeOptions& options = {});

// Same with the coverage rubric. An empty assignment scores 1 by convention
// without a judge call (nothing is covered).
std::optional<int> judge_coverage(LlmClient& client, const prompts::PromptSet& prompts,
                                  const ResearchQuestion& question, const std::string& datapoint,
                                  const std::vector<std::string>& code_labels,
                                  const JudgeOptions& options = {});

// Mean of (s - 1) / 9 over judged scores.
double aggregate_judged(const std::vector<int>& scores);

// 1 - mean pairwise cosine over the codebook, clamped to [0, 1]. Requires at
// least two codes with embeddings.
double parsimony(const Codebook& codebook, const EmbeddingIndex& index);

// 1 - JSD(P || Q) with base-2 logarithms; supports are unioned with zero
// fill.
double stability(const CodeDistribution& train, const CodeDistribution& test);

double composite(const std::array<double, 5>& scores, const MetricWeights& weights = {});

// Ground-truth codebook entry for alignment.
struct GtCode {
  std::string id;
  std::string label;
  std::string description;
};

struct AlignmentReport {
  int cluster_count = 0;
  double recall = 0.0;
  std::map<std::string, std::vector<int>> matches;  // gt id -> matched clusters
  std::vector<std::vector<std::string>> cluster_codes;  // per cluster, the descriptor labels

  nlohmann::json to_json() const;
};

struct AlignOptions {
  int clusters = 30;
  int codes_per_cluster = 3;
  std::uint64_t seed = 0;
  int retries = 2;
  int prompt_token_budget = 20000;
};

// Aggregates our codebook into clusters, describes each with high-level
// codes, and asks one matching call to align the ground-truth codebook;
// recall = fraction of GT codes matching at least one cluster.
AlignmentReport align_codebooks(LlmClient& judge_client, Coder& coder,
                                const prompts::PromptSet& prompts, const Codebook& ours,
                                const EmbeddingIndex& index, const std::vector<GtCode>& gt,
                                const ResearchQuestion& question,
                                const AlignOptions& options = {});

}  // namespace qcode
