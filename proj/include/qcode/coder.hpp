#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "qcode/corpus.hpp"
#include "qcode/llm.hpp"
#include "qcode/prompts.hpp"

namespace qcode {

using CodeId = std::string;

enum class CodeOrigin { open, high_level, refined };

std::string to_string(CodeOrigin origin);
CodeOrigin code_origin_from_string(const std::string& s);

struct Code {
  CodeId id;
  std::string label;  // normalized, at most 12 words
  int frequency = 0;  // datapoints carrying the code
  CodeOrigin origin = CodeOrigin::open;
};

enum class Split { train, test };

struct Assignment {
  std::string datapoint_id;
  std::vector<CodeId> code_ids;
  int iteration = 0;
  Split split = Split::train;
};

// Stable id derived from the normalized label.
CodeId code_id_for_label(const std::string& normalized_label);

// Normalizes and enforces the 12-word bound (longer labels are truncated).
std::string canonical_label(std::string_view raw);

// Id <-> code store. Ids are injective over normalized labels; a hash
// collision between distinct labels is detected and rejected.
class CodeRegistry {
 public:
  const Code& register_label(std::string_view raw_label, CodeOrigin origin);
  const Code* find(const CodeId& id) const;
  const Code* find_label(std::string_view raw_label) const;
  const std::string& label_of(const CodeId& id) const;  // throws on unknown id
  bool contains(const CodeId& id) const;
  std::size_t size() const;
  std::vector<Code> all() const;  // sorted by id

  void set_frequency(const CodeId& id, int frequency);
  void reset_frequencies();

 private:
  mutable std::mutex mutex_;
  std::map<CodeId, Code> by_id_;
};

// Accepts a JSON array of strings (possibly inside other text or a code
// fence) or a newline-delimited list with optional bullets. Trims entries and
// drops empties. A JSON value of any other shape is a parse error.
std::vector<std::string> parse_code_list(const std::string& raw);

struct CoderOptions {
  int max_codes_per_datapoint = 20;
  int retries = 2;  // re-prompts on unparseable output
  int prompt_token_budget = 10000;
};

// LLM-driven open coding and high-level code generation.
class Coder {
 public:
  Coder(LlmClient& client, const prompts::PromptSet& prompts, CoderOptions options);

  // At most max_codes deduplicated codes with origin=open. Never empty for a
  // non-empty datapoint; errors after retries carry the raw output.
  std::vector<Code> open_code(const std::string& datapoint, const ResearchQuestion& question,
                              CodeRegistry& registry);

  // Exactly k codes with origin=high_level describing the cluster gist.
  std::vector<Code> generate_high_level_codes(const std::vector<Code>& cluster_codes, int k,
                                              const ResearchQuestion& question,
                                              CodeRegistry& registry);

  // Raw label variant used at test time, where nothing may be registered.
  std::vector<std::string> open_code_labels(const std::string& datapoint,
                                            const ResearchQuestion& question);

 private:
  std::vector<std::string> complete_code_list(const ChatRequest& req, const char* what);

  LlmClient& client_;
  const prompts::PromptSet& prompts_;
  CoderOptions options_;
};

}  // namespace qcode
