#pragma once

#include <map>
#include <string>
#include <string_view>

namespace qcode::prompts {

// Default templates. Placeholders use {name} and are filled by render().
// Each template opens with a stable task line; the offline mock backend
// dispatches on those lines, so configs that override templates should keep
// them when running with --mock.

inline constexpr std::string_view kCoderSystem =
    "You are a meticulous qualitative coding assistant. You produce short, reusable "
    "codes that capture the salient properties of a datapoint with respect to a "
    "research question.";

inline constexpr std::string_view kOpenCodingUser =
    R"(Perform open coding on the datapoint below.

## Research question
{question}

## Datapoint
{datapoint}

## Instructions
Generate up to {max_codes} short descriptive codes (each at most 12 words) that capture the key insights of the datapoint relevant to the research question. Codes must be non-overlapping and unambiguous. Return a JSON array of strings and nothing else.
)";

inline constexpr std::string_view kHighLevelUser =
    R"(Generate high-level codes for a cluster of related codes.

## Research question
{question}

## Cluster codes
{cluster_codes}

## Instructions
Write exactly {k} high-level codes, each a short phrase (at most 12 words) that describes the gist of the cluster. Return a JSON array of strings and nothing else.
)";

inline constexpr std::string_view kClassifySystem =
    "You decide the semantic relation between two qualitative codes.";

inline constexpr std::string_view kClassifyUser =
    R"(Classify the relation between code A and code B.

Code A: {a}
Code B: {b}

Answer with exactly one of these tokens and nothing else:
forward     (A is semantically subordinate to B; A is a subtype of B)
backward    (B is semantically subordinate to A; B is a subtype of A)
equivalent  (A and B are near-identical in meaning)
orthogonal  (no containment in either direction)
)";

inline constexpr std::string_view kJudgeSystem =
    "You are a strict evaluator of qualitative codings. Answer with a single integer.";

inline constexpr std::string_view kFitnessUser =
    R"(You will rate how properly a set of codes describes a datapoint.

## Research question
{question}

## Datapoint
{datapoint}

## Assigned codes
{codes}

## Rubric
Score 1-10 for descriptive fitness: do the codes properly describe what the datapoint actually says, even if only partially? Coding a review that complains about slow delivery as "parking difficulty" would be improper and deserves a low score. Respond with a single integer from 1 to 10 and nothing else.
)";

inline constexpr std::string_view kCoverageUser =
    R"(You will rate how completely a set of codes covers a datapoint.

## Research question
{question}

## Datapoint
{datapoint}

## Assigned codes
{codes}

## Rubric
Score 1-10 for descriptive coverage: are all essential aspects of the datapoint that bear on the research question captured by the codes? If a review complains about both food serving speed and parking difficulty but the codes only mention parking, the coding misses an essential side and deserves a middling score at best. Respond with a single integer from 1 to 10 and nothing else.
)";

inline constexpr std::string_view kReviseSystem =
    "You maintain a reusable qualitative codebook.";

// Four sections in order: role and goal, datapoint, candidate pool,
// instructions.
inline constexpr std::string_view kReviseUser =
    R"(## Role and goal
Refine the code set for the datapoint below. You maintain a reusable codebook: prefer reusing candidate codes over inventing new ones, and keep every code short and descriptive.

## Datapoint
{datapoint}

## Candidate pool
{pool}

## Instructions
Return a JSON array of at most {max_codes} code labels describing the datapoint. Choose labels from the candidate pool whenever one fits. Mark any genuinely novel code by prefixing its label with "NEW:". Return the JSON array and nothing else.
)";

inline constexpr std::string_view kSelectUser =
    R"(## Role and goal
Select codes for the datapoint below from a frozen codebook. Do not invent new codes.

## Datapoint
{datapoint}

## Candidate pool
{pool}

## Instructions
Return a JSON array of at most {max_codes} code labels chosen only from the candidate pool. Do not invent new codes. If nothing in the pool applies, return []. Return the JSON array and nothing else.
)";

inline constexpr std::string_view kAlignUser =
    R"(Match each reference code to the candidate clusters below.

## Candidate clusters
{clusters}

## Reference codebook
{reference}

## Instructions
For every reference code, list the numbers of all clusters that express the same concept. Return a JSON object mapping each reference code id to an array of cluster numbers (an empty array when nothing matches). Return the JSON object and nothing else.
)";

inline constexpr std::string_view kReportUser =
    R"(Write a research summary answering the question from the fitted codebook.

## Research question
{question}

## Code hierarchy
{hierarchy}

## Code frequencies
{frequencies}

## Instructions
Write a concise markdown narrative that answers the research question, organized around the recurring patterns in the codebook and citing code frequencies. Lead with the most prevalent patterns.
)";

// Replaces every occurrence of {key} for each entry in vars.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

// Named template set, overridable from config (name -> file path).
struct PromptSet {
  std::string coder_system{kCoderSystem};
  std::string open_coding{kOpenCodingUser};
  std::string high_level{kHighLevelUser};
  std::string classify_system{kClassifySystem};
  std::string classify{kClassifyUser};
  std::string judge_system{kJudgeSystem};
  std::string fitness{kFitnessUser};
  std::string coverage{kCoverageUser};
  std::string revise_system{kReviseSystem};
  std::string revise{kReviseUser};
  std::string select{kSelectUser};
  std::string align{kAlignUser};
  std::string report{kReportUser};

  // Loads overrides; keys are template names (open_coding, high_level,
  // classify, fitness, coverage, revise, select, align, report).
  void apply_overrides(const std::map<std::string, std::string>& name_to_path);
};

}  // namespace qcode::prompts
