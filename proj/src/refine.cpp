#include "qcode/refine.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace qcode {

bool CandidatePool::contains(const CodeId& id) const {
  for (const auto& c : entries) {
    if (c.id == id) return true;
  }
  return false;
}

namespace {

int max_frequency(const CodeGraph& graph) {
  int best = 0;
  for (const auto& [_, rec] : graph.records()) best = std::max(best, rec.frequency);
  return best;
}

double hybrid_score(double similarity, int frequency, int max_freq,
                    const RefineOptions& options) {
  const double sim = std::clamp(similarity, 0.0, 1.0);
  const double freq_norm =
      max_freq > 0 ? static_cast<double>(frequency) / static_cast<double>(max_freq) : 0.0;
  return options.weight_semantic * sim + options.weight_frequency * freq_norm;
}

}  // namespace

std::vector<Candidate> generate_candidates(const PoolAnchor& anchor, const CodeGraph& graph,
                                           const EmbeddingIndex& index,
                                           const RefineOptions& options) {
  const int max_freq = max_frequency(graph);

  struct Scored {
    CodeId id;
    double similarity;
    double hybrid;
    int frequency;
  };
  std::vector<Scored> semantic;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const CodeId& other = index.ids[i];
    if (anchor.member && other == anchor.id) continue;
    const double sim = dot(anchor.embedding, index.vectors[i]);
    if (sim < options.semantic_floor) continue;
    const int freq = graph.has_code(other) ? graph.record(other).frequency : 0;
    semantic.push_back({other, sim, hybrid_score(sim, freq, max_freq, options), freq});
  }
  std::sort(semantic.begin(), semantic.end(), [](const Scored& a, const Scored& b) {
    if (a.hybrid != b.hybrid) return a.hybrid > b.hybrid;
    return a.id < b.id;
  });

  const bool connected = anchor.member && graph.has_code(anchor.id) && graph.connected(anchor.id);
  std::vector<Candidate> out;
  std::set<CodeId> seen;
  auto push = [&](const CodeId& id, double score) {
    if (seen.insert(id).second) out.push_back({id, score});
  };

  if (!connected) {
    const std::size_t cap = static_cast<std::size_t>(options.max_candidates_per_code);
    for (const auto& s : semantic) {
      if (out.size() >= cap) break;
      push(s.id, s.hybrid);
    }
    return out;
  }

  const std::size_t half = static_cast<std::size_t>(options.max_candidates_per_code) / 2;
  for (const auto& s : semantic) {
    if (out.size() >= half) break;
    push(s.id, s.hybrid);
  }

  // One layer of graph neighbors: parents, children, and siblings (other
  // children of the anchor's parents), ranked by frequency.
  std::set<CodeId> neighbor_set;
  const std::vector<CodeId> parents = graph.parents_of(anchor.id);
  for (const auto& p : parents) {
    neighbor_set.insert(p);
    for (const auto& sib : graph.children_of(p)) neighbor_set.insert(sib);
  }
  for (const auto& c : graph.children_of(anchor.id)) neighbor_set.insert(c);
  neighbor_set.erase(anchor.id);

  struct Neighbor {
    CodeId id;
    int frequency;
  };
  std::vector<Neighbor> neighbors;
  for (const auto& id : neighbor_set) {
    neighbors.push_back({id, graph.record(id).frequency});
  }
  std::sort(neighbors.begin(), neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.id < b.id;
  });
  std::size_t taken = 0;
  for (const auto& n : neighbors) {
    if (taken >= half) break;
    if (seen.count(n.id)) continue;
    double sim = 0.0;
    if (index.contains(n.id)) sim = dot(anchor.embedding, index.of(n.id));
    push(n.id, hybrid_score(sim, n.frequency, max_freq, options));
    ++taken;
  }
  return out;
}

std::vector<Candidate> generate_candidates(const CodeId& code_id, const CodeGraph& graph,
                                           const EmbeddingIndex& index,
                                           const RefineOptions& options) {
  PoolAnchor anchor;
  anchor.id = code_id;
  anchor.embedding = index.of(code_id);
  anchor.member = true;
  return generate_candidates(anchor, graph, index, options);
}

CandidatePool assemble_pool(const std::vector<PoolAnchor>& anchors, const CodeGraph& graph,
                            const EmbeddingIndex& index, const RefineOptions& options) {
  if (anchors.size() > 20) {
    throw ValidationError("assemble_pool accepts at most 20 previous codes, got " +
                          std::to_string(anchors.size()));
  }
  CandidatePool pool;
  std::map<CodeId, double> best_score;
  for (const auto& anchor : anchors) {
    std::vector<Candidate> candidates = generate_candidates(anchor, graph, index, options);
    for (const auto& c : candidates) {
      auto it = best_score.find(c.id);
      if (it == best_score.end() || c.score > it->second) best_score[c.id] = c.score;
    }
    pool.keyed_view[anchor.id] = std::move(candidates);
  }
  pool.entries.reserve(best_score.size());
  for (const auto& [id, score] : best_score) pool.entries.push_back({id, score});
  std::sort(pool.entries.begin(), pool.entries.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (pool.entries.size() > static_cast<std::size_t>(options.pool_cap)) {
    pool.entries.resize(static_cast<std::size_t>(options.pool_cap));
  }
  return pool;
}

ChatRequest build_revision_prompt(const std::string& datapoint, const CandidatePool& pool,
                                  const CodeRegistry& registry,
                                  const prompts::PromptSet& prompts,
                                  const RefineOptions& options, bool allow_new) {
  if (pool.entries.size() > static_cast<std::size_t>(options.pool_cap)) {
    throw ValidationError("candidate pool exceeds the cap of " +
                          std::to_string(options.pool_cap) + " (internal invariant violation)");
  }
  std::ostringstream pool_text;
  if (pool.entries.empty()) {
    pool_text << "(empty)";
  } else {
    for (const auto& c : pool.entries) {
      pool_text << "- " << registry.label_of(c.id) << "\n";
    }
  }
  const std::string& tmpl = allow_new ? prompts.revise : prompts.select;
  const std::string& system = prompts.revise_system;

  ChatRequest req;
  req.system_text = system;
  req.prompt_token_budget = options.prompt_token_budget;

  const std::string max_codes = std::to_string(options.max_codes);
  // Size the fixed parts first, then cut the datapoint tail to fit.
  const std::string skeleton = prompts::render(
      tmpl, {{"datapoint", ""}, {"pool", pool_text.str()}, {"max_codes", max_codes}});
  const int fixed_tokens = estimate_tokens(skeleton) + estimate_tokens(system);
  const long available_chars =
      (static_cast<long>(options.prompt_token_budget) - fixed_tokens) * 4L;
  std::string body = datapoint;
  if (available_chars < 0 || static_cast<long>(body.size()) > available_chars) {
    const std::size_t keep =
        available_chars > 0 ? static_cast<std::size_t>(available_chars) : 0;
    body = body.substr(0, keep);
    log_warn("datapoint tail-truncated to fit the " +
             std::to_string(options.prompt_token_budget) + "-token prompt budget");
  }
  req.user_text = prompts::render(
      tmpl, {{"datapoint", body}, {"pool", pool_text.str()}, {"max_codes", max_codes}});
  if (estimate_request_tokens(req) > options.prompt_token_budget) {
    throw BudgetError("revision prompt still over budget after truncation");
  }
  return req;
}

namespace {

struct MappedOutput {
  std::vector<CodeId> codes;
  int new_codes = 0;
};

// Maps raw labels onto code ids. Bare labels must resolve against the
// registry; "NEW:" labels register into register_to (when allowed) or are
// dropped.
std::optional<MappedOutput> map_labels(const std::vector<std::string>& labels,
                                       const CodeRegistry& registry, CodeRegistry* register_to,
                                       bool allow_new, bool pool_only,
                                       const CandidatePool& pool) {
  MappedOutput out;
  std::set<CodeId> seen;
  for (const auto& raw : labels) {
    std::string label = raw;
    bool is_new = false;
    if (starts_with_icase(label, "NEW:")) {
      is_new = true;
      label = trim(label.substr(4));
      if (label.empty()) continue;
    }
    if (is_new) {
      if (!allow_new || register_to == nullptr) {
        log_warn("dropping NEW code proposed against a frozen codebook: " + label);
        continue;
      }
      const Code& code = register_to->register_label(label, CodeOrigin::refined);
      if (seen.insert(code.id).second) out.codes.push_back(code.id);
      ++out.new_codes;
      continue;
    }
    const Code* existing = registry.find_label(label);
    if (existing == nullptr) {
      if (pool_only) {
        log_warn("dropping unknown label proposed against a frozen codebook: " + label);
        continue;
      }
      // Unknown bare label at fit time: the output broke the protocol.
      return std::nullopt;
    }
    if (pool_only && !pool.contains(existing->id)) {
      log_warn("dropping out-of-pool label at prediction time: " + existing->label);
      continue;
    }
    if (seen.insert(existing->id).second) out.codes.push_back(existing->id);
  }
  return out;
}

}  // namespace

RevisionResult revise_datapoint(LlmClient& client, const std::string& datapoint,
                                const std::vector<CodeId>& previous_codes,
                                const CandidatePool& pool, CodeRegistry& registry,
                                const prompts::PromptSet& prompts,
                                const RefineOptions& options) {
  const ChatRequest req =
      build_revision_prompt(datapoint, pool, registry, prompts, options, /*allow_new=*/true);
  RevisionResult result;
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    const std::string raw = client.complete(req);
    std::vector<std::string> labels;
    try {
      labels = parse_code_list(raw);
    } catch (const ParseError& e) {
      log_warn(std::string("revision output unparseable: ") + e.what());
      continue;
    }
    std::optional<MappedOutput> mapped =
        map_labels(labels, registry, &registry, /*allow_new=*/true, /*pool_only=*/false, pool);
    if (!mapped || mapped->codes.empty()) {
      log_warn("revision output failed validation, re-prompting");
      continue;
    }
    if (mapped->codes.size() > static_cast<std::size_t>(options.max_codes)) {
      log_warn("revision returned " + std::to_string(mapped->codes.size()) +
               " codes; keeping the first " + std::to_string(options.max_codes));
      mapped->codes.resize(static_cast<std::size_t>(options.max_codes));
    }
    result.codes = std::move(mapped->codes);
    result.new_codes = mapped->new_codes;
    return result;
  }
  result.codes = previous_codes;
  result.fell_back = true;
  return result;
}

std::vector<CodeId> select_codes(LlmClient& client, const std::string& datapoint,
                                 const CandidatePool& pool, const CodeRegistry& registry,
                                 const prompts::PromptSet& prompts,
                                 const RefineOptions& options) {
  const ChatRequest req =
      build_revision_prompt(datapoint, pool, registry, prompts, options, /*allow_new=*/false);
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    const std::string raw = client.complete(req);
    std::vector<std::string> labels;
    try {
      labels = parse_code_list(raw);
    } catch (const ParseError& e) {
      log_warn(std::string("selection output unparseable: ") + e.what());
      continue;
    }
    std::optional<MappedOutput> mapped =
        map_labels(labels, registry, nullptr, /*allow_new=*/false, /*pool_only=*/true, pool);
    if (!mapped) continue;
    if (mapped->codes.size() > static_cast<std::size_t>(options.max_codes)) {
      mapped->codes.resize(static_cast<std::size_t>(options.max_codes));
    }
    return mapped->codes;
  }
  log_warn("selection failed after retries; recording an empty prediction");
  return {};
}

}  // namespace qcode
