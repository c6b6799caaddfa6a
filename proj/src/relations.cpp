#include "qcode/relations.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

namespace qcode {

std::string to_string(Relation r) {
  switch (r) {
    case Relation::forward: return "forward";
    case Relation::backward: return "backward";
    case Relation::equivalent: return "equivalent";
    case Relation::orthogonal: return "orthogonal";
  }
  return "orthogonal";
}

Relation relation_from_string(const std::string& s) {
  if (s == "forward") return Relation::forward;
  if (s == "backward") return Relation::backward;
  if (s == "equivalent") return Relation::equivalent;
  if (s == "orthogonal") return Relation::orthogonal;
  throw ValidationError("unknown relation: " + s);
}

Relation flip(Relation r) {
  switch (r) {
    case Relation::forward: return Relation::backward;
    case Relation::backward: return Relation::forward;
    default: return r;
  }
}

std::string to_string(PairSource s) {
  return s == PairSource::llm_prompt ? "llm_prompt" : "remote_classifier";
}

PairSource pair_source_from_string(const std::string& s) {
  if (s == "llm_prompt") return PairSource::llm_prompt;
  if (s == "remote_classifier") return PairSource::remote_classifier;
  throw ValidationError("unknown pair source: " + s);
}

std::vector<ScoredPair> filter_pairs(const std::vector<CodeId>& cluster_codes,
                                     const EmbeddingIndex& index,
                                     const RelationOptions& options) {
  std::vector<ScoredPair> in_band;
  if (cluster_codes.size() < 2) return in_band;
  for (std::size_t i = 0; i < cluster_codes.size(); ++i) {
    for (std::size_t j = i + 1; j < cluster_codes.size(); ++j) {
      CodeId a = cluster_codes[i];
      CodeId b = cluster_codes[j];
      if (a == b) continue;
      if (b < a) std::swap(a, b);
      const double sim = index.similarity(a, b);
      if (sim >= options.band_low && sim <= options.band_high) {
        in_band.push_back({a, b, sim});
      }
    }
  }
  if (in_band.empty()) return in_band;
  std::sort(in_band.begin(), in_band.end(), [](const ScoredPair& x, const ScoredPair& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(options.top_fraction * static_cast<double>(in_band.size()))));
  if (in_band.size() > keep) in_band.resize(keep);
  return in_band;
}

LlmPairClassifier::LlmPairClassifier(LlmClient& client, const prompts::PromptSet& prompts)
    : client_(client), prompts_(prompts) {}

Relation LlmPairClassifier::classify(const std::string& label_a, const std::string& label_b) {
  ChatRequest req;
  req.system_text = prompts_.classify_system;
  req.user_text = prompts::render(prompts_.classify, {{"a", label_a}, {"b", label_b}});
  req.max_output_tokens = 8;
  const std::string raw = to_lower(trim(client_.complete(req)));
  if (raw.find("forward") == 0) return Relation::forward;
  if (raw.find("backward") == 0) return Relation::backward;
  if (raw.find("equivalent") == 0) return Relation::equivalent;
  if (raw.find("orthogonal") == 0) return Relation::orthogonal;
  log_warn("unrecognized relation token \"" + raw + "\", treating pair as orthogonal");
  return Relation::orthogonal;
}

RemotePairClassifier::RemotePairClassifier(std::string endpoint)
    : endpoint_(std::move(endpoint)) {
  if (endpoint_.empty()) throw ConfigError("remote classifier requires an endpoint");
}

Relation RemotePairClassifier::classify(const std::string& label_a, const std::string& label_b) {
  std::size_t scheme = endpoint_.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("remote classifier endpoint must include a scheme: " + endpoint_);
  }
  std::size_t path_pos = endpoint_.find('/', scheme + 3);
  const std::string base =
      path_pos == std::string::npos ? endpoint_ : endpoint_.substr(0, path_pos);
  const std::string path = path_pos == std::string::npos ? "/" : endpoint_.substr(path_pos);

  httplib::Client client(base);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  nlohmann::json body = {{"a", label_a}, {"b", label_b}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw TransportError("classifier request failed: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("classifier HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw TransportError("classifier HTTP " + std::to_string(res->status), false);
  }
  try {
    nlohmann::json parsed = nlohmann::json::parse(res->body);
    const std::string label = to_lower(parsed.at("label").get<std::string>());
    try {
      return relation_from_string(label);
    } catch (const ValidationError&) {
      log_warn("unrecognized classifier label \"" + label + "\", treating pair as orthogonal");
      return Relation::orthogonal;
    }
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed classifier response: ") + e.what(), false);
  }
}

std::vector<ClassifiedPair> classify_pairs(const std::vector<ScoredPair>& pairs,
                                           PairClassifier& classifier,
                                           const CodeRegistry& registry, int workers) {
  std::vector<ClassifiedPair> out(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    const ScoredPair& p = pairs[i];
    ClassifiedPair cp;
    cp.a = p.a;
    cp.b = p.b;
    cp.similarity = p.similarity;
    cp.source = classifier.source();
    cp.label = classifier.classify(registry.label_of(p.a), registry.label_of(p.b));
    out[i] = std::move(cp);
  });
  return out;
}

}  // namespace qcode
