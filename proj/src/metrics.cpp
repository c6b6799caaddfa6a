#include "qcode/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

namespace qcode {

nlohmann::json MetricReport::to_json() const {
  return {{"reusability", reusability},
          {"fitness", fitness},
          {"coverage", coverage},
          {"parsimony", parsimony},
          {"stability", stability},
          {"composite", composite},
          {"weights", weights.values},
          {"sample_size", sample_size},
          {"sample_ids", sample_ids},
          {"counts",
           {{"codebook_size", codebook_size},
            {"used_codes", used_codes},
            {"fitness_judged", fitness_judged},
            {"coverage_judged", coverage_judged}}}};
}

std::string MetricReport::to_table() const {
  std::ostringstream out;
  auto row = [&](const char* name, double value) {
    out << name;
    for (std::size_t i = std::string(name).size(); i < 14; ++i) out << ' ';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    out << buf << "\n";
  };
  row("reusability", reusability);
  row("fitness", fitness);
  row("coverage", coverage);
  row("parsimony", parsimony);
  row("stability", stability);
  row("composite", composite);
  out << "sample_size   " << sample_size << "\n";
  out << "codebook_size " << codebook_size << "\n";
  return out.str();
}

void CodeDistribution::validate() const {
  double total = 0.0;
  for (const auto& [id, p] : probabilities) {
    if (p < 0.0) throw ValidationError("distribution has a negative probability at " + id);
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("distribution probabilities sum to " + std::to_string(total));
  }
}

CodeDistribution distribution_from_assignments(const std::vector<Assignment>& assignments) {
  CodeDistribution dist;
  long total = 0;
  for (const auto& a : assignments) {
    std::set<CodeId> unique(a.code_ids.begin(), a.code_ids.end());
    for (const auto& id : unique) {
      dist.probabilities[id] += 1.0;
      ++total;
    }
  }
  if (total > 0) {
    for (auto& [_, p] : dist.probabilities) p /= static_cast<double>(total);
  }
  return dist;
}

double reusability(const Codebook& codebook, const std::vector<Assignment>& test_assignments) {
  if (codebook.codes.empty()) throw ValidationError("reusability requires a non-empty codebook");
  std::set<CodeId> used;
  for (const auto& a : test_assignments) {
    for (const auto& id : a.code_ids) {
      if (codebook.contains(id)) used.insert(id);
    }
  }
  return static_cast<double>(used.size()) / static_cast<double>(codebook.codes.size());
}

namespace {

std::optional<int> run_judge(LlmClient& client, const std::string& system,
                             const std::string& user, const JudgeOptions& options) {
  static const std::regex kInteger(R"(-?\d+)");
  ChatRequest req;
  req.system_text = system;
  req.user_text = user;
  req.max_output_tokens = 8;
  req.prompt_token_budget = options.prompt_token_budget;
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    const std::string raw = client.complete(req);
    std::smatch m;
    if (std::regex_search(raw, m, kInteger)) {
      try {
        const int score = std::stoi(m[0].str());
        if (score >= 1 && score <= 10) return score;
      } catch (const std::exception&) {
      }
    }
    log_warn("judge returned unusable score \"" + trim(raw) + "\", retrying");
  }
  return std::nullopt;
}

std::string joined_labels(const std::vector<std::string>& labels) {
  std::ostringstream out;
  for (const auto& l : labels) out << "- " << l << "\n";
  return out.str();
}

}  // namespace

std::optional<int> judge_fitness(LlmClient& client, const prompts::PromptSet& prompts,
                                 const ResearchQuestion& question, const std::string& datapoint,
                                 const std::vector<std::string>& code_labels,
                                 const JudgeOptions& options) {
  if (code_labels.empty()) throw ValidationError("fitness judging requires a non-empty assignment");
  const std::string user = prompts::render(prompts.fitness, {{"question", question.text},
                                                             {"datapoint", datapoint},
                                                             {"codes", joined_labels(code_labels)}});
  return run_judge(client, prompts.judge_system, user, options);
}

std::optional<int> judge_coverage(LlmClient& client, const prompts::PromptSet& prompts,
                                  const ResearchQuestion& question, const std::string& datapoint,
                                  const std::vector<std::string>& code_labels,
                                  const JudgeOptions& options) {
  if (code_labels.empty()) return 1;  // nothing covered
  const std::string user = prompts::render(prompts.coverage, {{"question", question.text},
                                                              {"datapoint", datapoint},
                                                              {"codes", joined_labels(code_labels)}});
  return run_judge(client, prompts.judge_system, user, options);
}

double aggregate_judged(const std::vector<int>& scores) {
  if (scores.empty()) throw ValidationError("aggregate_judged requires at least one score");
  double total = 0.0;
  for (int s : scores) total += static_cast<double>(s - 1) / 9.0;
  return total / static_cast<double>(scores.size());
}

double parsimony(const Codebook& codebook, const EmbeddingIndex& index) {
  const std::size_t n = codebook.codes.size();
  if (n < 2) throw ValidationError("parsimony requires at least 2 codes");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const EmbeddingVector& vi = index.of(codebook.codes[i].id);
    for (std::size_t j = i + 1; j < n; ++j) {
      total += dot(vi, index.of(codebook.codes[j].id));
    }
  }
  const double mean = 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
  return std::clamp(1.0 - mean, 0.0, 1.0);
}

double stability(const CodeDistribution& train, const CodeDistribution& test) {
  train.validate();
  test.validate();
  std::set<CodeId> support;
  for (const auto& [id, _] : train.probabilities) support.insert(id);
  for (const auto& [id, _] : test.probabilities) support.insert(id);
  if (support.empty()) throw ValidationError("stability requires non-empty distributions");

  auto value = [](const CodeDistribution& d, const CodeId& id) {
    auto it = d.probabilities.find(id);
    return it == d.probabilities.end() ? 0.0 : it->second;
  };
  double jsd = 0.0;
  for (const auto& id : support) {
    const double p = value(train, id);
    const double q = value(test, id);
    const double m = 0.5 * (p + q);
    if (p > 0.0) jsd += 0.5 * p * std::log2(p / m);
    if (q > 0.0) jsd += 0.5 * q * std::log2(q / m);
  }
  return 1.0 - std::clamp(jsd, 0.0, 1.0);
}

double composite(const std::array<double, 5>& scores, const MetricWeights& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < 5; ++i) total += weights.values[i] * scores[i];
  return total;
}

nlohmann::json AlignmentReport::to_json() const {
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t i = 0; i < cluster_codes.size(); ++i) {
    clusters.push_back({{"cluster", static_cast<int>(i + 1)}, {"codes", cluster_codes[i]}});
  }
  return {{"cluster_count", cluster_count},
          {"recall", recall},
          {"matches", matches},
          {"clusters", clusters}};
}

AlignmentReport align_codebooks(LlmClient& judge_client, Coder& coder,
                                const prompts::PromptSet& prompts, const Codebook& ours,
                                const EmbeddingIndex& index, const std::vector<GtCode>& gt,
                                const ResearchQuestion& question, const AlignOptions& options) {
  if (ours.codes.empty()) throw ValidationError("alignment requires a non-empty codebook");
  if (gt.empty()) throw ValidationError("alignment requires a non-empty ground-truth codebook");

  const int k = std::max(1, std::min<int>(options.clusters, static_cast<int>(ours.codes.size())));
  std::vector<CodeId> ids;
  std::vector<EmbeddingVector> vectors;
  for (const auto& code : ours.codes) {
    ids.push_back(code.id);
    vectors.push_back(index.of(code.id));
  }
  const EmbeddingIndex book_index = EmbeddingIndex::build(std::move(ids), std::move(vectors));
  const Clustering clustering = kmeans(book_index, k, options.seed);

  AlignmentReport report;
  report.cluster_count = k;

  // Describe every cluster with high-level codes; registrations go to a
  // scratch registry so the fitted artifacts stay frozen.
  CodeRegistry scratch;
  const std::vector<std::vector<CodeId>> members = clustering.members(book_index);
  for (const auto& cluster : members) {
    std::vector<Code> cluster_codes;
    for (const auto& id : cluster) {
      const Code* code = ours.find(id);
      if (code != nullptr) cluster_codes.push_back(*code);
    }
    std::sort(cluster_codes.begin(), cluster_codes.end(), [](const Code& a, const Code& b) {
      if (a.frequency != b.frequency) return a.frequency > b.frequency;
      return a.label < b.label;
    });
    std::vector<std::string> labels;
    if (!cluster_codes.empty()) {
      for (const auto& code :
           coder.generate_high_level_codes(cluster_codes, options.codes_per_cluster, question,
                                           scratch)) {
        labels.push_back(code.label);
      }
    }
    report.cluster_codes.push_back(std::move(labels));
  }

  std::ostringstream clusters_text;
  for (std::size_t i = 0; i < report.cluster_codes.size(); ++i) {
    clusters_text << "Cluster " << (i + 1) << ": ";
    for (std::size_t j = 0; j < report.cluster_codes[i].size(); ++j) {
      if (j > 0) clusters_text << "; ";
      clusters_text << report.cluster_codes[i][j];
    }
    clusters_text << "\n";
  }
  std::ostringstream reference_text;
  for (const auto& code : gt) {
    reference_text << "- id: " << code.id << " label: " << code.label;
    if (!code.description.empty()) reference_text << " description: " << code.description;
    reference_text << "\n";
  }

  ChatRequest req;
  req.system_text = prompts.judge_system;
  req.prompt_token_budget = options.prompt_token_budget;
  req.user_text = prompts::render(
      prompts.align, {{"clusters", clusters_text.str()}, {"reference", reference_text.str()}});

  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    const std::string raw = judge_client.complete(req);
    nlohmann::json parsed;
    try {
      const std::size_t open = raw.find('{');
      const std::size_t close = raw.rfind('}');
      if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ParseError("no JSON object in matching output");
      }
      parsed = nlohmann::json::parse(raw.substr(open, close - open + 1));
      if (!parsed.is_object()) throw ParseError("matching output is not an object");
    } catch (const std::exception& e) {
      log_warn(std::string("alignment matching output unusable: ") + e.what());
      continue;
    }
    int matched = 0;
    for (const auto& code : gt) {
      std::vector<int> hits;
      if (parsed.contains(code.id) && parsed[code.id].is_array()) {
        for (const auto& v : parsed[code.id]) {
          if (v.is_number_integer()) {
            const int c = v.get<int>();
            if (c >= 1 && c <= k) hits.push_back(c);
          }
        }
      }
      std::sort(hits.begin(), hits.end());
      hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
      if (!hits.empty()) ++matched;
      report.matches[code.id] = std::move(hits);
    }
    report.recall = static_cast<double>(matched) / static_cast<double>(gt.size());
    return report;
  }
  throw ValidationError("alignment matching produced no parseable output after retries");
}

}  // namespace qcode
