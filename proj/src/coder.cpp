#include "qcode/coder.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qcode {

std::string to_string(CodeOrigin origin) {
  switch (origin) {
    case CodeOrigin::open: return "open";
    case CodeOrigin::high_level: return "high_level";
    case CodeOrigin::refined: return "refined";
  }
  return "open";
}

CodeOrigin code_origin_from_string(const std::string& s) {
  if (s == "open") return CodeOrigin::open;
  if (s == "high_level") return CodeOrigin::high_level;
  if (s == "refined") return CodeOrigin::refined;
  throw ValidationError("unknown code origin: " + s);
}

CodeId code_id_for_label(const std::string& normalized_label) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "c%016llx",
                static_cast<unsigned long long>(fnv1a64(normalized_label)));
  return std::string(buf);
}

std::string canonical_label(std::string_view raw) {
  std::string normalized = normalize_label(raw);
  std::vector<std::string> words = split_words(normalized);
  if (words.size() <= 12) return normalized;
  std::ostringstream out;
  for (std::size_t i = 0; i < 12; ++i) {
    if (i > 0) out << ' ';
    out << words[i];
  }
  return out.str();
}

const Code& CodeRegistry::register_label(std::string_view raw_label, CodeOrigin origin) {
  const std::string label = canonical_label(raw_label);
  if (label.empty()) throw ValidationError("cannot register an empty code label");
  const CodeId id = code_id_for_label(label);
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = by_id_.find(id);
  if (it != by_id_.end()) {
    if (it->second.label != label) {
      throw ValidationError("code id hash collision between \"" + it->second.label +
                            "\" and \"" + label + "\"");
    }
    return it->second;
  }
  Code code;
  code.id = id;
  code.label = label;
  code.origin = origin;
  return by_id_.emplace(id, std::move(code)).first->second;
}

const Code* CodeRegistry::find(const CodeId& id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &it->second;
}

const Code* CodeRegistry::find_label(std::string_view raw_label) const {
  const std::string label = canonical_label(raw_label);
  if (label.empty()) return nullptr;
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = by_id_.find(code_id_for_label(label));
  return it == by_id_.end() ? nullptr : &it->second;
}

const std::string& CodeRegistry::label_of(const CodeId& id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ValidationError("unknown code id: " + id);
  return it->second.label;
}

bool CodeRegistry::contains(const CodeId& id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return by_id_.count(id) > 0;
}

std::size_t CodeRegistry::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return by_id_.size();
}

std::vector<Code> CodeRegistry::all() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<Code> out;
  out.reserve(by_id_.size());
  for (const auto& [_, code] : by_id_) out.push_back(code);
  return out;
}

void CodeRegistry::set_frequency(const CodeId& id, int frequency) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ValidationError("unknown code id: " + id);
  it->second.frequency = frequency;
}

void CodeRegistry::reset_frequencies() {
  std::lock_guard<std::mutex> lock(mutex_);
  for (auto& [_, code] : by_id_) code.frequency = 0;
}

namespace {

std::string strip_code_fences(const std::string& raw) {
  std::string s = trim(raw);
  if (s.rfind("```", 0) == 0) {
    std::size_t first_newline = s.find('\n');
    std::size_t last_fence = s.rfind("```");
    if (first_newline != std::string::npos && last_fence > first_newline) {
      return trim(s.substr(first_newline + 1, last_fence - first_newline - 1));
    }
  }
  return s;
}

std::vector<std::string> parse_bullet_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0) {
      t = trim(t.substr(2));
    } else {
      // Numbered bullets: "3. label" / "3) label".
      std::size_t i = 0;
      while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
      if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) t = trim(t.substr(i + 1));
    }
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

std::vector<std::string> parse_code_list(const std::string& raw) {
  const std::string s = strip_code_fences(raw);
  const std::size_t open_bracket = s.find('[');
  if (open_bracket != std::string::npos) {
    const std::size_t close_bracket = s.rfind(']');
    if (close_bracket != std::string::npos && close_bracket > open_bracket) {
      const std::string body = s.substr(open_bracket, close_bracket - open_bracket + 1);
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(body);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON list: ") + e.what());
      }
      if (!parsed.is_array()) throw ParseError("expected a JSON array of strings");
      std::vector<std::string> out;
      for (const auto& item : parsed) {
        if (!item.is_string()) throw ParseError("code list entries must be strings");
        std::string t = trim(item.get<std::string>());
        if (!t.empty()) out.push_back(std::move(t));
      }
      return out;
    }
  }
  const std::string t = trim(s);
  if (!t.empty() && t.front() == '{') {
    throw ParseError("expected a list of codes, got a JSON object");
  }
  std::vector<std::string> lines = parse_bullet_lines(s);
  if (lines.empty()) throw ParseError("no codes recognized in output");
  return lines;
}

Coder::Coder(LlmClient& client, const prompts::PromptSet& prompts, CoderOptions options)
    : client_(client), prompts_(prompts), options_(options) {}

std::vector<std::string> Coder::complete_code_list(const ChatRequest& req, const char* what) {
  std::string last_raw;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    last_raw = client_.complete(req);
    try {
      std::vector<std::string> labels = parse_code_list(last_raw);
      if (!labels.empty()) return labels;
      log_warn(std::string(what) + ": empty code list, re-prompting");
    } catch (const ParseError& e) {
      log_warn(std::string(what) + ": " + e.what() + ", re-prompting");
    }
  }
  throw CodingError(std::string(what) + " produced no parseable code list after " +
                        std::to_string(options_.retries + 1) + " attempts",
                    last_raw);
}

namespace {

// Case-insensitive dedup on canonical labels, preserving first occurrence.
std::vector<std::string> dedup_labels(const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& raw : labels) {
    const std::string canonical = canonical_label(raw);
    if (canonical.empty()) continue;
    if (seen.insert(canonical).second) out.push_back(canonical);
  }
  return out;
}

}  // namespace

std::vector<std::string> Coder::open_code_labels(const std::string& datapoint,
                                                 const ResearchQuestion& question) {
  if (trim(datapoint).empty()) throw ValidationError("cannot open-code an empty datapoint");
  ChatRequest req;
  req.system_text = prompts_.coder_system;
  req.prompt_token_budget = options_.prompt_token_budget;
  std::string body = datapoint;
  // Leave room for the fixed prompt parts; cut the datapoint tail if needed.
  const int fixed = estimate_tokens(prompts_.open_coding) + estimate_tokens(req.system_text) +
                    estimate_tokens(question.text);
  const long budget_chars =
      static_cast<long>(options_.prompt_token_budget - fixed - 16) * 4;
  if (budget_chars > 0 && static_cast<long>(body.size()) > budget_chars) {
    body = body.substr(0, static_cast<std::size_t>(budget_chars));
    log_warn("datapoint truncated to fit the prompt token budget");
  }
  req.user_text = prompts::render(prompts_.open_coding,
                                  {{"question", question.text},
                                   {"datapoint", body},
                                   {"max_codes", std::to_string(options_.max_codes_per_datapoint)}});
  std::vector<std::string> labels = dedup_labels(complete_code_list(req, "open coding"));
  if (labels.empty()) {
    throw CodingError("open coding produced only empty labels", "");
  }
  if (labels.size() > static_cast<std::size_t>(options_.max_codes_per_datapoint)) {
    labels.resize(static_cast<std::size_t>(options_.max_codes_per_datapoint));
  }
  return labels;
}

std::vector<Code> Coder::open_code(const std::string& datapoint,
                                   const ResearchQuestion& question, CodeRegistry& registry) {
  std::vector<Code> codes;
  for (const auto& label : open_code_labels(datapoint, question)) {
    codes.push_back(registry.register_label(label, CodeOrigin::open));
  }
  return codes;
}

std::vector<Code> Coder::generate_high_level_codes(const std::vector<Code>& cluster_codes, int k,
                                                   const ResearchQuestion& question,
                                                   CodeRegistry& registry) {
  if (cluster_codes.empty()) throw ValidationError("cluster must be non-empty");
  if (k < 1) throw ValidationError("high-level code count must be >= 1");

  std::ostringstream members;
  for (const auto& code : cluster_codes) members << "- " << code.label << "\n";
  ChatRequest req;
  req.system_text = prompts_.coder_system;
  req.prompt_token_budget = options_.prompt_token_budget;
  req.user_text = prompts::render(prompts_.high_level, {{"question", question.text},
                                                        {"cluster_codes", members.str()},
                                                        {"k", std::to_string(k)}});
  std::string last_raw;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    last_raw = client_.complete(req);
    std::vector<std::string> labels;
    try {
      labels = dedup_labels(parse_code_list(last_raw));
    } catch (const ParseError& e) {
      log_warn(std::string("high-level coding: ") + e.what() + ", re-prompting");
      continue;
    }
    if (labels.size() >= static_cast<std::size_t>(k)) {
      labels.resize(static_cast<std::size_t>(k));
      std::vector<Code> codes;
      for (const auto& label : labels) {
        codes.push_back(registry.register_label(label, CodeOrigin::high_level));
      }
      return codes;
    }
    log_warn("high-level coding returned " + std::to_string(labels.size()) + " labels, need " +
             std::to_string(k) + ", re-prompting");
  }
  throw CodingError("high-level coding failed to produce " + std::to_string(k) +
                        " codes after " + std::to_string(options_.retries + 1) + " attempts",
                    last_raw);
}

}  // namespace qcode
