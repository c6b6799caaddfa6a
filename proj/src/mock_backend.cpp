#include "qcode/mock_backend.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qcode {

namespace {

struct TermCount {
  std::string term;
  int count = 0;
  std::size_t first_seen = 0;
};

std::vector<TermCount> ranked(const std::map<std::string, TermCount>& counts) {
  std::vector<TermCount> out;
  out.reserve(counts.size());
  for (const auto& [_, tc] : counts) out.push_back(tc);
  std::sort(out.begin(), out.end(), [](const TermCount& a, const TermCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.first_seen < b.first_seen;
  });
  return out;
}

bool keepable(const std::string& token) {
  if (token.size() < 3) return false;
  if (is_stopword(token)) return false;
  bool all_digits = true;
  for (char c : token) {
    if (c < '0' || c > '9') {
      all_digits = false;
      break;
    }
  }
  return !all_digits;
}

std::set<std::string> content_tokens(const std::string& text) {
  std::set<std::string> out;
  for (const auto& t : tokenize(text)) {
    if (keepable(t)) out.insert(t);
  }
  return out;
}

std::string json_array(const std::vector<std::string>& items) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : items) arr.push_back(s);
  return arr.dump();
}

std::vector<std::string> section_lines(const std::string& body) {
  std::vector<std::string> lines;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t == "(empty)") continue;
    if (t.rfind("- ", 0) == 0) t = trim(t.substr(2));
    lines.push_back(t);
  }
  return lines;
}

}  // namespace

std::string extract_section(const std::string& text, const std::string& name) {
  const std::string header = "## " + name;
  std::size_t pos = text.find(header);
  if (pos == std::string::npos) return "";
  pos = text.find('\n', pos);
  if (pos == std::string::npos) return "";
  ++pos;
  std::size_t end = text.find("\n## ", pos);
  if (end == std::string::npos) end = text.size();
  return trim(text.substr(pos, end - pos));
}

std::vector<std::string> salient_terms(const std::string& text, std::size_t max_terms) {
  std::vector<std::string> tokens = tokenize(text);
  std::map<std::string, TermCount> unigrams;
  std::map<std::string, TermCount> bigrams;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!keepable(tokens[i])) continue;
    auto& u = unigrams[tokens[i]];
    if (u.count == 0) {
      u.term = tokens[i];
      u.first_seen = i;
    }
    ++u.count;
    if (i + 1 < tokens.size() && keepable(tokens[i + 1])) {
      const std::string bg = tokens[i] + " " + tokens[i + 1];
      auto& b = bigrams[bg];
      if (b.count == 0) {
        b.term = bg;
        b.first_seen = i;
      }
      ++b.count;
    }
  }
  std::vector<TermCount> uni = ranked(unigrams);
  std::vector<TermCount> bi = ranked(bigrams);

  std::vector<std::string> out;
  std::set<std::string> seen;
  std::size_t iu = 0;
  std::size_t ib = 0;
  while (out.size() < max_terms && (iu < uni.size() || ib < bi.size())) {
    if (iu < uni.size() && seen.insert(uni[iu].term).second) out.push_back(uni[iu].term);
    ++iu;
    if (out.size() >= max_terms) break;
    if (ib < bi.size() && seen.insert(bi[ib].term).second) out.push_back(bi[ib].term);
    ++ib;
  }
  return out;
}

MockBackend::MockBackend(std::uint64_t seed, std::size_t embedding_dim)
    : seed_(seed), embedding_dim_(embedding_dim) {
  if (embedding_dim_ < 2) throw ConfigError("mock embedding dimension must be >= 2");
}

std::string MockBackend::complete(const ChatRequest& req) {
  const std::string& user = req.user_text;
  if (user.find("Perform open coding") != std::string::npos) return open_coding_reply(user);
  if (user.find("Generate high-level codes") != std::string::npos) return high_level_reply(user);
  if (user.find("Classify the relation between code A and code B") != std::string::npos) {
    return classify_reply(user);
  }
  if (user.find("rate how properly") != std::string::npos) return judge_reply(user);
  if (user.find("rate how completely") != std::string::npos) return judge_reply(user);
  if (user.find("## Candidate pool") != std::string::npos) {
    const bool allow_new = user.find("Do not invent new codes") == std::string::npos;
    return revise_reply(user, allow_new);
  }
  if (user.find("Match each reference code") != std::string::npos) return align_reply(user);
  if (user.find("Write a research summary") != std::string::npos) return report_reply(user);
  return "OK";
}

std::string MockBackend::open_coding_reply(const std::string& user) const {
  const std::string datapoint = extract_section(user, "Datapoint");
  return json_array(salient_terms(datapoint, 20));
}

std::string MockBackend::high_level_reply(const std::string& user) const {
  static const std::regex kExactly(R"(exactly (\d+) high-level)");
  std::smatch m;
  std::size_t k = 1;
  if (std::regex_search(user, m, kExactly)) k = std::stoul(m[1].str());
  const std::string body = extract_section(user, "Cluster codes");
  std::ostringstream joined;
  for (const auto& line : section_lines(body)) joined << line << "\n";
  std::vector<std::string> tokens = salient_terms(joined.str(), std::max<std::size_t>(k, 4));
  std::vector<std::string> uni;
  for (const auto& t : tokens) {
    if (t.find(' ') == std::string::npos) uni.push_back(t);
  }
  if (uni.empty()) uni.push_back("general");
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < k; ++i) {
    std::string label = uni[i % uni.size()] + " theme";
    const std::size_t repeat = i / uni.size();
    if (repeat > 0) label += " " + std::to_string(repeat + 1);
    labels.push_back(label);
  }
  return json_array(labels);
}

std::string MockBackend::classify_reply(const std::string& user) const {
  std::string a;
  std::string b;
  std::istringstream in(user);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("Code A:", 0) == 0) a = trim(line.substr(7));
    if (line.rfind("Code B:", 0) == 0) b = trim(line.substr(7));
  }
  const std::string na = normalize_label(a);
  const std::string nb = normalize_label(b);
  if (na == nb) return "equivalent";
  const std::set<std::string> ta = content_tokens(na);
  const std::set<std::string> tb = content_tokens(nb);
  if (ta.empty() || tb.empty()) return "orthogonal";
  const bool a_superset = std::includes(ta.begin(), ta.end(), tb.begin(), tb.end());
  const bool b_superset = std::includes(tb.begin(), tb.end(), ta.begin(), ta.end());
  // More modifiers = more specific, so the superset side is the subtype.
  if (a_superset && !b_superset) return "forward";
  if (b_superset && !a_superset) return "backward";
  return "orthogonal";
}

std::string MockBackend::judge_reply(const std::string& user) const {
  static const std::regex kMarker(R"(SCORE=(-?\d+))");
  std::smatch m;
  if (std::regex_search(user, m, kMarker)) return m[1].str();
  const std::uint64_t h = fnv1a64(user) ^ seed_;
  return std::to_string(1 + static_cast<int>(h % 10));
}

std::string MockBackend::revise_reply(const std::string& user, bool allow_new) const {
  const std::string datapoint = extract_section(user, "Datapoint");
  const std::vector<std::string> pool = section_lines(extract_section(user, "Candidate pool"));
  const std::set<std::string> dp_tokens = content_tokens(datapoint);

  struct Scored {
    std::string label;
    int overlap;
    std::size_t index;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    int overlap = 0;
    for (const auto& t : content_tokens(pool[i])) {
      if (dp_tokens.count(t)) ++overlap;
    }
    if (overlap > 0) scored.push_back({pool[i], overlap, i});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.overlap != y.overlap) return x.overlap > y.overlap;
    return x.index < y.index;
  });
  std::vector<std::string> picked;
  for (const auto& s : scored) {
    if (picked.size() >= 12) break;
    picked.push_back(s.label);
  }
  if (picked.empty() && allow_new && pool.empty()) {
    for (const auto& term : salient_terms(datapoint, 5)) {
      picked.push_back("NEW: " + term);
    }
  }
  return json_array(picked);
}

std::string MockBackend::align_reply(const std::string& user) const {
  const std::vector<std::string> cluster_lines =
      section_lines(extract_section(user, "Candidate clusters"));
  const std::vector<std::string> ref_lines =
      section_lines(extract_section(user, "Reference codebook"));

  struct ClusterTokens {
    int number;
    std::set<std::string> tokens;
  };
  std::vector<ClusterTokens> clusters;
  static const std::regex kCluster(R"(^Cluster (\d+):(.*)$)");
  for (const auto& line : cluster_lines) {
    std::smatch m;
    if (std::regex_match(line, m, kCluster)) {
      clusters.push_back({std::stoi(m[1].str()), content_tokens(m[2].str())});
    }
  }
  nlohmann::json out = nlohmann::json::object();
  static const std::regex kRef(R"(^id:\s*(\S+)\s+label:\s*(.*)$)");
  for (const auto& line : ref_lines) {
    std::smatch m;
    if (!std::regex_match(line, m, kRef)) continue;
    const std::string id = m[1].str();
    const std::set<std::string> gt_tokens = content_tokens(m[2].str());
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& cluster : clusters) {
      for (const auto& t : gt_tokens) {
        if (cluster.tokens.count(t)) {
          matches.push_back(cluster.number);
          break;
        }
      }
    }
    out[id] = matches;
  }
  return out.dump();
}

std::string MockBackend::report_reply(const std::string& user) const {
  const std::vector<std::string> freq_lines =
      section_lines(extract_section(user, "Code frequencies"));
  struct Entry {
    std::string label;
    long count;
    std::size_t index;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < freq_lines.size(); ++i) {
    const std::size_t colon = freq_lines[i].rfind(':');
    if (colon == std::string::npos) continue;
    Entry e;
    e.label = trim(freq_lines[i].substr(0, colon));
    try {
      e.count = std::stol(trim(freq_lines[i].substr(colon + 1)));
    } catch (const std::exception&) {
      continue;
    }
    e.index = i;
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.index < b.index;
  });
  const std::string question = extract_section(user, "Research question");
  std::ostringstream out;
  out << "# Research summary\n\n";
  out << "Question: " << question << "\n\n";
  out << "The corpus surfaces " << entries.size()
      << " recurring patterns. The most prevalent are:\n\n";
  for (std::size_t i = 0; i < entries.size() && i < 10; ++i) {
    out << "- **" << entries[i].label << "** (" << entries[i].count << " datapoints)\n";
  }
  return out.str();
}

EmbeddingVector MockBackend::token_vector(const std::string& token) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = token_cache_.find(token);
    if (it != token_cache_.end()) return it->second;
  }
  DetRng rng(seed_ ^ (fnv1a64(token) * 0x9e3779b97f4a7c15ull));
  EmbeddingVector v(embedding_dim_);
  for (auto& x : v) x = rng.next_gaussian();
  std::lock_guard<std::mutex> lock(cache_mutex_);
  return token_cache_.emplace(token, std::move(v)).first->second;
}

std::vector<EmbeddingVector> MockBackend::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<std::string> tokens = tokenize(text);
    EmbeddingVector v(embedding_dim_, 0.0);
    if (tokens.empty()) {
      DetRng rng(seed_ ^ fnv1a64(text));
      for (auto& x : v) x = rng.next_gaussian();
    } else {
      for (const auto& t : tokens) {
        const EmbeddingVector tv = token_vector(t);
        for (std::size_t i = 0; i < embedding_dim_; ++i) v[i] += tv[i];
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace qcode
