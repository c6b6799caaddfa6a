#include "qcode/common.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <iostream>
#include <mutex>
#include <thread>
#include <unordered_set>

namespace qcode {

double DetRng::next_gaussian() {
  double u1 = next_double();
  double u2 = next_double();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

bool is_stopword(std::string_view token) {
  static const std::unordered_set<std::string_view> kStopwords = {
      "a",    "an",   "and",  "are",   "as",    "at",   "be",    "but",  "by",
      "for",  "from", "had",  "has",   "have",  "he",   "her",   "his",  "i",
      "if",   "in",   "into", "is",    "it",    "its",  "me",    "my",   "no",
      "not",  "of",   "on",   "or",    "our",   "she",  "so",    "that", "the",
      "their", "them", "then", "there", "these", "they", "this",  "to",   "up",
      "was",  "we",   "were", "what",  "when",  "which", "while", "who",  "will",
      "with", "you",  "your", "about", "after", "all",  "also",  "am",   "been",
      "can",  "do",   "did",  "does",  "down",  "each", "get",   "got",  "just",
      "more", "most", "out",  "over",  "some",  "than", "too",   "very", "would"};
  return kStopwords.count(token) > 0;
}

std::string normalize_label(std::string_view label) {
  std::string lowered = to_lower(label);
  // Collapse whitespace runs to single spaces.
  std::string collapsed;
  collapsed.reserve(lowered.size());
  bool in_space = true;
  for (unsigned char c : lowered) {
    if (std::isspace(c)) {
      if (!in_space) collapsed.push_back(' ');
      in_space = true;
    } else {
      collapsed.push_back(static_cast<char>(c));
      in_space = false;
    }
  }
  // Strip punctuation from both ends.
  std::size_t b = 0;
  std::size_t e = collapsed.size();
  auto is_edge_punct = [](unsigned char c) {
    return !std::isalnum(c) && !std::isspace(c);
  };
  while (b < e && is_edge_punct(static_cast<unsigned char>(collapsed[b]))) ++b;
  while (e > b && is_edge_punct(static_cast<unsigned char>(collapsed[e - 1]))) --e;
  return trim(std::string_view(collapsed).substr(b, e - b));
}

int estimate_tokens(std::string_view text) {
  return static_cast<int>((text.size() + 3) / 4);
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

namespace {
std::atomic<int> g_log_level{static_cast<int>(LogLevel::warn)};
std::mutex g_log_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_log_level.store(static_cast<int>(level)); }
LogLevel log_level() { return static_cast<LogLevel>(g_log_level.load()); }

void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) < g_log_level.load()) return;
  static const char* kNames[] = {"DEBUG", "INFO", "WARN", "ERROR"};
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << msg << "\n";
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  int effective = workers;
  if (effective < 1) effective = 1;
  if (static_cast<std::size_t>(effective) > n) effective = static_cast<int>(n);
  if (effective == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(effective));
  for (int t = 0; t < effective; ++t) {
    threads.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace qcode
