#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qcode {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (config=2, transport=3,
// validation/parse/budget=4).
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& msg, bool retryable = true)
      : Error(msg), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Raised when the LLM keeps producing unusable coding output; carries the
// last raw response for diagnosis.
class CodingError : public Error {
 public:
  CodingError(const std::string& msg, std::string raw)
      : Error(msg), raw_output_(std::move(raw)) {}
  const std::string& raw_output() const { return raw_output_; }

 private:
  std::string raw_output_;
};

// ---------------------------------------------------------------------------
// Deterministic hashing / RNG. Everything that influences persisted artifacts
// goes through these instead of std:: distributions so reruns are bit-stable
// across standard libraries.
// ---------------------------------------------------------------------------

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). n must be > 0.
  std::size_t next_below(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller; avoids implementation-defined
  // std::normal_distribution sequences.
  double next_gaussian();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = next_below(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Text helpers.
// ---------------------------------------------------------------------------

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Maximal runs of non-whitespace characters.
std::vector<std::string> split_words(std::string_view text);

// Lowercased alphanumeric token runs, used for embeddings and keyword logic.
std::vector<std::string> tokenize(std::string_view text);

bool is_stopword(std::string_view token);

// Lowercase, collapse internal whitespace, strip punctuation at both ends.
std::string normalize_label(std::string_view label);

// Prompt-size heuristic: ceil(chars / 4). An upper bound, monotone in length.
int estimate_tokens(std::string_view text);

bool starts_with_icase(std::string_view s, std::string_view prefix);

// ---------------------------------------------------------------------------
// Minimal logging.
// ---------------------------------------------------------------------------

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

inline void log_debug(const std::string& msg) { log_message(LogLevel::debug, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::info, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::warn, msg); }

// ---------------------------------------------------------------------------
// Bounded fan-out. Runs fn(0..n-1) on up to `workers` threads; results are
// whatever fn writes into caller-owned slots. First exception is rethrown.
// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace qcode
