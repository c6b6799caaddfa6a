#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "qcode/common.hpp"

namespace qcode {

struct ChatRequest {
  std::string system_text;
  std::string user_text;
  int max_output_tokens = 2048;
  double temperature = 0.0;
  // Upper bound on the estimated prompt size; checked before any network
  // traffic. Refinement prompts keep the 10k default.
  int prompt_token_budget = 10000;
};

inline int estimate_request_tokens(const ChatRequest& req) {
  return estimate_tokens(req.system_text) + estimate_tokens(req.user_text);
}

using EmbeddingVector = std::vector<double>;

// Normalizes in place to unit L2 norm. A zero vector maps to e0.
void normalize_unit(EmbeddingVector& v);

double dot(const EmbeddingVector& a, const EmbeddingVector& b);

struct BackendConfig {
  std::string endpoint;
  std::string model;
  std::string credential_env;
  int max_retries = 2;
  double backoff_base_s = 0.5;
  int max_concurrent = 4;
  std::size_t embed_batch_limit = 1000;
  bool debug_log = false;
};

// Transport to one chat/embedding provider. Implementations throw
// TransportError; retry policy lives in LlmClient.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const ChatRequest& req) = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
  virtual std::string name() const = 0;
};

struct CallRecord {
  enum class Kind { chat, embedding };
  Kind kind;
  int attempts = 1;
  std::size_t items = 1;
};

// Uniform client: token-budget enforcement, retries with exponential backoff,
// batch splitting for embeddings, gateway-side unit normalization, and an
// append-only call log. Thread-safe; concurrent callers are throttled to
// config.max_concurrent in-flight backend requests.
class LlmClient {
 public:
  LlmClient(std::shared_ptr<Backend> backend, BackendConfig config);

  std::string complete(const ChatRequest& req);
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

  std::size_t call_count() const;
  std::size_t chat_call_count() const;
  std::size_t embed_call_count() const;
  const BackendConfig& config() const { return config_; }
  Backend& backend() { return *backend_; }

 private:
  template <typename Fn>
  auto with_retries(const char* what, Fn&& fn) -> decltype(fn(0));

  void acquire_slot();
  void release_slot();
  void record(CallRecord::Kind kind, int attempts, std::size_t items);

  std::shared_ptr<Backend> backend_;
  BackendConfig config_;
  mutable std::mutex log_mutex_;
  std::vector<CallRecord> log_;
  std::mutex slot_mutex_;
  std::condition_variable slot_cv_;
  int in_flight_ = 0;
};

}  // namespace qcode
