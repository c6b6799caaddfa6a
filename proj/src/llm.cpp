#include "qcode/llm.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace qcode {

void normalize_unit(EmbeddingVector& v) {
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  if (norm_sq <= 0.0) {
    if (!v.empty()) v[0] = 1.0;
    return;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

LlmClient::LlmClient(std::shared_ptr<Backend> backend, BackendConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (!backend_) throw ConfigError("LlmClient requires a backend");
  if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (config_.max_concurrent < 1) throw ConfigError("max_concurrent must be >= 1");
}

void LlmClient::acquire_slot() {
  std::unique_lock<std::mutex> lock(slot_mutex_);
  slot_cv_.wait(lock, [&] { return in_flight_ < config_.max_concurrent; });
  ++in_flight_;
}

void LlmClient::release_slot() {
  {
    std::lock_guard<std::mutex> lock(slot_mutex_);
    --in_flight_;
  }
  slot_cv_.notify_one();
}

void LlmClient::record(CallRecord::Kind kind, int attempts, std::size_t items) {
  std::lock_guard<std::mutex> lock(log_mutex_);
  log_.push_back(CallRecord{kind, attempts, items});
}

template <typename Fn>
auto LlmClient::with_retries(const char* what, Fn&& fn) -> decltype(fn(0)) {
  int attempt = 0;
  for (;;) {
    ++attempt;
    try {
      acquire_slot();
      struct Release {
        LlmClient* self;
        ~Release() { self->release_slot(); }
      } release{this};
      return fn(attempt);
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt > config_.max_retries) {
        throw TransportError(std::string(what) + " failed after " + std::to_string(attempt) +
                                 " attempt(s): " + e.what(),
                             false);
      }
      const double delay = config_.backoff_base_s * std::pow(2.0, attempt - 1);
      log_warn(std::string(what) + " attempt " + std::to_string(attempt) +
               " failed (" + e.what() + "), retrying");
      if (delay > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
    }
  }
}

std::string LlmClient::complete(const ChatRequest& req) {
  const int estimate = estimate_request_tokens(req);
  if (req.prompt_token_budget > 0 && estimate > req.prompt_token_budget) {
    throw BudgetError("prompt estimate of " + std::to_string(estimate) +
                      " tokens exceeds budget of " + std::to_string(req.prompt_token_budget));
  }
  int attempts_used = 0;
  std::string out = with_retries("chat completion", [&](int attempt) {
    attempts_used = attempt;
    return backend_->complete(req);
  });
  record(CallRecord::Kind::chat, attempts_used, 1);
  return out;
}

std::vector<EmbeddingVector> LlmClient::embed_batch(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  if (texts.empty()) return out;
  for (const auto& t : texts) {
    if (t.empty()) throw ValidationError("embed_batch requires non-empty texts");
  }
  out.reserve(texts.size());
  const std::size_t limit = std::max<std::size_t>(1, config_.embed_batch_limit);
  for (std::size_t begin = 0; begin < texts.size(); begin += limit) {
    const std::size_t end = std::min(texts.size(), begin + limit);
    std::vector<std::string> slice(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                   texts.begin() + static_cast<std::ptrdiff_t>(end));
    int attempts_used = 0;
    std::vector<EmbeddingVector> vectors = with_retries("embedding", [&](int attempt) {
      attempts_used = attempt;
      return backend_->embed(slice);
    });
    if (vectors.size() != slice.size()) {
      throw TransportError("embedding backend returned " + std::to_string(vectors.size()) +
                               " vectors for " + std::to_string(slice.size()) + " inputs",
                           false);
    }
    record(CallRecord::Kind::embedding, attempts_used, slice.size());
    for (auto& v : vectors) {
      normalize_unit(v);
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::size_t LlmClient::call_count() const {
  std::lock_guard<std::mutex> lock(log_mutex_);
  return log_.size();
}

std::size_t LlmClient::chat_call_count() const {
  std::lock_guard<std::mutex> lock(log_mutex_);
  std::size_t n = 0;
  for (const auto& rec : log_) {
    if (rec.kind == CallRecord::Kind::chat) ++n;
  }
  return n;
}

std::size_t LlmClient::embed_call_count() const {
  std::lock_guard<std::mutex> lock(log_mutex_);
  std::size_t n = 0;
  for (const auto& rec : log_) {
    if (rec.kind == CallRecord::Kind::embedding) ++n;
  }
  return n;
}

}  // namespace qcode
