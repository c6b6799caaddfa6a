#pragma once

#include "qcode/llm.hpp"

namespace qcode {

// Chat/embedding transport over the common completions/embeddings wire
// shape: POST {endpoint}/chat/completions and {endpoint}/embeddings with a
// bearer token taken from the environment variable named in the config.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);

  std::string complete(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::string name() const override { return "http:" + config_.endpoint; }

 private:
  std::string post_json(const std::string& path, const std::string& body);

  BackendConfig config_;
  std::string base_url_;
  std::string path_prefix_;
};

}  // namespace qcode
