#include "qcode/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

namespace qcode {

namespace {

// Splits "http://host:port/prefix" into client base and path prefix.
void split_endpoint(const std::string& endpoint, std::string& base, std::string& prefix) {
  std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("backend endpoint must include a scheme: " + endpoint);
  }
  std::size_t path = endpoint.find('/', scheme + 3);
  if (path == std::string::npos) {
    base = endpoint;
    prefix.clear();
  } else {
    base = endpoint.substr(0, path);
    prefix = endpoint.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  }
}

std::string redact(const std::string& body) {
  if (body.size() <= 512) return body;
  return body.substr(0, 512) + "...(" + std::to_string(body.size()) + " bytes)";
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ConfigError("http backend requires an endpoint");
  split_endpoint(config_.endpoint, base_url_, path_prefix_);
}

std::string HttpBackend::post_json(const std::string& path, const std::string& body) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(30);
  client.set_read_timeout(300);
  httplib::Headers headers;
  if (!config_.credential_env.empty()) {
    const char* token = std::getenv(config_.credential_env.c_str());
    if (token != nullptr && token[0] != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  if (config_.debug_log) {
    log_debug("POST " + base_url_ + path_prefix_ + path + " body=" + redact(body));
  }
  auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
  if (!res) {
    throw TransportError("request to " + base_url_ + path + " failed: " +
                             httplib::to_string(res.error()),
                         true);
  }
  if (config_.debug_log) {
    log_debug("HTTP " + std::to_string(res->status) + " body=" + redact(res->body));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + base_url_ + path,
                         true);
  }
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + base_url_ + path +
                             ": " + redact(res->body),
                         false);
  }
  return res->body;
}

std::string HttpBackend::complete(const ChatRequest& req) {
  nlohmann::json body = {
      {"model", config_.model},
      {"messages",
       {{{"role", "system"}, {"content", req.system_text}},
        {{"role", "user"}, {"content", req.user_text}}}},
      {"temperature", req.temperature},
      {"max_tokens", req.max_output_tokens},
  };
  const std::string raw = post_json("/chat/completions", body.dump());
  try {
    nlohmann::json parsed = nlohmann::json::parse(raw);
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") + e.what(), false);
  }
}

std::vector<EmbeddingVector> HttpBackend::embed(const std::vector<std::string>& texts) {
  nlohmann::json body = {{"model", config_.model}, {"input", texts}};
  const std::string raw = post_json("/embeddings", body.dump());
  try {
    nlohmann::json parsed = nlohmann::json::parse(raw);
    const auto& data = parsed.at("data");
    std::vector<EmbeddingVector> out(texts.size());
    std::size_t filled = 0;
    for (const auto& item : data) {
      const std::size_t index = item.at("index").get<std::size_t>();
      if (index >= out.size()) throw ParseError("embedding index out of range");
      out[index] = item.at("embedding").get<EmbeddingVector>();
      ++filled;
    }
    if (filled != texts.size()) {
      throw ParseError("embedding response missing entries");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed embeddings response: ") + e.what(), false);
  } catch (const ParseError& e) {
    throw TransportError(std::string("malformed embeddings response: ") + e.what(), false);
  }
}

}  // namespace qcode
