#include "qcode/config.hpp"

#include <cstdlib>
#include <fstream>

namespace qcode {

std::string to_string(DatapointGranularity g) {
  return g == DatapointGranularity::document ? "document" : "chunk";
}

DatapointGranularity granularity_from_string(const std::string& s) {
  if (s == "document") return DatapointGranularity::document;
  if (s == "chunk") return DatapointGranularity::chunk;
  throw ConfigError("unknown datapoint granularity: " + s);
}

std::string interpolate_env(const std::string& value) {
  std::string out;
  std::size_t pos = 0;
  while (pos < value.size()) {
    const std::size_t start = value.find("${", pos);
    if (start == std::string::npos) {
      out.append(value, pos, std::string::npos);
      break;
    }
    const std::size_t end = value.find('}', start + 2);
    if (end == std::string::npos) {
      out.append(value, pos, std::string::npos);
      break;
    }
    out.append(value, pos, start - pos);
    const std::string name = value.substr(start + 2, end - start - 2);
    const char* env = std::getenv(name.c_str());
    if (env != nullptr) out.append(env);
    pos = end + 1;
  }
  return out;
}

namespace {

void interpolate_json(nlohmann::json& j) {
  if (j.is_string()) {
    j = interpolate_env(j.get<std::string>());
  } else if (j.is_object() || j.is_array()) {
    for (auto& item : j) interpolate_json(item);
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

BackendConfig backend_from_json(const nlohmann::json& j, const BackendConfig& defaults) {
  BackendConfig out = defaults;
  out.endpoint = get_or<std::string>(j, "endpoint", out.endpoint);
  out.model = get_or<std::string>(j, "model", out.model);
  out.credential_env = get_or<std::string>(j, "credential_env", out.credential_env);
  out.max_retries = get_or<int>(j, "max_retries", out.max_retries);
  out.backoff_base_s = get_or<double>(j, "backoff_base_s", out.backoff_base_s);
  out.max_concurrent = get_or<int>(j, "max_concurrent", out.max_concurrent);
  out.embed_batch_limit = get_or<std::size_t>(j, "embed_batch_limit", out.embed_batch_limit);
  out.debug_log = get_or<bool>(j, "debug_log", out.debug_log);
  return out;
}

nlohmann::json backend_to_json(const BackendConfig& b) {
  return {{"endpoint", b.endpoint},
          {"model", b.model},
          {"credential_env", b.credential_env},
          {"max_retries", b.max_retries},
          {"backoff_base_s", b.backoff_base_s},
          {"max_concurrent", b.max_concurrent},
          {"embed_batch_limit", b.embed_batch_limit},
          {"debug_log", b.debug_log}};
}

}  // namespace

void RunConfig::validate() const {
  if (corpus_path.empty()) throw ConfigError("config requires corpus.path");
  if (trim(question.text).empty()) throw ConfigError("config requires question.text");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("split.test_fraction must lie in (0, 1)");
  }
  if (chunk_overlap >= chunk_size) throw ConfigError("chunking.overlap must be < chunk_size");
  if (coder.max_codes_per_datapoint < 1 || coder.max_codes_per_datapoint > 20) {
    throw ConfigError("coding.max_codes_per_datapoint must lie in [1, 20]");
  }
  if (high_level_codes_per_cluster < 1) {
    throw ConfigError("coding.high_level_codes_per_cluster must be >= 1");
  }
  if (relations.band_low > relations.band_high) {
    throw ConfigError("relations.band_low must be <= relations.band_high");
  }
  if (relations.top_fraction <= 0.0 || relations.top_fraction > 1.0) {
    throw ConfigError("relations.top_fraction must lie in (0, 1]");
  }
  if (classifier_kind != "llm" && classifier_kind != "remote") {
    throw ConfigError("relations.classifier must be \"llm\" or \"remote\"");
  }
  if (classifier_kind == "remote" && classifier_endpoint.empty()) {
    throw ConfigError("relations.remote_endpoint required for the remote classifier");
  }
  if (refine.pool_cap < 1 || refine.pool_cap > 200) {
    throw ConfigError("refine.pool_cap must lie in [1, 200]");
  }
  if (refine.max_candidates_per_code < 1 || refine.max_candidates_per_code > 10) {
    throw ConfigError("refine.max_candidates_per_code must lie in [1, 10]");
  }
  if (cleanup.frequency_threshold < 0) {
    throw ConfigError("graph.frequency_threshold must be >= 0");
  }
  if (judge_sample_size < 1) throw ConfigError("metrics.judge_sample_size must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!mock) {
    if (coder_backend.endpoint.empty() || embedder_backend.endpoint.empty() ||
        judge_backend.endpoint.empty()) {
      throw ConfigError("non-mock runs require coder, embedder, and judge endpoints");
    }
  }
}

RunConfig RunConfig::from_json(const nlohmann::json& root) {
  RunConfig cfg;
  nlohmann::json j = root;
  interpolate_json(j);

  if (j.contains("corpus")) {
    const auto& corpus = j.at("corpus");
    cfg.corpus_path = get_or<std::string>(corpus, "path", "");
    cfg.corpus_format =
        corpus_format_from_string(get_or<std::string>(corpus, "format", "jsonl"));
  }
  if (j.contains("question")) {
    const auto& q = j.at("question");
    cfg.question.id = get_or<std::string>(q, "id", "q1");
    cfg.question.text = get_or<std::string>(q, "text", "");
  }
  cfg.granularity = granularity_from_string(get_or<std::string>(j, "granularity", "document"));
  if (j.contains("chunking")) {
    const auto& c = j.at("chunking");
    cfg.chunk_size = get_or<std::size_t>(c, "chunk_size", cfg.chunk_size);
    cfg.chunk_overlap = get_or<std::size_t>(c, "overlap", cfg.chunk_overlap);
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    cfg.test_fraction = get_or<double>(s, "test_fraction", cfg.test_fraction);
  }
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.iterations = get_or<int>(j, "iterations", cfg.iterations);

  if (j.contains("coding")) {
    const auto& c = j.at("coding");
    cfg.coder.max_codes_per_datapoint =
        get_or<int>(c, "max_codes_per_datapoint", cfg.coder.max_codes_per_datapoint);
    cfg.coder.retries = get_or<int>(c, "retries", cfg.coder.retries);
    cfg.coder.prompt_token_budget =
        get_or<int>(c, "prompt_token_budget", cfg.coder.prompt_token_budget);
    cfg.high_level_codes_per_cluster =
        get_or<int>(c, "high_level_codes_per_cluster", cfg.high_level_codes_per_cluster);
  }
  if (j.contains("clustering")) {
    const auto& c = j.at("clustering");
    cfg.k_min = get_or<int>(c, "k_min", cfg.k_min);
    cfg.k_max = get_or<int>(c, "k_max", cfg.k_max);
    cfg.kmeans.max_iterations = get_or<int>(c, "max_iterations", cfg.kmeans.max_iterations);
    cfg.kmeans.tolerance = get_or<double>(c, "tolerance", cfg.kmeans.tolerance);
    cfg.kmeans.minibatch_threshold =
        get_or<std::size_t>(c, "minibatch_threshold", cfg.kmeans.minibatch_threshold);
    cfg.kmeans.batch_size = get_or<std::size_t>(c, "batch_size", cfg.kmeans.batch_size);
    cfg.kmeans.silhouette_sample =
        get_or<std::size_t>(c, "silhouette_sample", cfg.kmeans.silhouette_sample);
  }
  if (j.contains("relations")) {
    const auto& r = j.at("relations");
    cfg.relations.band_low = get_or<double>(r, "band_low", cfg.relations.band_low);
    cfg.relations.band_high = get_or<double>(r, "band_high", cfg.relations.band_high);
    cfg.relations.top_fraction = get_or<double>(r, "top_fraction", cfg.relations.top_fraction);
    cfg.classifier_kind = get_or<std::string>(r, "classifier", cfg.classifier_kind);
    cfg.classifier_endpoint = get_or<std::string>(r, "remote_endpoint", cfg.classifier_endpoint);
  }
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    cfg.cleanup.merge_weight_frequency =
        get_or<double>(g, "merge_weight_frequency", cfg.cleanup.merge_weight_frequency);
    cfg.cleanup.merge_weight_in_degree =
        get_or<double>(g, "merge_weight_in_degree", cfg.cleanup.merge_weight_in_degree);
    cfg.cleanup.frequency_threshold =
        get_or<int>(g, "frequency_threshold", cfg.cleanup.frequency_threshold);
  }
  if (j.contains("refine")) {
    const auto& r = j.at("refine");
    cfg.refine.max_candidates_per_code =
        get_or<int>(r, "max_candidates_per_code", cfg.refine.max_candidates_per_code);
    cfg.refine.pool_cap = get_or<int>(r, "pool_cap", cfg.refine.pool_cap);
    cfg.refine.semantic_floor = get_or<double>(r, "semantic_floor", cfg.refine.semantic_floor);
    cfg.refine.weight_semantic = get_or<double>(r, "weight_semantic", cfg.refine.weight_semantic);
    cfg.refine.weight_frequency =
        get_or<double>(r, "weight_frequency", cfg.refine.weight_frequency);
    cfg.refine.prompt_token_budget =
        get_or<int>(r, "prompt_token_budget", cfg.refine.prompt_token_budget);
    cfg.refine.retries = get_or<int>(r, "retries", cfg.refine.retries);
  }
  cfg.refine.max_codes = cfg.coder.max_codes_per_datapoint;

  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    if (m.contains("weights")) {
      const auto w = m.at("weights").get<std::vector<double>>();
      if (w.size() != 5) throw ConfigError("metrics.weights must have exactly 5 entries");
      std::copy(w.begin(), w.end(), cfg.metric_weights.values.begin());
    }
    cfg.judge_sample_size = get_or<int>(m, "judge_sample_size", cfg.judge_sample_size);
    cfg.align_clusters = get_or<int>(m, "align_clusters", cfg.align_clusters);
    cfg.align_codes_per_cluster =
        get_or<int>(m, "align_codes_per_cluster", cfg.align_codes_per_cluster);
  }
  if (j.contains("backends")) {
    const auto& b = j.at("backends");
    cfg.mock = get_or<bool>(b, "mock", cfg.mock);
    cfg.mock_seed = get_or<std::uint64_t>(b, "mock_seed", cfg.mock_seed);
    cfg.embedding_dim = get_or<std::size_t>(b, "embedding_dim", cfg.embedding_dim);
    if (b.contains("coder")) cfg.coder_backend = backend_from_json(b.at("coder"), cfg.coder_backend);
    if (b.contains("embedder")) {
      cfg.embedder_backend = backend_from_json(b.at("embedder"), cfg.embedder_backend);
    }
    if (b.contains("judge")) cfg.judge_backend = backend_from_json(b.at("judge"), cfg.judge_backend);
    if (b.contains("classifier")) {
      cfg.classifier_backend = backend_from_json(b.at("classifier"), cfg.classifier_backend);
    }
  }
  cfg.runs_dir = get_or<std::string>(j, "runs_dir", cfg.runs_dir);
  cfg.run_id = get_or<std::string>(j, "run_id", cfg.run_id);
  cfg.workers = get_or<int>(j, "workers", cfg.workers);
  cfg.debug_log = get_or<bool>(j, "debug_log", cfg.debug_log);
  if (j.contains("prompt_overrides")) {
    for (const auto& [name, path] : j.at("prompt_overrides").items()) {
      cfg.prompt_overrides[name] = path.get<std::string>();
    }
  }
  cfg.validate();
  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"corpus", {{"path", corpus_path}, {"format", corpus_format == CorpusFormat::jsonl ? "jsonl" : "plain-dir"}}},
      {"question", {{"id", question.id}, {"text", question.text}}},
      {"granularity", qcode::to_string(granularity)},
      {"chunking", {{"chunk_size", chunk_size}, {"overlap", chunk_overlap}}},
      {"split", {{"test_fraction", test_fraction}}},
      {"seed", seed},
      {"iterations", iterations},
      {"coding",
       {{"max_codes_per_datapoint", coder.max_codes_per_datapoint},
        {"retries", coder.retries},
        {"prompt_token_budget", coder.prompt_token_budget},
        {"high_level_codes_per_cluster", high_level_codes_per_cluster}}},
      {"clustering",
       {{"k_min", k_min},
        {"k_max", k_max},
        {"max_iterations", kmeans.max_iterations},
        {"tolerance", kmeans.tolerance},
        {"minibatch_threshold", kmeans.minibatch_threshold},
        {"batch_size", kmeans.batch_size},
        {"silhouette_sample", kmeans.silhouette_sample}}},
      {"relations",
       {{"band_low", relations.band_low},
        {"band_high", relations.band_high},
        {"top_fraction", relations.top_fraction},
        {"classifier", classifier_kind},
        {"remote_endpoint", classifier_endpoint}}},
      {"graph",
       {{"merge_weight_frequency", cleanup.merge_weight_frequency},
        {"merge_weight_in_degree", cleanup.merge_weight_in_degree},
        {"frequency_threshold", cleanup.frequency_threshold}}},
      {"refine",
       {{"max_candidates_per_code", refine.max_candidates_per_code},
        {"pool_cap", refine.pool_cap},
        {"semantic_floor", refine.semantic_floor},
        {"weight_semantic", refine.weight_semantic},
        {"weight_frequency", refine.weight_frequency},
        {"prompt_token_budget", refine.prompt_token_budget},
        {"retries", refine.retries}}},
      {"metrics",
       {{"weights", metric_weights.values},
        {"judge_sample_size", judge_sample_size},
        {"align_clusters", align_clusters},
        {"align_codes_per_cluster", align_codes_per_cluster}}},
      {"backends",
       {{"mock", mock},
        {"mock_seed", mock_seed},
        {"embedding_dim", embedding_dim},
        {"coder", backend_to_json(coder_backend)},
        {"embedder", backend_to_json(embedder_backend)},
        {"judge", backend_to_json(judge_backend)},
        {"classifier", backend_to_json(classifier_backend)}}},
      {"runs_dir", runs_dir},
      {"run_id", run_id},
      {"workers", workers},
      {"debug_log", debug_log},
      {"prompt_overrides", prompt_overrides},
  };
}

nlohmann::json RunConfig::fit_fingerprint() const {
  nlohmann::json j = to_json();
  j.erase("iterations");
  j.erase("runs_dir");
  j.erase("run_id");
  j.erase("workers");
  j.erase("debug_log");
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  try {
    return RunConfig::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

}  // namespace qcode
