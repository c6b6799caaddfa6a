#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "qcode/cluster.hpp"
#include "qcode/coder.hpp"
#include "qcode/corpus.hpp"
#include "qcode/graph.hpp"
#include "qcode/llm.hpp"
#include "qcode/metrics.hpp"
#include "qcode/refine.hpp"
#include "qcode/relations.hpp"

namespace qcode {

enum class DatapointGranularity { document, chunk };

std::string to_string(DatapointGranularity g);
DatapointGranularity granularity_from_string(const std::string& s);

// Full run configuration. Every tunable surfaces as a named key with its
// default; the JSON snapshot written into the run directory is the effective
// (fully expanded) configuration.
struct RunConfig {
  // Corpus and question.
  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  ResearchQuestion question;
  DatapointGranularity granularity = DatapointGranularity::document;
  std::size_t chunk_size = 2048;
  std::size_t chunk_overlap = 200;

  // Protocol.
  double test_fraction = 0.2;
  std::uint64_t seed = 7;
  int iterations = 2;

  // Coding.
  CoderOptions coder;
  int high_level_codes_per_cluster = 1;

  // Clustering.
  KMeansOptions kmeans;
  int k_min = 2;
  int k_max = 0;  // 0 = automatic (min(ceil(sqrt(n)), 100, n-1))

  // Relations.
  RelationOptions relations;
  std::string classifier_kind = "llm";  // "llm" or "remote"
  std::string classifier_endpoint;

  // Graph cleanup.
  CleanupOptions cleanup;

  // Refinement.
  RefineOptions refine;

  // Metrics.
  MetricWeights metric_weights;
  int judge_sample_size = 50;
  int align_clusters = 30;
  int align_codes_per_cluster = 3;

  // Backends.
  bool mock = true;
  std::uint64_t mock_seed = 0;  // 0 = derive from seed
  std::size_t embedding_dim = 64;
  BackendConfig coder_backend;
  BackendConfig embedder_backend;
  BackendConfig judge_backend;
  BackendConfig classifier_backend;

  // Run management.
  std::string runs_dir = "runs";
  std::string run_id = "default";
  int workers = 2;
  std::map<std::string, std::string> prompt_overrides;
  bool debug_log = false;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  // The part of the config that determines fitted artifacts; iterations,
  // run naming, and worker counts are excluded so runs can be extended and
  // resumed.
  nlohmann::json fit_fingerprint() const;

  std::uint64_t effective_mock_seed() const { return mock_seed != 0 ? mock_seed : seed; }
};

// Parses a config file, interpolating ${ENV_VAR} in string values.
RunConfig load_config(const std::string& path);

std::string interpolate_env(const std::string& value);

}  // namespace qcode
