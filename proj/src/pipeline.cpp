#include "qcode/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "qcode/http_backend.hpp"
#include "qcode/mock_backend.hpp"

namespace fs = std::filesystem;

namespace qcode {

RunPaths RunPaths::for_run(const RunConfig& config) {
  RunPaths paths;
  paths.root = fs::path(config.runs_dir) / config.run_id;
  return paths;
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
}

void write_assignments(const fs::path& path, const std::vector<Assignment>& assignments) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& a : assignments) {
    nlohmann::json j = {{"datapoint_id", a.datapoint_id},
                        {"codes", a.code_ids},
                        {"iteration", a.iteration},
                        {"split", a.split == Split::train ? "train" : "test"}};
    out << j.dump() << "\n";
  }
}

std::vector<Assignment> read_assignments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::vector<Assignment> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Assignment a;
    a.datapoint_id = j.at("datapoint_id").get<std::string>();
    a.code_ids = j.at("codes").get<std::vector<CodeId>>();
    a.iteration = j.at("iteration").get<int>();
    a.split = j.at("split").get<std::string>() == "test" ? Split::test : Split::train;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<GtCode> load_gt_codebook(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  if (!j.is_array()) throw ValidationError("ground-truth codebook must be a JSON array");
  std::vector<GtCode> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("id") || !item.contains("label")) {
      throw ValidationError("ground-truth entries need \"id\" and \"label\" fields");
    }
    GtCode code;
    code.id = item.at("id").get<std::string>();
    code.label = item.at("label").get<std::string>();
    if (item.contains("description")) code.description = item.at("description").get<std::string>();
    out.push_back(std::move(code));
  }
  if (out.empty()) throw ValidationError("ground-truth codebook is empty");
  return out;
}

namespace {

// Exclusive run-directory lock; a leftover file from a crashed run must be
// removed by hand.
class LockGuard {
 public:
  explicit LockGuard(const fs::path& path) : path_(path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wx");
    if (f == nullptr) {
      throw ValidationError("run directory is locked (" + path.string() +
                            " exists); is another command running?");
    }
    std::fputs("locked\n", f);
    std::fclose(f);
  }
  ~LockGuard() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

std::map<CodeId, int> frequency_map(const std::vector<Assignment>& assignments) {
  std::map<CodeId, int> freq;
  for (const auto& a : assignments) {
    std::set<CodeId> unique(a.code_ids.begin(), a.code_ids.end());
    for (const auto& id : unique) ++freq[id];
  }
  return freq;
}

std::vector<CodeId> remap_codes(const std::vector<CodeId>& codes, const CleanupRemap& remap) {
  std::vector<CodeId> out;
  std::set<CodeId> seen;
  for (const auto& id : codes) {
    if (remap.is_dropped(id)) continue;
    const CodeId mapped = remap.resolve(id);
    if (seen.insert(mapped).second) out.push_back(mapped);
  }
  return out;
}

nlohmann::json clustering_to_json(const Clustering& c) {
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [id, cluster] : c.assignment) assignment[id] = cluster;
  return {{"K", c.k},
          {"seed", c.seed},
          {"assignment", assignment},
          {"silhouette", c.silhouette},
          {"inertia", c.inertia}};
}

struct CallSnapshot {
  std::size_t chat = 0;
  std::size_t embedding = 0;
};

}  // namespace

struct Pipeline::Backends {
  prompts::PromptSet prompts;
  std::unique_ptr<LlmClient> coder_client;
  std::unique_ptr<LlmClient> embedder_client;
  std::unique_ptr<LlmClient> judge_client;
  std::unique_ptr<LlmClient> classifier_client;
  std::unique_ptr<PairClassifier> classifier;
  std::unique_ptr<Coder> coder;

  CallSnapshot snapshot() const {
    CallSnapshot s;
    for (const LlmClient* c :
         {coder_client.get(), embedder_client.get(), judge_client.get(),
          classifier_client.get()}) {
      s.chat += c->chat_call_count();
      s.embedding += c->embed_call_count();
    }
    return s;
  }
};

struct Pipeline::State {
  CodeRegistry registry;
  std::vector<Assignment> assignments;
  Codebook codebook;
  CodeGraph graph;
};

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
  config_.validate();
  paths_ = RunPaths::for_run(config_);
  backends_ = std::make_unique<Backends>();
  backends_->prompts.apply_overrides(config_.prompt_overrides);

  auto make_client = [&](BackendConfig role_config) {
    if (config_.mock) {
      role_config.backoff_base_s = 0.0;
      auto backend =
          std::make_shared<MockBackend>(config_.effective_mock_seed(), config_.embedding_dim);
      return std::make_unique<LlmClient>(std::move(backend), role_config);
    }
    role_config.debug_log = role_config.debug_log || config_.debug_log;
    auto backend = std::make_shared<HttpBackend>(role_config);
    return std::make_unique<LlmClient>(std::move(backend), role_config);
  };
  backends_->coder_client = make_client(config_.coder_backend);
  backends_->embedder_client = make_client(config_.embedder_backend);
  backends_->judge_client = make_client(config_.judge_backend);
  backends_->classifier_client = make_client(config_.classifier_backend);
  if (config_.classifier_kind == "remote") {
    backends_->classifier = std::make_unique<RemotePairClassifier>(config_.classifier_endpoint);
  } else {
    backends_->classifier = std::make_unique<LlmPairClassifier>(*backends_->classifier_client,
                                                                backends_->prompts);
  }
  backends_->coder =
      std::make_unique<Coder>(*backends_->coder_client, backends_->prompts, config_.coder);
}

Pipeline::~Pipeline() = default;

std::size_t Pipeline::llm_calls() const {
  return backends_->coder_client->call_count() + backends_->embedder_client->call_count() +
         backends_->judge_client->call_count() + backends_->classifier_client->call_count();
}

std::vector<Datapoint> Pipeline::build_datapoints(const std::vector<Document>& docs) const {
  std::vector<Datapoint> out;
  if (config_.granularity == DatapointGranularity::document) {
    for (const auto& doc : docs) out.push_back({doc.id, doc.id, doc.text});
    return out;
  }
  for (const auto& doc : docs) {
    for (const auto& chunk : chunk_document(doc, config_.chunk_size, config_.chunk_overlap)) {
      out.push_back({chunk.id, chunk.doc_id, chunk.text});
    }
  }
  return out;
}

// Split at document granularity so overlapping chunks of one document never
// straddle train and test.
void Pipeline::split_datapoints(const std::vector<Datapoint>& datapoints,
                                std::vector<Datapoint>& train,
                                std::vector<Datapoint>& test) const {
  std::vector<std::string> doc_ids;
  std::set<std::string> seen;
  for (const auto& dp : datapoints) {
    if (seen.insert(dp.doc_id).second) doc_ids.push_back(dp.doc_id);
  }
  const CorpusSplit split = split_corpus(doc_ids, config_.test_fraction, config_.seed);
  for (const auto& dp : datapoints) {
    if (split.test_ids.count(dp.doc_id) > 0) {
      test.push_back(dp);
    } else {
      train.push_back(dp);
    }
  }
}

void Pipeline::run_iteration(State& state, int iteration, const std::vector<Datapoint>& train) {
  if (train.empty()) throw ValidationError("iteration requires at least one train datapoint");
  const CallSnapshot before = backends_->snapshot();

  std::vector<Assignment> assignments(train.size());
  int fallbacks = 0;
  int new_codes = 0;

  if (iteration == 1) {
    parallel_for(train.size(), config_.workers, [&](std::size_t i) {
      const Datapoint& dp = train[i];
      std::vector<CodeId> ids;
      for (const auto& code : backends_->coder->open_code(dp.text, config_.question,
                                                          state.registry)) {
        ids.push_back(code.id);
      }
      assignments[i] = Assignment{dp.id, std::move(ids), iteration, Split::train};
    });
  } else {
    std::map<std::string, const std::vector<CodeId>*> previous;
    for (const auto& a : state.assignments) previous[a.datapoint_id] = &a.code_ids;

    // Retrieval index over the previous codebook; re-embedded every iteration
    // so resumed and uninterrupted runs issue identical calls.
    std::vector<CodeId> book_ids;
    std::vector<std::string> book_labels;
    for (const auto& code : state.codebook.codes) {
      book_ids.push_back(code.id);
      book_labels.push_back(code.label);
    }
    EmbeddingIndex pool_index;
    if (!book_ids.empty()) {
      pool_index = EmbeddingIndex::build(
          book_ids, backends_->embedder_client->embed_batch(book_labels));
    }

    std::mutex stats_mutex;
    parallel_for(train.size(), config_.workers, [&](std::size_t i) {
      const Datapoint& dp = train[i];
      auto it = previous.find(dp.id);
      const std::vector<CodeId> prev =
          it != previous.end() ? *it->second : std::vector<CodeId>{};
      std::vector<CodeId> ids;
      if (prev.empty()) {
        // Every prior code was cleaned away; fall back to open coding.
        for (const auto& code : backends_->coder->open_code(dp.text, config_.question,
                                                            state.registry)) {
          ids.push_back(code.id);
        }
      } else {
        std::vector<PoolAnchor> anchors;
        for (const auto& id : prev) {
          if (!pool_index.contains(id)) continue;
          anchors.push_back(PoolAnchor{id, pool_index.of(id), true});
        }
        const CandidatePool pool =
            assemble_pool(anchors, state.graph, pool_index, config_.refine);
        RevisionResult rev =
            revise_datapoint(*backends_->coder_client, dp.text, prev, pool, state.registry,
                             backends_->prompts, config_.refine);
        ids = std::move(rev.codes);
        std::lock_guard<std::mutex> lock(stats_mutex);
        if (rev.fell_back) ++fallbacks;
        new_codes += rev.new_codes;
      }
      assignments[i] = Assignment{dp.id, std::move(ids), iteration, Split::train};
    });
  }

  // Step 2: embed the revised code universe and cluster it.
  std::map<CodeId, int> freq = frequency_map(assignments);
  std::vector<CodeId> universe;
  for (const auto& [id, _] : freq) universe.push_back(id);
  if (universe.empty()) throw ValidationError("iteration produced no codes");

  std::vector<std::string> labels;
  for (const auto& id : universe) labels.push_back(state.registry.label_of(id));
  EmbeddingIndex index =
      EmbeddingIndex::build(universe, backends_->embedder_client->embed_batch(labels));

  Clustering clustering;
  if (universe.size() >= 2) {
    const int k_max = config_.k_max > 0 ? config_.k_max : default_k_max(universe.size());
    const int k = select_k(index, config_.k_min, k_max, config_.seed, config_.kmeans);
    clustering = kmeans(index, k, config_.seed, config_.kmeans);
  } else {
    clustering.k = 1;
    clustering.seed = config_.seed;
    clustering.labels.assign(universe.size(), 0);
    for (const auto& id : universe) clustering.assignment[id] = 0;
    clustering.centroids = index.vectors;
  }

  // Step 3: one set of high-level codes per cluster, added to the code
  // universe for relation discovery.
  const std::vector<std::vector<CodeId>> clusters = clustering.members(index);
  std::vector<std::vector<Code>> high_level(clusters.size());
  parallel_for(clusters.size(), config_.workers, [&](std::size_t c) {
    std::vector<Code> members;
    for (const auto& id : clusters[c]) {
      const Code* code = state.registry.find(id);
      Code copy = *code;
      auto fit = freq.find(id);
      copy.frequency = fit == freq.end() ? 0 : fit->second;
      members.push_back(std::move(copy));
    }
    std::sort(members.begin(), members.end(), [](const Code& a, const Code& b) {
      if (a.frequency != b.frequency) return a.frequency > b.frequency;
      return a.label < b.label;
    });
    if (!members.empty()) {
      high_level[c] = backends_->coder->generate_high_level_codes(
          members, config_.high_level_codes_per_cluster, config_.question, state.registry);
    }
  });

  std::vector<CodeId> extra_ids;
  std::vector<std::string> extra_labels;
  {
    std::set<CodeId> known(universe.begin(), universe.end());
    for (const auto& cluster_codes : high_level) {
      for (const auto& code : cluster_codes) {
        if (known.insert(code.id).second) {
          extra_ids.push_back(code.id);
          extra_labels.push_back(code.label);
        }
      }
    }
  }
  if (!extra_ids.empty()) {
    std::vector<EmbeddingVector> extra_vectors =
        backends_->embedder_client->embed_batch(extra_labels);
    std::vector<CodeId> all_ids = index.ids;
    std::vector<EmbeddingVector> all_vectors = index.vectors;
    all_ids.insert(all_ids.end(), extra_ids.begin(), extra_ids.end());
    all_vectors.insert(all_vectors.end(), extra_vectors.begin(), extra_vectors.end());
    index = EmbeddingIndex::build(std::move(all_ids), std::move(all_vectors));
  }

  // Step 4: similarity-banded pair selection and classification per cluster.
  std::vector<ScoredPair> pairs;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    std::vector<CodeId> cluster_ids = clusters[c];
    std::set<CodeId> present(cluster_ids.begin(), cluster_ids.end());
    for (const auto& code : high_level[c]) {
      if (present.insert(code.id).second) cluster_ids.push_back(code.id);
    }
    for (auto& pair : filter_pairs(cluster_ids, index, config_.relations)) {
      pairs.push_back(std::move(pair));
    }
  }
  const std::vector<ClassifiedPair> classified =
      classify_pairs(pairs, *backends_->classifier, state.registry, config_.workers);

  // Step 5: graph construction with active deduction.
  CodeGraph graph;
  for (const auto& id : index.ids) {
    const Code* code = state.registry.find(id);
    CodeRecord rec;
    rec.id = id;
    rec.label = code->label;
    auto fit = freq.find(id);
    rec.frequency = fit == freq.end() ? 0 : fit->second;
    rec.origin = code->origin;
    graph.add_code(rec);
  }
  for (const auto& pair : classified) graph.insert_relation(pair);

  // Step 6: cleanup, then rewrite assignments onto the cleaned codebook.
  GraphTransform transform = cleanup(graph, config_.cleanup);
  for (auto& a : assignments) a.code_ids = remap_codes(a.code_ids, transform.remap);

  const std::map<CodeId, int> final_freq = frequency_map(assignments);
  state.registry.reset_frequencies();
  for (const auto& [id, rec] : transform.graph.records()) {
    auto it = final_freq.find(id);
    const int f = it == final_freq.end() ? 0 : it->second;
    transform.graph.set_frequency(id, f);
    state.registry.set_frequency(id, f);
  }

  state.assignments = std::move(assignments);
  state.graph = std::move(transform.graph);
  state.codebook = extract_codebook(state.graph);

  const CallSnapshot after = backends_->snapshot();
  double snapshot_parsimony = 0.0;
  if (state.codebook.codes.size() >= 2) {
    snapshot_parsimony = parsimony(state.codebook, index);
  }
  long total_assigned = 0;
  for (const auto& a : state.assignments) total_assigned += static_cast<long>(a.code_ids.size());
  nlohmann::json metrics = {
      {"iteration", iteration},
      {"codebook_size", state.codebook.codes.size()},
      {"graph_edges", state.graph.edges().size()},
      {"classified_pairs", classified.size()},
      {"clusters", clustering.k},
      {"train_datapoints", train.size()},
      {"mean_codes_per_datapoint",
       train.empty() ? 0.0 : static_cast<double>(total_assigned) / static_cast<double>(train.size())},
      {"parsimony", snapshot_parsimony},
      {"revision_fallbacks", fallbacks},
      {"new_codes_registered", new_codes},
      {"llm_calls",
       {{"chat", after.chat - before.chat},
        {"embedding", after.embedding - before.embedding},
        {"total", (after.chat - before.chat) + (after.embedding - before.embedding)}}},
  };

  const fs::path dir = paths_.iter_dir(iteration);
  fs::create_directories(dir);
  write_assignments(dir / "assignments.jsonl", state.assignments);
  write_json_file(dir / "codebook.json", state.codebook.to_json());
  write_json_file(dir / "graph.json", state.graph.to_json());
  write_json_file(dir / "clustering.json", clustering_to_json(clustering));
  write_json_file(dir / "metrics.json", metrics);
}

void Pipeline::load_iteration(State& state, int iteration) const {
  const fs::path dir = paths_.iter_dir(iteration);
  state.assignments = read_assignments(dir / "assignments.jsonl");
  state.codebook = Codebook::from_json(read_json_file(dir / "codebook.json"));
  state.graph = CodeGraph::from_json(read_json_file(dir / "graph.json"));
  for (const auto& code : state.codebook.codes) {
    const Code& registered = state.registry.register_label(code.label, code.origin);
    if (registered.id != code.id) {
      throw ValidationError("codebook label \"" + code.label + "\" does not hash to " + code.id);
    }
    state.registry.set_frequency(code.id, code.frequency);
  }
}

int Pipeline::completed_iterations() const {
  if (!fs::exists(paths_.manifest())) return 0;
  const nlohmann::json manifest = read_json_file(paths_.manifest());
  int completed = manifest.value("completed", 0);
  // The manifest promises that every listed artifact exists and parses.
  for (const auto& iter : manifest.at("iterations")) {
    const fs::path dir = paths_.root / iter.at("path").get<std::string>();
    for (const auto& artifact : iter.at("artifacts")) {
      const fs::path file = dir / artifact.get<std::string>();
      if (!fs::exists(file)) {
        throw ValidationError("manifest lists a missing artifact: " + file.string());
      }
    }
  }
  return completed;
}

void Pipeline::verify_fingerprint() const {
  if (!fs::exists(paths_.config())) return;
  const nlohmann::json stored = read_json_file(paths_.config());
  const RunConfig stored_config = RunConfig::from_json(stored);
  if (stored_config.fit_fingerprint() != config_.fit_fingerprint()) {
    throw ConfigError("run directory " + paths_.root.string() +
                      " was fitted with a different configuration; use a fresh --run-id");
  }
}

nlohmann::json Pipeline::read_manifest() const {
  if (!fs::exists(paths_.manifest())) {
    throw ValidationError("run " + config_.run_id + " has no manifest at " +
                          paths_.manifest().string());
  }
  return read_json_file(paths_.manifest());
}

void Pipeline::write_manifest(int completed, double wall_clock_s) const {
  nlohmann::json iterations = nlohmann::json::array();
  std::size_t chat = 0;
  std::size_t embedding = 0;
  for (int i = 1; i <= completed; ++i) {
    const nlohmann::json metrics = read_json_file(paths_.iter_dir(i) / "metrics.json");
    chat += metrics.at("llm_calls").at("chat").get<std::size_t>();
    embedding += metrics.at("llm_calls").at("embedding").get<std::size_t>();
    iterations.push_back(
        {{"iteration", i},
         {"path", "iter-" + std::to_string(i)},
         {"artifacts",
          {"assignments.jsonl", "codebook.json", "graph.json", "clustering.json",
           "metrics.json"}}});
  }
  nlohmann::json manifest = {
      {"run_id", config_.run_id},
      {"completed", completed},
      {"iterations", iterations},
      {"llm_calls", {{"chat", chat}, {"embedding", embedding}, {"total", chat + embedding}}},
      {"wall_clock_s", wall_clock_s},
  };
  write_json_file(paths_.manifest(), manifest);
}

nlohmann::json Pipeline::fit() {
  const auto started = std::chrono::steady_clock::now();
  std::vector<Document> docs = load_corpus(config_.corpus_path, config_.corpus_format);
  const std::vector<Datapoint> datapoints = build_datapoints(docs);
  if (datapoints.size() < 2) {
    throw ValidationError("fitting requires at least 2 datapoints, got " +
                          std::to_string(datapoints.size()));
  }
  std::vector<Datapoint> train;
  std::vector<Datapoint> test;
  split_datapoints(datapoints, train, test);
  if (train.empty()) throw ValidationError("train split is empty");

  fs::create_directories(paths_.root);
  LockGuard lock(paths_.lock());
  verify_fingerprint();

  int completed = completed_iterations();
  if (completed >= config_.iterations) {
    log_info("run already has " + std::to_string(completed) + " iterations; nothing to do");
    return read_manifest();
  }
  if (!fs::exists(paths_.config())) {
    write_json_file(paths_.config(), config_.to_json());
  }

  State state;
  if (completed >= 1) {
    load_iteration(state, completed);
    log_info("resuming from iteration " + std::to_string(completed));
  }
  for (int iteration = completed + 1; iteration <= config_.iterations; ++iteration) {
    run_iteration(state, iteration, train);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(iteration, elapsed);
  }
  // Refresh the stored config so the snapshot reflects the extended run.
  write_json_file(paths_.config(), config_.to_json());
  return read_manifest();
}

MetricReport Pipeline::evaluate() {
  LockGuard lock(paths_.lock());
  const int completed = completed_iterations();
  if (completed < 1) throw ValidationError("run has no fitted iterations to evaluate");

  State state;
  load_iteration(state, completed);
  if (state.codebook.codes.empty()) throw ValidationError("fitted codebook is empty");

  std::vector<Document> docs = load_corpus(config_.corpus_path, config_.corpus_format);
  const std::vector<Datapoint> datapoints = build_datapoints(docs);
  std::vector<Datapoint> train;
  std::vector<Datapoint> test;
  split_datapoints(datapoints, train, test);
  if (test.empty()) throw ValidationError("test split is empty");

  // Frozen-codebook retrieval index.
  std::vector<CodeId> book_ids;
  std::vector<std::string> book_labels;
  for (const auto& code : state.codebook.codes) {
    book_ids.push_back(code.id);
    book_labels.push_back(code.label);
  }
  const EmbeddingIndex index = EmbeddingIndex::build(
      book_ids, backends_->embedder_client->embed_batch(book_labels));

  std::vector<Assignment> predictions(test.size());
  parallel_for(test.size(), config_.workers, [&](std::size_t i) {
    const Datapoint& dp = test[i];
    std::vector<CodeId> codes;
    try {
      std::vector<std::string> open_labels =
          backends_->coder->open_code_labels(dp.text, config_.question);
      if (open_labels.size() > 20) open_labels.resize(20);
      const std::vector<EmbeddingVector> vectors =
          backends_->embedder_client->embed_batch(open_labels);
      std::vector<PoolAnchor> anchors;
      for (std::size_t a = 0; a < open_labels.size(); ++a) {
        anchors.push_back(
            PoolAnchor{code_id_for_label(open_labels[a]), vectors[a], /*member=*/false});
      }
      const CandidatePool pool = assemble_pool(anchors, state.graph, index, config_.refine);
      codes = select_codes(*backends_->coder_client, dp.text, pool, state.registry,
                           backends_->prompts, config_.refine);
    } catch (const CodingError& e) {
      log_warn("prediction failed for " + dp.id + ": " + e.what() +
               "; recording an empty assignment");
    }
    predictions[i] = Assignment{dp.id, std::move(codes), completed, Split::test};
  });

  fs::create_directories(paths_.eval_dir());
  write_assignments(paths_.eval_dir() / "predictions.jsonl", predictions);

  MetricReport report;
  report.weights = config_.metric_weights;
  report.codebook_size = static_cast<int>(state.codebook.codes.size());
  report.reusability = reusability(state.codebook, predictions);
  {
    std::set<CodeId> used;
    for (const auto& p : predictions) {
      for (const auto& id : p.code_ids) used.insert(id);
    }
    report.used_codes = static_cast<int>(used.size());
  }
  report.parsimony = parsimony(state.codebook, index);

  const CodeDistribution train_dist = distribution_from_assignments(state.assignments);
  const CodeDistribution test_dist = distribution_from_assignments(predictions);
  if (test_dist.probabilities.empty() || train_dist.probabilities.empty()) {
    log_warn("empty code distribution; stability recorded as 0");
    report.stability = 0.0;
  } else {
    report.stability = stability(train_dist, test_dist);
  }

  // Seeded judge sample over the test split.
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), 0);
  DetRng rng(config_.seed ^ fnv1a64("judge-sample"));
  rng.shuffle(order);
  const std::size_t sample_n =
      std::min<std::size_t>(static_cast<std::size_t>(config_.judge_sample_size), test.size());
  order.resize(sample_n);
  std::sort(order.begin(), order.end());
  for (std::size_t i : order) report.sample_ids.push_back(test[i].id);
  report.sample_size = static_cast<int>(sample_n);

  std::vector<std::optional<int>> fitness_scores(sample_n);
  std::vector<std::optional<int>> coverage_scores(sample_n);
  parallel_for(sample_n, config_.workers, [&](std::size_t s) {
    const Datapoint& dp = test[order[s]];
    const Assignment& prediction = predictions[order[s]];
    std::vector<std::string> labels;
    for (const auto& id : prediction.code_ids) {
      labels.push_back(state.registry.label_of(id));
    }
    if (!labels.empty()) {
      fitness_scores[s] = judge_fitness(*backends_->judge_client, backends_->prompts,
                                        config_.question, dp.text, labels);
    }
    coverage_scores[s] = judge_coverage(*backends_->judge_client, backends_->prompts,
                                        config_.question, dp.text, labels);
  });
  std::vector<int> fitness_kept;
  std::vector<int> coverage_kept;
  for (std::size_t s = 0; s < sample_n; ++s) {
    if (fitness_scores[s]) fitness_kept.push_back(*fitness_scores[s]);
    if (coverage_scores[s]) coverage_kept.push_back(*coverage_scores[s]);
  }
  report.fitness_judged = static_cast<int>(fitness_kept.size());
  report.coverage_judged = static_cast<int>(coverage_kept.size());
  if (fitness_kept.empty()) {
    log_warn("no judgeable datapoints for fitness; recording 0");
    report.fitness = 0.0;
  } else {
    report.fitness = aggregate_judged(fitness_kept);
  }
  if (coverage_kept.empty()) {
    log_warn("no judgeable datapoints for coverage; recording 0");
    report.coverage = 0.0;
  } else {
    report.coverage = aggregate_judged(coverage_kept);
  }
  report.composite = composite({report.reusability, report.fitness, report.coverage,
                                report.parsimony, report.stability},
                               report.weights);

  write_json_file(paths_.eval_dir() / "metrics.json", report.to_json());
  {
    std::ofstream table(paths_.eval_dir() / "metrics.txt");
    table << report.to_table();
  }
  return report;
}

namespace {

std::string render_hierarchy(const Codebook& codebook, std::size_t max_lines = 200) {
  std::map<CodeId, std::vector<CodeId>> children;
  std::set<CodeId> has_parent;
  for (const auto& [child, parent] : codebook.subsumptions) {
    children[parent].push_back(child);
    has_parent.insert(child);
  }
  std::vector<const Code*> roots;
  for (const auto& code : codebook.codes) {
    if (!has_parent.count(code.id)) roots.push_back(&code);
  }
  auto by_freq = [&](const CodeId& a, const CodeId& b) {
    const Code* ca = codebook.find(a);
    const Code* cb = codebook.find(b);
    if (ca->frequency != cb->frequency) return ca->frequency > cb->frequency;
    return ca->label < cb->label;
  };
  std::sort(roots.begin(), roots.end(), [](const Code* a, const Code* b) {
    if (a->frequency != b->frequency) return a->frequency > b->frequency;
    return a->label < b->label;
  });
  std::ostringstream out;
  std::size_t lines = 0;
  std::function<void(const CodeId&, int)> render = [&](const CodeId& id, int depth) {
    if (lines >= max_lines) return;
    const Code* code = codebook.find(id);
    if (code == nullptr) return;
    for (int i = 0; i < depth; ++i) out << "  ";
    out << code->label << " (" << code->frequency << ")\n";
    ++lines;
    auto it = children.find(id);
    if (it == children.end()) return;
    std::vector<CodeId> kids = it->second;
    std::sort(kids.begin(), kids.end(), by_freq);
    for (const auto& kid : kids) render(kid, depth + 1);
  };
  for (const auto* root : roots) render(root->id, 0);
  if (lines >= max_lines) out << "... (truncated)\n";
  return out.str();
}

std::string render_frequencies(const Codebook& codebook, std::size_t max_lines = 200) {
  std::vector<const Code*> by_freq;
  for (const auto& code : codebook.codes) by_freq.push_back(&code);
  std::sort(by_freq.begin(), by_freq.end(), [](const Code* a, const Code* b) {
    if (a->frequency != b->frequency) return a->frequency > b->frequency;
    return a->label < b->label;
  });
  std::ostringstream out;
  std::size_t lines = 0;
  for (const auto* code : by_freq) {
    if (lines++ >= max_lines) {
      out << "... (truncated)\n";
      break;
    }
    out << code->label << ": " << code->frequency << "\n";
  }
  return out.str();
}

}  // namespace

std::string Pipeline::report() {
  LockGuard lock(paths_.lock());
  const int completed = completed_iterations();
  if (completed < 1) throw ValidationError("run has no fitted iterations to report on");
  State state;
  load_iteration(state, completed);
  if (state.codebook.codes.empty()) throw ValidationError("fitted codebook is empty");

  ChatRequest req;
  req.system_text = backends_->prompts.judge_system;
  req.prompt_token_budget = 20000;
  req.max_output_tokens = 4096;
  req.user_text = prompts::render(backends_->prompts.report,
                                  {{"question", config_.question.text},
                                   {"hierarchy", render_hierarchy(state.codebook)},
                                   {"frequencies", render_frequencies(state.codebook)}});
  const std::string text = backends_->coder_client->complete(req);
  std::ofstream out(paths_.report());
  if (!out) throw ValidationError("cannot write " + paths_.report().string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
  return text;
}

AlignmentReport Pipeline::align(const std::string& gt_path) {
  LockGuard lock(paths_.lock());
  const int completed = completed_iterations();
  if (completed < 1) throw ValidationError("run has no fitted iterations to align");
  State state;
  load_iteration(state, completed);
  if (state.codebook.codes.empty()) throw ValidationError("fitted codebook is empty");
  const std::vector<GtCode> gt = load_gt_codebook(gt_path);

  std::vector<CodeId> ids;
  std::vector<std::string> labels;
  for (const auto& code : state.codebook.codes) {
    ids.push_back(code.id);
    labels.push_back(code.label);
  }
  const EmbeddingIndex index =
      EmbeddingIndex::build(ids, backends_->embedder_client->embed_batch(labels));

  AlignOptions options;
  options.clusters = config_.align_clusters;
  options.codes_per_cluster = config_.align_codes_per_cluster;
  options.seed = config_.seed;
  const AlignmentReport report =
      align_codebooks(*backends_->judge_client, *backends_->coder, backends_->prompts,
                      state.codebook, index, gt, config_.question, options);
  write_json_file(paths_.alignment(), report.to_json());
  return report;
}

std::string Pipeline::inspect(const std::string& what) const {
  const int completed = completed_iterations();
  if (completed < 1) throw ValidationError("unknown or unfitted run: " + config_.run_id);

  std::ostringstream out;
  if (what == "codebook") {
    const Codebook codebook =
        Codebook::from_json(read_json_file(paths_.iter_dir(completed) / "codebook.json"));
    out << "codebook after iteration " << completed << ": " << codebook.codes.size()
        << " codes, " << codebook.subsumptions.size() << " subsumption edges\n\n";
    out << render_hierarchy(codebook, 10000);
  } else if (what == "graph") {
    const CodeGraph graph =
        CodeGraph::from_json(read_json_file(paths_.iter_dir(completed) / "graph.json"));
    std::map<std::string, int> by_relation;
    for (const auto& [_, state] : graph.edges()) ++by_relation[to_string(state.relation)];
    out << "graph after iteration " << completed << ": " << graph.node_count() << " nodes, "
        << graph.edges().size() << " edges\n";
    for (const auto& [rel, count] : by_relation) out << "  " << rel << ": " << count << "\n";
    out << "\n";
    for (const auto& [key, state] : graph.edges()) {
      const std::string& a = graph.record(key.first).label;
      const std::string& b = graph.record(key.second).label;
      const char* arrow = state.relation == Relation::forward     ? " -> "
                          : state.relation == Relation::backward  ? " <- "
                          : state.relation == Relation::equivalent ? " <-> "
                                                                    : " _|_ ";
      out << a << arrow << b << "  [" << to_string(state.provenance) << ", round "
          << state.round << "]\n";
    }
  } else if (what == "assignments") {
    for (int i = 1; i <= completed; ++i) {
      const auto assignments = read_assignments(paths_.iter_dir(i) / "assignments.jsonl");
      std::set<CodeId> distinct;
      long total = 0;
      for (const auto& a : assignments) {
        total += static_cast<long>(a.code_ids.size());
        distinct.insert(a.code_ids.begin(), a.code_ids.end());
      }
      out << "iter-" << i << ": " << assignments.size() << " datapoints, " << distinct.size()
          << " distinct codes, "
          << (assignments.empty() ? 0.0
                                  : static_cast<double>(total) /
                                        static_cast<double>(assignments.size()))
          << " codes/datapoint\n";
    }
    const fs::path predictions = paths_.eval_dir() / "predictions.jsonl";
    if (fs::exists(predictions)) {
      const auto preds = read_assignments(predictions);
      std::set<CodeId> distinct;
      for (const auto& p : preds) distinct.insert(p.code_ids.begin(), p.code_ids.end());
      out << "test: " << preds.size() << " datapoints, " << distinct.size()
          << " distinct codes\n";
    }
  } else if (what == "metrics") {
    out << "iteration  codebook  clusters  pairs  codes/dp  parsimony\n";
    for (int i = 1; i <= completed; ++i) {
      const nlohmann::json m = read_json_file(paths_.iter_dir(i) / "metrics.json");
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-10d %-9d %-9d %-6d %-9.3f %-9.4f\n",
                    m.at("iteration").get<int>(), m.at("codebook_size").get<int>(),
                    m.at("clusters").get<int>(), m.at("classified_pairs").get<int>(),
                    m.at("mean_codes_per_datapoint").get<double>(),
                    m.at("parsimony").get<double>());
      out << buf;
    }
    const fs::path eval_metrics = paths_.eval_dir() / "metrics.json";
    if (fs::exists(eval_metrics)) {
      const nlohmann::json m = read_json_file(eval_metrics);
      out << "\nevaluation (test split):\n";
      for (const char* key :
           {"reusability", "fitness", "coverage", "parsimony", "stability", "composite"}) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "  %-12s %.4f\n", key, m.at(key).get<double>());
        out << buf;
      }
    }
  } else {
    throw ValidationError("unknown inspect target: " + what +
                          " (expected codebook|graph|assignments|metrics)");
  }
  return out.str();
}

}  // namespace qcode
