#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "qcode/config.hpp"
#include "qcode/metrics.hpp"

namespace qcode {

struct Datapoint {
  std::string id;
  std::string doc_id;
  std::string text;
};

// Run directory layout: <runs_dir>/<run_id>/iter-<n>/ plus eval/, report.md,
// alignment.json, config.json, manifest.json.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path lock() const { return root / "run.lock"; }
  std::filesystem::path iter_dir(int i) const {
    return root / ("iter-" + std::to_string(i));
  }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path report() const { return root / "report.md"; }
  std::filesystem::path alignment() const { return root / "alignment.json"; }

  static RunPaths for_run(const RunConfig& config);
};

// Orchestrates fit / evaluate / report / align / inspect over one run
// directory. Fitting is resumable at iteration granularity; evaluation never
// writes into fit-time artifacts.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  // Steps 1-6 plus refinement iterations on the train split; returns the
  // manifest.
  nlohmann::json fit();

  // Freezes the final codebook, predicts on the test split, and scores the
  // five metric dimensions.
  MetricReport evaluate();

  // Question-focused narrative from the fitted codebook; saved as report.md.
  std::string report();

  // Expert-schema alignment; writes alignment.json.
  AlignmentReport align(const std::string& gt_path);

  // Human-readable artifact dumps: codebook | graph | assignments | metrics.
  std::string inspect(const std::string& what) const;

  const RunConfig& config() const { return config_; }
  std::size_t llm_calls() const;

 private:
  struct State;
  struct Backends;

  std::vector<Datapoint> build_datapoints(const std::vector<Document>& docs) const;
  void split_datapoints(const std::vector<Datapoint>& datapoints,
                        std::vector<Datapoint>& train, std::vector<Datapoint>& test) const;
  void run_iteration(State& state, int iteration, const std::vector<Datapoint>& train);
  void persist_iteration(const State& state, int iteration, const nlohmann::json& metrics) const;
  void load_iteration(State& state, int iteration) const;
  nlohmann::json read_manifest() const;
  void write_manifest(int completed_iterations, double wall_clock_s) const;
  int completed_iterations() const;
  void verify_fingerprint() const;

  RunConfig config_;
  RunPaths paths_;
  std::unique_ptr<Backends> backends_;
};

// JSONL (de)serialization for assignments.
void write_assignments(const std::filesystem::path& path, const std::vector<Assignment>& as);
std::vector<Assignment> read_assignments(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

std::vector<GtCode> load_gt_codebook(const std::string& path);

}  // namespace qcode
