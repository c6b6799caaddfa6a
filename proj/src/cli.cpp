#include "qcode/cli.hpp"

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "qcode/pipeline.hpp"

namespace qcode::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;
constexpr int kExitValidation = 4;

struct GlobalArgs {
  std::string config_path;
  std::string run_id;
  std::string runs_dir;
  std::string backend_profile;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool mock = false;
  bool verbose = false;
};

// Commands other than fit can run from the stored config snapshot alone.
RunConfig resolve_config(const GlobalArgs& args, bool allow_snapshot) {
  RunConfig config;
  if (!args.config_path.empty()) {
    config = load_config(args.config_path);
  } else if (allow_snapshot) {
    const std::string runs_dir = args.runs_dir.empty() ? "runs" : args.runs_dir;
    const std::string run_id = args.run_id.empty() ? "default" : args.run_id;
    const std::filesystem::path snapshot =
        std::filesystem::path(runs_dir) / run_id / "config.json";
    if (!std::filesystem::exists(snapshot)) {
      throw ConfigError("no --config given and no snapshot at " + snapshot.string());
    }
    config = RunConfig::from_json(read_json_file(snapshot));
    config.runs_dir = runs_dir;
  } else {
    throw ConfigError("--config is required");
  }
  if (!args.run_id.empty()) config.run_id = args.run_id;
  if (!args.runs_dir.empty()) config.runs_dir = args.runs_dir;
  if (args.seed_set) config.seed = args.seed;
  if (args.mock) config.mock = true;
  if (args.verbose) set_log_level(LogLevel::info);
  if (!args.backend_profile.empty()) {
    // Profiles live under "profiles" in the raw config file.
    if (args.config_path.empty()) {
      throw ConfigError("--backend-profile requires --config");
    }
    const nlohmann::json raw = read_json_file(args.config_path);
    if (!raw.contains("profiles") || !raw.at("profiles").contains(args.backend_profile)) {
      throw ConfigError("config has no backend profile named \"" + args.backend_profile + "\"");
    }
    nlohmann::json merged = raw;
    merged["backends"] = raw.at("profiles").at(args.backend_profile);
    merged.erase("profiles");
    RunConfig profiled = RunConfig::from_json(merged);
    profiled.run_id = config.run_id;
    profiled.runs_dir = config.runs_dir;
    if (args.seed_set) profiled.seed = args.seed;
    if (args.mock) profiled.mock = true;
    return profiled;
  }
  return config;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"qcode - automated qualitative coding pipeline"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "Path to the run configuration (JSON)");
  app.add_option("--run-id", args.run_id, "Run identifier inside the runs directory");
  app.add_option("--runs-dir", args.runs_dir, "Root directory for run artifacts");
  app.add_option("--backend-profile", args.backend_profile,
                 "Named backend profile from the config's \"profiles\" section");
  auto* seed_opt = app.add_option("--seed", args.seed, "Override the config seed");
  app.add_flag("--mock", args.mock, "Force the deterministic offline mock backend");
  app.add_flag("-v,--verbose", args.verbose, "Verbose logging");

  auto* fit = app.add_subcommand("fit", "Fit the codebook on the train split");
  auto* evaluate = app.add_subcommand("evaluate", "Predict on the test split and score it");
  auto* report = app.add_subcommand("report", "Generate the research summary");
  auto* align = app.add_subcommand("align", "Align the codebook with a reference codebook");
  std::string gt_path;
  align->add_option("--gt", gt_path, "Reference codebook (JSON list of {id,label,description?})")
      ->required();
  auto* inspect = app.add_subcommand("inspect", "Dump run artifacts in readable form");
  std::string what;
  inspect->add_option("what", what, "codebook|graph|assignments|metrics")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  args.seed_set = seed_opt->count() > 0;

  try {
    if (fit->parsed()) {
      Pipeline pipeline(resolve_config(args, /*allow_snapshot=*/false));
      const nlohmann::json manifest = pipeline.fit();
      std::cout << "fitted " << manifest.at("completed").get<int>() << " iteration(s), "
                << manifest.at("llm_calls").at("total").get<std::size_t>() << " llm calls\n";
      return kExitOk;
    }
    if (evaluate->parsed()) {
      Pipeline pipeline(resolve_config(args, /*allow_snapshot=*/true));
      const MetricReport metric_report = pipeline.evaluate();
      std::cout << metric_report.to_table();
      return kExitOk;
    }
    if (report->parsed()) {
      Pipeline pipeline(resolve_config(args, /*allow_snapshot=*/true));
      std::cout << pipeline.report() << "\n";
      return kExitOk;
    }
    if (align->parsed()) {
      Pipeline pipeline(resolve_config(args, /*allow_snapshot=*/true));
      const AlignmentReport alignment = pipeline.align(gt_path);
      std::cout << "alignment recall: " << alignment.recall << " over "
                << alignment.matches.size() << " reference codes\n";
      return kExitOk;
    }
    if (inspect->parsed()) {
      Pipeline pipeline(resolve_config(args, /*allow_snapshot=*/true));
      std::cout << pipeline.inspect(what);
      return kExitOk;
    }
    throw ConfigError("no command given");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const BudgetError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace qcode::cli
