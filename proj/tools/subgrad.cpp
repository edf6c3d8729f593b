// Command-line front end: run, diagnose, report.

#include <CLI11.hpp>

#include <atomic>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "subgrad/experiment.hpp"

namespace {

using namespace subgrad;
using namespace subgrad::cli;

int run_one(const std::string& config_path, const fs::path& out_dir,
            std::optional<std::size_t> thin, bool diagnose, std::ostream& log) {
  try {
    ExperimentConfig cfg = load_config(config_path);
    const RunManifest m = cmd_run(cfg, out_dir, thin);
    const int code = exit_code_for(m);
    log << m.name << ": " << m.status << ", " << m.rows << " rows, "
        << std::setprecision(3) << m.wall_clock_seconds << " s -> " << m.path().string() << '\n';
    if (code != kOk) return code;
    if (diagnose) {
      const json summary = cmd_diagnose(m.path());
      for (const auto& [name, entry] : summary["diagnostics"].items())
        log << "  " << name << ": " << entry["verdict"].get<std::string>() << '\n';
    }
    return kOk;
  } catch (const CommandError& e) {
    log << config_path << ": " << e.what() << '\n';
    return e.code();
  } catch (const InputError& e) {
    log << config_path << ": " << e.what() << '\n';
    return kInputError;
  } catch (const NumericError& e) {
    log << config_path << ": " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    log << config_path << ": " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vanishing-step subgradient method experiments"};
  app.set_version_flag("--version", std::string(SUBGRAD_VERSION));
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run one or more configs");
  std::vector<std::string> configs;
  std::string out_dir = "runs";
  unsigned jobs = 1;
  std::size_t thin = 0;
  bool diagnose_after = false;
  run_cmd->add_option("configs", configs, "Config files")->required();
  run_cmd->add_option("-o,--out", out_dir, "Output directory (one sub-directory per run)");
  run_cmd->add_option("--jobs", jobs, "Number of configs run concurrently")->check(CLI::PositiveNumber);
  auto* thin_opt = run_cmd->add_option("--thin", thin, "Store every k-th iterate")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--diagnose", diagnose_after, "Run the configured diagnostics afterwards");

  auto* diag_cmd = app.add_subcommand("diagnose", "Run diagnostics on a stored run");
  std::string manifest;
  std::vector<std::string> only;
  unsigned diag_jobs = 1;
  diag_cmd->add_option("manifest", manifest, "manifest.json of the run")->required();
  diag_cmd->add_option("--only", only, "Comma-separated diagnostics")->delimiter(',');
  diag_cmd->add_option("--jobs", diag_jobs, "Diagnostics computed concurrently")->check(CLI::PositiveNumber);

  auto* report_cmd = app.add_subcommand("report", "Tabulate key scalars of several runs");
  std::vector<std::string> manifests;
  std::string report_csv;
  report_cmd->add_option("manifests", manifests, "manifest.json files");
  report_cmd->add_option("--csv", report_csv, "Also write the table as CSV to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  if (*run_cmd) {
    const std::optional<std::size_t> thin_k =
        thin_opt->count() > 0 ? std::optional<std::size_t>(thin) : std::nullopt;
    std::vector<int> codes(configs.size(), kOk);
    std::vector<std::string> logs(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k; (k = next++) < configs.size();) {
        std::ostringstream log;
        codes[k] = run_one(configs[k], out_dir, thin_k, diagnose_after, log);
        logs[k] = log.str();
      }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < std::min<std::size_t>(jobs, configs.size()); ++w)
      pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    int code = kOk;
    for (std::size_t k = 0; k < configs.size(); ++k) {
      (codes[k] == kOk ? std::cout : std::cerr) << logs[k];
      if (code == kOk) code = codes[k];
    }
    return code;
  }

  if (*diag_cmd) {
    try {
      const json summary = cmd_diagnose(manifest, only, diag_jobs);
      for (const auto& [name, entry] : summary["diagnostics"].items())
        std::cout << name << ": " << entry["verdict"].get<std::string>() << '\n';
      return kOk;
    } catch (const CommandError& e) {
      std::cerr << e.what() << '\n';
      return e.code();
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return kFailure;
    }
  }

  try {
    std::vector<fs::path> paths(manifests.begin(), manifests.end());
    const auto [csv, text] = cmd_report(paths);
    if (!report_csv.empty()) write_text(report_csv, csv);
    std::cout << text;
    return kOk;
  } catch (const CommandError& e) {
    std::cerr << e.what() << '\n';
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kFailure;
  }
}
