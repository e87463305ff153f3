// Command-line front end: rrm <train|evaluate|baseline|transfer> [flags]
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "rrm/checkpoint.hpp"
#include "rrm/harness.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<std::string> selection;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed (overrides the config file)");
  cmd->add_option("--jobs", f.jobs, "parallel configurations")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--checkpoint", f.checkpoint, "checkpoint file for evaluate/transfer");
  cmd->add_option("--selection", f.selection, "user selection at evaluation")
      ->check(CLI::IsMember({"sample", "argmax"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resilient radio resource management: training, evaluation and baselines"};
  app.set_version_flag("--version", rrm::kVersionTag);
  app.require_subcommand(1);

  Flags flags;
  const std::pair<const char*, const char*> commands[] = {
      {"train", "train a policy and evaluate the best checkpoint on the test family"},
      {"evaluate", "evaluate a checkpoint on the test family"},
      {"baseline", "run full reuse, ITLinQ and WMMSE on the test family"},
      {"transfer", "evaluate a checkpoint on the configured (larger) network, next to full reuse"},
  };
  for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

  CLI11_PARSE(app, argc, argv);
  const std::string mode = app.get_subcommands().front()->get_name();

  try {
    rrm::ExperimentConfig config = flags.config.empty() ? rrm::ExperimentConfig{} : rrm::load_config(flags.config);
    config.mode = rrm::mode_from_string(mode);
    if (flags.seed) config.master_seed = *flags.seed;
    if (flags.jobs) config.jobs = *flags.jobs;
    if (flags.out) config.out_dir = *flags.out;
    if (flags.checkpoint) config.checkpoint = *flags.checkpoint;
    if (flags.selection) config.selection = rrm::selection_mode_from_string(*flags.selection);

    const rrm::RunRecord record = rrm::run(config, &std::cerr);
    for (const auto& r : record.results)
      std::cout << r.policy << ": mean " << rrm::format_double(r.metrics.mean_rate) << " p5 "
                << rrm::format_double(r.metrics.percentile_5) << " bps/Hz over " << r.config_ids.size()
                << " configs\n";
    std::cout << "wrote " << record.metrics_path.string() << "\n";
    return 0;
  } catch (const rrm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rrm::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
