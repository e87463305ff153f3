#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrm/baselines.hpp"
#include "rrm/gnn.hpp"
#include "rrm/netgen.hpp"
#include "rrm/seed.hpp"
#include "rrm/trainer.hpp"

namespace rrm {

inline constexpr const char* kVersionTag = "rrm 1.0.0";

enum class Mode { kTrain, kEvaluate, kBaseline, kTransfer };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& text);

// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  Mode mode = Mode::kTrain;
  std::string run_id = "run";
  std::optional<std::uint64_t> master_seed;
  // Optional per-stream replacements: {"topology", "fading", "init", "sampling"}.
  nlohmann::json seed_overrides = nlohmann::json::object();
  int jobs = 1;
  std::filesystem::path out_dir = "out";
  std::filesystem::path checkpoint;  // evaluate / transfer input
  SelectionMode selection = SelectionMode::kSample;
  TopologyParams topology;
  ChannelParams channel;
  GnnHyper gnn;
  TrainHyper train;
  BaselineParams baseline;
  std::vector<std::string> baseline_policies{"full_reuse", "itlinq", "wmmse"};

  void validate() const;
  // Sub-streams from master_seed with overrides applied. Requires master_seed.
  SeedSet seeds() const;
  nlohmann::json to_json() const;
};

// Parses a config document. Unknown keys and wrong types are rejected with the
// field path in the message.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// The three disjoint configuration families of a run.
struct Families {
  std::vector<NetworkConfig> train;
  std::vector<NetworkConfig> validation;
  std::vector<NetworkConfig> test;
};

Families make_families(const ExperimentConfig& config);
std::vector<NetworkConfig> make_test_family(const ExperimentConfig& config);

// Stream seeds for the evaluation of each family.
std::uint64_t family_fading_seed(const SeedSet& seeds, int family);
std::uint64_t family_sampling_seed(const SeedSet& seeds, int family);

struct PolicyMetrics {
  std::string policy;
  Metrics metrics;
  std::vector<int> config_ids;
};

struct RunRecord {
  nlohmann::json config;
  std::string version = kVersionTag;
  std::vector<PolicyMetrics> results;
  std::optional<TrainHistory> history;
  int best_epoch = -1;
  double duration_seconds = 0.0;
  std::filesystem::path metrics_path;
  std::filesystem::path history_path;
  std::filesystem::path checkpoint_path;
};

// Executes the configured mode and writes metrics.csv, history.csv (train),
// checkpoints and run.json under config.out_dir. Progress lines go to `log`.
// `on_iteration` observes every training minibatch.
RunRecord run(const ExperimentConfig& config, std::ostream* log = nullptr,
              std::function<void(const IterationEvent&)> on_iteration = {});

std::string format_double(double v);
std::string metrics_csv(const ExperimentConfig& config, const std::vector<PolicyMetrics>& results);
std::string history_csv(const TrainHistory& history);

}  // namespace rrm
