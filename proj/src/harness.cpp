#include "rrm/harness.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "rrm/checkpoint.hpp"

namespace rrm {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where("") + ": expected an object");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return obj_.contains(key);
  }

  void read(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    out = v.get<double>();
  }

  void read(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
    const auto wide = v.get<std::int64_t>();
    if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max())
      throw ConfigError(where(key) + ": integer out of range");
    out = static_cast<int>(wide);
  }

  void read(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(where(key) + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void read(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    out = v.get<std::string>();
  }

  void read(const std::string& key, std::vector<int>& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of integers");
    std::vector<int> tmp;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ConfigError(where(key) + ": expected an array of integers");
      tmp.push_back(e.get<int>());
    }
    out = std::move(tmp);
  }

  void read(const std::string& key, std::vector<std::string>& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of strings");
    std::vector<std::string> tmp;
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(where(key) + ": expected an array of strings");
      tmp.push_back(e.get<std::string>());
    }
    out = std::move(tmp);
  }

  const json* object(const std::string& key) {
    if (!has(key)) return nullptr;
    return &obj_.at(key);
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : "field '" + path_ + "'";
    return "field '" + (path_.empty() ? key : path_ + "." + key) + "'";
  }

  void finish() const {
    for (const auto& item : obj_.items())
      if (!known_.count(item.key())) throw ConfigError(where(item.key()) + ": unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> known_;
};

template <class Fn>
void wrap_validate(const std::string& block, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("block '" + block + "': " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

constexpr int kTrainFamily = 1;
constexpr int kValidationFamily = 2;
constexpr int kTestFamily = 3;

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kTrain: return "train";
    case Mode::kEvaluate: return "evaluate";
    case Mode::kBaseline: return "baseline";
    case Mode::kTransfer: return "transfer";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& text) {
  if (text == "train") return Mode::kTrain;
  if (text == "evaluate") return Mode::kEvaluate;
  if (text == "baseline") return Mode::kBaseline;
  if (text == "transfer") return Mode::kTransfer;
  throw ConfigError("field 'mode': expected train|evaluate|baseline|transfer, got '" + text + "'");
}

SeedSet ExperimentConfig::seeds() const {
  if (!master_seed) throw ConfigError("field 'seed': a master seed is required");
  SeedSet s = SeedSet::from_master(*master_seed);
  FieldReader r(seed_overrides, "seeds");
  r.read("topology", s.topology);
  r.read("fading", s.fading);
  r.read("init", s.init);
  r.read("sampling", s.sampling);
  r.finish();
  return s;
}

void ExperimentConfig::validate() const {
  if (!master_seed) throw ConfigError("field 'seed': a master seed is required");
  (void)seeds();
  if (run_id.empty() || run_id.find_first_of(",\"\n\r") != std::string::npos)
    throw ConfigError("field 'run_id': must be non-empty and free of commas, quotes and newlines");
  if (jobs < 1) throw ConfigError("field 'jobs': must be >= 1");
  if (out_dir.empty()) throw ConfigError("field 'out': must not be empty");
  if ((mode == Mode::kEvaluate || mode == Mode::kTransfer) && checkpoint.empty())
    throw ConfigError("field 'checkpoint': required for mode " + to_string(mode));
  wrap_validate("topology", [&] { topology.validate(); });
  wrap_validate("channel", [&] { channel.validate(); });
  wrap_validate("gnn", [&] { gnn.validate(); });
  wrap_validate("train", [&] { train.validate(); });
  wrap_validate("baseline", [&] { baseline.validate(); });
  if (mode == Mode::kBaseline && baseline_policies.empty())
    throw ConfigError("field 'baseline.policies': at least one policy required");
  for (const auto& p : baseline_policies)
    if (p != "full_reuse" && p != "itlinq" && p != "wmmse")
      throw ConfigError("field 'baseline.policies': unknown policy '" + p + "'");
}

json ExperimentConfig::to_json() const {
  json j;
  j["mode"] = to_string(mode);
  j["run_id"] = run_id;
  if (master_seed) j["seed"] = *master_seed;
  j["seeds"] = seed_overrides;
  j["jobs"] = jobs;
  j["out"] = out_dir.string();
  j["checkpoint"] = checkpoint.string();
  j["selection"] = to_string(selection);
  j["topology"] = {{"area_side", topology.area_side},
                   {"num_aps", topology.num_aps},
                   {"num_ues", topology.num_ues},
                   {"min_ap_ap_dist", topology.min_ap_ap_dist},
                   {"min_ap_ue_dist", topology.min_ap_ue_dist}};
  j["channel"] = {{"k0_db", channel.k0_db},
                  {"d_bp", channel.d_bp},
                  {"alpha1", channel.alpha1},
                  {"alpha2", channel.alpha2},
                  {"shadowing_std_db", channel.shadowing_std_db},
                  {"noise_psd_dbm_hz", channel.noise_psd_dbm_hz},
                  {"bandwidth_hz", channel.bandwidth_hz},
                  {"p_max_dbm", channel.p_max_dbm},
                  {"ue_speed", channel.ue_speed},
                  {"carrier_hz", channel.carrier_hz},
                  {"step_seconds", channel.step_seconds},
                  {"num_sinusoids", channel.num_sinusoids}};
  j["gnn"] = {{"features", gnn.features}, {"leaky_slope", gnn.leaky_slope}, {"temperature", gnn.temperature}};
  j["train"] = {{"f_min", train.f_min},
                {"alpha", train.alpha},
                {"lr_power", train.lr_power},
                {"lr_selection", train.lr_selection},
                {"lr_x", train.lr_x},
                {"lr_z", train.lr_z},
                {"lr_lambda", train.lr_lambda},
                {"lr_mu", train.lr_mu},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"eval_steps", train.eval_steps},
                {"warmup_steps", train.warmup_steps},
                {"lr_halving_epochs", train.lr_halving_epochs},
                {"ema_beta", train.ema_beta},
                {"num_train", train.num_train},
                {"num_validation", train.num_validation},
                {"num_test", train.num_test},
                {"dual_order", to_string(train.dual_order)},
                {"allow_negative_slack", train.allow_negative_slack}};
  j["baseline"] = {{"wmmse_max_iters", baseline.wmmse_max_iters},
                   {"wmmse_tol", baseline.wmmse_tol},
                   {"itlinq_m_db", baseline.itlinq_m_db},
                   {"itlinq_eta", baseline.itlinq_eta},
                   {"policies", baseline_policies}};
  return j;
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  FieldReader r(doc, "");
  std::string text;
  if (r.has("mode")) {
    r.read("mode", text);
    c.mode = mode_from_string(text);
  }
  r.read("run_id", c.run_id);
  if (r.has("seed")) {
    std::uint64_t seed = 0;
    r.read("seed", seed);
    c.master_seed = seed;
  }
  if (const json* s = r.object("seeds")) {
    if (!s->is_object()) throw ConfigError("field 'seeds': expected an object");
    c.seed_overrides = *s;
  }
  r.read("jobs", c.jobs);
  if (r.has("out")) {
    r.read("out", text);
    c.out_dir = text;
  }
  if (r.has("checkpoint")) {
    r.read("checkpoint", text);
    c.checkpoint = text;
  }
  if (r.has("selection")) {
    r.read("selection", text);
    if (text != "sample" && text != "argmax")
      throw ConfigError("field 'selection': expected sample|argmax, got '" + text + "'");
    c.selection = selection_mode_from_string(text);
  }
  if (const json* t = r.object("topology")) {
    FieldReader b(*t, "topology");
    b.read("area_side", c.topology.area_side);
    b.read("num_aps", c.topology.num_aps);
    b.read("num_ues", c.topology.num_ues);
    b.read("min_ap_ap_dist", c.topology.min_ap_ap_dist);
    b.read("min_ap_ue_dist", c.topology.min_ap_ue_dist);
    b.finish();
  }
  if (const json* t = r.object("channel")) {
    FieldReader b(*t, "channel");
    b.read("k0_db", c.channel.k0_db);
    b.read("d_bp", c.channel.d_bp);
    b.read("alpha1", c.channel.alpha1);
    b.read("alpha2", c.channel.alpha2);
    b.read("shadowing_std_db", c.channel.shadowing_std_db);
    b.read("noise_psd_dbm_hz", c.channel.noise_psd_dbm_hz);
    b.read("bandwidth_hz", c.channel.bandwidth_hz);
    b.read("p_max_dbm", c.channel.p_max_dbm);
    b.read("ue_speed", c.channel.ue_speed);
    b.read("carrier_hz", c.channel.carrier_hz);
    b.read("step_seconds", c.channel.step_seconds);
    b.read("num_sinusoids", c.channel.num_sinusoids);
    b.finish();
  }
  if (const json* t = r.object("gnn")) {
    FieldReader b(*t, "gnn");
    b.read("features", c.gnn.features);
    b.read("leaky_slope", c.gnn.leaky_slope);
    b.read("temperature", c.gnn.temperature);
    b.finish();
  }
  if (const json* t = r.object("train")) {
    FieldReader b(*t, "train");
    b.read("f_min", c.train.f_min);
    b.read("alpha", c.train.alpha);
    b.read("lr_power", c.train.lr_power);
    b.read("lr_selection", c.train.lr_selection);
    b.read("lr_x", c.train.lr_x);
    b.read("lr_z", c.train.lr_z);
    b.read("lr_lambda", c.train.lr_lambda);
    b.read("lr_mu", c.train.lr_mu);
    b.read("epochs", c.train.epochs);
    b.read("batch_size", c.train.batch_size);
    b.read("eval_steps", c.train.eval_steps);
    b.read("warmup_steps", c.train.warmup_steps);
    b.read("lr_halving_epochs", c.train.lr_halving_epochs);
    b.read("ema_beta", c.train.ema_beta);
    b.read("num_train", c.train.num_train);
    b.read("num_validation", c.train.num_validation);
    b.read("num_test", c.train.num_test);
    if (b.has("dual_order")) {
      std::string order;
      b.read("dual_order", order);
      wrap_validate("train", [&] { c.train.dual_order = dual_order_from_string(order); });
    }
    if (b.has("allow_negative_slack")) {
      const json& flag = t->at("allow_negative_slack");
      if (!flag.is_boolean()) throw ConfigError("field 'train.allow_negative_slack': expected a boolean");
      c.train.allow_negative_slack = flag.get<bool>();
    }
    b.finish();
  }
  if (const json* t = r.object("baseline")) {
    FieldReader b(*t, "baseline");
    b.read("wmmse_max_iters", c.baseline.wmmse_max_iters);
    b.read("wmmse_tol", c.baseline.wmmse_tol);
    b.read("itlinq_m_db", c.baseline.itlinq_m_db);
    b.read("itlinq_eta", c.baseline.itlinq_eta);
    b.read("policies", c.baseline_policies);
    b.finish();
  }
  r.finish();
  if (c.master_seed) (void)c.seeds();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    int line = 1;
    for (std::size_t k = 0; k + 1 < upto; ++k)
      if (text[k] == '\n') ++line;
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
  }
  return config_from_json(doc);
}

std::uint64_t family_fading_seed(const SeedSet& seeds, int family) {
  return derive_seed(seeds.fading, {static_cast<std::uint64_t>(family)});
}

std::uint64_t family_sampling_seed(const SeedSet& seeds, int family) {
  return derive_seed(seeds.sampling, {static_cast<std::uint64_t>(family)});
}

static std::vector<NetworkConfig> family(const ExperimentConfig& c, int tag, int count) {
  return sample_family(c.topology, c.channel, count, derive_seed(c.seeds().topology, {static_cast<std::uint64_t>(tag)}));
}

Families make_families(const ExperimentConfig& config) {
  return {family(config, kTrainFamily, config.train.num_train),
          family(config, kValidationFamily, config.train.num_validation),
          family(config, kTestFamily, config.train.num_test)};
}

std::vector<NetworkConfig> make_test_family(const ExperimentConfig& config) {
  return family(config, kTestFamily, config.train.num_test);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metrics_csv(const ExperimentConfig& config, const std::vector<PolicyMetrics>& results) {
  std::ostringstream out;
  out << "run_id,mode,policy,m,n,seed,config_id,user_id,rate_bps_hz\n";
  const std::string prefix_tail = "," + std::to_string(config.topology.num_aps) + "," +
                                  std::to_string(config.topology.num_ues) + "," +
                                  std::to_string(config.master_seed.value_or(0)) + ",";
  for (const auto& r : results) {
    const std::string prefix = config.run_id + "," + to_string(config.mode) + "," + r.policy + prefix_tail;
    for (std::size_t c = 0; c < r.metrics.per_user_rates.size(); ++c) {
      const auto& rates = r.metrics.per_user_rates[c];
      for (std::size_t j = 0; j < rates.size(); ++j)
        out << prefix << r.config_ids[c] << "," << j << "," << format_double(rates[j]) << "\n";
    }
    out << prefix << "all,mean," << format_double(r.metrics.mean_rate) << "\n";
    out << prefix << "all,p5," << format_double(r.metrics.percentile_5) << "\n";
  }
  return out.str();
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch,lagrangian,mean_slack,mean_lambda,mean_mu,val_mean_rate,val_p5_rate\n";
  for (const auto& r : history.rows)
    out << r.epoch << "," << format_double(r.lagrangian) << "," << format_double(r.mean_slack) << ","
        << format_double(r.mean_lambda) << "," << format_double(r.mean_mu) << "," << format_double(r.val_mean_rate)
        << "," << format_double(r.val_p5_rate) << "\n";
  return out.str();
}

static std::vector<int> ids_of(const std::vector<NetworkConfig>& family) {
  std::vector<int> ids;
  ids.reserve(family.size());
  for (const auto& c : family) ids.push_back(c.id);
  return ids;
}

static Policy baseline_policy(const std::string& name, const BaselineParams& params) {
  if (name == "full_reuse")
    return [](const PolicyInput& in, std::mt19937_64&) { return full_reuse(in.h_squared, in.assoc, in.pf, in.radio); };
  if (name == "itlinq")
    return [params](const PolicyInput& in, std::mt19937_64&) {
      return itlinq(in.h_squared, in.assoc, in.pf, params, in.radio);
    };
  if (name == "wmmse")
    return [params](const PolicyInput& in, std::mt19937_64&) {
      return wmmse_decision(in.h_squared, in.assoc, in.pf, params, in.radio);
    };
  throw ConfigError("unknown baseline policy '" + name + "'");
}

RunRecord run(const ExperimentConfig& config, std::ostream* log,
              std::function<void(const IterationEvent&)> on_iteration) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const SeedSet seeds = config.seeds();
  std::filesystem::create_directories(config.out_dir);

  RunRecord record;
  record.config = config.to_json();
  record.metrics_path = config.out_dir / "metrics.csv";
  const EvalOptions eval{config.train.warmup_steps, config.train.eval_steps, config.train.ema_beta, config.jobs};
  const std::uint64_t test_fading = family_fading_seed(seeds, kTestFamily);
  const std::uint64_t test_sampling = family_sampling_seed(seeds, kTestFamily);
  const json meta{{"run_id", config.run_id}, {"seed", config.master_seed.value_or(0)}, {"version", kVersionTag}};

  switch (config.mode) {
    case Mode::kTrain: {
      const Families fam = make_families(config);
      const auto ckpt_dir = config.out_dir / "checkpoints";
      std::filesystem::create_directories(ckpt_dir);
      record.checkpoint_path = ckpt_dir / "best.json";
      TrainOptions opts;
      opts.hyper = config.train;
      opts.fading_seed = family_fading_seed(seeds, kTrainFamily);
      opts.sampling_seed = family_sampling_seed(seeds, kTrainFamily);
      opts.validation_fading_seed = family_fading_seed(seeds, kValidationFamily);
      opts.validation_sampling_seed = family_sampling_seed(seeds, kValidationFamily);
      opts.validation_selection = config.selection;
      opts.jobs = config.jobs;
      opts.on_iteration = std::move(on_iteration);
      if (log)
        opts.on_epoch = [log](const HistoryRow& row) {
          *log << "epoch " << row.epoch << " lagrangian " << row.lagrangian << " slack " << row.mean_slack
               << " val mean " << row.val_mean_rate << " val p5 " << row.val_p5_rate << std::endl;
        };
      opts.on_new_best = [&](int epoch, const GnnParams& params, const HistoryRow& row) {
        json m = meta;
        m["epoch"] = epoch;
        m["val_p5_rate"] = row.val_p5_rate;
        m["val_mean_rate"] = row.val_mean_rate;
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%04d.json", epoch);
        save_checkpoint(params, ckpt_dir / name, m);
        save_checkpoint(params, record.checkpoint_path, m);
      };
      TrainResult result = train(fam.train, fam.validation, config.channel, GnnParams::initialize(config.gnn, seeds.init),
                                 opts);
      if (result.best_epoch < 0) {
        json m = meta;
        m["epoch"] = -1;
        save_checkpoint(result.best_params, record.checkpoint_path, m);
      }
      record.best_epoch = result.best_epoch;
      record.history = result.history;
      record.history_path = config.out_dir / "history.csv";
      write_text(record.history_path, history_csv(result.history));
      if (!fam.test.empty())
        record.results.push_back({"gnn",
                                  evaluate(result.best_params, fam.test, config.channel, test_fading, test_sampling,
                                           config.selection, eval),
                                  ids_of(fam.test)});
      break;
    }
    case Mode::kEvaluate:
    case Mode::kTransfer: {
      if (!std::filesystem::exists(config.checkpoint))
        throw ConfigError("field 'checkpoint': file not found: " + config.checkpoint.string());
      record.checkpoint_path = config.checkpoint;
      const GnnParams params = load_checkpoint(config.checkpoint, config.gnn);
      const auto test = make_test_family(config);
      if (test.empty()) throw ConfigError("field 'train.num_test': must be >= 1 for mode " + to_string(config.mode));
      record.results.push_back(
          {"gnn", evaluate(params, test, config.channel, test_fading, test_sampling, config.selection, eval),
           ids_of(test)});
      if (config.mode == Mode::kTransfer)
        record.results.push_back({"full_reuse",
                                  evaluate_policy(baseline_policy("full_reuse", config.baseline), test, config.channel,
                                                  test_fading, test_sampling, eval),
                                  ids_of(test)});
      break;
    }
    case Mode::kBaseline: {
      const auto test = make_test_family(config);
      if (test.empty()) throw ConfigError("field 'train.num_test': must be >= 1 for mode baseline");
      for (const auto& name : config.baseline_policies)
        record.results.push_back({name,
                                  evaluate_policy(baseline_policy(name, config.baseline), test, config.channel,
                                                  test_fading, test_sampling, eval),
                                  ids_of(test)});
      break;
    }
  }

  write_text(record.metrics_path, metrics_csv(config, record.results));
  record.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json summary = json::array();
  for (const auto& r : record.results)
    summary.push_back({{"policy", r.policy},
                       {"mean_rate", r.metrics.mean_rate},
                       {"p5_rate", r.metrics.percentile_5},
                       {"num_configs", r.config_ids.size()}});
  json run_json{{"version", record.version},
                {"config", record.config},
                {"resolved_seeds",
                 {{"topology", seeds.topology}, {"fading", seeds.fading}, {"init", seeds.init},
                  {"sampling", seeds.sampling}}},
                {"selection", to_string(config.selection)},
                {"wmmse_weights", "pf_ratio"},
                {"metrics", summary},
                {"metrics_csv", record.metrics_path.filename().string()},
                {"duration_seconds", record.duration_seconds}};
  if (record.history) {
    run_json["history_csv"] = record.history_path.filename().string();
    run_json["best_epoch"] = record.best_epoch;
  }
  if (!record.checkpoint_path.empty()) run_json["checkpoint"] = record.checkpoint_path.string();
  write_text(config.out_dir / "run.json", run_json.dump(2) + "\n");
  return record;
}

}  // namespace rrm
