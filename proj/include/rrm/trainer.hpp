#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrm/gnn.hpp"
#include "rrm/netgen.hpp"
#include "rrm/rates.hpp"

namespace rrm {

// How the dual step sees the primal step within one iteration.
//   kSequential:   lambda and mu read the freshly updated x and z.
//   kSimultaneous: every update reads the values from the start of the iteration.
enum class DualOrder { kSequential, kSimultaneous };

std::string to_string(DualOrder order);
DualOrder dual_order_from_string(const std::string& text);

struct TrainHyper {
  double f_min = 1.0;  // bps/Hz
  double alpha = 0.01;
  double lr_power = 1e-3;
  double lr_selection = 1e-3;
  double lr_x = 1.0;
  double lr_z = 1.0;
  double lr_lambda = 1.0;
  double lr_mu = 1.0;
  int epochs = 400;
  int batch_size = 64;
  int eval_steps = 100;    // T
  int warmup_steps = 100;
  int lr_halving_epochs = 50;
  double ema_beta = 0.05;
  int num_train = 256;
  int num_validation = 128;
  int num_test = 128;
  DualOrder dual_order = DualOrder::kSequential;
  bool allow_negative_slack = false;  // skip the projection of z

  void validate() const;
  // 0.5^(epoch / lr_halving_epochs)
  double lr_scale(int epoch) const;
};

// Concave network utility with its gradient.
struct Utility {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;

  static Utility sum_rate();
};

// Per-configuration primal (x, z) and dual (lambda, mu) variables.
struct DualVariables {
  std::vector<double> x;
  std::vector<double> z;
  std::vector<double> lambda;
  std::vector<double> mu;

  static DualVariables zeros(int num_users);
  bool nonnegative() const;  // z, lambda, mu >= 0
};

using DualState = std::vector<DualVariables>;

struct HistoryRow {
  int epoch = 0;
  double lagrangian = 0.0;
  double mean_slack = 0.0;
  double mean_lambda = 0.0;
  double mean_mu = 0.0;
  double val_mean_rate = 0.0;
  double val_p5_rate = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
};

enum class SelectionMode { kSample, kArgmax };

std::string to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(const std::string& text);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Full power, each AP cycling through its users in index order. Returns the
// EMA state after `steps` steps with the running average reset.
UserRateState warm_up(const NetworkConfig& config, const SosFading& fading, int steps, double beta,
                      const RadioConstants& radio);

// mean_b [ U(x_b) - alpha/2 |z_b|^2 - lambda_b^T (x_b - Ef_b) - mu_b^T (f_min - z_b - x_b) ]
double empirical_lagrangian(std::span<const DualVariables> variables,
                            std::span<const std::vector<double>> mean_rates, const TrainHyper& hyper,
                            const Utility& utility);

// Ascent step on the shared parameters: theta += lr_power * power_grad + lr_selection * selection_grad.
// power_grad carries no selection-head component and selection_grad no
// power-head component, so each head only moves with its own policy.
GnnParams update_policy_params(GnnParams params, const Gradients& power_grad, const Gradients& selection_grad,
                               double lr_power, double lr_selection);

// Projected primal-dual step:
//   x      <- x + eta_x (grad U(x) + mu - lambda)
//   z      <- [z + eta_z (mu - alpha z)]+
//   lambda <- [lambda + eta_lambda (x - Ef)]+
//   mu     <- [mu + eta_mu (f_min - z - x)]+
// The dual steps descend the Lagrangian; with kSequential they use the new x
// and z. `lr_scale` multiplies all four step sizes.
DualVariables update_variables(const DualVariables& v, std::span<const double> mean_rate, const TrainHyper& hyper,
                               const Utility& utility, double lr_scale = 1.0);

// One per-step record of a training rollout, kept when requested.
struct RolloutStep {
  Matrix h_squared;
  RrmGraph graph;
  std::vector<int> selection;
  std::vector<double> achieved;
};

struct RolloutResult {
  std::vector<double> mean_rate;  // time-average achieved rate, E_H[f]
  // lr_power * d(lambda^T E_H f)/dtheta + lr_selection * E_H[(lambda^T f) dlog pi/dtheta]
  Gradients ascent;
  std::vector<RolloutStep> steps;  // empty unless record_steps
};

struct RolloutOptions {
  int warmup_steps = 100;
  int steps = 100;
  double ema_beta = 0.05;
  double lr_power = 1e-3;
  double lr_selection = 1e-3;
  bool compute_gradients = true;
  bool record_steps = false;
};

RolloutResult training_rollout(const NetworkConfig& config, const GnnParams& params, std::span<const double> lambda,
                               const ChannelParams& channel, std::uint64_t fading_seed, std::uint64_t sampling_seed,
                               const RolloutOptions& options);

// What a policy sees at every step.
struct PolicyInput {
  const Matrix& h_squared;
  const Association& assoc;
  std::span<const double> pf;
  const RadioConstants& radio;
};

using Policy = std::function<RrmDecision(const PolicyInput&, std::mt19937_64&)>;

Policy gnn_policy(const GnnParams& params, SelectionMode mode);

struct EvalOptions {
  int warmup_steps = 100;
  int steps = 100;
  double ema_beta = 0.05;
  int jobs = 1;
};

// Per-user time-average rates of `policy` on one configuration.
std::vector<double> simulate(const NetworkConfig& config, const Policy& policy, const ChannelParams& channel,
                             std::uint64_t fading_seed, std::uint64_t sampling_seed, const EvalOptions& options);

// Fading and sampling seeds for config c are derived from (seed, c.id).
Metrics evaluate_policy(const Policy& policy, const std::vector<NetworkConfig>& configs, const ChannelParams& channel,
                        std::uint64_t fading_seed, std::uint64_t sampling_seed, const EvalOptions& options);

Metrics evaluate(const GnnParams& params, const std::vector<NetworkConfig>& configs, const ChannelParams& channel,
                 std::uint64_t fading_seed, std::uint64_t sampling_seed, SelectionMode mode,
                 const EvalOptions& options);

struct IterationEvent {
  int epoch = 0;
  int iteration = 0;  // minibatch index within the epoch
  std::span<const int> config_indices;
  std::span<const DualVariables> before;
  std::span<const DualVariables> after;
  double lagrangian = 0.0;
};

struct TrainOptions {
  TrainHyper hyper;
  Utility utility = Utility::sum_rate();
  std::uint64_t fading_seed = 0;
  std::uint64_t sampling_seed = 0;
  std::uint64_t validation_fading_seed = 1;
  std::uint64_t validation_sampling_seed = 2;
  SelectionMode validation_selection = SelectionMode::kSample;
  int jobs = 1;
  std::function<void(const IterationEvent&)> on_iteration;
  std::function<void(const HistoryRow&)> on_epoch;
  // Called whenever validation finds a new best policy.
  std::function<void(int epoch, const GnnParams&, const HistoryRow&)> on_new_best;
};

struct TrainResult {
  GnnParams best_params;
  GnnParams final_params;
  int best_epoch = -1;
  double best_val_p5 = 0.0;
  DualState duals;
  TrainHistory history;
};

TrainResult train(const std::vector<NetworkConfig>& train_family, const std::vector<NetworkConfig>& validation_family,
                  const ChannelParams& channel, GnnParams init, const TrainOptions& options);

}  // namespace rrm
