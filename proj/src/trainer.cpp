#include "rrm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rrm/graph.hpp"
#include "rrm/parallel.hpp"
#include "rrm/seed.hpp"

namespace rrm {

namespace {

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<int> round_robin(const Association& assoc, std::size_t t) {
  std::vector<int> sel(assoc.serving.size(), 0);
  for (const auto& cell : assoc.cells)
    if (!cell.empty()) sel[static_cast<std::size_t>(cell[t % cell.size()])] = 1;
  return sel;
}

void check_config(const NetworkConfig& config, const GnnParams* params) {
  if (!config.channel.assoc.is_partition())
    throw std::invalid_argument("config " + std::to_string(config.id) + ": association is not a partition");
  if (params && params->hyper.features.front() != 1)
    throw std::invalid_argument("policy expects a single input feature (the PF ratio)");
}

constexpr std::uint64_t kValidationTag = 0x76616c;  // distinguishes per-config evaluation streams

}  // namespace

void TrainHyper::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("train: ") + name + " must be > 0");
  };
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("train: ") + name + " must be >= 0");
  };
  nonneg(f_min, "f_min");
  nonneg(alpha, "alpha");
  nonneg(lr_power, "lr_power");
  nonneg(lr_selection, "lr_selection");
  positive(lr_x, "lr_x");
  positive(lr_z, "lr_z");
  positive(lr_lambda, "lr_lambda");
  positive(lr_mu, "lr_mu");
  if (!(ema_beta > 0.0 && ema_beta <= 1.0)) throw std::invalid_argument("train: ema_beta must be in (0, 1]");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (eval_steps < 1) throw std::invalid_argument("train: eval_steps must be >= 1");
  if (warmup_steps < 0) throw std::invalid_argument("train: warmup_steps must be >= 0");
  if (lr_halving_epochs < 1) throw std::invalid_argument("train: lr_halving_epochs must be >= 1");
  if (num_train < 0 || num_validation < 0 || num_test < 0)
    throw std::invalid_argument("train: configuration counts must be >= 0");
}

double TrainHyper::lr_scale(int epoch) const { return std::ldexp(1.0, -(epoch / lr_halving_epochs)); }

Utility Utility::sum_rate() {
  return {[](std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); },
          [](std::span<const double> x) { return std::vector<double>(x.size(), 1.0); }};
}

DualVariables DualVariables::zeros(int num_users) {
  const auto n = static_cast<std::size_t>(num_users);
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
          std::vector<double>(n, 0.0)};
}

bool DualVariables::nonnegative() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return a >= 0.0; });
  };
  return ok(z) && ok(lambda) && ok(mu);
}

std::string to_string(DualOrder order) { return order == DualOrder::kSequential ? "sequential" : "simultaneous"; }

DualOrder dual_order_from_string(const std::string& text) {
  if (text == "sequential") return DualOrder::kSequential;
  if (text == "simultaneous") return DualOrder::kSimultaneous;
  throw std::invalid_argument("dual order must be 'sequential' or 'simultaneous', got '" + text + "'");
}

std::string to_string(SelectionMode mode) { return mode == SelectionMode::kSample ? "sample" : "argmax"; }

SelectionMode selection_mode_from_string(const std::string& text) {
  if (text == "sample") return SelectionMode::kSample;
  if (text == "argmax") return SelectionMode::kArgmax;
  throw std::invalid_argument("selection mode must be 'sample' or 'argmax', got '" + text + "'");
}

UserRateState warm_up(const NetworkConfig& config, const SosFading& fading, int steps, double beta,
                      const RadioConstants& radio) {
  const auto& lt = config.channel;
  const std::vector<double> full(lt.assoc.cells.size(), radio.p_max_mw);
  UserRateState state = UserRateState::zeros(lt.assoc.num_ues(), beta);
  for (int t = 0; t < steps; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    const Matrix h2 = channel_at(lt, fading.power_at(ts), ts).h_squared;
    const auto f = capacity(h2, full, round_robin(lt.assoc, ts), lt.assoc, radio.noise_mw);
    state = update_ema(std::move(state), f);
    accumulate(state, f);
  }
  state.reset_running_average();
  return state;
}

double empirical_lagrangian(std::span<const DualVariables> variables, std::span<const std::vector<double>> mean_rates,
                            const TrainHyper& hyper, const Utility& utility) {
  if (variables.size() != mean_rates.size()) throw std::invalid_argument("empirical_lagrangian: batch size mismatch");
  if (variables.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t b = 0; b < variables.size(); ++b) {
    const auto& v = variables[b];
    const auto& ef = mean_rates[b];
    if (ef.size() != v.x.size()) throw std::invalid_argument("empirical_lagrangian: user count mismatch");
    double term = utility.value(v.x);
    for (std::size_t j = 0; j < v.x.size(); ++j) {
      term -= 0.5 * hyper.alpha * v.z[j] * v.z[j];
      term -= v.lambda[j] * (v.x[j] - ef[j]);
      term -= v.mu[j] * (hyper.f_min - v.z[j] - v.x[j]);
    }
    total += term;
  }
  return total / static_cast<double>(variables.size());
}

GnnParams update_policy_params(GnnParams params, const Gradients& power_grad, const Gradients& selection_grad,
                               double lr_power, double lr_selection) {
  if (!params.same_shape(power_grad) || !params.same_shape(selection_grad))
    throw std::invalid_argument("update_policy_params: gradient shape mismatch");
  if (!power_grad.all_finite() || !selection_grad.all_finite())
    throw TrainingError("update_policy_params: non-finite gradient");
  if (lr_power != 0.0) params.add_scaled(power_grad, lr_power);
  if (lr_selection != 0.0) params.add_scaled(selection_grad, lr_selection);
  return params;
}

DualVariables update_variables(const DualVariables& v, std::span<const double> mean_rate, const TrainHyper& hyper,
                               const Utility& utility, double lr_scale) {
  const std::size_t n = v.x.size();
  if (mean_rate.size() != n || v.z.size() != n || v.lambda.size() != n || v.mu.size() != n)
    throw std::invalid_argument("update_variables: dimension mismatch");
  const auto grad_u = utility.gradient(v.x);
  const double ex = hyper.lr_x * lr_scale;
  const double ez = hyper.lr_z * lr_scale;
  const double el = hyper.lr_lambda * lr_scale;
  const double em = hyper.lr_mu * lr_scale;
  const bool sequential = hyper.dual_order == DualOrder::kSequential;
  DualVariables out = DualVariables::zeros(static_cast<int>(n));
  for (std::size_t j = 0; j < n; ++j) {
    out.x[j] = v.x[j] + ex * (grad_u[j] + v.mu[j] - v.lambda[j]);
    out.z[j] = v.z[j] + ez * (v.mu[j] - hyper.alpha * v.z[j]);
    if (!hyper.allow_negative_slack) out.z[j] = std::max(0.0, out.z[j]);
    const double x = sequential ? out.x[j] : v.x[j];
    const double z = sequential ? out.z[j] : v.z[j];
    out.lambda[j] = std::max(0.0, v.lambda[j] + el * (x - mean_rate[j]));
    out.mu[j] = std::max(0.0, v.mu[j] + em * (hyper.f_min - z - x));
  }
  return out;
}

RolloutResult training_rollout(const NetworkConfig& config, const GnnParams& params, std::span<const double> lambda,
                               const ChannelParams& channel, std::uint64_t fading_seed, std::uint64_t sampling_seed,
                               const RolloutOptions& options) {
  check_config(config, &params);
  const auto& lt = config.channel;
  const int m = lt.assoc.num_aps();
  const int n = lt.assoc.num_ues();
  if (lambda.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("training_rollout: lambda size");
  if (options.steps < 1) throw std::invalid_argument("training_rollout: steps must be >= 1");
  const RadioConstants radio = RadioConstants::from(channel);
  const SosFading fading(m, n, channel, fading_seed);
  std::mt19937_64 rng(sampling_seed);

  const bool any_lambda = std::any_of(lambda.begin(), lambda.end(), [](double l) { return l != 0.0; });
  const bool grads = options.compute_gradients && any_lambda;

  RolloutResult result;
  result.ascent = Gradients::zeros(params.hyper);
  UserRateState state = warm_up(config, fading, options.warmup_steps, options.ema_beta, radio);

  const double inv_t = 1.0 / options.steps;
  ForwardCache cache;
  Matrix d_emb;
  for (int t = 0; t < options.steps; ++t) {
    const auto ts = static_cast<std::size_t>(options.warmup_steps + t);
    Matrix h2 = channel_at(lt, fading.power_at(ts), ts).h_squared;
    const auto fhat = estimated_rate(h2, lt.assoc, radio);
    const auto pf = pf_ratios(fhat, state.ema);
    RrmGraph graph = build_graph(h2, lt.assoc, pf, radio);
    const Matrix emb = forward(graph, params, grads ? &cache : nullptr);
    const auto power = power_head(emb, lt.assoc, params, radio.p_max_mw);
    const auto gamma = selection_head(emb, lt.assoc, params);
    auto selection = sample_selection(gamma, lt.assoc, rng);
    const auto f = capacity(h2, power, selection, lt.assoc, radio.noise_mw);
    state = update_ema(std::move(state), f);
    accumulate(state, f);

    if (grads) {
      double score = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) score += lambda[j] * f[j];
      d_emb = Matrix(emb.rows(), emb.cols());
      const auto dp = rate_power_gradient(h2, power, selection, lt.assoc, lambda, radio.noise_mw);
      power_head_backward(emb, lt.assoc, params, radio.p_max_mw, dp, options.lr_power * inv_t, d_emb, result.ascent);
      log_policy_backward(emb, lt.assoc, params, gamma, selection, options.lr_selection * score * inv_t, d_emb,
                          result.ascent);
      backward(graph, params, cache, d_emb, 1.0, result.ascent);
    }
    if (options.record_steps)
      result.steps.push_back({std::move(h2), std::move(graph), std::move(selection), f});
  }
  result.mean_rate = state.running_average();
  return result;
}

Policy gnn_policy(const GnnParams& params, SelectionMode mode) {
  return [&params, mode](const PolicyInput& in, std::mt19937_64& rng) {
    const RrmGraph graph = build_graph(in.h_squared, in.assoc, in.pf, in.radio);
    const Matrix emb = forward(graph, params);
    RrmDecision d;
    d.power = power_head(emb, in.assoc, params, in.radio.p_max_mw);
    d.gamma_soft = selection_head(emb, in.assoc, params);
    d.gamma_hard = mode == SelectionMode::kSample ? sample_selection(d.gamma_soft, in.assoc, rng)
                                                  : argmax_selection(d.gamma_soft, in.assoc);
    return d;
  };
}

std::vector<double> simulate(const NetworkConfig& config, const Policy& policy, const ChannelParams& channel,
                             std::uint64_t fading_seed, std::uint64_t sampling_seed, const EvalOptions& options) {
  check_config(config, nullptr);
  if (options.steps < 1) throw std::invalid_argument("simulate: steps must be >= 1");
  const auto& lt = config.channel;
  const RadioConstants radio = RadioConstants::from(channel);
  const SosFading fading(lt.assoc.num_aps(), lt.assoc.num_ues(), channel, fading_seed);
  std::mt19937_64 rng(sampling_seed);
  UserRateState state = warm_up(config, fading, options.warmup_steps, options.ema_beta, radio);
  for (int t = 0; t < options.steps; ++t) {
    const auto ts = static_cast<std::size_t>(options.warmup_steps + t);
    const Matrix h2 = channel_at(lt, fading.power_at(ts), ts).h_squared;
    const auto fhat = estimated_rate(h2, lt.assoc, radio);
    const auto pf = pf_ratios(fhat, state.ema);
    const RrmDecision d = policy(PolicyInput{h2, lt.assoc, pf, radio}, rng);
    const auto f = capacity(h2, d.power, d.gamma_hard, lt.assoc, radio.noise_mw);
    state = update_ema(std::move(state), f);
    accumulate(state, f);
  }
  return state.running_average();
}

Metrics evaluate_policy(const Policy& policy, const std::vector<NetworkConfig>& configs, const ChannelParams& channel,
                        std::uint64_t fading_seed, std::uint64_t sampling_seed, const EvalOptions& options) {
  std::vector<std::vector<double>> rates(configs.size());
  parallel_for(configs.size(), options.jobs, [&](std::size_t c) {
    const auto id = static_cast<std::uint64_t>(configs[c].id);
    rates[c] = simulate(configs[c], policy, channel, derive_seed(fading_seed, {kValidationTag, id}),
                        derive_seed(sampling_seed, {kValidationTag, id}), options);
  });
  return compute_metrics(std::move(rates));
}

Metrics evaluate(const GnnParams& params, const std::vector<NetworkConfig>& configs, const ChannelParams& channel,
                 std::uint64_t fading_seed, std::uint64_t sampling_seed, SelectionMode mode,
                 const EvalOptions& options) {
  return evaluate_policy(gnn_policy(params, mode), configs, channel, fading_seed, sampling_seed, options);
}

TrainResult train(const std::vector<NetworkConfig>& train_family, const std::vector<NetworkConfig>& validation_family,
                  const ChannelParams& channel, GnnParams init, const TrainOptions& options) {
  const TrainHyper& hyper = options.hyper;
  hyper.validate();
  if (!init.all_finite()) throw std::invalid_argument("train: initial parameters are not finite");
  for (const auto& c : train_family) check_config(c, &init);

  TrainResult result;
  result.duals.reserve(train_family.size());
  for (const auto& c : train_family) result.duals.push_back(DualVariables::zeros(c.num_ues()));
  result.best_params = init;
  result.final_params = std::move(init);
  if (hyper.epochs == 0) return result;
  if (train_family.empty()) throw std::invalid_argument("train: empty training family");
  if (validation_family.empty()) throw std::invalid_argument("train: empty validation family");

  GnnParams& params = result.final_params;
  const std::size_t num_configs = train_family.size();
  const auto batch = static_cast<std::size_t>(hyper.batch_size);
  std::vector<int> order(num_configs);
  std::iota(order.begin(), order.end(), 0);

  EvalOptions eval_options{hyper.warmup_steps, hyper.eval_steps, hyper.ema_beta, options.jobs};
  double best_p5 = -std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const double scale = hyper.lr_scale(epoch);
    RolloutOptions ro{hyper.warmup_steps, hyper.eval_steps, hyper.ema_beta, hyper.lr_power * scale,
                      hyper.lr_selection * scale, true, false};
    std::mt19937_64 shuffle_rng(derive_seed(options.sampling_seed, {0x5f, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double lagrangian_sum = 0.0;
    int iterations = 0;
    for (std::size_t start = 0; start < num_configs; start += batch) {
      const std::size_t count = std::min(batch, num_configs - start);
      const std::span<const int> idx(order.data() + start, count);
      std::vector<RolloutResult> rollouts(count);
      parallel_for(count, options.jobs, [&](std::size_t b) {
        const auto& cfg = train_family[static_cast<std::size_t>(idx[b])];
        const auto id = static_cast<std::uint64_t>(cfg.id);
        const auto ep = static_cast<std::uint64_t>(epoch);
        rollouts[b] = training_rollout(cfg, params, result.duals[static_cast<std::size_t>(idx[b])].lambda, channel,
                                       derive_seed(options.fading_seed, {id, ep}),
                                       derive_seed(options.sampling_seed, {id, ep}), ro);
      });

      std::vector<DualVariables> before(count);
      std::vector<std::vector<double>> mean_rates(count);
      Gradients ascent = Gradients::zeros(params.hyper);
      for (std::size_t b = 0; b < count; ++b) {
        const int cid = train_family[static_cast<std::size_t>(idx[b])].id;
        if (!all_finite(rollouts[b].mean_rate) || !rollouts[b].ascent.all_finite()) {
          std::ostringstream msg;
          msg << "train: non-finite rollout for config " << cid << " at epoch " << epoch;
          throw TrainingError(msg.str());
        }
        before[b] = result.duals[static_cast<std::size_t>(idx[b])];
        mean_rates[b] = std::move(rollouts[b].mean_rate);
        ascent.add_scaled(rollouts[b].ascent, 1.0 / static_cast<double>(count));
      }
      const double lagrangian = empirical_lagrangian(before, mean_rates, hyper, options.utility);
      if (!std::isfinite(lagrangian)) {
        for (std::size_t b = 0; b < count; ++b) {
          const double term = empirical_lagrangian(std::span(&before[b], 1), std::span(&mean_rates[b], 1), hyper,
                                                   options.utility);
          if (!std::isfinite(term))
            throw TrainingError("train: non-finite Lagrangian for config " +
                                std::to_string(train_family[static_cast<std::size_t>(idx[b])].id) + " at epoch " +
                                std::to_string(epoch));
        }
        throw TrainingError("train: non-finite Lagrangian at epoch " + std::to_string(epoch));
      }

      params.add_scaled(ascent, 1.0);
      std::vector<DualVariables> after(count);
      for (std::size_t b = 0; b < count; ++b) {
        after[b] = update_variables(before[b], mean_rates[b], hyper, options.utility, scale);
        result.duals[static_cast<std::size_t>(idx[b])] = after[b];
      }
      if (options.on_iteration)
        options.on_iteration(IterationEvent{epoch, iterations, idx, before, after, lagrangian});
      lagrangian_sum += lagrangian;
      ++iterations;
    }

    HistoryRow row;
    row.epoch = epoch;
    row.lagrangian = lagrangian_sum / iterations;
    double z_sum = 0.0, l_sum = 0.0, m_sum = 0.0;
    for (const auto& d : result.duals) {
      z_sum += mean_of(d.z);
      l_sum += mean_of(d.lambda);
      m_sum += mean_of(d.mu);
    }
    row.mean_slack = z_sum / static_cast<double>(num_configs);
    row.mean_lambda = l_sum / static_cast<double>(num_configs);
    row.mean_mu = m_sum / static_cast<double>(num_configs);
    const Metrics val = evaluate(params, validation_family, channel, options.validation_fading_seed,
                                 options.validation_sampling_seed, options.validation_selection, eval_options);
    row.val_mean_rate = val.mean_rate;
    row.val_p5_rate = val.percentile_5;
    result.history.rows.push_back(row);
    if (options.on_epoch) options.on_epoch(row);
    if (val.percentile_5 > best_p5) {
      best_p5 = val.percentile_5;
      result.best_params = params;
      result.best_epoch = epoch;
      result.best_val_p5 = best_p5;
      if (options.on_new_best) options.on_new_best(epoch, result.best_params, row);
    }
  }
  return result;
}

}  // namespace rrm
