#include "rrm/rates.hpp"

#include <algorithm>
#include <cmath>

namespace rrm {

bool satisfies_constraints(const RrmDecision& decision, const Association& assoc, double p_max) {
  if (decision.power.size() != assoc.cells.size()) return false;
  for (double p : decision.power)
    if (!(p >= 0.0 && p <= p_max)) return false;
  if (decision.gamma_hard.size() != assoc.serving.size()) return false;
  for (const auto& cell : assoc.cells) {
    int selected = 0;
    for (int j : cell) {
      const int g = decision.gamma_hard[static_cast<std::size_t>(j)];
      if (g != 0 && g != 1) return false;
      selected += g;
    }
    if (selected != 1) return false;
  }
  return true;
}

std::vector<double> sinr(const Matrix& h_squared, std::span<const double> power,
                         std::span<const int> selection, const Association& assoc, double noise) {
  const std::size_t m = h_squared.rows();
  const std::size_t n = h_squared.cols();
  if (power.size() != m || selection.size() != n || assoc.serving.size() != n)
    throw std::invalid_argument("sinr: dimension mismatch");
  std::vector<double> interference(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = h_squared.row(i);
    const double p = power[i];
    for (std::size_t j = 0; j < n; ++j)
      if (static_cast<std::size_t>(assoc.serving[j]) != i) interference[j] += row[j] * p;
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!selection[j]) continue;
    const auto s = static_cast<std::size_t>(assoc.serving[j]);
    out[j] = h_squared(s, j) * power[s] / (noise + interference[j]);
  }
  return out;
}

std::vector<double> capacity(const Matrix& h_squared, std::span<const double> power,
                             std::span<const int> selection, const Association& assoc, double noise) {
  auto s = sinr(h_squared, power, selection, assoc, noise);
  for (double& v : s) v = std::log2(1.0 + v);
  return s;
}

std::vector<double> estimated_rate(const Matrix& h_squared, const Association& assoc,
                                   const RadioConstants& radio) {
  const std::vector<double> full(h_squared.rows(), radio.p_max_mw);
  const std::vector<int> all(h_squared.cols(), 1);
  return capacity(h_squared, full, all, assoc, radio.noise_mw);
}

UserRateState UserRateState::zeros(int num_users, double beta) {
  UserRateState s;
  s.ema.assign(static_cast<std::size_t>(num_users), 0.0);
  s.sum.assign(static_cast<std::size_t>(num_users), 0.0);
  s.beta = beta;
  return s;
}

std::vector<double> UserRateState::running_average() const {
  std::vector<double> out(sum.size(), 0.0);
  if (steps == 0) return out;
  for (std::size_t j = 0; j < sum.size(); ++j) out[j] = sum[j] / static_cast<double>(steps);
  return out;
}

void UserRateState::reset_running_average() {
  std::fill(sum.begin(), sum.end(), 0.0);
  steps = 0;
}

UserRateState update_ema(UserRateState state, std::span<const double> achieved) {
  if (!(state.beta >= 0.0 && state.beta <= 1.0)) throw std::invalid_argument("update_ema: beta outside [0, 1]");
  if (achieved.size() != state.ema.size()) throw std::invalid_argument("update_ema: dimension mismatch");
  for (std::size_t j = 0; j < achieved.size(); ++j)
    state.ema[j] = (1.0 - state.beta) * state.ema[j] + state.beta * achieved[j];
  return state;
}

void accumulate(UserRateState& state, std::span<const double> achieved) {
  if (achieved.size() != state.sum.size()) throw std::invalid_argument("accumulate: dimension mismatch");
  for (std::size_t j = 0; j < achieved.size(); ++j) state.sum[j] += achieved[j];
  ++state.steps;
}

std::vector<double> pf_ratios(std::span<const double> estimated, std::span<const double> ema) {
  if (estimated.size() != ema.size()) throw std::invalid_argument("pf_ratios: dimension mismatch");
  std::vector<double> out(estimated.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = estimated[j] / std::max(ema[j], kPfFloor);
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile: q outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Metrics compute_metrics(std::vector<std::vector<double>> per_user_rates) {
  std::vector<double> pool;
  for (const auto& cfg : per_user_rates) pool.insert(pool.end(), cfg.begin(), cfg.end());
  if (pool.empty()) throw std::invalid_argument("compute_metrics: empty rate pool");
  Metrics m;
  // Sorted summation keeps the mean independent of pool order.
  std::vector<double> sorted = pool;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) total += v;
  m.mean_rate = total / static_cast<double>(sorted.size());
  m.percentile_5 = percentile(std::move(sorted), 5.0);
  m.per_user_rates = std::move(per_user_rates);
  return m;
}

}  // namespace rrm
