#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "rrm/matrix.hpp"
#include "rrm/netgen.hpp"

namespace rrm {

// One time step of radio resource decisions.
//   power:      per-AP transmit power in mW, within [0, Pmax]
//   gamma_soft: per-user selection probabilities (sum to 1 within each cell)
//   gamma_hard: per-user 0/1 selections (exactly one per cell)
struct RrmDecision {
  std::vector<double> power;
  std::vector<double> gamma_soft;
  std::vector<int> gamma_hard;
};

// True when every cell has exactly one selected user and 0 <= p <= Pmax.
bool satisfies_constraints(const RrmDecision& decision, const Association& assoc, double p_max);

inline constexpr double kPfFloor = 1e-6;

std::vector<double> sinr(const Matrix& h_squared, std::span<const double> power,
                         std::span<const int> selection, const Association& assoc, double noise);

std::vector<double> capacity(const Matrix& h_squared, std::span<const double> power,
                             std::span<const int> selection, const Association& assoc, double noise);

// Rate each user would see if every AP transmitted at full power.
std::vector<double> estimated_rate(const Matrix& h_squared, const Association& assoc,
                                   const RadioConstants& radio);

struct UserRateState {
  std::vector<double> ema;  // exponentially averaged achieved rate
  std::vector<double> sum;  // sum of achieved rates since the last reset
  std::size_t steps = 0;
  double beta = 0.05;

  static UserRateState zeros(int num_users, double beta);
  std::vector<double> running_average() const;
  void reset_running_average();
};

// ema <- (1 - beta) ema + beta f
UserRateState update_ema(UserRateState state, std::span<const double> achieved);
// sum <- sum + f, steps <- steps + 1
void accumulate(UserRateState& state, std::span<const double> achieved);

// PF_j = fhat_j / max(fbar_j, kPfFloor)
std::vector<double> pf_ratios(std::span<const double> estimated, std::span<const double> ema);

struct Metrics {
  double mean_rate = 0.0;
  double percentile_5 = 0.0;
  std::vector<std::vector<double>> per_user_rates;  // [config][user]
};

// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

// Pools all (config, user) rates; rejects an empty pool.
Metrics compute_metrics(std::vector<std::vector<double>> per_user_rates);

}  // namespace rrm
