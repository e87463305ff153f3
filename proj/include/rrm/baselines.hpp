#pragma once

#include <span>
#include <vector>

#include "rrm/matrix.hpp"
#include "rrm/netgen.hpp"
#include "rrm/rates.hpp"

namespace rrm {

struct BaselineParams {
  int wmmse_max_iters = 100;
  double wmmse_tol = 1e-6;   // relative change of the weighted sum-rate
  double itlinq_m_db = 25.0;
  double itlinq_eta = 0.7;

  void validate() const;
};

// Highest PF ratio in each cell, ties to the lowest user index.
std::vector<int> pf_select(std::span<const double> pf, const Association& assoc);

RrmDecision full_reuse(const Matrix& h_squared, const Association& assoc, std::span<const double> pf,
                       const RadioConstants& radio);

// Greedy link admission over the PF-selected links, in descending PF order.
// Link j joins the active set S when, for every k in S,
//   SNR_j^eta >= M * INR_kj  and  SNR_j^eta >= M * INR_jk
// with INR_kj the full-power interference from k's AP at j's receiver.
RrmDecision itlinq(const Matrix& h_squared, const Association& assoc, std::span<const double> pf,
                   const BaselineParams& params, const RadioConstants& radio);

struct WmmseResult {
  std::vector<double> power;                // per AP, mW
  std::vector<double> weighted_sum_rates;  // at the initial point and after each iteration
  int iterations = 0;
  bool converged = false;
};

// Scalar WMMSE on the interference channel formed by the selected users
// (one per cell), maximizing sum_j w_j log2(1 + SINR_j). Starts at full power.
WmmseResult wmmse(const Matrix& h_squared, const Association& assoc, std::span<const int> selection,
                  std::span<const double> weights, const BaselineParams& params, const RadioConstants& radio);

// WMMSE power with PF selection and PF weights.
RrmDecision wmmse_decision(const Matrix& h_squared, const Association& assoc, std::span<const double> pf,
                           const BaselineParams& params, const RadioConstants& radio);

double weighted_sum_rate(const Matrix& h_squared, std::span<const double> power, std::span<const int> selection,
                         const Association& assoc, std::span<const double> weights, double noise);

}  // namespace rrm
