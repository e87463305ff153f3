#include "rrm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rrm {

void BaselineParams::validate() const {
  if (wmmse_max_iters < 1) throw std::invalid_argument("baseline: wmmse_max_iters must be >= 1");
  if (!(wmmse_tol > 0.0)) throw std::invalid_argument("baseline: wmmse_tol must be positive");
  if (!(itlinq_eta > 0.0 && itlinq_eta <= 1.0)) throw std::invalid_argument("baseline: itlinq_eta must be in (0, 1]");
}

std::vector<int> pf_select(std::span<const double> pf, const Association& assoc) {
  if (pf.size() != assoc.serving.size()) throw std::invalid_argument("pf_select: dimension mismatch");
  std::vector<int> out(pf.size(), 0);
  for (const auto& cell : assoc.cells) {
    if (cell.empty()) continue;
    int best = cell.front();
    for (int j : cell)
      if (pf[static_cast<std::size_t>(j)] > pf[static_cast<std::size_t>(best)]) best = j;
    out[static_cast<std::size_t>(best)] = 1;
  }
  return out;
}

RrmDecision full_reuse(const Matrix& h_squared, const Association& assoc, std::span<const double> pf,
                       const RadioConstants& radio) {
  if (h_squared.rows() != assoc.cells.size()) throw std::invalid_argument("full_reuse: dimension mismatch");
  RrmDecision d;
  d.power.assign(assoc.cells.size(), radio.p_max_mw);
  d.gamma_hard = pf_select(pf, assoc);
  d.gamma_soft.assign(d.gamma_hard.begin(), d.gamma_hard.end());
  return d;
}

RrmDecision itlinq(const Matrix& h_squared, const Association& assoc, std::span<const double> pf,
                   const BaselineParams& params, const RadioConstants& radio) {
  params.validate();
  const std::size_t m = assoc.cells.size();
  RrmDecision d;
  d.gamma_hard = pf_select(pf, assoc);
  d.gamma_soft.assign(d.gamma_hard.begin(), d.gamma_hard.end());
  d.power.assign(m, 0.0);

  // Candidate receiver of each AP.
  std::vector<std::size_t> rx(m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (int j : assoc.cells[i])
      if (d.gamma_hard[static_cast<std::size_t>(j)]) rx[i] = static_cast<std::size_t>(j);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pf[rx[a]] > pf[rx[b]]; });

  const double margin = std::pow(10.0, params.itlinq_m_db / 10.0);
  const double scale = radio.p_max_mw / radio.noise_mw;
  std::vector<std::size_t> active;
  for (std::size_t link : order) {
    const double snr_eta = std::pow(scale * h_squared(link, rx[link]), params.itlinq_eta);
    bool admit = true;
    for (std::size_t k : active) {
      const double inr_kj = scale * h_squared(k, rx[link]);
      const double inr_jk = scale * h_squared(link, rx[k]);
      if (snr_eta < margin * inr_kj || snr_eta < margin * inr_jk) {
        admit = false;
        break;
      }
    }
    if (admit) active.push_back(link);
  }
  for (std::size_t k : active) d.power[k] = radio.p_max_mw;
  return d;
}

double weighted_sum_rate(const Matrix& h_squared, std::span<const double> power, std::span<const int> selection,
                         const Association& assoc, std::span<const double> weights, double noise) {
  const auto f = capacity(h_squared, power, selection, assoc, noise);
  double total = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) total += weights[j] * f[j];
  return total;
}

WmmseResult wmmse(const Matrix& h_squared, const Association& assoc, std::span<const int> selection,
                  std::span<const double> weights, const BaselineParams& params, const RadioConstants& radio) {
  params.validate();
  const std::size_t m = assoc.cells.size();
  if (selection.size() != assoc.serving.size() || weights.size() != assoc.serving.size())
    throw std::invalid_argument("wmmse: dimension mismatch");

  std::vector<std::size_t> rx(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    int count = 0;
    for (int j : assoc.cells[i])
      if (selection[static_cast<std::size_t>(j)]) {
        rx[i] = static_cast<std::size_t>(j);
        ++count;
      }
    if (count != 1) throw std::invalid_argument("wmmse: exactly one selected user per cell required");
  }
  // amp(j, k): channel amplitude from AP k to the receiver of link j.
  Matrix amp(m, m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) amp(j, k) = std::sqrt(h_squared(k, rx[j]));
  std::vector<double> alpha(m);
  for (std::size_t j = 0; j < m; ++j) alpha[j] = weights[rx[j]];

  const double v_max = std::sqrt(radio.p_max_mw);
  const double noise = radio.noise_mw;
  std::vector<double> v(m, v_max);
  std::vector<double> u(m), w(m), power(m);

  auto current_wsr = [&] {
    for (std::size_t k = 0; k < m; ++k) power[k] = std::min(v[k] * v[k], radio.p_max_mw);
    return weighted_sum_rate(h_squared, power, selection, assoc, weights, noise);
  };

  WmmseResult result;
  double wsr = current_wsr();
  result.weighted_sum_rates.push_back(wsr);
  for (int it = 0; it < params.wmmse_max_iters; ++it) {
    for (std::size_t j = 0; j < m; ++j) {
      double interference = noise;
      for (std::size_t k = 0; k < m; ++k)
        if (k != j) interference += amp(j, k) * amp(j, k) * v[k] * v[k];
      const double signal = amp(j, j) * amp(j, j) * v[j] * v[j];
      u[j] = amp(j, j) * v[j] / (interference + signal);
      w[j] = (interference + signal) / interference;  // 1 / MSE = 1 + SINR
    }
    for (std::size_t k = 0; k < m; ++k) {
      double denom = 0.0;
      for (std::size_t j = 0; j < m; ++j) denom += alpha[j] * w[j] * u[j] * u[j] * amp(j, k) * amp(j, k);
      const double num = alpha[k] * w[k] * u[k] * amp(k, k);
      v[k] = denom > 0.0 ? std::clamp(num / denom, 0.0, v_max) : v_max;
    }
    const double next = current_wsr();
    result.weighted_sum_rates.push_back(next);
    result.iterations = it + 1;
    const double change = std::abs(next - wsr);
    wsr = next;
    if (change <= params.wmmse_tol * std::max(std::abs(wsr), 1e-300)) {
      result.converged = true;
      break;
    }
  }
  for (std::size_t k = 0; k < m; ++k) power[k] = std::min(v[k] * v[k], radio.p_max_mw);
  result.power = power;
  return result;
}

RrmDecision wmmse_decision(const Matrix& h_squared, const Association& assoc, std::span<const double> pf,
                           const BaselineParams& params, const RadioConstants& radio) {
  RrmDecision d;
  d.gamma_hard = pf_select(pf, assoc);
  d.gamma_soft.assign(d.gamma_hard.begin(), d.gamma_hard.end());
  d.power = wmmse(h_squared, assoc, d.gamma_hard, pf, params, radio).power;
  for (double& p : d.power) p = std::min(p, radio.p_max_mw);
  return d;
}

}  // namespace rrm
