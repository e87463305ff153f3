#include "rrm/netgen.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "rrm/seed.hpp"

namespace rrm {
namespace {

constexpr double kSpeedOfLight = 299792458.0;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

Point uniform_point(std::mt19937_64& rng, double side) {
  std::uniform_real_distribution<double> u(0.0, side);
  const double x = u(rng);
  const double y = u(rng);
  return {x, y};
}

}  // namespace

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void TopologyParams::validate() const {
  if (!(area_side > 0.0) || !(min_ap_ap_dist > 0.0) || !(min_ap_ue_dist > 0.0))
    throw std::invalid_argument("topology: distances must be positive");
  if (num_aps < 1) throw std::invalid_argument("topology: num_aps must be >= 1");
  if (num_ues < num_aps) throw std::invalid_argument("topology: num_ues must be >= num_aps");
}

void ChannelParams::validate() const {
  if (!(d_bp > 0.0)) throw std::invalid_argument("channel: d_bp must be positive");
  if (alpha2 < alpha1) throw std::invalid_argument("channel: alpha2 must be >= alpha1");
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("channel: bandwidth must be positive");
  if (shadowing_std_db < 0.0) throw std::invalid_argument("channel: shadowing std must be >= 0");
  if (ue_speed < 0.0 || !(carrier_hz > 0.0) || !(step_seconds > 0.0))
    throw std::invalid_argument("channel: speed, carrier and step duration must be valid");
  if (num_sinusoids < 1) throw std::invalid_argument("channel: num_sinusoids must be >= 1");
}

double ChannelParams::noise_mw() const {
  return db_to_linear(noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz));
}

double ChannelParams::p_max_mw() const { return db_to_linear(p_max_dbm); }

double ChannelParams::max_doppler_hz() const { return ue_speed * carrier_hz / kSpeedOfLight; }

Association Association::from_serving(std::vector<int> serving, int num_aps) {
  Association a;
  a.cells.resize(static_cast<std::size_t>(num_aps));
  for (std::size_t j = 0; j < serving.size(); ++j) {
    const int ap = serving[j];
    if (ap < 0 || ap >= num_aps) throw std::invalid_argument("association: AP index out of range");
    a.cells[static_cast<std::size_t>(ap)].push_back(static_cast<int>(j));
  }
  a.serving = std::move(serving);
  return a;
}

bool Association::is_partition() const {
  std::vector<int> seen(serving.size(), 0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].empty()) return false;
    for (int j : cells[i]) {
      if (j < 0 || j >= num_ues()) return false;
      if (serving[static_cast<std::size_t>(j)] != static_cast<int>(i)) return false;
      ++seen[static_cast<std::size_t>(j)];
    }
  }
  for (int c : seen)
    if (c != 1) return false;
  return true;
}

Topology generate_topology(const TopologyParams& params, std::uint64_t seed) {
  params.validate();
  Topology topo;
  std::mt19937_64 rng(derive_seed(seed, {0}));
  int attempts = 0;
  while (static_cast<int>(topo.aps.size()) < params.num_aps) {
    if (++attempts > kMaxPlacementAttempts)
      throw PlacementInfeasible("placement infeasible: could not place APs");
    const Point p = uniform_point(rng, params.area_side);
    bool ok = true;
    for (const Point& q : topo.aps)
      if (distance(p, q) < params.min_ap_ap_dist) { ok = false; break; }
    if (ok) topo.aps.push_back(p);
  }
  topo.ues = drop_ues(params, topo.aps, derive_seed(seed, {1}));
  return topo;
}

std::vector<Point> drop_ues(const TopologyParams& params, const std::vector<Point>& aps,
                            std::uint64_t seed) {
  std::vector<Point> ues;
  ues.reserve(static_cast<std::size_t>(params.num_ues));
  std::mt19937_64 rng(seed);
  int attempts = 0;
  while (static_cast<int>(ues.size()) < params.num_ues) {
    if (++attempts > kMaxPlacementAttempts)
      throw PlacementInfeasible("placement infeasible: could not place UEs");
    const Point p = uniform_point(rng, params.area_side);
    bool ok = true;
    for (const Point& q : aps)
      if (distance(p, q) < params.min_ap_ue_dist) { ok = false; break; }
    if (ok) ues.push_back(p);
  }
  return ues;
}

double path_loss_db(double d, const ChannelParams& params) {
  if (!(d > 0.0)) throw std::invalid_argument("path_loss_db: distance must be positive");
  if (d <= params.d_bp) return params.k0_db + 10.0 * params.alpha1 * std::log10(d);
  return params.k0_db + 10.0 * params.alpha2 * std::log10(d) -
         10.0 * (params.alpha2 - params.alpha1) * std::log10(params.d_bp);
}

Matrix long_term_gains(const Topology& topology, const ChannelParams& params, std::uint64_t seed) {
  params.validate();
  const std::size_t m = topology.aps.size();
  const std::size_t n = topology.ues.size();
  Matrix gains(m, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> shadow(0.0, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distance(topology.aps[i], topology.ues[j]);
      const double gain_db = -path_loss_db(d, params) + params.shadowing_std_db * shadow(rng);
      gains(i, j) = db_to_linear(gain_db);
    }
  }
  return gains;
}

Association max_gain_association(const Matrix& gains) {
  std::vector<int> serving(gains.cols(), 0);
  for (std::size_t j = 0; j < gains.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < gains.rows(); ++i)
      if (gains(i, j) > gains(best, j)) best = i;
    serving[j] = static_cast<int>(best);
  }
  return Association::from_serving(std::move(serving), static_cast<int>(gains.rows()));
}

LongTermChannel long_term_channel(const Topology& topology, const ChannelParams& params,
                                  std::uint64_t seed) {
  LongTermChannel lt;
  lt.gains = long_term_gains(topology, params, seed);
  lt.assoc = max_gain_association(lt.gains);
  for (std::size_t i = 0; i < lt.assoc.cells.size(); ++i)
    if (lt.assoc.cells[i].empty())
      throw AssociationInfeasible("association infeasible: AP " + std::to_string(i) +
                                  " has no associated users");
  return lt;
}

NetworkConfig sample_network(const TopologyParams& topo, const ChannelParams& channel, int id,
                             std::uint64_t seed) {
  topo.validate();
  NetworkConfig cfg;
  cfg.id = id;
  cfg.seed = seed;
  cfg.topology = generate_topology(topo, seed);
  for (int attempt = 0; attempt < kMaxAssociationAttempts; ++attempt) {
    if (attempt > 0)
      cfg.topology.ues =
          drop_ues(topo, cfg.topology.aps, derive_seed(seed, {1, static_cast<std::uint64_t>(attempt)}));
    try {
      cfg.channel = long_term_channel(cfg.topology, channel,
                                      derive_seed(seed, {2, static_cast<std::uint64_t>(attempt)}));
      return cfg;
    } catch (const AssociationInfeasible&) {
    }
  }
  throw AssociationInfeasible("association infeasible: resampling budget exhausted for config " +
                              std::to_string(id));
}

std::vector<NetworkConfig> sample_family(const TopologyParams& topo, const ChannelParams& channel,
                                         int count, std::uint64_t seed) {
  std::vector<NetworkConfig> family;
  family.reserve(static_cast<std::size_t>(count));
  for (int id = 0; id < count; ++id)
    family.push_back(sample_network(topo, channel, id, derive_seed(seed, {static_cast<std::uint64_t>(id)})));
  return family;
}

SosFading::SosFading(int m, int n, const ChannelParams& params, std::uint64_t seed)
    : m_(m), n_(n), k_(params.num_sinusoids), step_seconds_(params.step_seconds) {
  params.validate();
  if (m < 1 || n < 1) throw std::invalid_argument("fading: dimensions must be positive");
  amplitude_ = std::sqrt(1.0 / k_);
  const double omega = 2.0 * std::numbers::pi * params.max_doppler_hz();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  paths_.resize(static_cast<std::size_t>(m) * n * k_);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      Path* p = &paths_[(static_cast<std::size_t>(i) * n + j) * k_];
      const double theta = angle(rng);
      for (int k = 0; k < k_; ++k) {
        const double alpha = (2.0 * std::numbers::pi * (k + 1) - std::numbers::pi + theta) / (4.0 * k_);
        p[k].freq_i = omega * std::cos(alpha);
        p[k].freq_q = omega * std::sin(alpha);
        p[k].phase_i = angle(rng);
        p[k].phase_q = angle(rng);
      }
    }
  }
}

double SosFading::in_phase(int i, int j, std::size_t t) const {
  const double time = static_cast<double>(t) * step_seconds_;
  const Path* p = paths(i, j);
  double acc = 0.0;
  for (int k = 0; k < k_; ++k) acc += std::cos(p[k].freq_i * time + p[k].phase_i);
  return amplitude_ * acc;
}

double SosFading::quadrature(int i, int j, std::size_t t) const {
  const double time = static_cast<double>(t) * step_seconds_;
  const Path* p = paths(i, j);
  double acc = 0.0;
  for (int k = 0; k < k_; ++k) acc += std::cos(p[k].freq_q * time + p[k].phase_q);
  return amplitude_ * acc;
}

double SosFading::power(int i, int j, std::size_t t) const {
  const double re = in_phase(i, j, t);
  const double im = quadrature(i, j, t);
  return re * re + im * im;
}

Matrix SosFading::power_at(std::size_t t) const {
  Matrix out(static_cast<std::size_t>(m_), static_cast<std::size_t>(n_));
  for (int i = 0; i < m_; ++i)
    for (int j = 0; j < n_; ++j) out(i, j) = power(i, j, t);
  return out;
}

std::vector<Matrix> fading_sequence(int m, int n, std::size_t num_steps, const ChannelParams& params,
                                    std::uint64_t seed) {
  if (num_steps < 1) throw std::invalid_argument("fading_sequence: num_steps must be >= 1");
  SosFading fading(m, n, params, seed);
  std::vector<Matrix> seq;
  seq.reserve(num_steps);
  for (std::size_t t = 0; t < num_steps; ++t) seq.push_back(fading.power_at(t));
  return seq;
}

ChannelState channel_at(const LongTermChannel& longterm, const Matrix& fading, std::size_t t) {
  if (fading.rows() != longterm.gains.rows() || fading.cols() != longterm.gains.cols())
    throw std::invalid_argument("channel_at: dimension mismatch");
  ChannelState state;
  state.time_index = t;
  state.h_squared = Matrix(fading.rows(), fading.cols());
  const auto g = longterm.gains.values();
  const auto f = fading.values();
  auto out = state.h_squared.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = g[k] * f[k];
  return state;
}

}  // namespace rrm
