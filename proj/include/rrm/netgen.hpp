#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrm/matrix.hpp"

namespace rrm {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b);

struct TopologyParams {
  double area_side = 500.0;      // meters
  int num_aps = 4;
  int num_ues = 40;
  double min_ap_ap_dist = 35.0;  // meters
  double min_ap_ue_dist = 10.0;  // meters

  void validate() const;
};

struct Topology {
  std::vector<Point> aps;
  std::vector<Point> ues;
};

struct ChannelParams {
  double k0_db = 39.0;
  double d_bp = 100.0;  // breakpoint distance, meters
  double alpha1 = 2.0;
  double alpha2 = 4.0;
  double shadowing_std_db = 7.0;
  double noise_psd_dbm_hz = -174.0;
  double bandwidth_hz = 1e7;
  double p_max_dbm = 10.0;
  double ue_speed = 1.0;      // m/s
  double carrier_hz = 2e9;
  double step_seconds = 1e-3;
  int num_sinusoids = 8;

  void validate() const;

  double noise_mw() const;
  double p_max_mw() const;
  double max_doppler_hz() const;
};

// Noise and power budget in linear milliwatts; the only channel constants the
// rate, graph and policy code need.
struct RadioConstants {
  double noise_mw = 0.0;
  double p_max_mw = 0.0;

  static RadioConstants from(const ChannelParams& p) { return {p.noise_mw(), p.p_max_mw()}; }
};

// User-AP association: cells[i] lists the users served by AP i (ascending),
// serving[j] is the AP index serving user j.
struct Association {
  std::vector<std::vector<int>> cells;
  std::vector<int> serving;

  int num_aps() const { return static_cast<int>(cells.size()); }
  int num_ues() const { return static_cast<int>(serving.size()); }

  static Association from_serving(std::vector<int> serving, int num_aps);
  // Non-empty, disjoint, covering, and consistent with `serving`.
  bool is_partition() const;
};

struct LongTermChannel {
  Matrix gains;  // m x n, linear |h^l_ij|^2
  Association assoc;
};

struct ChannelState {
  Matrix h_squared;  // m x n, linear |h_ij|^2 at one step
  std::size_t time_index = 0;
};

class PlacementInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AssociationInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxPlacementAttempts = 100000;
inline constexpr int kMaxAssociationAttempts = 100;

Topology generate_topology(const TopologyParams& params, std::uint64_t seed);

// Re-drops only the UEs around fixed AP positions.
std::vector<Point> drop_ues(const TopologyParams& params, const std::vector<Point>& aps,
                            std::uint64_t seed);

double path_loss_db(double d, const ChannelParams& params);

// Path loss plus i.i.d. log-normal shadowing, linear scale.
Matrix long_term_gains(const Topology& topology, const ChannelParams& params, std::uint64_t seed);

// Each UE goes to the AP with the strongest long-term gain; ties to the lowest index.
// The result may contain empty cells.
Association max_gain_association(const Matrix& gains);

// Throws AssociationInfeasible when some AP ends up with no users.
LongTermChannel long_term_channel(const Topology& topology, const ChannelParams& params,
                                  std::uint64_t seed);

// One network configuration (placement + long-term channel). Empty cells are
// handled by re-dropping the UEs up to kMaxAssociationAttempts times.
struct NetworkConfig {
  int id = 0;
  std::uint64_t seed = 0;
  Topology topology;
  LongTermChannel channel;

  int num_aps() const { return channel.assoc.num_aps(); }
  int num_ues() const { return channel.assoc.num_ues(); }
};

NetworkConfig sample_network(const TopologyParams& topo, const ChannelParams& channel, int id,
                             std::uint64_t seed);

std::vector<NetworkConfig> sample_family(const TopologyParams& topo, const ChannelParams& channel,
                                         int count, std::uint64_t seed);

// Sum-of-sinusoids Rayleigh fading for an m x n array of independent links.
// Each link uses the Zheng-Xiao construction with `num_sinusoids` paths and
// random phases, normalized to unit mean power. Evaluation is closed form in t,
// so any step can be queried without generating the ones before it.
class SosFading {
 public:
  SosFading(int m, int n, const ChannelParams& params, std::uint64_t seed);

  int rows() const { return m_; }
  int cols() const { return n_; }

  // Complex gain g_ij(t) components.
  double in_phase(int i, int j, std::size_t t) const;
  double quadrature(int i, int j, std::size_t t) const;
  // |g_ij(t)|^2
  double power(int i, int j, std::size_t t) const;
  Matrix power_at(std::size_t t) const;

 private:
  struct Path {
    double freq_i;   // rad/s, in-phase branch
    double freq_q;   // rad/s, quadrature branch
    double phase_i;
    double phase_q;
  };

  const Path* paths(int i, int j) const { return &paths_[(static_cast<std::size_t>(i) * n_ + j) * k_]; }

  int m_;
  int n_;
  int k_;
  double step_seconds_;
  double amplitude_;
  std::vector<Path> paths_;
};

std::vector<Matrix> fading_sequence(int m, int n, std::size_t num_steps, const ChannelParams& params,
                                    std::uint64_t seed);

ChannelState channel_at(const LongTermChannel& longterm, const Matrix& fading, std::size_t t);

}  // namespace rrm
