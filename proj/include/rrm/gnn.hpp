#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rrm/graph.hpp"
#include "rrm/matrix.hpp"
#include "rrm/netgen.hpp"

namespace rrm {

struct GnnHyper {
  std::vector<int> features{1, 64, 64};  // F_0 .. F_L
  double leaky_slope = 0.01;
  double temperature = 10.0;

  int num_layers() const { return static_cast<int>(features.size()) - 1; }
  int embedding_dim() const { return features.back(); }
  void validate() const;

  friend bool operator==(const GnnHyper&, const GnnHyper&) = default;
};

// One local-extremum aggregation layer:
//   y_v' = LeakyReLU( y_v W_self + sum_{(u,v)} w(u,v) (y_v W_center - y_u W_neighbor) )
struct LayerParams {
  Matrix self;
  Matrix center;
  Matrix neighbor;
};

// Shared backbone plus the two linear heads. The power policy owns
// (layers, power_head) and the selection policy owns (layers, selection_head).
struct GnnParams {
  GnnHyper hyper;
  std::vector<LayerParams> layers;
  std::vector<double> power_head;
  std::vector<double> selection_head;

  static GnnParams zeros(const GnnHyper& hyper);
  // Uniform in +-sqrt(1 / fan_in) for every array.
  static GnnParams initialize(const GnnHyper& hyper, std::uint64_t seed);

  // Every parameter array in a fixed order: per layer (self, center, neighbor),
  // then power_head, then selection_head.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  std::size_t num_parameters() const;
  bool same_shape(const GnnParams& other) const;
  bool all_finite() const;
  // this += scale * other
  void add_scaled(const GnnParams& other, double scale);
  void set_zero();
};

// Gradients share the parameter layout.
using Gradients = GnnParams;

struct ForwardCache {
  std::vector<double> in_weight;   // sum of incoming edge weights per node
  std::vector<Matrix> inputs;      // y^{l-1}
  std::vector<Matrix> aggregated;  // sum_u w(u,v) y_u^{l-1}
  std::vector<Matrix> pre;         // pre-activation of layer l
};

// Node embeddings s (n x F_L).
Matrix forward(const RrmGraph& graph, const GnnParams& params, ForwardCache* cache = nullptr);

// Accumulates scale * dL/dtheta (backbone only) given dL/ds.
void backward(const RrmGraph& graph, const GnnParams& params, const ForwardCache& cache,
              const Matrix& d_embeddings, double scale, Gradients& grads);

// Per-AP pre-activation (1/|R_i|) b_p^T sum_{j in R_i} s_j.
std::vector<double> power_logits(const Matrix& embeddings, const Association& assoc, const GnnParams& params);
std::vector<double> power_head(const Matrix& embeddings, const Association& assoc, const GnnParams& params,
                               double p_max);

// Per-user logit b_gamma^T s_j / tau.
std::vector<double> selection_logits(const Matrix& embeddings, const GnnParams& params);
// Softmax of the logits within each cell.
std::vector<double> selection_head(const Matrix& embeddings, const Association& assoc, const GnnParams& params);
std::vector<double> cell_softmax(std::span<const double> logits, const Association& assoc);

std::vector<int> sample_selection(std::span<const double> gamma_soft, const Association& assoc,
                                  std::mt19937_64& rng);
// Highest-probability user per cell, ties to the lowest index.
std::vector<int> argmax_selection(std::span<const double> gamma_soft, const Association& assoc);

inline constexpr double kLogZeroSentinel = -1e30;

// log of the joint probability of the selected users.
double log_policy_prob(std::span<const double> gamma_soft, std::span<const int> gamma_hard);

// dL/dp for L = lambda^T f(H, p, selection).
std::vector<double> rate_power_gradient(const Matrix& h_squared, std::span<const double> power,
                                        std::span<const int> selection, const Association& assoc,
                                        std::span<const double> lambda, double noise);

// Back-propagates dL/dp through the power head. Accumulates scale * dL/db_p into
// grads.power_head and scale * dL/ds into d_embeddings.
void power_head_backward(const Matrix& embeddings, const Association& assoc, const GnnParams& params,
                         double p_max, std::span<const double> d_power, double scale, Matrix& d_embeddings,
                         Gradients& grads);

// Same for L = log pi(selection); accumulates into grads.selection_head.
void log_policy_backward(const Matrix& embeddings, const Association& assoc, const GnnParams& params,
                         std::span<const double> gamma_soft, std::span<const int> selection, double scale,
                         Matrix& d_embeddings, Gradients& grads);

// One term of the power loss sum_k weight_k * lambda_k^T f(H_k, p(H_k), selection_k).
struct PowerLossTerm {
  const RrmGraph& graph;
  const Matrix& h_squared;
  const Association& assoc;
  std::vector<int> selection;
  std::vector<double> lambda;
  double weight = 1.0;
};

// One term of the policy-gradient surrogate sum_k weight_k * score_k * log pi_k.
struct SelectionLossTerm {
  const RrmGraph& graph;
  const Association& assoc;
  std::vector<int> selection;
  double score = 0.0;
  double weight = 1.0;
};

double power_loss(std::span<const PowerLossTerm> batch, const GnnParams& params, const RadioConstants& radio);
Gradients grad_power_loss(std::span<const PowerLossTerm> batch, const GnnParams& params,
                          const RadioConstants& radio);

double selection_surrogate(std::span<const SelectionLossTerm> batch, const GnnParams& params);
Gradients grad_selection_loss(std::span<const SelectionLossTerm> batch, const GnnParams& params);

}  // namespace rrm
