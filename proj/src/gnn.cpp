#include "rrm/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rrm/rates.hpp"

namespace rrm {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_embeddings(const Matrix& embeddings, const Association& assoc, const GnnParams& params) {
  if (embeddings.rows() != static_cast<std::size_t>(assoc.num_ues()) ||
      embeddings.cols() != static_cast<std::size_t>(params.hyper.embedding_dim()))
    throw std::invalid_argument("gnn head: embedding shape mismatch");
}

}  // namespace

void GnnHyper::validate() const {
  if (features.size() < 2) throw std::invalid_argument("gnn: need at least one layer");
  for (int f : features)
    if (f < 1) throw std::invalid_argument("gnn: feature widths must be positive");
  if (!(temperature > 0.0)) throw std::invalid_argument("gnn: temperature must be positive");
}

GnnParams GnnParams::zeros(const GnnHyper& hyper) {
  hyper.validate();
  GnnParams p;
  p.hyper = hyper;
  for (int l = 1; l <= hyper.num_layers(); ++l) {
    const auto fi = static_cast<std::size_t>(hyper.features[static_cast<std::size_t>(l - 1)]);
    const auto fo = static_cast<std::size_t>(hyper.features[static_cast<std::size_t>(l)]);
    p.layers.push_back({Matrix(fi, fo), Matrix(fi, fo), Matrix(fi, fo)});
  }
  p.power_head.assign(static_cast<std::size_t>(hyper.embedding_dim()), 0.0);
  p.selection_head.assign(static_cast<std::size_t>(hyper.embedding_dim()), 0.0);
  return p;
}

GnnParams GnnParams::initialize(const GnnHyper& hyper, std::uint64_t seed) {
  GnnParams p = zeros(hyper);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](std::span<double> block, int fan_in) {
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : block) v = u(rng);
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const int fan_in = hyper.features[l];
    fill(p.layers[l].self.values(), fan_in);
    fill(p.layers[l].center.values(), fan_in);
    fill(p.layers[l].neighbor.values(), fan_in);
  }
  fill(p.power_head, hyper.embedding_dim());
  fill(p.selection_head, hyper.embedding_dim());
  return p;
}

std::vector<std::span<double>> GnnParams::blocks() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers) {
    out.push_back(layer.self.values());
    out.push_back(layer.center.values());
    out.push_back(layer.neighbor.values());
  }
  out.push_back(power_head);
  out.push_back(selection_head);
  return out;
}

std::vector<std::span<const double>> GnnParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : layers) {
    out.push_back(layer.self.values());
    out.push_back(layer.center.values());
    out.push_back(layer.neighbor.values());
  }
  out.push_back(power_head);
  out.push_back(selection_head);
  return out;
}

std::size_t GnnParams::num_parameters() const {
  std::size_t total = 0;
  for (const auto& b : blocks()) total += b.size();
  return total;
}

bool GnnParams::same_shape(const GnnParams& other) const {
  if (hyper.features != other.hyper.features || layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.self.rows() != b.self.rows() || a.self.cols() != b.self.cols()) return false;
    if (a.center.rows() != b.center.rows() || a.center.cols() != b.center.cols()) return false;
    if (a.neighbor.rows() != b.neighbor.rows() || a.neighbor.cols() != b.neighbor.cols()) return false;
  }
  return power_head.size() == other.power_head.size() && selection_head.size() == other.selection_head.size();
}

bool GnnParams::all_finite() const {
  for (const auto& b : blocks())
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

void GnnParams::add_scaled(const GnnParams& other, double scale) {
  if (!same_shape(other)) throw std::invalid_argument("gnn: parameter shape mismatch");
  auto dst = blocks();
  const auto src = other.blocks();
  for (std::size_t b = 0; b < dst.size(); ++b)
    for (std::size_t k = 0; k < dst[b].size(); ++k) dst[b][k] += scale * src[b][k];
}

void GnnParams::set_zero() {
  for (auto b : blocks()) std::fill(b.begin(), b.end(), 0.0);
}

Matrix forward(const RrmGraph& graph, const GnnParams& params, ForwardCache* cache) {
  const auto n = static_cast<std::size_t>(graph.num_nodes);
  if (graph.features.rows() != n || graph.features.cols() != static_cast<std::size_t>(params.hyper.features[0]))
    throw std::invalid_argument("gnn forward: node feature shape mismatch");
  const std::vector<double> in_weight = graph.in_weight_sums();
  const double slope = params.hyper.leaky_slope;

  if (cache) {
    cache->in_weight = in_weight;
    cache->inputs.clear();
    cache->aggregated.clear();
    cache->pre.clear();
  }

  Matrix y = graph.features;
  for (const LayerParams& layer : params.layers) {
    const std::size_t fi = layer.self.rows();
    const std::size_t fo = layer.self.cols();
    if (y.cols() != fi) throw std::invalid_argument("gnn forward: layer width mismatch");

    Matrix agg(n, fi);
    for (const Edge& e : graph.edges) {
      const auto src = y.row(static_cast<std::size_t>(e.src));
      auto dst = agg.row(static_cast<std::size_t>(e.dst));
      for (std::size_t k = 0; k < fi; ++k) dst[k] += e.weight * src[k];
    }
    Matrix scaled(n, fi);
    Matrix neg_agg(n, fi);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < fi; ++k) {
        scaled(v, k) = in_weight[v] * y(v, k);
        neg_agg(v, k) = -agg(v, k);
      }

    Matrix z(n, fo);
    matmul_add(y, layer.self, z);
    matmul_add(scaled, layer.center, z);
    matmul_add(neg_agg, layer.neighbor, z);

    Matrix out(n, fo);
    const auto zv = z.values();
    auto ov = out.values();
    for (std::size_t k = 0; k < zv.size(); ++k) ov[k] = zv[k] > 0.0 ? zv[k] : slope * zv[k];

    if (cache) {
      cache->inputs.push_back(std::move(y));
      cache->aggregated.push_back(std::move(agg));
      cache->pre.push_back(std::move(z));
    }
    y = std::move(out);
  }
  return y;
}

void backward(const RrmGraph& graph, const GnnParams& params, const ForwardCache& cache,
              const Matrix& d_embeddings, double scale, Gradients& grads) {
  const auto n = static_cast<std::size_t>(graph.num_nodes);
  const double slope = params.hyper.leaky_slope;
  if (cache.pre.size() != params.layers.size()) throw std::invalid_argument("gnn backward: stale cache");
  if (!grads.same_shape(params)) throw std::invalid_argument("gnn backward: gradient shape mismatch");

  Matrix upstream = d_embeddings;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerParams& layer = params.layers[l];
    const Matrix& y = cache.inputs[l];
    const Matrix& agg = cache.aggregated[l];
    const Matrix& z = cache.pre[l];
    const std::size_t fi = layer.self.rows();
    const std::size_t fo = layer.self.cols();

    Matrix dz(n, fo);
    {
      const auto zv = z.values();
      const auto uv = upstream.values();
      auto dv = dz.values();
      for (std::size_t k = 0; k < dv.size(); ++k) dv[k] = zv[k] > 0.0 ? uv[k] : slope * uv[k];
    }
    Matrix scaled(n, fi);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < fi; ++k) scaled(v, k) = cache.in_weight[v] * y(v, k);

    LayerParams& g = grads.layers[l];
    matmul_at_b_add(y, dz, scale, g.self);
    matmul_at_b_add(scaled, dz, scale, g.center);
    matmul_at_b_add(agg, dz, -scale, g.neighbor);

    if (l == 0) break;

    Matrix d_self(n, fi);
    Matrix d_center(n, fi);
    Matrix d_neighbor(n, fi);
    matmul_a_bt_add(dz, layer.self, 1.0, d_self);
    matmul_a_bt_add(dz, layer.center, 1.0, d_center);
    matmul_a_bt_add(dz, layer.neighbor, 1.0, d_neighbor);

    Matrix next(n, fi);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < fi; ++k) next(v, k) = d_self(v, k) + cache.in_weight[v] * d_center(v, k);
    for (const Edge& e : graph.edges) {
      const auto src = d_neighbor.row(static_cast<std::size_t>(e.dst));
      auto dst = next.row(static_cast<std::size_t>(e.src));
      for (std::size_t k = 0; k < fi; ++k) dst[k] -= e.weight * src[k];
    }
    upstream = std::move(next);
  }
}

std::vector<double> power_logits(const Matrix& embeddings, const Association& assoc, const GnnParams& params) {
  check_embeddings(embeddings, assoc, params);
  const std::size_t f = embeddings.cols();
  std::vector<double> out(assoc.cells.size(), 0.0);
  for (std::size_t i = 0; i < assoc.cells.size(); ++i) {
    const auto& cell = assoc.cells[i];
    if (cell.empty()) throw std::invalid_argument("power_head: empty cell");
    double acc = 0.0;
    for (int j : cell) {
      const auto s = embeddings.row(static_cast<std::size_t>(j));
      for (std::size_t k = 0; k < f; ++k) acc += params.power_head[k] * s[k];
    }
    out[i] = acc / static_cast<double>(cell.size());
  }
  return out;
}

std::vector<double> power_head(const Matrix& embeddings, const Association& assoc, const GnnParams& params,
                               double p_max) {
  auto logits = power_logits(embeddings, assoc, params);
  for (double& v : logits) v = p_max * sigmoid(v);
  return logits;
}

std::vector<double> selection_logits(const Matrix& embeddings, const GnnParams& params) {
  if (embeddings.cols() != params.selection_head.size())
    throw std::invalid_argument("selection_head: embedding shape mismatch");
  std::vector<double> out(embeddings.rows(), 0.0);
  const double inv_tau = 1.0 / params.hyper.temperature;
  for (std::size_t j = 0; j < embeddings.rows(); ++j) {
    const auto s = embeddings.row(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) acc += params.selection_head[k] * s[k];
    out[j] = acc * inv_tau;
  }
  return out;
}

std::vector<double> cell_softmax(std::span<const double> logits, const Association& assoc) {
  if (logits.size() != assoc.serving.size()) throw std::invalid_argument("cell_softmax: dimension mismatch");
  std::vector<double> out(logits.size(), 0.0);
  for (const auto& cell : assoc.cells) {
    if (cell.empty()) continue;
    double top = logits[static_cast<std::size_t>(cell.front())];
    for (int j : cell) top = std::max(top, logits[static_cast<std::size_t>(j)]);
    double total = 0.0;
    for (int j : cell) {
      const double e = std::exp(logits[static_cast<std::size_t>(j)] - top);
      out[static_cast<std::size_t>(j)] = e;
      total += e;
    }
    for (int j : cell) out[static_cast<std::size_t>(j)] /= total;
  }
  return out;
}

std::vector<double> selection_head(const Matrix& embeddings, const Association& assoc, const GnnParams& params) {
  check_embeddings(embeddings, assoc, params);
  return cell_softmax(selection_logits(embeddings, params), assoc);
}

std::vector<int> sample_selection(std::span<const double> gamma_soft, const Association& assoc,
                                  std::mt19937_64& rng) {
  if (gamma_soft.size() != assoc.serving.size()) throw std::invalid_argument("sample_selection: dimension mismatch");
  std::vector<int> out(gamma_soft.size(), 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& cell : assoc.cells) {
    if (cell.empty()) continue;
    double total = 0.0;
    for (int j : cell) total += gamma_soft[static_cast<std::size_t>(j)];
    const double r = u(rng) * total;
    // Fall back to the last user with positive mass when rounding leaves r uncovered.
    int chosen = -1;
    double acc = 0.0;
    for (int j : cell) {
      const double g = gamma_soft[static_cast<std::size_t>(j)];
      if (g <= 0.0) continue;
      acc += g;
      chosen = j;
      if (r < acc) break;
    }
    if (chosen < 0) chosen = cell.front();
    out[static_cast<std::size_t>(chosen)] = 1;
  }
  return out;
}

std::vector<int> argmax_selection(std::span<const double> gamma_soft, const Association& assoc) {
  if (gamma_soft.size() != assoc.serving.size()) throw std::invalid_argument("argmax_selection: dimension mismatch");
  std::vector<int> out(gamma_soft.size(), 0);
  for (const auto& cell : assoc.cells) {
    if (cell.empty()) continue;
    int best = cell.front();
    for (int j : cell)
      if (gamma_soft[static_cast<std::size_t>(j)] > gamma_soft[static_cast<std::size_t>(best)]) best = j;
    out[static_cast<std::size_t>(best)] = 1;
  }
  return out;
}

double log_policy_prob(std::span<const double> gamma_soft, std::span<const int> gamma_hard) {
  if (gamma_soft.size() != gamma_hard.size()) throw std::invalid_argument("log_policy_prob: dimension mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < gamma_soft.size(); ++j) {
    if (!gamma_hard[j]) continue;
    if (!(gamma_soft[j] > 0.0)) return kLogZeroSentinel;
    total += std::log(gamma_soft[j]);
  }
  return total;
}

std::vector<double> rate_power_gradient(const Matrix& h_squared, std::span<const double> power,
                                        std::span<const int> selection, const Association& assoc,
                                        std::span<const double> lambda, double noise) {
  const std::size_t m = h_squared.rows();
  const std::size_t n = h_squared.cols();
  if (power.size() != m || selection.size() != n || lambda.size() != n)
    throw std::invalid_argument("rate_power_gradient: dimension mismatch");
  std::vector<double> grad(m, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!selection[j] || lambda[j] == 0.0) continue;
    const auto s = static_cast<std::size_t>(assoc.serving[j]);
    double denom = noise;
    for (std::size_t i = 0; i < m; ++i)
      if (i != s) denom += h_squared(i, j) * power[i];
    const double snr = h_squared(s, j) * power[s] / denom;
    // d/dp of lambda_j log2(1 + S_j)
    const double c = lambda[j] / (std::numbers::ln2 * (1.0 + snr) * denom);
    grad[s] += c * h_squared(s, j);
    for (std::size_t i = 0; i < m; ++i)
      if (i != s) grad[i] -= c * snr * h_squared(i, j);
  }
  return grad;
}

void power_head_backward(const Matrix& embeddings, const Association& assoc, const GnnParams& params,
                         double p_max, std::span<const double> d_power, double scale, Matrix& d_embeddings,
                         Gradients& grads) {
  const auto logits = power_logits(embeddings, assoc, params);
  const std::size_t f = embeddings.cols();
  for (std::size_t i = 0; i < assoc.cells.size(); ++i) {
    const auto& cell = assoc.cells[i];
    const double sg = sigmoid(logits[i]);
    const double d_logit = scale * d_power[i] * p_max * sg * (1.0 - sg) / static_cast<double>(cell.size());
    if (d_logit == 0.0) continue;
    for (int j : cell) {
      const auto s = embeddings.row(static_cast<std::size_t>(j));
      auto ds = d_embeddings.row(static_cast<std::size_t>(j));
      for (std::size_t k = 0; k < f; ++k) {
        grads.power_head[k] += d_logit * s[k];
        ds[k] += d_logit * params.power_head[k];
      }
    }
  }
}

void log_policy_backward(const Matrix& embeddings, const Association& assoc, const GnnParams& params,
                         std::span<const double> gamma_soft, std::span<const int> selection, double scale,
                         Matrix& d_embeddings, Gradients& grads) {
  check_embeddings(embeddings, assoc, params);
  const std::size_t f = embeddings.cols();
  const double inv_tau = 1.0 / params.hyper.temperature;
  for (std::size_t j = 0; j < embeddings.rows(); ++j) {
    // d log pi / d logit_j = [j selected] - gamma_j, within j's cell.
    const double d_logit = scale * ((selection[j] ? 1.0 : 0.0) - gamma_soft[j]) * inv_tau;
    if (d_logit == 0.0) continue;
    const auto s = embeddings.row(j);
    auto ds = d_embeddings.row(j);
    for (std::size_t k = 0; k < f; ++k) {
      grads.selection_head[k] += d_logit * s[k];
      ds[k] += d_logit * params.selection_head[k];
    }
  }
}

double power_loss(std::span<const PowerLossTerm> batch, const GnnParams& params, const RadioConstants& radio) {
  double total = 0.0;
  for (const auto& term : batch) {
    const Matrix emb = forward(term.graph, params);
    const auto p = power_head(emb, term.assoc, params, radio.p_max_mw);
    const auto f = capacity(term.h_squared, p, term.selection, term.assoc, radio.noise_mw);
    double acc = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) acc += term.lambda[j] * f[j];
    total += term.weight * acc;
  }
  return total;
}

Gradients grad_power_loss(std::span<const PowerLossTerm> batch, const GnnParams& params,
                          const RadioConstants& radio) {
  Gradients grads = GnnParams::zeros(params.hyper);
  ForwardCache cache;
  for (const auto& term : batch) {
    const Matrix emb = forward(term.graph, params, &cache);
    const auto p = power_head(emb, term.assoc, params, radio.p_max_mw);
    const auto dp = rate_power_gradient(term.h_squared, p, term.selection, term.assoc, term.lambda, radio.noise_mw);
    Matrix d_emb(emb.rows(), emb.cols());
    power_head_backward(emb, term.assoc, params, radio.p_max_mw, dp, term.weight, d_emb, grads);
    backward(term.graph, params, cache, d_emb, 1.0, grads);
  }
  return grads;
}

double selection_surrogate(std::span<const SelectionLossTerm> batch, const GnnParams& params) {
  double total = 0.0;
  for (const auto& term : batch) {
    const Matrix emb = forward(term.graph, params);
    const auto gamma = selection_head(emb, term.assoc, params);
    total += term.weight * term.score * log_policy_prob(gamma, term.selection);
  }
  return total;
}

Gradients grad_selection_loss(std::span<const SelectionLossTerm> batch, const GnnParams& params) {
  Gradients grads = GnnParams::zeros(params.hyper);
  ForwardCache cache;
  for (const auto& term : batch) {
    const Matrix emb = forward(term.graph, params, &cache);
    const auto gamma = selection_head(emb, term.assoc, params);
    Matrix d_emb(emb.rows(), emb.cols());
    log_policy_backward(emb, term.assoc, params, gamma, term.selection, term.weight * term.score, d_emb, grads);
    backward(term.graph, params, cache, d_emb, 1.0, grads);
  }
  return grads;
}

}  // namespace rrm
