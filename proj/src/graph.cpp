#include "rrm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rrm {

std::vector<double> RrmGraph::in_weight_sums() const {
  std::vector<double> sums(static_cast<std::size_t>(num_nodes), 0.0);
  for (const Edge& e : edges) sums[static_cast<std::size_t>(e.dst)] += e.weight;
  return sums;
}

Matrix edge_weights(const Matrix& h_squared, const RadioConstants& radio) {
  if (!(radio.p_max_mw > 0.0) || !(radio.noise_mw > 0.0))
    throw std::invalid_argument("edge_weights: Pmax and noise must be positive");
  Matrix out(h_squared.rows(), h_squared.cols());
  const auto in = h_squared.values();
  auto w = out.values();
  double norm2 = 0.0;
  for (std::size_t k = 0; k < in.size(); ++k) {
    w[k] = std::log(radio.p_max_mw * std::max(in[k], kGainFloor) / radio.noise_mw);
    norm2 += w[k] * w[k];
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : w) v *= inv;
  }
  return out;
}

RrmGraph build_graph(const Matrix& h_squared, const Association& assoc, std::span<const double> pf,
                     const RadioConstants& radio) {
  const int n = assoc.num_ues();
  if (h_squared.cols() != static_cast<std::size_t>(n) ||
      h_squared.rows() != static_cast<std::size_t>(assoc.num_aps()) || pf.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("build_graph: dimension mismatch");
  const Matrix w = edge_weights(h_squared, radio);

  RrmGraph g;
  g.num_nodes = n;
  g.features = Matrix(static_cast<std::size_t>(n), 1);
  for (int j = 0; j < n; ++j) g.features(static_cast<std::size_t>(j), 0) = pf[static_cast<std::size_t>(j)];

  std::size_t interference_edges = 0;
  for (const auto& cell : assoc.cells) interference_edges += cell.size() * (static_cast<std::size_t>(n) - cell.size());
  g.edges.reserve(static_cast<std::size_t>(n) + interference_edges);

  for (int j = 0; j < n; ++j) {
    const auto s = static_cast<std::size_t>(assoc.serving[static_cast<std::size_t>(j)]);
    g.edges.push_back({j, j, w(s, static_cast<std::size_t>(j))});
  }
  // Edge (u, v): interference from u's serving AP at user v.
  for (int u = 0; u < n; ++u) {
    const int su = assoc.serving[static_cast<std::size_t>(u)];
    for (int v = 0; v < n; ++v) {
      if (v == u || assoc.serving[static_cast<std::size_t>(v)] == su) continue;
      g.edges.push_back({u, v, w(static_cast<std::size_t>(su), static_cast<std::size_t>(v))});
    }
  }
  return g;
}

}  // namespace rrm
