#pragma once

#include <span>
#include <vector>

#include "rrm/matrix.hpp"
#include "rrm/netgen.hpp"

namespace rrm {

inline constexpr double kGainFloor = 1e-30;

struct Edge {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
};

// Directed user graph. Nodes are users; every node has a signal self-loop, and
// (u, v) is an interference edge whenever u and v are served by different APs.
// Edges are stored self-loops first, then interference edges ordered by (src, dst).
struct RrmGraph {
  int num_nodes = 0;
  std::vector<Edge> edges;
  Matrix features;  // num_nodes x F0

  // Sum of incoming edge weights per node, self-loop included.
  std::vector<double> in_weight_sums() const;
};

// Normalized log-SNR of every AP-UE pair: log(Pmax |h|^2 / N) divided by the
// Euclidean norm of the same quantity over all m x n entries.
Matrix edge_weights(const Matrix& h_squared, const RadioConstants& radio);

RrmGraph build_graph(const Matrix& h_squared, const Association& assoc, std::span<const double> pf,
                     const RadioConstants& radio);

}  // namespace rrm
