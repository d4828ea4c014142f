#pragma once

#include "protolp/feature_io.hpp"
#include "protolp/solver.hpp"

#include <optional>

namespace protolp {

// Nearest class mean on the support means.
Labels ncm_predict(const Episode& episode);
Labels nearest_prototype(const ConstMatrixRef& x, const ConstMatrixRef& prototypes);

struct SoftKMeansResult {
  Matrix prototypes;
  Labels predictions;
};

// Transductive soft k-means: alternate soft assignments (one-hot on the
// support) and weighted means for n_iter rounds, then predict by NCM.
SoftKMeansResult soft_kmeans_refine(const Episode& episode, int n_iter);

struct RbfGraphSpec {
  // Kernel width; unset selects the median pairwise distance of the episode.
  std::optional<double> bandwidth;
  int neighbors = 0;  // 0 keeps the dense graph
  bool self_loops = false;
};

// Dense RBF affinity exp(-|xi - xj|^2 / (2 sigma^2)), optionally kNN
// sparsified and symmetrised by max.
Matrix rbf_graph(const ConstMatrixRef& x, const RbfGraphSpec& spec);
double median_pairwise_distance(const ConstMatrixRef& x);

// Solves (S + lambda L + ridge I) Y~ = S Y on the RBF graph Laplacian, where
// S selects the labelled rows. Returns the full score matrix.
Matrix classical_lp_scores(const Episode& episode, const RbfGraphSpec& graph, double lambda,
                           double ridge = 1e-6);
Labels classical_lp(const Episode& episode, const RbfGraphSpec& graph, double lambda,
                    double ridge = 1e-6);

// (I - lambda W + ridge I)^-1 Y through a K x K Woodbury reduction. lambda is
// clamped to at most 0.99.
Matrix nonparam_protolp_propagate(const PrototypeGraph& graph, const ConstMatrixRef& y_padded,
                                  double lambda, double ridge = 1e-6);

inline constexpr double kNonParamLambdaMax = 0.99;

}  // namespace protolp
