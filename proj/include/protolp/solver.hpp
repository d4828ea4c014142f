#pragma once

#include "protolp/feature_io.hpp"
#include "protolp/linalg.hpp"

#include <optional>
#include <vector>

namespace protolp {

// Where the uniform-prior projection is applied inside the outer loop.
enum class SinkhornPlacement {
  kOff,
  kEveryStep,  // query block of Y~ projected each round, before the prototype update
  kFinalOnly,  // projected once, before the final argmax
};

struct SinkhornOptions {
  SinkhornPlacement placement = SinkhornPlacement::kEveryStep;
  // Empty means the uniform prior: rows sum to 1, columns to U/K.
  std::optional<Vector> row_targets;
  std::optional<Vector> col_targets;
  int max_iter = 1000;
  double tol = 1e-6;
};

enum class PropagationVariant {
  kParameterized,     // Y~ = Z A with A from the closed-form solve
  kNonParameterized,  // Y~ = (I - lambda W + ridge I)^-1 Y
};

struct SolverConfig {
  double lambda = 1.0;
  double alpha = 0.2;
  int n_step = 20;
  SinkhornOptions sinkhorn;
  double ridge = 1e-6;
  double lambda_floor = 1e-12;
  PropagationVariant variant = PropagationVariant::kParameterized;
};

void validate(const SolverConfig& config);

struct SolverTrace {
  std::vector<double> loss_per_step;
  std::vector<double> prototype_drift;
};

struct SolverResult {
  Labels predictions;   // one per query row
  Matrix soft_labels;   // final (L+U') x K Y~
  Matrix prototypes;    // final K x D
  SolverTrace trace;
};

// ---------------------------------------------------------------------------
// Building blocks. Rows of X / Z are ordered support, query, unlabeled; the
// first support_y.size() rows are the labelled ones.
// ---------------------------------------------------------------------------

// K x D class means of the support set.
Matrix init_prototypes(const Episode& episode);
Matrix class_means(const ConstMatrixRef& support_x, const Labels& support_y, int ways);

// Row-stochastic soft assignment exp(-|x - c|^2) normalised over prototypes.
// Labelled rows are one-hot at their label.
Matrix soft_assign(const ConstMatrixRef& x, const ConstMatrixRef& prototypes,
                   const Labels& support_y);

// Prototype graph W = Z diag(Lambda)^-1 Z^T, kept in factored form.
struct PrototypeGraph {
  Matrix assignment;  // Z
  Vector mass;        // Lambda_kk = sum_i Z_ik, floored

  // W * m without forming W.
  Matrix apply(const ConstMatrixRef& m) const;
  // Dense n x n W, for inspection and small problems only.
  Matrix dense() const;
  // Z^T (I - W) Z, a K x K matrix.
  Matrix smoothness_gram() const;
};

PrototypeGraph build_graph(const ConstMatrixRef& assignment, double lambda_floor = 1e-12);

// (L+U') x K label matrix: one-hot support rows, zeros elsewhere.
Matrix padded_labels(const Labels& support_y, Eigen::Index n_rows, int ways);

// Minimiser A of
//   1/2 |Z_L A - Y_L|^2 + lambda/2 tr(A^T Z^T (I - W) Z A).
// Throws kSolver when the system is singular even with the ridge.
Matrix solve_projection(const PrototypeGraph& graph, const ConstMatrixRef& y_padded,
                        Eigen::Index n_labeled, const SolverConfig& config);

Matrix propagate_labels(const ConstMatrixRef& assignment, const ConstMatrixRef& projection);

// The objective minimised by solve_projection.
double objective_value(const ConstMatrixRef& assignment, const ConstMatrixRef& projection,
                       const ConstMatrixRef& y_labeled, double lambda,
                       double lambda_floor = 1e-12);

struct SinkhornResult {
  Matrix scaled;
  int iterations = 0;
  bool converged = false;
  double row_residual = 0.0;
  double col_residual = 0.0;
};

// Alternating row/column rescaling onto the given marginals. Entries below
// 1e-12 are clamped up first. Throws kContract when the targets' totals
// disagree; non-convergence is reported through `converged`.
SinkhornResult sinkhorn_project(const ConstMatrixRef& scores, const ConstVectorRef& row_targets,
                                const ConstVectorRef& col_targets, int max_iter, double tol);

// EMA step C = (1 - alpha) C_prev + alpha T with T_k the soft-label weighted
// mean of X. Labelled rows are treated as one-hot and negative scores carry
// no weight; a class with mass below `mass_floor` keeps its prototype.
Matrix update_prototypes(const ConstMatrixRef& prev, const ConstMatrixRef& soft_labels,
                         const ConstMatrixRef& x, const Labels& support_y, double alpha,
                         double mass_floor = 1e-12);

// Runs the full alternating loop on one episode.
SolverResult run(const Episode& episode, const SolverConfig& config);

}  // namespace protolp
