#include "protolp/solver.hpp"

#include "protolp/baselines.hpp"

#include <cmath>
#include <limits>

namespace protolp {

namespace {

// Smallest reciprocal condition estimate accepted from the K x K factorisation.
constexpr double kMinRcond = 1e-14;
constexpr double kSinkhornClamp = 1e-12;

void check_rows(const char* what, Eigen::Index got, Eigen::Index want) {
  if (got != want) {
    fail(ErrorKind::kConsistency, std::string(what) + " has " + std::to_string(got) +
                                      " rows, expected " + std::to_string(want));
  }
}

}  // namespace

void validate(const SolverConfig& config) {
  if (!(config.lambda >= 0.0)) fail(ErrorKind::kConfig, "lambda must be >= 0");
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    fail(ErrorKind::kConfig, "alpha must lie in [0, 1]");
  }
  if (config.n_step < 1) fail(ErrorKind::kConfig, "steps must be >= 1");
  if (!(config.ridge >= 0.0)) fail(ErrorKind::kConfig, "ridge must be >= 0");
  if (!(config.lambda_floor > 0.0)) fail(ErrorKind::kConfig, "lambda floor must be > 0");
  if (config.sinkhorn.max_iter < 1) fail(ErrorKind::kConfig, "sinkhorn max_iter must be >= 1");
  if (!(config.sinkhorn.tol > 0.0)) fail(ErrorKind::kConfig, "sinkhorn tol must be > 0");
}

// ---------------------------------------------------------------------------
// Prototypes and assignments
// ---------------------------------------------------------------------------

Matrix class_means(const ConstMatrixRef& support_x, const Labels& support_y, int ways) {
  check_rows("support matrix", support_x.rows(), static_cast<Eigen::Index>(support_y.size()));
  Matrix sums = Matrix::Zero(ways, support_x.cols());
  Vector counts = Vector::Zero(ways);
  for (std::size_t i = 0; i < support_y.size(); ++i) {
    const Label k = support_y[i];
    if (k < 0 || k >= ways) fail(ErrorKind::kConsistency, "support label out of range");
    sums.row(k) += support_x.row(static_cast<Eigen::Index>(i));
    counts(k) += 1.0;
  }
  for (int k = 0; k < ways; ++k) {
    if (counts(k) == 0.0) {
      fail(ErrorKind::kConsistency, "class " + std::to_string(k) + " has no support rows");
    }
    sums.row(k) /= counts(k);
  }
  return sums;
}

Matrix init_prototypes(const Episode& episode) {
  return class_means(episode.support_x, episode.support_y, episode.ways);
}

Matrix soft_assign(const ConstMatrixRef& x, const ConstMatrixRef& prototypes,
                   const Labels& support_y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index ways = prototypes.rows();
  const auto n_labeled = static_cast<Eigen::Index>(support_y.size());
  if (n_labeled > n) fail(ErrorKind::kConsistency, "more labels than rows");

  Matrix z(n, ways);
  for (Eigen::Index i = 0; i < n_labeled; ++i) {
    z.row(i).setZero();
    z(i, support_y[static_cast<std::size_t>(i)]) = 1.0;
  }
  RowVector dist(ways);
  for (Eigen::Index i = n_labeled; i < n; ++i) {
    for (Eigen::Index k = 0; k < ways; ++k) {
      dist(k) = (x.row(i) - prototypes.row(k)).squaredNorm();
    }
    // Shift by the nearest prototype so the largest exponent is exactly 0.
    const double nearest = dist.minCoeff();
    z.row(i) = (-(dist.array() - nearest)).exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

// ---------------------------------------------------------------------------
// Prototype graph
// ---------------------------------------------------------------------------

PrototypeGraph build_graph(const ConstMatrixRef& assignment, double lambda_floor) {
  PrototypeGraph g;
  g.assignment = assignment;
  g.mass = assignment.colwise().sum().transpose().cwiseMax(lambda_floor);
  return g;
}

Matrix PrototypeGraph::apply(const ConstMatrixRef& m) const {
  return assignment * (mass.cwiseInverse().asDiagonal() * (assignment.transpose() * m));
}

Matrix PrototypeGraph::dense() const {
  const Matrix w = assignment * mass.cwiseInverse().asDiagonal() * assignment.transpose();
  // Floating-point addition commutes, so this is symmetric bit for bit.
  return 0.5 * (w + w.transpose());
}

Matrix PrototypeGraph::smoothness_gram() const {
  const Matrix gram = assignment.transpose() * assignment;
  Matrix q = gram - gram * mass.cwiseInverse().asDiagonal() * gram;
  return 0.5 * (q + q.transpose());
}

Matrix padded_labels(const Labels& support_y, Eigen::Index n_rows, int ways) {
  Matrix y = Matrix::Zero(n_rows, ways);
  for (std::size_t i = 0; i < support_y.size(); ++i) {
    y(static_cast<Eigen::Index>(i), support_y[i]) = 1.0;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Parameterised propagation
// ---------------------------------------------------------------------------

Matrix solve_projection(const PrototypeGraph& graph, const ConstMatrixRef& y_padded,
                        Eigen::Index n_labeled, const SolverConfig& config) {
  const Matrix& z = graph.assignment;
  check_rows("label matrix", y_padded.rows(), z.rows());
  const auto z_l = z.topRows(n_labeled);
  const Eigen::Index ways = z.cols();

  const Matrix normal = z_l.transpose() * z_l + config.lambda * graph.smoothness_gram();
  const Matrix rhs = z.transpose() * y_padded;
  const Matrix regularised = normal + config.ridge * Matrix::Identity(ways, ways);

  const Eigen::LDLT<Matrix> ldlt(regularised);
  const double rcond = ldlt_rcond(ldlt);
  if (!(rcond >= kMinRcond)) {
    fail(ErrorKind::kSolver, "projection system is singular (rcond " + format_sci(rcond) +
                                 ", ridge " + format_sci(config.ridge) + ", K " +
                                 std::to_string(ways) + ")");
  }
  Matrix a = ldlt.solve(rhs);
  // Iterative refinement towards the unregularised normal equations; the
  // ridge only conditions the factorisation.
  for (int sweep = 0; sweep < 2; ++sweep) a += ldlt.solve(rhs - normal * a);
  if (!a.allFinite()) fail(ErrorKind::kSolver, "projection solve produced non-finite values");
  return a;
}

Matrix propagate_labels(const ConstMatrixRef& assignment, const ConstMatrixRef& projection) {
  if (assignment.cols() != projection.rows()) {
    fail(ErrorKind::kConsistency, "assignment and projection shapes do not conform");
  }
  return assignment * projection;
}

double objective_value(const ConstMatrixRef& assignment, const ConstMatrixRef& projection,
                       const ConstMatrixRef& y_labeled, double lambda, double lambda_floor) {
  const PrototypeGraph graph = build_graph(assignment, lambda_floor);
  const Eigen::Index n_labeled = y_labeled.rows();
  const double fit = 0.5 * (assignment.topRows(n_labeled) * projection - y_labeled).squaredNorm();
  const double smooth =
      0.5 * lambda * (projection.transpose() * graph.smoothness_gram() * projection).trace();
  return fit + smooth;
}

// ---------------------------------------------------------------------------
// Sinkhorn-Knopp
// ---------------------------------------------------------------------------

SinkhornResult sinkhorn_project(const ConstMatrixRef& scores, const ConstVectorRef& row_targets,
                                const ConstVectorRef& col_targets, int max_iter, double tol) {
  if (row_targets.size() != scores.rows() || col_targets.size() != scores.cols()) {
    fail(ErrorKind::kContract, "sinkhorn marginals do not match the score shape");
  }
  if ((row_targets.array() <= 0.0).any() || (col_targets.array() <= 0.0).any()) {
    fail(ErrorKind::kContract, "sinkhorn marginals must be positive");
  }
  const double row_total = row_targets.sum();
  const double col_total = col_targets.sum();
  if (std::abs(row_total - col_total) > 1e-6 * std::max(1.0, std::abs(row_total))) {
    fail(ErrorKind::kContract, "sinkhorn marginal totals differ: " + std::to_string(row_total) +
                                   " vs " + std::to_string(col_total));
  }

  SinkhornResult out;
  out.scaled = scores.cwiseMax(kSinkhornClamp);
  auto residuals = [&] {
    out.row_residual = (out.scaled.rowwise().sum() - row_targets).cwiseAbs().maxCoeff();
    out.col_residual =
        (out.scaled.colwise().sum().transpose() - col_targets).cwiseAbs().maxCoeff();
    return out.row_residual < tol && out.col_residual < tol;
  };
  if (residuals()) {
    out.converged = true;
    return out;
  }
  for (int it = 1; it <= max_iter; ++it) {
    // Scale factors are materialised first; the products alias out.scaled.
    const Vector row_scale = row_targets.array() / out.scaled.rowwise().sum().array();
    out.scaled = row_scale.asDiagonal() * out.scaled;
    const Vector col_scale = col_targets.array() / out.scaled.colwise().sum().transpose().array();
    out.scaled = out.scaled * col_scale.asDiagonal();
    out.iterations = it;
    if (residuals()) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prototype update
// ---------------------------------------------------------------------------

Matrix update_prototypes(const ConstMatrixRef& prev, const ConstMatrixRef& soft_labels,
                         const ConstMatrixRef& x, const Labels& support_y, double alpha,
                         double mass_floor) {
  check_rows("soft label matrix", soft_labels.rows(), x.rows());
  if (soft_labels.cols() != prev.rows()) {
    fail(ErrorKind::kConsistency, "soft labels and prototypes disagree on K");
  }
  Matrix weights = soft_labels.cwiseMax(0.0);
  for (std::size_t i = 0; i < support_y.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    weights.row(row).setZero();
    weights(row, support_y[i]) = 1.0;
  }
  const Vector mass = weights.colwise().sum().transpose();
  const Matrix weighted = weights.transpose() * x;

  Matrix next = prev;
  for (Eigen::Index k = 0; k < prev.rows(); ++k) {
    if (mass(k) < mass_floor) continue;
    next.row(k) = (1.0 - alpha) * prev.row(k) + alpha * (weighted.row(k) / mass(k));
  }
  return next;
}

// ---------------------------------------------------------------------------
// Alternating loop
// ---------------------------------------------------------------------------

namespace {

void project_queries(Matrix& soft_labels, Eigen::Index n_labeled, Eigen::Index n_query,
                     const SinkhornOptions& options) {
  if (n_query == 0) return;
  const Eigen::Index ways = soft_labels.cols();
  const Vector rows = options.row_targets.value_or(Vector::Ones(n_query));
  const Vector cols = options.col_targets.value_or(
      Vector::Constant(ways, static_cast<double>(n_query) / static_cast<double>(ways)));
  auto block = soft_labels.middleRows(n_labeled, n_query);
  block = sinkhorn_project(block, rows, cols, options.max_iter, options.tol).scaled;
}

double nonparam_objective(const PrototypeGraph& graph, const Matrix& soft_labels,
                          const Matrix& y_padded, Eigen::Index n_labeled, double lambda) {
  const double fit =
      0.5 * (soft_labels.topRows(n_labeled) - y_padded.topRows(n_labeled)).squaredNorm();
  const Matrix laplacian_y = soft_labels - graph.apply(soft_labels);
  const double smooth = 0.5 * lambda * (soft_labels.transpose() * laplacian_y).trace();
  return fit + smooth;
}

}  // namespace

SolverResult run(const Episode& episode, const SolverConfig& config) {
  validate(config);
  const Matrix x = episode.stacked();
  const Eigen::Index n_labeled = episode.n_support();
  const Eigen::Index n_query = episode.n_query();
  const int ways = episode.ways;
  const Matrix y_padded = padded_labels(episode.support_y, x.rows(), ways);
  const auto placement = config.sinkhorn.placement;

  SolverResult result;
  result.trace.loss_per_step.reserve(static_cast<std::size_t>(config.n_step));
  result.trace.prototype_drift.reserve(static_cast<std::size_t>(config.n_step));
  Matrix prototypes = init_prototypes(episode);
  Matrix soft_labels;

  for (int step = 0; step < config.n_step; ++step) {
    const Matrix z = soft_assign(x, prototypes, episode.support_y);
    const PrototypeGraph graph = build_graph(z, config.lambda_floor);

    double loss = 0.0;
    if (config.variant == PropagationVariant::kParameterized) {
      const Matrix a = solve_projection(graph, y_padded, n_labeled, config);
      soft_labels = propagate_labels(z, a);
      loss = objective_value(z, a, y_padded.topRows(n_labeled), config.lambda,
                             config.lambda_floor);
    } else {
      soft_labels = nonparam_protolp_propagate(graph, y_padded, config.lambda, config.ridge);
      loss = nonparam_objective(graph, soft_labels, y_padded, n_labeled,
                                std::min(config.lambda, kNonParamLambdaMax));
    }
    if (placement == SinkhornPlacement::kEveryStep) {
      project_queries(soft_labels, n_labeled, n_query, config.sinkhorn);
    }

    Matrix next = update_prototypes(prototypes, soft_labels, x, episode.support_y, config.alpha,
                                    config.lambda_floor);
    result.trace.loss_per_step.push_back(loss);
    result.trace.prototype_drift.push_back((next - prototypes).norm());
    prototypes = std::move(next);
  }
  if (placement == SinkhornPlacement::kFinalOnly) {
    project_queries(soft_labels, n_labeled, n_query, config.sinkhorn);
  }
  if (!soft_labels.allFinite()) fail(ErrorKind::kSolver, "non-finite label scores");

  result.predictions.reserve(static_cast<std::size_t>(n_query));
  for (Eigen::Index j = 0; j < n_query; ++j) {
    result.predictions.push_back(argmax_row(soft_labels, n_labeled + j));
  }
  result.soft_labels = std::move(soft_labels);
  result.prototypes = std::move(prototypes);
  return result;
}

}  // namespace protolp
