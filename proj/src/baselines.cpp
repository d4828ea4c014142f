#include "protolp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace protolp {

Labels nearest_prototype(const ConstMatrixRef& x, const ConstMatrixRef& prototypes) {
  Labels out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < prototypes.rows(); ++k) {
      const double d = (x.row(i) - prototypes.row(k)).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = k;
      }
    }
    out.push_back(static_cast<Label>(best));
  }
  return out;
}

Labels ncm_predict(const Episode& episode) {
  return nearest_prototype(episode.query_x, init_prototypes(episode));
}

SoftKMeansResult soft_kmeans_refine(const Episode& episode, int n_iter) {
  if (n_iter < 1) fail(ErrorKind::kConfig, "soft k-means needs n_iter >= 1");
  const Matrix x = episode.stacked();
  Matrix prototypes = init_prototypes(episode);
  for (int it = 0; it < n_iter; ++it) {
    const Matrix z = soft_assign(x, prototypes, episode.support_y);
    // Every class has support mass, so no column sum is zero.
    const Vector mass = z.colwise().sum().transpose();
    prototypes = mass.cwiseInverse().asDiagonal() * (z.transpose() * x);
  }
  SoftKMeansResult out;
  out.predictions = nearest_prototype(episode.query_x, prototypes);
  out.prototypes = std::move(prototypes);
  return out;
}

double median_pairwise_distance(const ConstMatrixRef& x) {
  std::vector<double> d;
  const Eigen::Index n = x.rows();
  if (n < 2) return 1.0;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((x.row(i) - x.row(j)).norm());
  }
  const auto mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return median > 0.0 ? median : 1.0;
}

Matrix rbf_graph(const ConstMatrixRef& x, const RbfGraphSpec& spec) {
  const double sigma = spec.bandwidth.value_or(median_pairwise_distance(x));
  if (!(sigma > 0.0)) fail(ErrorKind::kConfig, "RBF bandwidth must be > 0");
  if (spec.neighbors < 0) fail(ErrorKind::kConfig, "RBF neighbours must be >= 0");
  const Eigen::Index n = x.rows();
  const double scale = 1.0 / (2.0 * sigma * sigma);

  Matrix w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, i) = spec.self_loops ? 1.0 : 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      w(i, j) = w(j, i) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() * scale);
    }
  }
  if (spec.neighbors == 0 || spec.neighbors >= n - 1) return w;

  Matrix sparse = Matrix::Zero(n, n);
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    order.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    const auto k = static_cast<std::ptrdiff_t>(spec.neighbors);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        return w(i, a) > w(i, b) || (w(i, a) == w(i, b) && a < b);
                      });
    for (auto it = order.begin(); it != order.begin() + k; ++it) sparse(i, *it) = w(i, *it);
    sparse(i, i) = w(i, i);
  }
  return sparse.cwiseMax(sparse.transpose());
}

Matrix classical_lp_scores(const Episode& episode, const RbfGraphSpec& graph, double lambda,
                           double ridge) {
  if (!(lambda >= 0.0)) fail(ErrorKind::kConfig, "lambda must be >= 0");
  const Matrix x = episode.stacked();
  const Eigen::Index n = x.rows();
  const Eigen::Index n_labeled = episode.n_support();
  const Matrix w = rbf_graph(x, graph);
  Matrix system = -lambda * w;
  system.diagonal() += lambda * w.rowwise().sum();
  system.diagonal().head(n_labeled).array() += 1.0;
  system.diagonal().array() += ridge;

  const Matrix y = padded_labels(episode.support_y, n, episode.ways);
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::kSolver, "label propagation system is not positive definite");
  }
  Matrix scores = llt.solve(y);
  if (!scores.allFinite()) fail(ErrorKind::kSolver, "label propagation produced non-finite values");
  return scores;
}

Labels classical_lp(const Episode& episode, const RbfGraphSpec& graph, double lambda,
                    double ridge) {
  const Matrix scores = classical_lp_scores(episode, graph, lambda, ridge);
  Labels out;
  out.reserve(static_cast<std::size_t>(episode.n_query()));
  for (Eigen::Index j = 0; j < episode.n_query(); ++j) {
    out.push_back(argmax_row(scores, episode.n_support() + j));
  }
  return out;
}

Matrix nonparam_protolp_propagate(const PrototypeGraph& graph, const ConstMatrixRef& y_padded,
                                  double lambda, double ridge) {
  if (!(lambda >= 0.0)) fail(ErrorKind::kConfig, "lambda must be >= 0");
  const double lam = std::min(lambda, kNonParamLambdaMax);
  const double shift = 1.0 + ridge;
  const Matrix& z = graph.assignment;
  if (y_padded.rows() != z.rows()) {
    fail(ErrorKind::kConsistency, "label matrix rows do not match the graph");
  }
  // (s I - lam Z L^-1 Z^T)^-1 = (1/s) [I + lam Z (s L - lam Z^T Z)^-1 Z^T]
  Matrix reduced = -lam * (z.transpose() * z);
  reduced.diagonal() += shift * graph.mass;
  const Eigen::LDLT<Matrix> ldlt(reduced);
  const double rcond = ldlt_rcond(ldlt);
  if (!(rcond >= 1e-14)) {
    fail(ErrorKind::kSolver, "non-parameterised resolvent is singular (rcond " +
                                 format_sci(rcond) + ")");
  }
  Matrix out = (y_padded + lam * z * ldlt.solve(z.transpose() * y_padded)) / shift;
  if (!out.allFinite()) fail(ErrorKind::kSolver, "non-parameterised propagation is non-finite");
  return out;
}

}  // namespace protolp
