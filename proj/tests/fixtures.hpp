#pragma once

#include "protolp/bench.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace fixtures {

using protolp::Labels;
using protolp::Matrix;

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                       double std_dev = 1.0) {
  std::normal_distribution<double> n(0.0, std_dev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Matrix positive(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Row-stochastic Z whose first labels.size() rows are one-hot.
inline Matrix stochastic(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index ways,
                         const Labels& labels = {}) {
  Matrix z = positive(rng, rows, ways);
  z = z.array().pow(3.0).matrix();
  for (Eigen::Index i = 0; i < rows; ++i) z.row(i) /= z.row(i).sum();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    z.row(static_cast<Eigen::Index>(i)).setZero();
    z(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return z;
}

inline Labels cyclic_labels(int ways, int shots) {
  Labels y;
  for (int k = 0; k < ways; ++k) {
    for (int s = 0; s < shots; ++s) y.push_back(k);
  }
  return y;
}

// Hand-built episode on the given blocks.
inline protolp::Episode episode(Matrix support_x, Labels support_y, Matrix query_x, int ways,
                                Labels truth = {}) {
  protolp::Episode e;
  e.support_x = std::move(support_x);
  e.support_y = std::move(support_y);
  e.query_x = std::move(query_x);
  e.ways = ways;
  e.shots = static_cast<int>(e.support_y.size()) / ways;
  if (!truth.empty()) e.truth_query_y = std::move(truth);
  return e;
}

// Gaussian episode: `ways` centres at distance ~spread, unit-ish noise.
inline protolp::Episode synthetic_episode(std::uint64_t seed, int ways = 5, int shots = 1,
                                          int per_class = 15, int dim = 8, double spread = 3.0,
                                          double noise = 0.7) {
  std::mt19937_64 rng(seed);
  const Matrix centers = gaussian(rng, ways, dim, spread / std::sqrt(2.0 * dim) * 2.0);
  Matrix sx(ways * shots, dim), qx(ways * per_class, dim);
  Labels sy, qy;
  std::normal_distribution<double> n(0.0, noise);
  for (int k = 0; k < ways; ++k) {
    for (int s = 0; s < shots; ++s) {
      const int r = k * shots + s;
      for (int j = 0; j < dim; ++j) sx(r, j) = centers(k, j) + n(rng);
      sy.push_back(k);
    }
  }
  for (int q = 0; q < ways * per_class; ++q) {
    const int k = q % ways;
    for (int j = 0; j < dim; ++j) qx(q, j) = centers(k, j) + n(rng);
    qy.push_back(k);
  }
  return episode(std::move(sx), std::move(sy), std::move(qx), ways, std::move(qy));
}

inline std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("protolp_" + std::to_string(std::random_device{}()) + "_" + name);
}

}  // namespace fixtures
