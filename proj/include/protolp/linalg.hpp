#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace protolp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using MatrixRef = Eigen::Ref<Matrix>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;
using ConstVectorRef = Eigen::Ref<const Vector>;

using Label = std::int32_t;
using Labels = std::vector<Label>;

// Index of the largest entry of row `i`; ties go to the smallest column.
inline Label argmax_row(const ConstMatrixRef& m, Eigen::Index i) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < m.cols(); ++k) {
    if (m(i, k) > m(i, best)) best = k;
  }
  return static_cast<Label>(best);
}

// Reciprocal condition estimate of an LDLT factorisation. Eigen's estimate
// ignores exactly zero pivots, so the pivot spread is folded in as well.
inline double ldlt_rcond(const Eigen::LDLT<Matrix>& f) {
  if (f.info() != Eigen::Success || f.rows() == 0) return 0.0;
  const Vector d = f.vectorD().cwiseAbs();
  const double spread = d.maxCoeff() > 0.0 ? d.minCoeff() / d.maxCoeff() : 0.0;
  return std::min(f.rcond(), spread);
}

inline std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace protolp
