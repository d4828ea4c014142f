#include "protolp/feature_io.hpp"

#include <cmath>

namespace protolp {

namespace {

void apply(Matrix& x, const L2Normalize&) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    // Zero rows stay zero.
    if (norm > 0.0) x.row(i) /= norm;
  }
}

void apply(Matrix& x, const PowerTransform& pt) {
  if (!(pt.beta > 0.0)) fail(ErrorKind::kConfig, "power transform needs beta > 0");
  if (!(pt.epsilon >= 0.0)) fail(ErrorKind::kConfig, "power transform needs epsilon >= 0");
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double shifted = x(i, j) + pt.epsilon;
      if (shifted < 0.0) {
        fail(ErrorKind::kData, "power transform input " + std::to_string(x(i, j)) +
                                   " below -epsilon at row " + std::to_string(i));
      }
      x(i, j) = std::pow(shifted, pt.beta);
    }
  }
}

void apply(Matrix& x, const Center& c) {
  if (c.mean.size() != x.cols()) {
    fail(ErrorKind::kConsistency, "centring vector has length " + std::to_string(c.mean.size()) +
                                      ", features have " + std::to_string(x.cols()));
  }
  x.rowwise() -= c.mean.transpose();
}

}  // namespace

Vector column_mean(const FeatureStore& store) {
  return store.features().colwise().mean().transpose();
}

PreprocessSpec preset_preprocess(std::string_view name, const std::optional<Vector>& center_mean) {
  if (name == "none") return {};
  if (name == "l2") return {{L2Normalize{}}};
  if (name == "pt+l2") return {{PowerTransform{}, L2Normalize{}}};
  if (name == "center+l2") {
    if (!center_mean) fail(ErrorKind::kConfig, "center+l2 needs a centring vector");
    return {{Center{*center_mean}, L2Normalize{}}};
  }
  fail(ErrorKind::kConfig, "unknown preprocessing '" + std::string(name) + "'");
}

FeatureStore preprocess(const FeatureStore& store, const PreprocessSpec& spec) {
  Matrix x = store.features();
  for (const auto& step : spec.steps) {
    std::visit([&x](const auto& s) { apply(x, s); }, step);
  }
  return FeatureStore(std::move(x), store.labels());
}

}  // namespace protolp
