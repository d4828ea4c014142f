#pragma once

#include "protolp/error.hpp"
#include "protolp/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace protolp {

// ---------------------------------------------------------------------------
// FeatureStore
// ---------------------------------------------------------------------------

// An n x D feature matrix with one integer class label per row. Validated on
// construction and immutable afterwards, so it can be shared by concurrent
// episode workers without synchronisation.
class FeatureStore {
 public:
  // Throws kConsistency for empty input or label/row count mismatch and
  // kData for non-finite entries.
  FeatureStore(Matrix features, Labels labels);

  const Matrix& features() const noexcept { return features_; }
  const Labels& labels() const noexcept { return labels_; }
  const std::map<Label, std::vector<std::size_t>>& class_index() const noexcept {
    return class_index_;
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  std::size_t n_classes() const noexcept { return class_index_.size(); }

 private:
  Matrix features_;
  Labels labels_;
  std::map<Label, std::vector<std::size_t>> class_index_;
};

enum class FeatureFormat { kPlpf, kCsv };

std::optional<FeatureFormat> parse_feature_format(std::string_view name);

FeatureStore load_features(const std::filesystem::path& path, FeatureFormat format);
void write_features(const FeatureStore& store, const std::filesystem::path& path,
                    FeatureFormat format);

// In-memory PLPF codec, used by the file functions above.
FeatureStore decode_plpf(std::string_view bytes);
std::string encode_plpf(const FeatureStore& store);

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

struct L2Normalize {};

// f(x) = (x + epsilon)^beta, elementwise.
struct PowerTransform {
  double beta = 0.5;
  double epsilon = 1e-6;
};

// Subtracts `mean` from every row.
struct Center {
  Vector mean;
};

using PreprocessStep = std::variant<L2Normalize, PowerTransform, Center>;

struct PreprocessSpec {
  std::vector<PreprocessStep> steps;
};

// Column mean of a store, e.g. of a base split used as the centring vector.
Vector column_mean(const FeatureStore& store);

// Named pipelines accepted on the command line: none, l2, pt+l2, center+l2.
// `center_mean` is required for center+l2.
PreprocessSpec preset_preprocess(std::string_view name,
                                 const std::optional<Vector>& center_mean = std::nullopt);

FeatureStore preprocess(const FeatureStore& store, const PreprocessSpec& spec);

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

struct Episode {
  Matrix support_x;   // L x D, grouped by class
  Labels support_y;   // episode-local ids in 0..ways-1
  Matrix query_x;     // U x D
  std::optional<Matrix> unlabeled_x;  // M x D
  std::optional<Labels> truth_query_y;
  int ways = 0;
  int shots = 0;

  // Global store rows used by each block, in block order.
  std::vector<std::size_t> support_rows;
  std::vector<std::size_t> query_rows;
  std::vector<std::size_t> unlabeled_rows;
  // Global class id behind each episode-local id.
  std::vector<Label> classes;

  Eigen::Index n_support() const { return support_x.rows(); }
  Eigen::Index n_query() const { return query_x.rows(); }
  Eigen::Index n_unlabeled() const { return unlabeled_x ? unlabeled_x->rows() : 0; }
  Eigen::Index dim() const { return support_x.cols(); }

  // Support, query and unlabeled rows stacked in that order.
  Matrix stacked() const;
};

struct Balanced {};
struct DirichletQueries {
  double gamma = 2.0;
};
using QueryDistribution = std::variant<Balanced, DirichletQueries>;

struct SamplerConfig {
  int ways = 5;
  int shots = 1;
  int queries_total = 75;
  QueryDistribution mode = Balanced{};
  int unlabeled_per_class = 0;
  std::uint64_t seed = 0;
};

// Parses "balanced" or "dirichlet:GAMMA".
QueryDistribution parse_query_distribution(std::string_view text);
std::string to_string(const QueryDistribution& mode);

void validate(const SamplerConfig& config);

// Deterministic in (store, config, episode_index). Throws kSampling naming
// the class when a sampled class has too few rows.
Episode sample_episode(const FeatureStore& store, const SamplerConfig& config,
                       std::uint64_t episode_index);

// Seed for the independent random stream of one episode.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode_index) noexcept;

}  // namespace protolp
