#include "protolp/feature_io.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <random>

namespace protolp {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

// Moves a uniform random subset of size `count` to the front of `items`.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count && i + 1 < items.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

std::vector<int> dirichlet_multinomial_counts(int total, int ways, double gamma, Rng& rng) {
  std::gamma_distribution<double> gamma_dist(gamma, 1.0);
  std::vector<double> p(static_cast<std::size_t>(ways));
  double sum = 0.0;
  for (auto& v : p) {
    v = gamma_dist(rng);
    sum += v;
  }
  if (!(sum > 0.0)) {
    // All draws underflowed (tiny gamma); fall back to uniform proportions.
    std::fill(p.begin(), p.end(), 1.0);
  }
  std::discrete_distribution<int> category(p.begin(), p.end());
  std::vector<int> counts(static_cast<std::size_t>(ways), 0);
  for (int q = 0; q < total; ++q) ++counts[static_cast<std::size_t>(category(rng))];
  return counts;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode_index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(episode_index + 0x632BE59BD9B4E019ull));
}

Matrix Episode::stacked() const {
  const Eigen::Index n = n_support() + n_query() + n_unlabeled();
  Matrix x(n, dim());
  x.topRows(n_support()) = support_x;
  x.middleRows(n_support(), n_query()) = query_x;
  if (unlabeled_x) x.bottomRows(n_unlabeled()) = *unlabeled_x;
  return x;
}

QueryDistribution parse_query_distribution(std::string_view text) {
  if (text == "balanced") return Balanced{};
  constexpr std::string_view prefix = "dirichlet:";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto rest = text.substr(prefix.size());
    double gamma = 0.0;
    const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), gamma);
    if (res.ec == std::errc() && res.ptr == rest.data() + rest.size() && gamma > 0.0) {
      return DirichletQueries{gamma};
    }
  }
  fail(ErrorKind::kConfig, "query distribution must be 'balanced' or 'dirichlet:GAMMA' with "
                           "GAMMA > 0, got '" + std::string(text) + "'");
}

std::string to_string(const QueryDistribution& mode) {
  if (const auto* d = std::get_if<DirichletQueries>(&mode)) {
    return "dirichlet:" + std::to_string(d->gamma);
  }
  return "balanced";
}

void validate(const SamplerConfig& config) {
  if (config.ways < 1) fail(ErrorKind::kConfig, "ways must be >= 1");
  if (config.shots < 1) fail(ErrorKind::kConfig, "shots must be >= 1");
  if (config.queries_total < 1) fail(ErrorKind::kConfig, "queries must be >= 1");
  if (config.unlabeled_per_class < 0) fail(ErrorKind::kConfig, "unlabeled-per-class must be >= 0");
  if (std::holds_alternative<Balanced>(config.mode) && config.queries_total % config.ways != 0) {
    fail(ErrorKind::kConfig, "balanced sampling needs queries divisible by ways");
  }
  if (const auto* d = std::get_if<DirichletQueries>(&config.mode); d && !(d->gamma > 0.0)) {
    fail(ErrorKind::kConfig, "dirichlet sampling needs gamma > 0");
  }
}

Episode sample_episode(const FeatureStore& store, const SamplerConfig& config,
                       std::uint64_t episode_index) {
  validate(config);
  const auto ways = static_cast<std::size_t>(config.ways);
  if (store.n_classes() < ways) {
    fail(ErrorKind::kSampling, "store has " + std::to_string(store.n_classes()) +
                                   " classes, episode needs " + std::to_string(ways));
  }
  Rng rng(episode_seed(config.seed, episode_index));

  std::vector<Label> classes;
  classes.reserve(store.n_classes());
  for (const auto& [label, rows] : store.class_index()) classes.push_back(label);
  partial_shuffle(classes, ways, rng);
  classes.resize(ways);
  std::sort(classes.begin(), classes.end());

  std::vector<int> query_counts;
  if (const auto* d = std::get_if<DirichletQueries>(&config.mode)) {
    query_counts = dirichlet_multinomial_counts(config.queries_total, config.ways, d->gamma, rng);
  } else {
    query_counts.assign(ways, config.queries_total / config.ways);
  }

  Episode ep;
  ep.ways = config.ways;
  ep.shots = config.shots;
  ep.classes = classes;
  std::vector<std::pair<std::size_t, Label>> queries;
  for (std::size_t k = 0; k < ways; ++k) {
    const auto shots = static_cast<std::size_t>(config.shots);
    const auto n_query = static_cast<std::size_t>(query_counts[k]);
    const auto n_unlabeled = static_cast<std::size_t>(config.unlabeled_per_class);
    const std::size_t needed = shots + n_query + n_unlabeled;
    std::vector<std::size_t> rows = store.class_index().at(classes[k]);
    if (rows.size() < needed) {
      fail(ErrorKind::kSampling, "class " + std::to_string(classes[k]) + " has " +
                                     std::to_string(rows.size()) + " rows, episode needs " +
                                     std::to_string(needed));
    }
    partial_shuffle(rows, needed, rng);
    const auto label = static_cast<Label>(k);
    for (std::size_t i = 0; i < shots; ++i) {
      ep.support_rows.push_back(rows[i]);
      ep.support_y.push_back(label);
    }
    for (std::size_t i = shots; i < shots + n_query; ++i) queries.emplace_back(rows[i], label);
    for (std::size_t i = shots + n_query; i < needed; ++i) ep.unlabeled_rows.push_back(rows[i]);
  }
  // Queries are stored in random order so that no method can read labels off
  // the row layout.
  partial_shuffle(queries, queries.size(), rng);

  Labels truth;
  truth.reserve(queries.size());
  for (const auto& [row, label] : queries) {
    ep.query_rows.push_back(row);
    truth.push_back(label);
  }
  ep.truth_query_y = std::move(truth);

  const Matrix& x = store.features();
  ep.support_x = gather_rows(x, ep.support_rows);
  ep.query_x = gather_rows(x, ep.query_rows);
  if (!ep.unlabeled_rows.empty()) ep.unlabeled_x = gather_rows(x, ep.unlabeled_rows);
  return ep;
}

}  // namespace protolp
