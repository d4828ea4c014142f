#include "protolp/bench.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

namespace protolp {

std::optional<Method> parse_method(std::string_view name) {
  if (name == "protolp") return Method::kProtoLP;
  if (name == "protolp-nonparam") return Method::kProtoLPNonParam;
  if (name == "ncm") return Method::kNcm;
  if (name == "soft-kmeans") return Method::kSoftKMeans;
  if (name == "lp") return Method::kLabelPropagation;
  return std::nullopt;
}

const char* to_string(Method method) noexcept {
  switch (method) {
    case Method::kProtoLP: return "protolp";
    case Method::kProtoLPNonParam: return "protolp-nonparam";
    case Method::kNcm: return "ncm";
    case Method::kSoftKMeans: return "soft-kmeans";
    case Method::kLabelPropagation: return "lp";
  }
  return "unknown";
}

bool has_loss_trace(Method method) noexcept {
  return method == Method::kProtoLP || method == Method::kProtoLPNonParam;
}

// ---------------------------------------------------------------------------
// Synthetic features
// ---------------------------------------------------------------------------

void validate(const SynthSpec& spec) {
  if (spec.classes < 1) fail(ErrorKind::kConfig, "synthetic classes must be >= 1");
  if (spec.dim < 1) fail(ErrorKind::kConfig, "synthetic dim must be >= 1");
  if (!(spec.radius > 0.0)) fail(ErrorKind::kConfig, "synthetic radius must be > 0");
  if (!(spec.within_std > 0.0)) fail(ErrorKind::kConfig, "synthetic within-class std must be > 0");
  if (spec.pool_per_class < 1) fail(ErrorKind::kConfig, "synthetic pool must be >= 1");
}

SynthSpec parse_synth(std::string_view text, std::uint64_t seed) {
  std::vector<double> fields;
  while (true) {
    const auto comma = text.find(',');
    const auto tok = text.substr(0, comma);
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      fail(ErrorKind::kConfig, "bad --synth field '" + std::string(tok) + "'");
    }
    fields.push_back(v);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (fields.size() != 4 && fields.size() != 5) {
    fail(ErrorKind::kConfig, "--synth expects K,D,rho,sigma_w[,pool]");
  }
  SynthSpec spec;
  spec.classes = static_cast<int>(fields[0]);
  spec.dim = static_cast<int>(fields[1]);
  spec.radius = fields[2];
  spec.within_std = fields[3];
  if (fields.size() == 5) spec.pool_per_class = static_cast<int>(fields[4]);
  spec.seed = seed;
  validate(spec);
  return spec;
}

SynthData synth_generate_with_centers(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(episode_seed(spec.seed, ~std::uint64_t{0}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const Eigen::Index n = static_cast<Eigen::Index>(spec.classes) * spec.pool_per_class;
  Matrix centers(spec.classes, spec.dim);
  Matrix x(n, spec.dim);
  Labels labels(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (int c = 0; c < spec.classes; ++c) {
    // Uniform in the ball: isotropic direction, radius rho * u^(1/D).
    RowVector dir(spec.dim);
    do {
      for (auto& v : dir) v = normal(rng);
    } while (dir.norm() == 0.0);
    dir /= dir.norm();
    centers.row(c) = spec.radius * std::pow(unit(rng), 1.0 / spec.dim) * dir;
    for (int s = 0; s < spec.pool_per_class; ++s, ++row) {
      for (Eigen::Index j = 0; j < spec.dim; ++j) {
        x(row, j) = centers(c, j) + spec.within_std * normal(rng);
      }
      labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return {FeatureStore(std::move(x), std::move(labels)), std::move(centers)};
}

FeatureStore synth_generate(const SynthSpec& spec) {
  return synth_generate_with_centers(spec).store;
}

SynthSpec overlapping_preset(std::uint64_t seed) {
  SynthSpec spec;
  spec.classes = 20;
  spec.dim = 32;
  spec.radius = 3.0;
  spec.within_std = 0.7;
  spec.pool_per_class = 100;
  spec.seed = seed;
  return spec;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

void validate(const RunConfig& config) {
  if (config.n_episodes < 1) fail(ErrorKind::kConfig, "episodes must be >= 1");
  if (config.parallel < 1) fail(ErrorKind::kConfig, "parallel must be >= 1");
  if (config.soft_kmeans_iters < 1) fail(ErrorKind::kConfig, "soft k-means iterations must be >= 1");
  validate(config.sampler);
  validate(config.solver);
  if (const auto* synth = std::get_if<SynthSpec>(&config.source)) validate(*synth);
}

MeanCi aggregate_stats(const std::vector<double>& values) {
  if (values.empty()) fail(ErrorKind::kContract, "cannot aggregate an empty accuracy list");
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double std_dev = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * std_dev / std::sqrt(n)};
}

FeatureStore prepare_store(const RunConfig& config) {
  FeatureStore raw = std::visit(
      [](const auto& src) -> FeatureStore {
        using T = std::decay_t<decltype(src)>;
        if constexpr (std::is_same_v<T, FeatureFile>) {
          return load_features(src.path, src.format);
        } else {
          return synth_generate(src);
        }
      },
      config.source);

  std::optional<Vector> mean;
  if (config.preprocess == "center+l2") {
    if (config.center_from) {
      // The base split shares the format of the evaluated file.
      const auto* file = std::get_if<FeatureFile>(&config.source);
      mean = column_mean(load_features(*config.center_from,
                                       file ? file->format : FeatureFormat::kPlpf));
    } else {
      mean = column_mean(raw);
    }
  }
  return preprocess(raw, preset_preprocess(config.preprocess, mean));
}

EpisodeOutcome evaluate_episode(const RunConfig& config, const Episode& episode) {
  EpisodeOutcome out;
  Labels predictions;
  auto solve = [&] {
    switch (config.method) {
      case Method::kProtoLP:
      case Method::kProtoLPNonParam: {
        SolverConfig solver = config.solver;
        solver.variant = config.method == Method::kProtoLP ? PropagationVariant::kParameterized
                                                           : PropagationVariant::kNonParameterized;
        SolverResult r = run(episode, solver);
        predictions = std::move(r.predictions);
        out.loss = std::move(r.trace.loss_per_step);
        break;
      }
      case Method::kNcm:
        predictions = ncm_predict(episode);
        break;
      case Method::kSoftKMeans:
        predictions = soft_kmeans_refine(episode, config.soft_kmeans_iters).predictions;
        break;
      case Method::kLabelPropagation:
        predictions = classical_lp(episode, config.lp_graph, config.solver.lambda,
                                   config.solver.ridge);
        break;
    }
  };
  out.seconds = time_episode(solve);

  const Labels& truth = episode.truth_query_y.value();
  std::size_t correct = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) correct += predictions[j] == truth[j];
  out.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  return out;
}

AggregateReport run_benchmark(const RunConfig& config) {
  validate(config);
  return run_benchmark(config, prepare_store(config));
}

AggregateReport run_benchmark(const RunConfig& config, const FeatureStore& store) {
  validate(config);
  const auto n = static_cast<std::size_t>(config.n_episodes);
  std::vector<EpisodeOutcome> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    while (!abort.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const Episode ep = sample_episode(store, config.sampler, i);
        outcomes[i] = evaluate_episode(config, ep);
      } catch (...) {
        errors[i] = std::current_exception();
        abort = true;
      }
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.parallel), n);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  // Indices are handed out in order, so the first recorded error is the
  // lowest failing episode regardless of scheduling.
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw EpisodeError(i, e);
    } catch (const std::exception& e) {
      throw EpisodeError(i, Error(ErrorKind::kSolver, e.what()));
    }
  }

  AggregateReport report;
  report.config = config;
  report.accuracies.reserve(n);
  std::vector<double> percent;
  percent.reserve(n);
  for (const auto& o : outcomes) {
    report.accuracies.push_back(o.accuracy);
    percent.push_back(100.0 * o.accuracy);
  }
  const MeanCi stats = aggregate_stats(percent);
  report.mean_accuracy = stats.mean;
  report.ci95 = stats.ci95;

  if (config.timing) {
    std::vector<double> seconds;
    seconds.reserve(n);
    for (const auto& o : outcomes) seconds.push_back(o.seconds);
    report.mean_episode_seconds = aggregate_stats(seconds).mean;
    report.episode_seconds = std::move(seconds);
  }
  if (has_loss_trace(config.method)) {
    std::vector<double> curve(static_cast<std::size_t>(config.solver.n_step), 0.0);
    for (const auto& o : outcomes) {
      for (std::size_t t = 0; t < curve.size(); ++t) curve[t] += o.loss[t];
    }
    for (auto& v : curve) v /= static_cast<double>(n);
    report.loss_curve_mean = std::move(curve);
  }
  return report;
}

}  // namespace protolp
