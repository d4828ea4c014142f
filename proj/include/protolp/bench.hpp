#pragma once

#include "protolp/baselines.hpp"
#include "protolp/feature_io.hpp"
#include "protolp/solver.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace protolp {

enum class Method { kProtoLP, kProtoLPNonParam, kNcm, kSoftKMeans, kLabelPropagation };

std::optional<Method> parse_method(std::string_view name);
const char* to_string(Method method) noexcept;
// Methods that run the alternating prototype loop and produce a loss trace.
bool has_loss_trace(Method method) noexcept;

// Gaussian classes around centres drawn uniformly from a ball.
struct SynthSpec {
  int classes = 5;
  int dim = 16;
  double radius = 1.0;        // rho
  double within_std = 0.1;    // sigma_w
  int pool_per_class = 100;
  std::uint64_t seed = 0;
};

void validate(const SynthSpec& spec);
// Parses "K,D,rho,sigma_w[,pool]".
SynthSpec parse_synth(std::string_view text, std::uint64_t seed);

struct SynthData {
  FeatureStore store;
  Matrix centers;  // classes x dim
};

SynthData synth_generate_with_centers(const SynthSpec& spec);
FeatureStore synth_generate(const SynthSpec& spec);

struct FeatureFile {
  std::filesystem::path path;
  FeatureFormat format = FeatureFormat::kPlpf;
};
using FeatureSource = std::variant<FeatureFile, SynthSpec>;

struct RunConfig {
  Method method = Method::kProtoLP;
  SamplerConfig sampler;
  SolverConfig solver;
  int n_episodes = 1;
  FeatureSource source = SynthSpec{};
  std::string preprocess = "none";
  std::optional<std::filesystem::path> center_from;  // base split for center+l2
  int soft_kmeans_iters = 1;  // one refinement pass over query mass
  RbfGraphSpec lp_graph;
  int parallel = 1;
  bool timing = false;
};

void validate(const RunConfig& config);

struct AggregateReport {
  RunConfig config;
  std::vector<double> accuracies;  // fractions in [0, 1], by episode index
  double mean_accuracy = 0.0;      // percent
  double ci95 = 0.0;               // percent
  std::optional<std::vector<double>> episode_seconds;
  std::optional<double> mean_episode_seconds;
  std::optional<std::vector<double>> loss_curve_mean;
};

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;
};

// Mean and 1.96 * sample std / sqrt(n). Throws kContract on empty input.
MeanCi aggregate_stats(const std::vector<double>& values);

// Wall-clock seconds of `fn` on the monotonic clock.
template <typename Fn>
double time_episode(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  std::forward<Fn>(fn)();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

struct EpisodeOutcome {
  double accuracy = 0.0;
  double seconds = 0.0;
  std::vector<double> loss;  // empty unless the method traces a loss
};

// Runs one method on one episode and scores it against the held-out truth.
EpisodeOutcome evaluate_episode(const RunConfig& config, const Episode& episode);

// Feature store after loading / generating and preprocessing.
FeatureStore prepare_store(const RunConfig& config);

AggregateReport run_benchmark(const RunConfig& config);
AggregateReport run_benchmark(const RunConfig& config, const FeatureStore& store);

enum class ReportFormat { kJson, kCsv };

std::string render_report(const AggregateReport& report, ReportFormat format);
void emit_report(const AggregateReport& report, const std::filesystem::path& path,
                 ReportFormat format);

// Desk-scale synthetic regime: class overlap tuned so NCM is near 75% on
// balanced 5-way 1-shot episodes. Features are used raw; the centre spread
// sets how sharp the soft assignments are.
SynthSpec overlapping_preset(std::uint64_t seed = 0);
inline constexpr std::string_view kOverlappingPreprocess = "none";

}  // namespace protolp
