// protolp command line: episodic benchmarks and feature file utilities.

#include "protolp/bench.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;

int exit_code(protolp::ErrorKind kind) {
  using protolp::ErrorKind;
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kContract:
      return kExitConfig;
    case ErrorKind::kSolver:
      return kExitSolver;
    default:
      return kExitData;
  }
}

struct BenchArgs {
  std::string method = "protolp";
  std::string features;
  std::string format;  // shared spelling, see resolve_formats
  std::string feature_format = "plpf";
  std::string synth;
  std::string preprocess = "none";
  std::string center_from;
  int ways = 5;
  int shots = 1;
  int queries = 75;
  std::string query_dist = "balanced";
  int unlabeled_per_class = 0;
  int episodes = 10000;
  std::uint64_t seed = 0;
  std::optional<double> lambda;
  double alpha = 0.2;
  int steps = 20;
  std::string sinkhorn = "on";
  int sinkhorn_iters = 1000;
  double sinkhorn_tol = 1e-6;
  int kmeans_iters = 1;
  std::optional<double> lp_sigma;
  int lp_neighbors = 0;
  std::string output;
  std::string report_format = "json";
  int parallel = 1;
  bool timing = false;
};

protolp::RunConfig to_run_config(const BenchArgs& a) {
  using namespace protolp;
  RunConfig c;
  const auto method = parse_method(a.method);
  if (!method) fail(ErrorKind::kConfig, "unknown method '" + a.method + "'");
  c.method = *method;

  if (a.features.empty() == a.synth.empty()) {
    fail(ErrorKind::kConfig, "give exactly one of --features or --synth");
  }
  if (!a.features.empty()) {
    const auto format = parse_feature_format(a.feature_format);
    if (!format) fail(ErrorKind::kConfig, "unknown feature format '" + a.feature_format + "'");
    c.source = FeatureFile{a.features, *format};
  } else {
    c.source = parse_synth(a.synth, a.seed);
  }
  c.preprocess = a.preprocess;
  // Fails early on an unknown preset name.
  if (a.preprocess != "center+l2") preset_preprocess(a.preprocess);
  if (!a.center_from.empty()) c.center_from = a.center_from;

  c.sampler.ways = a.ways;
  c.sampler.shots = a.shots;
  c.sampler.queries_total = a.queries;
  c.sampler.mode = parse_query_distribution(a.query_dist);
  c.sampler.unlabeled_per_class = a.unlabeled_per_class;
  c.sampler.seed = a.seed;

  // Default graph weight: 1 for balanced queries, 0.5 for unbalanced ones.
  const bool balanced = std::holds_alternative<Balanced>(c.sampler.mode);
  c.solver.lambda = a.lambda.value_or(balanced ? 1.0 : 0.5);
  c.solver.alpha = a.alpha;
  c.solver.n_step = a.steps;
  if (a.sinkhorn == "on") {
    c.solver.sinkhorn.placement = SinkhornPlacement::kEveryStep;
  } else if (a.sinkhorn == "off") {
    c.solver.sinkhorn.placement = SinkhornPlacement::kOff;
  } else if (a.sinkhorn == "final") {
    c.solver.sinkhorn.placement = SinkhornPlacement::kFinalOnly;
  } else {
    fail(ErrorKind::kConfig, "--sinkhorn must be on, off or final");
  }
  c.solver.sinkhorn.max_iter = a.sinkhorn_iters;
  c.solver.sinkhorn.tol = a.sinkhorn_tol;
  c.soft_kmeans_iters = a.kmeans_iters;
  c.lp_graph.bandwidth = a.lp_sigma;
  c.lp_graph.neighbors = a.lp_neighbors;
  c.n_episodes = a.episodes;
  c.parallel = a.parallel;
  c.timing = a.timing;
  validate(c);
  return c;
}

// `--format` names the feature format (plpf|csv) or the report format
// (json|csv). plpf and json are unambiguous; csv refers to the feature file
// when --features ends in .csv and to the report otherwise.
void resolve_formats(BenchArgs& a) {
  if (a.format.empty()) return;
  const bool csv_features =
      a.features.size() >= 4 && a.features.compare(a.features.size() - 4, 4, ".csv") == 0;
  if (a.format == "plpf" || (a.format == "csv" && csv_features)) {
    a.feature_format = a.format;
  } else if (a.format == "json" || a.format == "csv") {
    a.report_format = a.format;
  } else {
    protolp::fail(protolp::ErrorKind::kConfig, "--format must be plpf, csv or json");
  }
}

int run_bench(BenchArgs args) {
  resolve_formats(args);
  using namespace protolp;
  const RunConfig config = to_run_config(args);
  ReportFormat format = ReportFormat::kJson;
  if (args.report_format == "csv") {
    format = ReportFormat::kCsv;
  } else if (args.report_format != "json") {
    fail(ErrorKind::kConfig, "--format must be json or csv");
  }
  const AggregateReport report = run_benchmark(config);
  if (args.output.empty() || args.output == "-") {
    std::cout << render_report(report, format);
  } else {
    emit_report(report, args.output, format);
  }
  std::cerr << to_string(config.method) << ": " << report.mean_accuracy << " +- " << report.ci95
            << " over " << report.accuracies.size() << " episodes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype-based label propagation for few-shot classification"};
  app.require_subcommand(1);

  BenchArgs bench;
  auto* cmd = app.add_subcommand("bench", "Evaluate a method over sampled episodes");
  cmd->add_option("--method", bench.method, "protolp|protolp-nonparam|ncm|soft-kmeans|lp")
      ->capture_default_str();
  cmd->add_option("--features", bench.features, "Feature file");
  cmd->add_option("--format", bench.format, "plpf|csv (features) or json|csv (report)");
  cmd->add_option("--feature-format", bench.feature_format, "plpf|csv")->capture_default_str();
  cmd->add_option("--synth", bench.synth, "Synthetic store K,D,rho,sigma_w[,pool]");
  cmd->add_option("--preprocess", bench.preprocess, "none|l2|pt+l2|center+l2")
      ->capture_default_str();
  cmd->add_option("--center-from", bench.center_from, "Base split whose mean is used by center+l2");
  cmd->add_option("--ways", bench.ways)->capture_default_str();
  cmd->add_option("--shots", bench.shots)->capture_default_str();
  cmd->add_option("--queries", bench.queries, "Queries per episode")->capture_default_str();
  cmd->add_option("--query-dist", bench.query_dist, "balanced|dirichlet:GAMMA")
      ->capture_default_str();
  cmd->add_option("--unlabeled-per-class", bench.unlabeled_per_class)->capture_default_str();
  cmd->add_option("--episodes", bench.episodes)->capture_default_str();
  cmd->add_option("--seed", bench.seed)->capture_default_str();
  cmd->add_option("--lambda", bench.lambda, "Graph weight (default 1, or 0.5 when unbalanced)");
  cmd->add_option("--alpha", bench.alpha, "Prototype EMA rate")->capture_default_str();
  cmd->add_option("--steps", bench.steps, "Outer iterations")->capture_default_str();
  cmd->add_option("--sinkhorn", bench.sinkhorn, "on|off|final")->capture_default_str();
  cmd->add_option("--sinkhorn-iters", bench.sinkhorn_iters)->capture_default_str();
  cmd->add_option("--sinkhorn-tol", bench.sinkhorn_tol)->capture_default_str();
  cmd->add_option("--kmeans-iters", bench.kmeans_iters, "Soft k-means rounds")
      ->capture_default_str();
  cmd->add_option("--lp-sigma", bench.lp_sigma, "RBF bandwidth for lp (default: median)");
  cmd->add_option("--lp-neighbors", bench.lp_neighbors, "kNN sparsity for lp, 0 = dense")
      ->capture_default_str();
  cmd->add_option("--output", bench.output, "Report path, '-' for stdout");
  cmd->add_option("--report-format", bench.report_format, "json|csv")->capture_default_str();
  cmd->add_option("--parallel", bench.parallel, "Worker threads")->capture_default_str();
  cmd->add_flag("--time", bench.timing, "Record solver wall time");

  std::string conv_in, conv_out, conv_in_fmt = "csv", conv_out_fmt = "plpf";
  auto* convert = app.add_subcommand("convert", "Convert a feature file between csv and plpf");
  convert->add_option("input", conv_in)->required();
  convert->add_option("output", conv_out)->required();
  convert->add_option("--from", conv_in_fmt)->capture_default_str();
  convert->add_option("--to", conv_out_fmt)->capture_default_str();

  std::string synth_text, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian feature store");
  synth->add_option("spec", synth_text, "K,D,rho,sigma_w[,pool]")->required();
  synth->add_option("output", synth_out)->required();
  synth->add_option("--seed", synth_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*cmd) return run_bench(bench);
    if (*convert) {
      const auto in_fmt = protolp::parse_feature_format(conv_in_fmt);
      const auto out_fmt = protolp::parse_feature_format(conv_out_fmt);
      if (!in_fmt || !out_fmt) protolp::fail(protolp::ErrorKind::kConfig, "formats are csv|plpf");
      protolp::write_features(protolp::load_features(conv_in, *in_fmt), conv_out, *out_fmt);
      return 0;
    }
    if (*synth) {
      protolp::write_features(protolp::synth_generate(protolp::parse_synth(synth_text, synth_seed)),
                              synth_out, protolp::FeatureFormat::kPlpf);
      return 0;
    }
  } catch (const protolp::Error& e) {
    std::cerr << "protolp: " << protolp::to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "protolp: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
