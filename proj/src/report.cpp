#include "protolp/bench.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace protolp {

namespace {

using nlohmann::ordered_json;

const char* placement_name(SinkhornPlacement p) {
  switch (p) {
    case SinkhornPlacement::kOff: return "off";
    case SinkhornPlacement::kEveryStep: return "on";
    case SinkhornPlacement::kFinalOnly: return "final";
  }
  return "off";
}

// Everything that determines the result. The worker count is left out so
// that reports are identical across parallelism degrees.
ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["method"] = to_string(c.method);
  if (const auto* file = std::get_if<FeatureFile>(&c.source)) {
    j["features"] = {{"path", file->path.string()},
                     {"format", file->format == FeatureFormat::kPlpf ? "plpf" : "csv"}};
  } else {
    const auto& s = std::get<SynthSpec>(c.source);
    j["synth"] = {{"classes", s.classes},   {"dim", s.dim},
                  {"radius", s.radius},     {"within_std", s.within_std},
                  {"pool_per_class", s.pool_per_class}, {"seed", s.seed}};
  }
  j["preprocess"] = c.preprocess;
  if (c.center_from) j["center_from"] = c.center_from->string();
  j["ways"] = c.sampler.ways;
  j["shots"] = c.sampler.shots;
  j["queries"] = c.sampler.queries_total;
  j["query_dist"] = to_string(c.sampler.mode);
  j["unlabeled_per_class"] = c.sampler.unlabeled_per_class;
  j["seed"] = c.sampler.seed;
  j["episodes"] = c.n_episodes;
  j["lambda"] = c.solver.lambda;
  j["alpha"] = c.solver.alpha;
  j["steps"] = c.solver.n_step;
  j["sinkhorn"] = placement_name(c.solver.sinkhorn.placement);
  j["sinkhorn_max_iter"] = c.solver.sinkhorn.max_iter;
  j["sinkhorn_tol"] = c.solver.sinkhorn.tol;
  j["ridge"] = c.solver.ridge;
  j["lambda_floor"] = c.solver.lambda_floor;
  if (c.method == Method::kSoftKMeans) j["soft_kmeans_iters"] = c.soft_kmeans_iters;
  if (c.method == Method::kLabelPropagation) {
    ordered_json g;
    if (c.lp_graph.bandwidth) {
      g["bandwidth"] = *c.lp_graph.bandwidth;
    } else {
      g["bandwidth"] = "median";
    }
    g["neighbors"] = c.lp_graph.neighbors;
    g["self_loops"] = c.lp_graph.self_loops;
    j["lp_graph"] = g;
  }
  j["timing"] = c.timing;
  return j;
}

std::string fmt_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string render_json(const AggregateReport& r) {
  ordered_json j;
  j["config"] = config_json(r.config);
  j["mean_accuracy"] = r.mean_accuracy;
  j["ci95"] = r.ci95;
  ordered_json episodes = ordered_json::array();
  for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
    ordered_json e;
    e["index"] = i;
    e["accuracy"] = 100.0 * r.accuracies[i];
    if (r.episode_seconds) e["seconds"] = (*r.episode_seconds)[i];
    episodes.push_back(std::move(e));
  }
  j["per_episode"] = std::move(episodes);
  if (r.mean_episode_seconds) j["mean_episode_seconds"] = *r.mean_episode_seconds;
  if (r.loss_curve_mean) j["loss_curve_mean"] = *r.loss_curve_mean;
  return j.dump(2) + "\n";
}

std::string render_csv(const AggregateReport& r) {
  std::string out;
  for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
    out += std::to_string(i) + "," + fmt_number(100.0 * r.accuracies[i]);
    if (r.episode_seconds) out += "," + fmt_number((*r.episode_seconds)[i]);
    out += "\n";
  }
  out += "summary," + fmt_number(r.mean_accuracy) + "," + fmt_number(r.ci95);
  if (r.mean_episode_seconds) out += "," + fmt_number(*r.mean_episode_seconds);
  out += "\n";
  return out;
}

}  // namespace

std::string render_report(const AggregateReport& report, ReportFormat format) {
  return format == ReportFormat::kJson ? render_json(report) : render_csv(report);
}

void emit_report(const AggregateReport& report, const std::filesystem::path& path,
                 ReportFormat format) {
  const std::string text = render_report(report, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write report " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for report " + path.string());
}

}  // namespace protolp
