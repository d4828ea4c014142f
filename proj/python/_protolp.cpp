#include "protolp/bench.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace protolp;

namespace {

FeatureFormat feature_format(const std::string& name) {
  const auto f = parse_feature_format(name);
  if (!f) fail(ErrorKind::kConfig, "feature format must be plpf or csv");
  return *f;
}

SinkhornPlacement placement(const std::string& name) {
  if (name == "on") return SinkhornPlacement::kEveryStep;
  if (name == "off") return SinkhornPlacement::kOff;
  if (name == "final") return SinkhornPlacement::kFinalOnly;
  fail(ErrorKind::kConfig, "sinkhorn must be on, off or final");
}

SolverConfig solver_config(double lambda, double alpha, int steps, const std::string& sinkhorn,
                           bool parameterized) {
  SolverConfig c;
  c.lambda = lambda;
  c.alpha = alpha;
  c.n_step = steps;
  c.sinkhorn.placement = placement(sinkhorn);
  c.variant = parameterized ? PropagationVariant::kParameterized
                            : PropagationVariant::kNonParameterized;
  return c;
}

SamplerConfig sampler_config(int ways, int shots, int queries, const std::string& query_dist,
                             int unlabeled_per_class, std::uint64_t seed) {
  SamplerConfig c;
  c.ways = ways;
  c.shots = shots;
  c.queries_total = queries;
  c.mode = parse_query_distribution(query_dist);
  c.unlabeled_per_class = unlabeled_per_class;
  c.seed = seed;
  return c;
}

}  // namespace

PYBIND11_MODULE(_protolp, m) {
  m.doc() = "Prototype-based label propagation for few-shot classification";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<FeatureStore>(m, "FeatureStore")
      .def(py::init<Matrix, Labels>(), py::arg("features"), py::arg("labels"))
      .def_property_readonly("features", &FeatureStore::features)
      .def_property_readonly("labels", &FeatureStore::labels)
      .def_property_readonly("class_index", &FeatureStore::class_index)
      .def_property_readonly("dim", &FeatureStore::dim)
      .def_property_readonly("n_classes", &FeatureStore::n_classes)
      .def("__len__", &FeatureStore::size);

  m.def("load_features",
        [](const std::filesystem::path& path, const std::string& format) {
          return load_features(path, feature_format(format));
        },
        py::arg("path"), py::arg("format") = "plpf");
  m.def("write_features",
        [](const FeatureStore& s, const std::filesystem::path& path, const std::string& format) {
          write_features(s, path, feature_format(format));
        },
        py::arg("store"), py::arg("path"), py::arg("format") = "plpf");
  m.def("preprocess",
        [](const FeatureStore& s, const std::string& name, std::optional<Vector> mean) {
          if (name == "center+l2" && !mean) mean = column_mean(s);
          return preprocess(s, preset_preprocess(name, mean));
        },
        py::arg("store"), py::arg("name"), py::arg("mean") = py::none());
  m.def("synth_generate",
        [](int classes, int dim, double radius, double within_std, int pool, std::uint64_t seed) {
          return synth_generate(SynthSpec{classes, dim, radius, within_std, pool, seed});
        },
        py::arg("classes"), py::arg("dim"), py::arg("radius"), py::arg("within_std"),
        py::arg("pool_per_class") = 100, py::arg("seed") = 0);

  py::class_<Episode>(m, "Episode")
      .def_readonly("support_x", &Episode::support_x)
      .def_readonly("support_y", &Episode::support_y)
      .def_readonly("query_x", &Episode::query_x)
      .def_readonly("unlabeled_x", &Episode::unlabeled_x)
      .def_readonly("truth_query_y", &Episode::truth_query_y)
      .def_readonly("ways", &Episode::ways)
      .def_readonly("shots", &Episode::shots)
      .def_readonly("classes", &Episode::classes);

  m.def("sample_episode",
        [](const FeatureStore& s, std::uint64_t index, int ways, int shots, int queries,
           const std::string& query_dist, int unlabeled_per_class, std::uint64_t seed) {
          return sample_episode(
              s, sampler_config(ways, shots, queries, query_dist, unlabeled_per_class, seed), index);
        },
        py::arg("store"), py::arg("index") = 0, py::arg("ways") = 5, py::arg("shots") = 1,
        py::arg("queries") = 75, py::arg("query_dist") = "balanced",
        py::arg("unlabeled_per_class") = 0, py::arg("seed") = 0);

  m.def("run",
        [](const Episode& e, double lambda, double alpha, int steps, const std::string& sinkhorn,
           bool parameterized) {
          SolverResult r = run(e, solver_config(lambda, alpha, steps, sinkhorn, parameterized));
          py::dict out;
          out["predictions"] = r.predictions;
          out["soft_labels"] = r.soft_labels;
          out["prototypes"] = r.prototypes;
          out["loss"] = r.trace.loss_per_step;
          out["drift"] = r.trace.prototype_drift;
          return out;
        },
        py::arg("episode"), py::arg("lam") = 1.0, py::arg("alpha") = 0.2, py::arg("steps") = 20,
        py::arg("sinkhorn") = "on", py::arg("parameterized") = true);

  m.def("soft_assign", &soft_assign, py::arg("x"), py::arg("prototypes"),
        py::arg("support_y") = Labels{});
  m.def("prototype_graph",
        [](const Matrix& z) {
          const PrototypeGraph g = build_graph(z);
          return py::make_tuple(g.dense(), g.mass);
        },
        py::arg("assignment"));
  m.def("solve_projection",
        [](const Matrix& z, const Labels& support_y, double lambda, double ridge) {
          SolverConfig c;
          c.lambda = lambda;
          c.ridge = ridge;
          const Matrix y = padded_labels(support_y, z.rows(), static_cast<int>(z.cols()));
          return solve_projection(build_graph(z), y, static_cast<Eigen::Index>(support_y.size()), c);
        },
        py::arg("assignment"), py::arg("support_y"), py::arg("lam") = 1.0,
        py::arg("ridge") = 1e-6);
  m.def("sinkhorn",
        [](const Matrix& scores, const Vector& rows, const Vector& cols, int max_iter, double tol) {
          SinkhornResult r = sinkhorn_project(scores, rows, cols, max_iter, tol);
          return py::make_tuple(r.scaled, r.iterations, r.converged);
        },
        py::arg("scores"), py::arg("row_targets"), py::arg("col_targets"),
        py::arg("max_iter") = 1000, py::arg("tol") = 1e-6);

  m.def("ncm_predict", &ncm_predict, py::arg("episode"));
  m.def("soft_kmeans",
        [](const Episode& e, int n_iter) {
          SoftKMeansResult r = soft_kmeans_refine(e, n_iter);
          return py::make_tuple(r.prototypes, r.predictions);
        },
        py::arg("episode"), py::arg("n_iter") = 1);
  m.def("classical_lp",
        [](const Episode& e, double lambda, std::optional<double> bandwidth, int neighbors) {
          RbfGraphSpec g;
          g.bandwidth = bandwidth;
          g.neighbors = neighbors;
          return classical_lp(e, g, lambda);
        },
        py::arg("episode"), py::arg("lam") = 1.0, py::arg("bandwidth") = py::none(),
        py::arg("neighbors") = 0);
  m.def("nonparam_propagate",
        [](const Matrix& z, const Labels& support_y, double lambda, double ridge) {
          const Matrix y = padded_labels(support_y, z.rows(), static_cast<int>(z.cols()));
          return nonparam_protolp_propagate(build_graph(z), y, lambda, ridge);
        },
        py::arg("assignment"), py::arg("support_y"), py::arg("lam") = 0.99,
        py::arg("ridge") = 1e-6);

  m.def("aggregate_stats",
        [](const std::vector<double>& v) {
          const MeanCi s = aggregate_stats(v);
          return py::make_tuple(s.mean, s.ci95);
        },
        py::arg("values"));

  // Returns the JSON report text; the Python wrapper parses it.
  m.def("_run_benchmark_json",
        [](const std::string& method, const std::optional<std::string>& features,
           const std::string& feature_fmt, const std::optional<std::vector<double>>& synth,
           const std::string& preprocess_name, int ways, int shots, int queries,
           const std::string& query_dist, int unlabeled_per_class, int episodes,
           std::uint64_t seed, std::optional<double> lambda, double alpha, int steps,
           const std::string& sinkhorn, int kmeans_iters, int parallel, bool timing) {
          RunConfig c;
          const auto mth = parse_method(method);
          if (!mth) fail(ErrorKind::kConfig, "unknown method '" + method + "'");
          c.method = *mth;
          if (features.has_value() == synth.has_value()) {
            fail(ErrorKind::kConfig, "give exactly one of features or synth");
          }
          if (features) {
            c.source = FeatureFile{*features, feature_format(feature_fmt)};
          } else {
            const auto& s = *synth;
            if (s.size() != 4 && s.size() != 5) {
              fail(ErrorKind::kConfig, "synth expects (K, D, rho, sigma_w[, pool])");
            }
            SynthSpec spec{static_cast<int>(s[0]), static_cast<int>(s[1]), s[2], s[3],
                           s.size() == 5 ? static_cast<int>(s[4]) : 100, seed};
            c.source = spec;
          }
          c.preprocess = preprocess_name;
          c.sampler = sampler_config(ways, shots, queries, query_dist, unlabeled_per_class, seed);
          const bool balanced = std::holds_alternative<Balanced>(c.sampler.mode);
          c.solver = solver_config(lambda.value_or(balanced ? 1.0 : 0.5), alpha, steps, sinkhorn,
                                   true);
          c.n_episodes = episodes;
          c.soft_kmeans_iters = kmeans_iters;
          c.parallel = parallel;
          c.timing = timing;
          AggregateReport r;
          {
            py::gil_scoped_release release;
            r = run_benchmark(c);
          }
          return render_report(r, ReportFormat::kJson);
        },
        py::arg("method"), py::arg("features"), py::arg("feature_format"), py::arg("synth"),
        py::arg("preprocess"), py::arg("ways"), py::arg("shots"), py::arg("queries"),
        py::arg("query_dist"), py::arg("unlabeled_per_class"), py::arg("episodes"),
        py::arg("seed"), py::arg("lam"), py::arg("alpha"), py::arg("steps"), py::arg("sinkhorn"),
        py::arg("kmeans_iters"), py::arg("parallel"), py::arg("timing"));
}
