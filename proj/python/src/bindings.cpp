// Python bindings over the core library. Arrays come in as float64, C order.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "charterseg/analysis.hpp"
#include "charterseg/errors.hpp"
#include "charterseg/forest.hpp"
#include "charterseg/rescale.hpp"
#include "charterseg/study.hpp"
#include "charterseg/tree.hpp"

namespace py = pybind11;
using namespace charterseg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> as_span(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

// Keeps the buffers alive alongside the view.
struct Training {
  Array x;
  Array y;
  TrainingView view;
  std::vector<std::string> names;
};

Training training(const Array& x, const Array& y, std::optional<std::vector<std::string>> names) {
  if (x.ndim() != 2) throw DomainError("X must be two-dimensional");
  if (y.ndim() != 1 || y.shape(0) != x.shape(0)) throw DomainError("y must be one-dimensional with one entry per row of X");
  Training t{x, y, {}, {}};
  const auto m = static_cast<std::size_t>(x.shape(1));
  t.view = TrainingView{as_span(t.x), as_span(t.y), m};
  if (names) {
    if (names->size() != m) throw DomainError("feature_names must have one entry per column");
    t.names = std::move(*names);
  } else {
    for (std::size_t f = 0; f < m; ++f) t.names.push_back("x" + std::to_string(f));
  }
  return t;
}

std::vector<double> predict_rows(const RegressionTree& tree, const Array& x) {
  if (x.ndim() != 2 || static_cast<std::size_t>(x.shape(1)) != tree.feature_names().size()) {
    throw DomainError("X must have one column per tree feature");
  }
  const auto m = static_cast<std::size_t>(x.shape(1));
  std::vector<double> out(static_cast<std::size_t>(x.shape(0)));
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = tree.predict(as_span(x).subspan(r * m, m));
  return out;
}

py::dict path_dict(const LeafPath& path, const RegressionTree& tree) {
  py::dict d;
  d["leaf"] = path.leaf;
  d["n"] = path.n;
  d["mean"] = path.mean;
  d["share"] = path.share;
  d["description"] = describe_path(path, tree.feature_names());
  return d;
}

py::dict trace_dict(const PruneTrace& t) {
  py::dict d;
  d["alphas"] = t.alphas;
  d["subtree_sizes"] = t.subtree_sizes;
  d["cv_mean"] = t.cv_mean;
  d["cv_se"] = t.cv_se;
  d["chosen_index"] = t.chosen_index;
  d["chosen_alpha"] = t.chosen_alpha;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Regression-tree segmentation of bank panels by CAMELS risk factors";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<EmptySubsampleError>(m, "EmptySubsampleError", base.ptr());
  py::register_exception<EmptyModelError>(m, "EmptyModelError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<UniquenessError>(m, "UniquenessError", base.ptr());

  m.def(
      "quantile_rescale",
      [](const Array& values, const std::string& direction) {
        return quantile_rescale(as_span(values), parse_direction(direction));
      },
      py::arg("values"), py::arg("direction"));
  m.def(
      "threshold_rescale",
      [](const Array& values, const std::string& direction, double cutoff) {
        return threshold_rescale(as_span(values), parse_direction(direction), cutoff);
      },
      py::arg("values"), py::arg("direction"), py::arg("cutoff"));

  py::class_<RegressionTree>(m, "Tree")
      .def_property_readonly("feature_names", &RegressionTree::feature_names)
      .def_property_readonly("leaf_count", &RegressionTree::leaf_count)
      .def_property_readonly("depth", &RegressionTree::depth)
      .def_property_readonly("n", &RegressionTree::total_n)
      .def("nodes",
           [](const RegressionTree& t) {
             py::list out;
             for (const auto& n : t.nodes()) {
               py::dict d;
               d["left"] = n.left;
               d["right"] = n.right;
               d["n"] = n.n;
               d["mean"] = n.mean;
               d["sse"] = n.sse;
               if (!n.is_leaf()) {
                 d["feature"] = t.feature_names()[n.split.feature];
                 d["threshold"] = n.split.threshold;
               }
               out.append(d);
             }
             return out;
           })
      .def("predict", &predict_rows, py::arg("X"))
      .def("to_json", &export_json)
      .def("to_dot", [](const RegressionTree& t) { return export_dot(t); })
      .def_static("from_json", &import_json, py::arg("text"))
      .def("extreme_leaves",
           [](const RegressionTree& t) {
             const auto e = extreme_leaves(t);
             return py::make_tuple(path_dict(e.min, t), path_dict(e.max, t));
           })
      .def("verdicts",
           [](const RegressionTree& t, bool all_nodes) {
             const auto v = alignment_verdicts(t, extreme_leaves(t),
                                               all_nodes ? VerdictScope::AllNodes : VerdictScope::Paths);
             py::dict out;
             for (const auto& f : v.factors) out[py::str(f.factor)] = std::string(verdict_label(f.verdict));
             return out;
           },
           py::arg("all_nodes") = false)
      .def("__repr__", [](const RegressionTree& t) {
        return "<Tree leaves=" + std::to_string(t.leaf_count()) + " n=" + std::to_string(t.total_n()) + ">";
      });

  m.def(
      "grow_tree",
      [](const Array& x, const Array& y, std::optional<std::vector<std::string>> names, std::size_t min_leaf,
         std::optional<std::size_t> max_depth) {
        auto t = training(x, y, std::move(names));
        GrowOptions opts;
        opts.params.min_leaf = min_leaf;
        opts.params.max_depth = max_depth;
        return grow(t.view, t.names, opts);
      },
      py::arg("X"), py::arg("y"), py::arg("feature_names") = py::none(), py::arg("min_leaf") = 30,
      py::arg("max_depth") = py::none());

  m.def(
      "cv_prune_tree",
      [](const Array& x, const Array& y, std::optional<std::vector<std::string>> names, std::size_t min_leaf,
         std::size_t folds, const std::string& rule, std::uint64_t seed, std::size_t jobs) {
        auto t = training(x, y, std::move(names));
        TreeParams params;
        params.min_leaf = min_leaf;
        CvOptions cv{folds, parse_prune_rule(rule), seed, jobs};
        PrunedTree out;
        {
          py::gil_scoped_release release;
          out = cv_prune(t.view, t.names, params, cv);
        }
        return py::make_tuple(out.tree, out.unpruned, trace_dict(out.trace));
      },
      py::arg("X"), py::arg("y"), py::arg("feature_names") = py::none(), py::arg("min_leaf") = 30,
      py::arg("folds") = 10, py::arg("rule") = "min-cv", py::arg("seed") = 1, py::arg("jobs") = 1);

  m.def(
      "forest_importance",
      [](const Array& x, const Array& y, std::optional<std::vector<std::string>> names, std::size_t n_trees,
         std::optional<std::size_t> mtry, std::size_t min_leaf, std::uint64_t seed, std::size_t jobs) {
        auto t = training(x, y, std::move(names));
        ForestParams params;
        params.n_trees = n_trees;
        params.mtry = mtry;
        params.min_leaf = min_leaf;
        params.seed = seed;
        params.jobs = jobs;
        ImportanceReport report;
        {
          py::gil_scoped_release release;
          const auto forest = grow_forest(t.view, t.names, params);
          report = permutation_importance(forest, t.view, tree_seed(seed, n_trees), jobs);
        }
        py::list rows;
        for (const auto& f : report.features) {
          py::dict d;
          d["feature"] = f.feature;
          d["pct_inc_mse"] = f.pct_inc_mse;
          d["raw_delta"] = f.raw_delta;
          d["std_error"] = f.std_error;
          rows.append(d);
        }
        return py::make_tuple(rows, report.oob_mse);
      },
      py::arg("X"), py::arg("y"), py::arg("feature_names") = py::none(), py::arg("n_trees") = 2000,
      py::arg("mtry") = py::none(), py::arg("min_leaf") = 5, py::arg("seed") = 1, py::arg("jobs") = 1);

  m.def(
      "ks_two_sample",
      [](const Array& a, const Array& b) {
        const auto r = ks_two_sample(as_span(a), as_span(b));
        return py::make_tuple(r.d, r.p);
      },
      py::arg("a"), py::arg("b"));
  m.def("kolmogorov_q", &kolmogorov_q, py::arg("lam"));
  m.def(
      "pearson",
      [](const Array& x, const Array& y) {
        const auto c = pearson(as_span(x), as_span(y));
        return py::make_tuple(c.r, c.p);
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "synthetic_panel_csv",
      [](const std::vector<std::tuple<std::string, double, int, int, double>>& planted, std::size_t n,
         double noise_sigma, std::uint64_t seed) {
        PlantedTree spec;
        for (const auto& [field, threshold, left, right, mean] : planted) {
          spec.nodes.push_back({parse_raw_field(field), threshold, left, right, mean});
        }
        SyntheticOptions opts;
        opts.n = n;
        opts.noise_sigma = noise_sigma;
        opts.seed = seed;
        return panel_csv(generate_synthetic_panel(spec, opts));
      },
      "Panel CSV whose Q follows a planted tree of (raw field, threshold, left, right, leaf mean) nodes.",
      py::arg("planted"), py::arg("n") = 500, py::arg("noise_sigma") = 0.0, py::arg("seed") = 1);

  m.def(
      "run_study",
      [](const std::filesystem::path& config_path, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed, std::optional<std::size_t> jobs) {
        auto cfg = load_config(config_path);
        if (out) cfg.output_dir = *out;
        if (seed) cfg.seed = *seed;
        if (jobs) cfg.jobs = *jobs;
        StudyReport report;
        {
          py::gil_scoped_release release;
          report = run_study(cfg);
        }
        py::dict d;
        d["degraded"] = report.degraded();
        d["output_dir"] = cfg.output_dir;
        d["summary"] = verdict_summary(report);
        py::dict subs;
        for (const auto& s : report.subsamples) {
          if (!s.has_tree()) {
            subs[py::str(s.name)] = py::none();
            continue;
          }
          subs[py::str(s.name)] = s.tree;
        }
        d["trees"] = subs;
        return d;
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(), py::arg("jobs") = py::none());
}
