// Python bindings for the main operations: data handling, CART, SVR, the
// selection criteria, and the benchmark harness.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "vfpen/bench.hpp"
#include "vfpen/cart.hpp"
#include "vfpen/dataset.hpp"
#include "vfpen/errors.hpp"
#include "vfpen/model_select.hpp"
#include "vfpen/penalty.hpp"
#include "vfpen/stats.hpp"
#include "vfpen/svr.hpp"
#include "vfpen/synthetic.hpp"

namespace py = pybind11;
using namespace vfpen;

namespace {

Matrix matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-d feature array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    const auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (py::ssize_t j = 0; j < a.shape(1); ++j)
            m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = r(i, j);
    return m;
}

py::array_t<double> matrix_to_array(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            w(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j)) = m(i, j);
    return out;
}

std::vector<double> vector_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw ShapeError("expected a 1-d array");
    return {a.data(), a.data() + a.shape(0)};
}

Dataset dataset_from_arrays(const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
                            const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
                            const std::string& name) {
    Dataset ds;
    ds.name = name;
    ds.features = matrix_from_array(x);
    ds.targets = vector_from_array(y);
    if (ds.features.rows() != ds.targets.size())
        throw ShapeError("features and targets disagree on the number of rows");
    return ds;
}

py::array_t<double> predict_tree_batch(const RegressionTree& tree,
                                       const py::array_t<double, py::array::c_style |
                                                                     py::array::forcecast>& x) {
    const Matrix m = matrix_from_array(x);
    py::array_t<double> out(m.rows());
    auto w = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        w(static_cast<py::ssize_t>(i)) = tree.predict(m.row(i));
    return out;
}

py::array_t<double> predict_svr_batch(const SvrModel& model,
                                      const py::array_t<double, py::array::c_style |
                                                                    py::array::forcecast>& x) {
    const Matrix m = matrix_from_array(x);
    py::array_t<double> out(m.rows());
    auto w = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        w(static_cast<py::ssize_t>(i)) = predict_svr(model, m.row(i));
    return out;
}

nlohmann::json json_from_py(const py::object& obj) {
    const py::module_ json_mod = py::module_::import("json");
    const std::string dumped = py::cast<std::string>(json_mod.attr("dumps")(obj));
    return nlohmann::json::parse(dumped);
}

py::object json_to_py(const nlohmann::json& j) {
    const py::module_ json_mod = py::module_::import("json");
    return json_mod.attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "V-fold cross-validation and V-fold penalisation model selection";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<SizeError>(m, "SizeError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SelectionError>(m, "SelectionError", PyExc_RuntimeError);
    py::register_exception<DatasetResolutionError>(m, "DatasetResolutionError",
                                                   PyExc_RuntimeError);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&dataset_from_arrays), py::arg("features"), py::arg("targets"),
             py::arg("name") = "dataset")
        .def_property_readonly("features",
                               [](const Dataset& ds) { return matrix_to_array(ds.features); })
        .def_property_readonly("targets",
                               [](const Dataset& ds) {
                                   return py::array_t<double>(ds.targets.size(),
                                                              ds.targets.data());
                               })
        .def_readonly("name", &Dataset::name)
        .def_property_readonly("n", &Dataset::n)
        .def_property_readonly("d", &Dataset::d)
        .def("__repr__", [](const Dataset& ds) {
            return "Dataset(name=" + ds.name + ", n=" + std::to_string(ds.n()) +
                   ", d=" + std::to_string(ds.d()) + ")";
        });

    m.def("load_csv", [](const std::filesystem::path& p) { return load_csv(p); },
          py::arg("path"));
    m.def("standardize", [](const Dataset& ds) { return standardize(ds); }, py::arg("dataset"));
    m.def("generate_synthetic",
          [](const std::string& kind, std::size_t n, std::size_t d, double noise,
             std::uint64_t seed) {
              return generate_synthetic(SyntheticSpec{kind, n, d, noise, seed});
          },
          py::arg("kind") = "sine", py::arg("n") = 1000, py::arg("d") = 1,
          py::arg("noise") = 0.0, py::arg("seed") = 0);

    py::class_<Realisation>(m, "Realisation")
        .def_readonly("train_indices", &Realisation::train_indices)
        .def_readonly("test_indices", &Realisation::test_indices)
        .def_readonly("seed", &Realisation::seed);
    m.def("make_realisations", &make_realisations, py::arg("dataset"), py::arg("count"),
          py::arg("learn_fraction"), py::arg("seed"));

    py::class_<Subsample>(m, "Subsample")
        .def_readonly("indices", &Subsample::indices)
        .def_readonly("seed", &Subsample::seed)
        .def_property_readonly("m", &Subsample::m);
    m.def("make_subsample", &make_subsample, py::arg("realisation"), py::arg("m"),
          py::arg("seed"));

    py::class_<FoldPartition>(m, "FoldPartition")
        .def_readonly("blocks", &FoldPartition::blocks)
        .def_property_readonly("fold_count", &FoldPartition::fold_count);
    m.def("partition_folds", &partition_folds, py::arg("subsample"), py::arg("fold_count"),
          py::arg("seed"));

    py::class_<RegressionTree>(m, "RegressionTree")
        .def_property_readonly("size", &RegressionTree::size)
        .def_property_readonly("leaf_count", &RegressionTree::leaf_count)
        .def_property_readonly("dimension", &RegressionTree::dimension)
        .def("training_sse", &RegressionTree::training_sse)
        .def("predict", &predict_tree_batch, py::arg("features"))
        .def("predict_one",
             [](const RegressionTree& t,
                const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
                 const auto v = vector_from_array(x);
                 return t.predict(v);
             })
        .def("to_json", [](const RegressionTree& t) { return json_to_py(tree_to_json(t)); });

    m.def("grow_tree",
          [](const Dataset& ds, std::size_t min_leaf) {
              return grow_tree(ds.features, ds.targets, min_leaf);
          },
          py::arg("dataset"), py::arg("min_leaf") = 1);
    m.def("alpha_values",
          [](const RegressionTree& t) {
              const auto values = alpha_values(t);
              return std::map<std::size_t, double>(values.begin(), values.end());
          });

    py::class_<PruneSequence>(m, "PruneSequence")
        .def_property_readonly("sizes",
                               [](const PruneSequence& seq) {
                                   std::vector<std::size_t> sizes;
                                   for (const auto& e : seq.entries)
                                       sizes.push_back(e.tree.size());
                                   return sizes;
                               })
        .def_property_readonly("sigmas",
                               [](const PruneSequence& seq) {
                                   std::vector<double> sigmas;
                                   for (const auto& e : seq.entries) sigmas.push_back(e.sigma);
                                   return sigmas;
                               })
        .def("select_by_size", [](const PruneSequence& seq, std::size_t t) {
            return select_by_size(seq, t);
        });
    m.def("prune_sequence", &prune_sequence, py::arg("tree"));

    py::class_<SvrModel>(m, "SvrModel")
        .def_readonly("bias", &SvrModel::bias)
        .def_readonly("gamma", &SvrModel::gamma)
        .def_readonly("epsilon", &SvrModel::epsilon)
        .def_readonly("cost", &SvrModel::cost)
        .def_readonly("weight_norm", &SvrModel::weight_norm)
        .def_readonly("converged", &SvrModel::converged)
        .def_readonly("beta", &SvrModel::beta)
        .def("predict", &predict_svr_batch, py::arg("features"))
        .def("to_json", [](const SvrModel& mo) { return json_to_py(svr_to_json(mo)); });

    m.def("fit_svr",
          [](const Dataset& ds, double cost, double gamma, double epsilon, double tol,
             std::size_t max_passes) {
              return fit_svr(ds.features, ds.targets, SvrParams{cost, gamma, epsilon}, tol,
                             max_passes);
          },
          py::arg("dataset"), py::arg("cost") = 1.0, py::arg("gamma") = 1.0,
          py::arg("epsilon") = 0.1, py::arg("tol") = 1e-3, py::arg("max_passes") = 0);
    m.def("rbf_kernel",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& u,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& v,
             double gamma) {
              const auto uu = vector_from_array(u);
              const auto vv = vector_from_array(v);
              return rbf_kernel(uu, vv, gamma);
          },
          py::arg("u"), py::arg("v"), py::arg("gamma"));

    m.def("cv_constant", &cv_constant, py::arg("beta"), py::arg("fold_count"));
    m.def("fit_learning_rate",
          [](const std::vector<std::pair<std::size_t, double>>& pen_by_v, std::size_t n) {
              const LearningRate lr = fit_learning_rate(pen_by_v, n);
              return py::make_tuple(lr.beta, lr.intercept, lr.fallback);
          },
          py::arg("pen_by_v"), py::arg("sample_count"));

    m.def("mean_absolute_error",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& target) {
              return mean_absolute_error(vector_from_array(pred), vector_from_array(target));
          },
          py::arg("predictions"), py::arg("targets"));
    m.def("paired_t_test",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              const TTest tt = paired_t_test(vector_from_array(a), vector_from_array(b));
              return py::make_tuple(tt.t, tt.p, tt.degenerate);
          },
          py::arg("a"), py::arg("b"));

    m.def("select",
          [](const std::string& method, const std::string& learner, const Dataset& ds,
             const std::vector<std::size_t>& subsample_rows,
             const std::vector<std::size_t>& test_rows, std::size_t fold_count, double alpha,
             std::uint64_t seed, std::size_t min_leaf) {
              const HyperGrid grid = build_grid(learner_from_string(learner));
              Subsample sub;
              sub.indices = subsample_rows;
              SelectionOptions options;
              options.fold_count = fold_count;
              options.alpha = alpha;
              options.seed = seed;
              options.min_leaf = min_leaf;
              SelectionResult res = select(method_from_string(method),
                                           learner_from_string(learner), grid, ds, sub,
                                           test_rows, options);
              if (!test_rows.empty())
                  res.test_mae = mean_loss(res.final_model, ds, test_rows, abs_loss);
              return json_to_py(selection_to_json(res, grid));
          },
          py::arg("method"), py::arg("learner"), py::arg("dataset"),
          py::arg("subsample_rows"), py::arg("test_rows") = std::vector<std::size_t>{},
          py::arg("fold_count") = 2, py::arg("alpha") = 1.0, py::arg("seed") = 0,
          py::arg("min_leaf") = 1);

    m.def("run_experiment",
          [](const py::object& config) {
              ExperimentConfig cfg;
              from_json(json_from_py(config), cfg);
              return json_to_py(report_to_json(run_experiment(cfg)));
          },
          py::arg("config"));

    m.def("dataset_registry", [] {
        py::list out;
        for (const auto& info : dataset_registry()) {
            py::dict d;
            d["name"] = info.name;
            d["synthetic"] = info.synthetic;
            d["learn_size"] = info.learn_size;
            d["test_size"] = info.test_size;
            d["dims"] = info.dims;
            out.append(d);
        }
        return out;
    });
}
