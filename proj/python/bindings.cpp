#include <mfsg/admm.hpp>
#include <mfsg/basis.hpp>
#include <mfsg/error.hpp>
#include <mfsg/gmd.hpp>
#include <mfsg/io.hpp>
#include <mfsg/prox.hpp>
#include <mfsg/sim.hpp>
#include <mfsg/tuning.hpp>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mfsg;

namespace {

py::dict params_dict(const PenaltyParams& p)
{
    py::dict d;
    d["lambda"] = p.lambda;
    d["alpha"] = p.alpha;
    d["lambda_der"] = p.lambda_der;
    return d;
}

// One basis per predictor, each curve list holding an n x T matrix on grid t.
FunctionalDataset dataset_from_curves(const std::vector<double>& t, const std::vector<Matrix>& curves,
                                      const Vector& response, int order, int size,
                                      std::vector<std::string> names)
{
    if (curves.empty()) throw ConfigError("at least one predictor is required");
    if (t.empty()) throw ConfigError("empty observation grid");
    const Index n = curves.front().rows();
    const BasisSystem basis = make_bspline_basis({t.front(), t.back()}, order, size);
    const CurveProjector projector(basis, t);
    Matrix coords(static_cast<Index>(curves.size()) * size, n);
    for (std::size_t j = 0; j < curves.size(); ++j) {
        const Matrix& x = curves[j];
        if (x.rows() != n || x.cols() != static_cast<Index>(t.size())) {
            throw ConfigError("predictor " + std::to_string(j) + ": expected an n x len(t) array");
        }
        for (Index i = 0; i < n; ++i) {
            const std::vector<double> row(x.row(i).begin(), x.row(i).end());
            coords.block(static_cast<Index>(j) * size, i, size, 1) = projector.project(row);
        }
    }
    std::vector<BasisSystem> bases(curves.size(), basis);
    return make_dataset(std::move(bases), std::move(coords), response, std::move(names));
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Functional group sparse regression core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<BasisSystem>(m, "BasisSystem")
        .def_property_readonly("domain", [](const BasisSystem& b) { return std::pair{b.domain().lo, b.domain().hi}; })
        .def_property_readonly("order", &BasisSystem::order)
        .def_property_readonly("num_functions", &BasisSystem::num_functions)
        .def_property_readonly("knots", &BasisSystem::knots)
        .def_property_readonly("gram", &BasisSystem::gram)
        .def_property_readonly("curvature_gram", &BasisSystem::curvature_gram)
        .def("eval", [](const BasisSystem& b, const std::vector<double>& t, int deriv) {
            return eval_basis(b, t, deriv);
        }, py::arg("t"), py::arg("deriv") = 0)
        .def("eval_curve", [](const BasisSystem& b, const Vector& coef, const std::vector<double>& t, int deriv) {
            return eval_curve(b, coef, t, deriv);
        }, py::arg("coef"), py::arg("t"), py::arg("deriv") = 0)
        .def("project", [](const BasisSystem& b, const std::vector<double>& t, const std::vector<double>& v) {
            return project_curve(b, t, v);
        }, py::arg("t"), py::arg("values"))
        .def("__repr__", [](const BasisSystem& b) {
            return "BasisSystem(order=" + std::to_string(b.order()) + ", num_functions=" +
                   std::to_string(b.num_functions()) + ")";
        });
    m.def("make_bspline_basis", [](std::pair<double, double> domain, int order, int size) {
        return make_bspline_basis({domain.first, domain.second}, order, size);
    }, py::arg("domain"), py::arg("order") = 4, py::arg("num_functions") = 21);

    py::class_<FunctionalDataset>(m, "Dataset")
        .def(py::init([](std::vector<BasisSystem> bases, Matrix coords, Vector response,
                         std::vector<std::string> names) {
            return make_dataset(std::move(bases), std::move(coords), std::move(response), std::move(names));
        }), py::arg("bases"), py::arg("coords"), py::arg("response"), py::arg("names") = std::vector<std::string>{},
            "Coordinates stacked per sample: column i holds predictor j in rows [j*m, (j+1)*m).")
        .def_static("from_curves", &dataset_from_curves, py::arg("t"), py::arg("curves"), py::arg("response"),
                    py::arg("order") = 4, py::arg("num_functions") = 21,
                    py::arg("names") = std::vector<std::string>{},
                    "Project n x len(t) arrays of sampled curves, one per predictor, onto B-splines.")
        .def_readonly("bases", &FunctionalDataset::bases)
        .def_readonly("names", &FunctionalDataset::predictor_names)
        .def_readonly("coords", &FunctionalDataset::coords)
        .def_readonly("response", &FunctionalDataset::response)
        .def_readonly("centered", &FunctionalDataset::centered)
        .def_property_readonly("num_samples", &FunctionalDataset::num_samples)
        .def_property_readonly("num_predictors", &FunctionalDataset::num_predictors)
        .def_property_readonly("block_size", &FunctionalDataset::block_size)
        .def("select", &select_samples, py::arg("samples"));

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("coefficients", &FitResult::coefficients)
        .def_readonly("active_set", &FitResult::active_set)
        .def_readonly("names", &FitResult::predictor_names)
        .def_readonly("bases", &FitResult::bases)
        .def_readonly("response_mean", &FitResult::response_mean)
        .def_readonly("solver", &FitResult::solver)
        .def_readonly("penalty", &FitResult::penalty)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("rank_deficient", &FitResult::rank_deficient)
        .def_readonly("iterations", &FitResult::iterations)
        .def_readonly("objective", &FitResult::objective)
        .def_readonly("warnings", &FitResult::warnings)
        .def_property_readonly("params", [](const FitResult& f) { return params_dict(f.params); })
        .def("block_norms", &FitResult::block_norms)
        .def("coefficient_block", &FitResult::coefficient_block, py::arg("j"))
        .def("predict", py::overload_cast<const FunctionalDataset&>(&FitResult::predict, py::const_),
             py::arg("data"))
        .def("predict_coords", py::overload_cast<const Matrix&>(&FitResult::predict, py::const_),
             py::arg("coords"))
        .def("to_json", &dump_model);
    m.def("load_model", [](const std::string& text) { return model_from_json(nlohmann::json::parse(text)); },
          py::arg("text"));

    m.def("gmd_fit", [](const FunctionalDataset& data, double lambda, double alpha, double lambda_der) {
        py::gil_scoped_release release;
        return gmd_fit(data, {lambda, alpha, lambda_der});
    }, py::arg("data"), py::arg("lam"), py::arg("alpha") = 0.0, py::arg("lambda_der") = 0.0);
    m.def("admm_fit", [](const FunctionalDataset& data, double lambda, double alpha, double lambda_der, double rho,
                         int max_iter, double tol_abs, double tol_rel) {
        py::gil_scoped_release release;
        AdmmConfig cfg{lambda, alpha, lambda_der, rho, max_iter, tol_abs, tol_rel};
        return admm_fit(data, cfg);
    }, py::arg("data"), py::arg("lam"), py::arg("alpha") = 0.0, py::arg("lambda_der") = 0.0, py::arg("rho") = 1.0,
       py::arg("max_iter") = 1000, py::arg("tol_abs") = 1e-6, py::arg("tol_rel") = 1e-4);
    m.def("fit_ols", &fit_ols, py::arg("data"));
    m.def("fit_ridge", &fit_ridge, py::arg("data"), py::arg("ridge"), py::arg("lambda_der") = 0.0);
    m.def("fit_oracle", &fit_oracle, py::arg("data"), py::arg("active"));

    py::class_<CvResult>(m, "CvResult")
        .def_readonly("fit", &CvResult::fit)
        .def_readonly("best_error", &CvResult::best_error)
        .def_readonly("fold_ids", &CvResult::fold_ids)
        .def_readonly("warnings", &CvResult::warnings)
        .def_property_readonly("best", [](const CvResult& r) { return params_dict(r.best); })
        .def_property_readonly("surface", [](const CvResult& r) {
            py::list out;
            for (const CvPoint& pt : r.surface) {
                py::dict d;
                d["alpha"] = pt.alpha;
                d["lambda_der"] = pt.lambda_der;
                d["lambdas"] = pt.lambdas;
                d["mean_mse"] = pt.mean_mse;
                d["se_mse"] = pt.se_mse;
                out.append(d);
            }
            return out;
        });
    m.def("cross_validate", [](const FunctionalDataset& data, const std::string& solver, int folds,
                               std::vector<double> alpha_grid, std::optional<std::vector<double>> lambda_der_grid,
                               int grid_size, double lambda_min_ratio, std::uint64_t seed, bool one_se,
                               int threads) {
        CvPlan plan;
        plan.folds = folds;
        plan.alpha_grid = std::move(alpha_grid);
        if (lambda_der_grid) plan.lam_der_grid = *lambda_der_grid;
        plan.lam_grid_size = grid_size;
        plan.lambda_min_ratio = lambda_min_ratio;
        plan.seed = seed;
        plan.one_se = one_se;
        plan.threads = threads;
        const Solver s = parse_solver(solver);
        py::gil_scoped_release release;
        return cross_validate(data, plan, s);
    }, py::arg("data"), py::arg("solver") = "gmd", py::arg("folds") = 5,
       py::arg("alpha_grid") = std::vector<double>{0.0}, py::arg("lambda_der_grid") = py::none(),
       py::arg("grid_size") = 100, py::arg("lambda_min_ratio") = 0.01, py::arg("seed") = 1,
       py::arg("one_se") = false, py::arg("threads") = 1);

    m.def("soft_threshold", &soft_threshold, py::arg("y"), py::arg("lam"));
    m.def("elastic_soft_threshold", &elastic_soft_threshold, py::arg("y"), py::arg("a"), py::arg("b"),
          "argmin_x 0.5||x - y||^2 + a||x|| + (b/2)||x||^2");

    py::class_<SimScenario>(m, "Scenario")
        .def(py::init([](Index n, int p, double sigma, std::uint64_t seed) {
            SimScenario s;
            s.n = n;
            s.p = p;
            s.sigma = sigma;
            s.seed = seed;
            s.validate();
            return s;
        }), py::arg("n") = 100, py::arg("p") = 19, py::arg("sigma") = 1.0, py::arg("seed") = 20240601)
        .def_readonly("n", &SimScenario::n)
        .def_readonly("p", &SimScenario::p)
        .def_readonly("sigma", &SimScenario::sigma)
        .def_readonly("seed", &SimScenario::seed)
        .def_property_readonly("num_train", &SimScenario::num_train);
    m.def("generate", [](const SimScenario& sc, int replicate) {
        SimSample s = generate(sc, replicate);
        return py::make_tuple(std::move(s.train), std::move(s.test), s.active);
    }, py::arg("scenario"), py::arg("replicate") = 0, "Returns (train, test, true_active).");
    m.def("true_coefficient", &true_coefficient, py::arg("j"), py::arg("t"));
    m.def("evaluate", [](const FitResult& fit, const FunctionalDataset& test, const IndexSet& truth) {
        const Evaluation e = evaluate(fit, test, truth);
        py::dict d;
        d["rmse"] = e.rmse;
        d["active_correct"] = e.active_correct;
        d["inactive_correct"] = e.inactive_correct;
        return d;
    }, py::arg("fit"), py::arg("test"), py::arg("truth"));
}
