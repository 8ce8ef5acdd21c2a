#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "sae/io.hpp"
#include "sae/simulation.hpp"

namespace py = pybind11;
using namespace sae;

namespace {

AreaDataset make_dataset(const VectorXd& y, const MatrixXd& X, const VectorXd& D,
                         std::optional<std::vector<int>> area_ids) {
    const auto m = y.size();
    if (X.rows() != m || D.size() != m) throw DataError("y, X and D must have the same number of rows");
    if (area_ids && static_cast<Eigen::Index>(area_ids->size()) != m) {
        throw DataError("area_ids must have one entry per row");
    }
    std::vector<AreaObservation> areas(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        auto& a = areas[static_cast<std::size_t>(i)];
        a.area_id = area_ids ? (*area_ids)[static_cast<std::size_t>(i)] : static_cast<int>(i) + 1;
        a.y = y(i);
        a.x = X.row(i).transpose();
        a.D = D(i);
    }
    return AreaDataset(std::move(areas));
}

ParamVector make_params(const VectorXd& beta, double sigma_u2) {
    ParamVector d;
    d.beta = beta;
    d.sigma_u2 = sigma_u2;
    return d;
}

std::optional<BootstrapBudget> budget_for(LinkFunction link, std::size_t B, std::uint64_t seed) {
    if (link == LinkFunction::identity) return std::nullopt;
    return BootstrapBudget{B, seed};
}

py::dict breakdown_dict(const MspeBreakdown& b) {
    const auto m = static_cast<Eigen::Index>(b.areas.size());
    VectorXd value(m), m1_part(m), m2_part(m), bias(m);
    std::vector<int> ids, component;
    std::vector<bool> used;
    for (Eigen::Index i = 0; i < m; ++i) {
        const AreaMspe& a = b.areas[static_cast<std::size_t>(i)];
        ids.push_back(a.area_id);
        value(i) = a.value;
        m1_part(i) = a.m1_part;
        m2_part(i) = a.m2_part;
        bias(i) = a.bias_correction;
        used.push_back(a.tilt && a.tilt->used_preliminary);
        component.push_back(a.tilt ? static_cast<int>(a.tilt->component) + 1 : 0);
    }
    py::dict out;
    out["method"] = std::string(to_string(b.method));
    out["area_id"] = ids;
    out["value"] = value;
    out["m1"] = m1_part;
    out["m2"] = m2_part;
    out["bias_correction"] = bias;
    out["used_tilt"] = used;
    out["tilt_component"] = component;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Area-level MSPE estimation: fitting, resampling and estimators";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);

    py::class_<ParamVector>(m, "ParamVector")
        .def(py::init(&make_params), py::arg("beta"), py::arg("sigma_u2"))
        .def_readwrite("beta", &ParamVector::beta)
        .def_readwrite("sigma_u2", &ParamVector::sigma_u2)
        .def("flatten", &ParamVector::flatten)
        .def("__repr__", [](const ParamVector& d) { return "ParamVector(" + to_json(d).dump() + ")"; });

    py::class_<AreaDataset>(m, "AreaDataset")
        .def(py::init(&make_dataset), py::arg("y"), py::arg("X"), py::arg("D"),
             py::arg("area_ids") = std::nullopt)
        .def_property_readonly("m", &AreaDataset::m)
        .def_property_readonly("p", &AreaDataset::p)
        .def_property_readonly("y", &AreaDataset::response)
        .def_property_readonly("X", &AreaDataset::design_matrix)
        .def_property_readonly("D", &AreaDataset::sampling_variances)
        .def_property_readonly("area_ids", [](const AreaDataset& d) {
            std::vector<int> ids;
            for (const auto& a : d.areas()) ids.push_back(a.area_id);
            return ids;
        })
        .def("with_response", &AreaDataset::with_response, py::arg("y"))
        .def("__len__", &AreaDataset::m);

    m.def("read_dataset_csv", py::overload_cast<const std::string&>(&read_dataset_csv), py::arg("path"));

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("delta_hat", &FitResult::delta_hat)
        .def_readonly("sigma_truncated", &FitResult::sigma_truncated)
        .def_readonly("gls_cov_beta", &FitResult::gls_cov_beta);

    py::class_<BiasVarEstimate>(m, "BiasVarEstimate")
        .def(py::init([](const VectorXd& b, const MatrixXd& V, std::size_t B) {
                 return BiasVarEstimate{b, V, B, 0};
             }),
             py::arg("b_hat"), py::arg("V_hat"), py::arg("B") = 0)
        .def_readonly("b_hat", &BiasVarEstimate::b_hat)
        .def_readonly("V_hat", &BiasVarEstimate::V_hat)
        .def_readonly("B", &BiasVarEstimate::B)
        .def_readonly("n_degenerate", &BiasVarEstimate::n_degenerate);

    m.def("simulate_dataset",
          [](const ParamVector& delta, const MatrixXd& X, const VectorXd& D, std::uint64_t seed) {
              if (X.rows() != D.size()) throw DataError("X and D must have the same number of rows");
              std::vector<AreaDesign> design(static_cast<std::size_t>(X.rows()));
              for (Eigen::Index i = 0; i < X.rows(); ++i) {
                  design[static_cast<std::size_t>(i)].x = X.row(i).transpose();
                  design[static_cast<std::size_t>(i)].D = D(i);
              }
              RandomStream rng(seed);
              SimulatedDataset sim = simulate_dataset(delta, design, rng);
              return py::make_tuple(sim.data, sim.theta);
          },
          py::arg("delta"), py::arg("X"), py::arg("D"), py::arg("seed"),
          "Draw (dataset, theta) from the area-level model.");

    m.def("fit", [](const AreaDataset& data) { return fit(data); }, py::arg("data"));
    m.def("jackknife_fits", [](const AreaDataset& data) { return jackknife_fits(data); }, py::arg("data"));
    m.def("bootstrap_bias_var",
          [](const AreaDataset& data, const FitResult& fitted, std::size_t B, std::uint64_t seed) {
              return bootstrap_bias_var(data, fitted, {}, B, RandomStream(seed));
          },
          py::arg("data"), py::arg("fitted"), py::arg("B") = kDefaultBootstrapReplicates,
          py::arg("seed") = 1);

    m.def("best_predictor",
          [](const ParamVector& delta, const AreaDataset& data, const std::string& link) {
              const LinkFunction l = parse_link(link);
              VectorXd out(static_cast<Eigen::Index>(data.m()));
              for (std::size_t i = 0; i < data.m(); ++i) out(static_cast<Eigen::Index>(i)) = best_predictor(delta, data[i], l);
              return out;
          },
          py::arg("delta"), py::arg("data"), py::arg("link") = "identity");
    m.def("m1",
          [](const ParamVector& delta, const AreaDataset& data, const std::string& link) {
              const LinkFunction l = parse_link(link);
              VectorXd out(static_cast<Eigen::Index>(data.m()));
              for (std::size_t i = 0; i < data.m(); ++i) out(static_cast<Eigen::Index>(i)) = m1(delta, data[i], l);
              return out;
          },
          py::arg("delta"), py::arg("data"), py::arg("link") = "identity");
    m.def("m2",
          [](const ParamVector& delta, const AreaDataset& data, const std::string& link, std::size_t B,
             std::uint64_t seed) {
              const LinkFunction l = parse_link(link);
              return m2_all(delta, data, l, {}, budget_for(l, B, seed));
          },
          py::arg("delta"), py::arg("data"), py::arg("link") = "identity",
          py::arg("B") = kDefaultBootstrapReplicates, py::arg("seed") = 1);
    m.def("m1_derivatives",
          [](const ParamVector& delta, const AreaDataset& data, std::size_t i, const std::string& link) {
              if (i >= data.m()) throw py::index_error("area index out of range");
              const Derivatives d = m1_derivatives(delta, data[i], parse_link(link));
              return py::make_tuple(d.gradient, d.hessian);
          },
          py::arg("delta"), py::arg("data"), py::arg("i"), py::arg("link") = "identity");

    m.def("compute_mspe",
          [](const AreaDataset& data, const std::string& method, const std::string& link,
             std::optional<ParamVector> delta_hat, std::optional<BiasVarEstimate> bv, std::size_t B,
             std::uint64_t seed, const std::string& diag_weight) {
              const MspeMethod meth = parse_method(method);
              MspeInputs inputs;
              inputs.link = parse_link(link);
              inputs.tilt.diag_weight = parse_diag_weight(diag_weight);
              const RandomStream root(seed);
              const FitResult fitted = fit(data, inputs.est);
              const ParamVector d = delta_hat ? *delta_hat : fitted.delta_hat;
              inputs.m2_boot = budget_for(inputs.link, B, root.child(1).seed());
              if (meth == MspeMethod::tilted) {
                  if (bv) {
                      inputs.bv = *bv;
                  } else {
                      FitResult at = fitted;
                      at.delta_hat = d;
                      inputs.bv = bootstrap_bias_var(data, at, inputs.est, B, root.child(0));
                  }
              }
              return breakdown_dict(compute_mspe(meth, data, d, inputs));
          },
          py::arg("data"), py::arg("method"), py::arg("link") = "identity", py::arg("delta_hat") = std::nullopt,
          py::arg("bv") = std::nullopt, py::arg("B") = kDefaultBootstrapReplicates, py::arg("seed") = 1,
          py::arg("diag_weight") = "half");

    m.def("summarize",
          [](const std::vector<double>& values) {
              const SixNumberSummary s = summarize(values);
              py::dict out;
              out["min"] = s.min;
              out["q1"] = s.q1;
              out["median"] = s.median;
              out["mean"] = s.mean;
              out["q3"] = s.q3;
              out["max"] = s.max;
              return out;
          },
          py::arg("values"));

    m.def("_run_simulation_json",
          [](const std::string& config_json, std::size_t threads) {
              nlohmann::json j;
              try {
                  j = nlohmann::json::parse(config_json);
              } catch (const nlohmann::json::exception& e) {
                  throw DataError(std::string("config: ") + e.what());
              }
              const SimulationConfig cfg = config_from_json(j);
              SimulationOptions options;
              options.threads = threads;
              SimulationSummary summary;
              {
                  py::gil_scoped_release release;
                  summary = run_simulation(cfg, options);
              }
              return to_json(summary).dump();
          },
          py::arg("config_json"), py::arg("threads") = 0);
}
