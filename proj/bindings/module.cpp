#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "spinchain/dynamics.hpp"
#include "spinchain/experiments.hpp"
#include "spinchain/model.hpp"
#include "spinchain/observables.hpp"
#include "spinchain/paths.hpp"
#include "spinchain/sampling.hpp"
#include "spinchain/spectral.hpp"

namespace py = pybind11;
using namespace spinchain;

namespace {

model::SpinChain chain_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr,
                                  const std::string& bc) {
  if (arr.ndim() != 2) throw Error(Errc::InvalidConfig, "spin array must be L x N");
  const int L = static_cast<int>(arr.shape(0));
  const int n = static_cast<int>(arr.shape(1));
  model::SpinChain chain(n, L, model::bc_from_name(bc));
  auto r = arr.unchecked<2>();
  for (int i = 0; i < L; ++i) {
    Vec v(n);
    for (int k = 0; k < n; ++k) v[k] = r(i, k);
    chain.set_spin(i, geometry::retract(v));
  }
  return chain;
}

py::array_t<double> chain_to_array(const model::SpinChain& chain) {
  py::array_t<double> arr({chain.length(), chain.n_dim()});
  auto w = arr.mutable_unchecked<2>();
  for (int i = 0; i < chain.length(); ++i)
    for (int k = 0; k < chain.n_dim(); ++k) w(i, k) = chain.spin(i)[k];
  return arr;
}

py::dict record_to_dict(const dynamics::TrajectoryRecord& rec) {
  py::dict d;
  d["time"] = py::array_t<double>(py::ssize_t(rec.times.size()), rec.times.data());
  for (size_t c = 0; c < rec.names.size(); ++c)
    d[rec.names[c].c_str()] =
        py::array_t<double>(py::ssize_t(rec.columns[c].size()), rec.columns[c].data());
  return d;
}

}  // namespace

PYBIND11_MODULE(_spinchain, m) {
  m.doc() = "Langevin dynamics, sampling and relaxation-time toolkit for 1-d spin chains "
            "with spins on the sphere";

  py::class_<Rng>(m, "Rng")
      .def(py::init<uint64_t, uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
      .def("uniform", [](Rng& r) { return r.uniform(); })
      .def("gaussian", &Rng::gaussian);

  py::class_<model::SpinChain>(m, "SpinChain")
      .def(py::init([](py::array_t<double> arr, const std::string& bc) {
             return chain_from_array(arr, bc);
           }),
           py::arg("spins"), py::arg("bc") = "free")
      .def_static("aligned",
                  [](int n, int L, const std::string& bc) {
                    return model::SpinChain::aligned(n, L, model::bc_from_name(bc));
                  },
                  py::arg("n_dim"), py::arg("length"), py::arg("bc") = "free")
      .def_static("ring",
                  [](int L, int winding) {
                    return model::SpinChain::ring(L, winding, model::BoundaryCondition::Periodic);
                  },
                  py::arg("length"), py::arg("winding") = 1)
      .def_property_readonly("n_dim", &model::SpinChain::n_dim)
      .def_property_readonly("length", &model::SpinChain::length)
      .def_property_readonly("bc",
                             [](const model::SpinChain& c) { return model::bc_name(c.bc()); })
      .def("to_array", &chain_to_array)
      .def("to_json", &model::to_json_string)
      .def("to_bytes",
           [](const model::SpinChain& c) {
             std::ostringstream os(std::ios::binary);
             model::write_binary(os, c);
             return py::bytes(os.str());
           })
      .def_static("from_bytes", [](const py::bytes& b) {
        std::istringstream is(std::string(b), std::ios::binary);
        return model::read_binary(is);
      });

  m.def("energy", &model::energy);
  m.def("grad_energy", [](const model::SpinChain& c, int i) {
    const auto g = model::grad_energy(c, i);
    return py::array_t<double>(py::ssize_t(c.n_dim()), g.direction.data());
  });
  m.def("in_arctic", &model::in_arctic, py::arg("chain"),
        py::arg("threshold") = model::kArcticThreshold);
  m.def("relative_density_bound", &model::relative_density_bound);

  m.def("winding_number", &observables::winding_number);
  m.def("classify_bottleneck", [](const model::SpinChain& c, double delta) {
    const auto ev = observables::classify_bottleneck(c, delta);
    py::dict d;
    d["in_A_delta"] = ev.in_A_delta;
    d["in_B"] = ev.in_B;
    d["in_B0"] = ev.in_B0;
    d["in_B1"] = ev.in_B1;
    return d;
  });

  m.def("sample_theta",
        [](double a, double b, Rng& rng) { return sampling::sample_theta(a, b, rng); });
  m.def("sample_free_gibbs", &sampling::sample_free_gibbs, py::arg("n_dim"), py::arg("length"),
        py::arg("beta"), py::arg("rng"));
  m.def("sample_periodic_gibbs",
        [](int n, int L, double beta, Rng& rng, const std::string& method) {
          const auto ws = sampling::sample_periodic_gibbs(
              n, L, beta, rng,
              method == "mcmc" ? sampling::PeriodicMethod::MCMC
                               : sampling::PeriodicMethod::Reweight);
          return py::make_tuple(ws.chain, ws.log_weight);
        },
        py::arg("n_dim"), py::arg("length"), py::arg("beta"), py::arg("rng"),
        py::arg("method") = "reweight");

  m.def("langevin_step",
        [](const model::SpinChain& c, double beta, double dt, Rng& rng) {
          return dynamics::langevin_step(c, beta, dt, rng);
        });
  m.def("simulate",
        [](const model::SpinChain& start, double beta, double dt, double total_time,
           int record_stride, Rng& rng) {
          dynamics::IntegratorConfig cfg;
          cfg.dt = dt;
          cfg.record_stride = record_stride;
          std::vector<dynamics::NamedObservable> obs = {
              {"sbar_e1",
               [](const model::SpinChain& c) {
                 double s = 0.0;
                 for (int i = 0; i < c.length(); ++i) s += c.spin(i)[0];
                 return s / c.length();
               }},
              {"energy", [](const model::SpinChain& c) { return model::energy(c); }},
          };
          auto result = dynamics::simulate(start, beta, cfg, total_time, obs, rng);
          return py::make_tuple(record_to_dict(result.record), result.final_chain);
        },
        py::arg("start"), py::arg("beta"), py::arg("dt") = 1e-3, py::arg("total_time") = 1.0,
        py::arg("record_stride") = 10, py::arg("rng"));
  m.def("gradient_flow", &dynamics::gradient_flow, py::arg("start"), py::arg("total_time"),
        py::arg("dt") = 1e-2, py::arg("grad_tol") = 0.0);

  m.def("hitting_time_winding_flip",
        [](const model::SpinChain& start, double beta, double dt, double max_time, Rng& rng) {
          dynamics::IntegratorConfig cfg;
          cfg.dt = dt;
          const auto r = observables::hitting_time_winding_flip(start, beta, cfg, rng, max_time);
          return r.time ? py::object(py::float_(*r.time)) : py::object(py::none());
        },
        py::arg("start"), py::arg("beta"), py::arg("dt"), py::arg("max_time"), py::arg("rng"));

  m.def("autocorrelation_time",
        [](const std::vector<double>& series, const std::string& method) {
          const auto est = observables::autocorrelation_time(
              series, method == "integrated" ? observables::ActMethod::IntegratedACT
                                             : observables::ActMethod::ExpTailFit);
          py::dict d;
          d["tau"] = est.tau;
          d["ci_lo"] = est.ci.lo;
          d["ci_hi"] = est.ci.hi;
          d["degenerate"] = est.degenerate;
          return d;
        },
        py::arg("series"), py::arg("method") = "exp_tail");

  m.def("poincare_c1", &spectral::poincare_c1);
  m.def("poincare_c2", &spectral::poincare_c2);
  m.def("poincare_c3", &spectral::poincare_c3);
  m.def("gap_oracle_xy",
        [](int length, double beta, int grid, const std::string& bc) {
          const auto est = spectral::gap_oracle_xy(length, beta, grid, model::bc_from_name(bc));
          py::dict d;
          d["gap"] = est.value;
          d["ci_lo"] = est.ci.lo;
          d["ci_hi"] = est.ci.hi;
          return d;
        },
        py::arg("length"), py::arg("beta"), py::arg("grid"), py::arg("bc") = "periodic");
  m.def("gap_estimate_autocorr",
        [](const std::vector<std::vector<double>>& series, double dt_record, int n_dim, int length,
           double beta, const std::string& bc) {
          const auto est = spectral::gap_estimate_autocorr(series, dt_record, n_dim, length, beta,
                                                           model::bc_from_name(bc));
          py::dict d;
          d["gap"] = est.value;
          d["t_rel"] = 1.0 / est.value;
          d["ci_lo"] = est.ci.lo;
          d["ci_hi"] = est.ci.hi;
          return d;
        });

  m.def("pulling_flow", [](py::array_t<double> s, py::array_t<double> sp, double t) {
    const auto sv = Vec::from(std::span<const double>(s.data(), static_cast<size_t>(s.size())));
    const auto pv = Vec::from(std::span<const double>(sp.data(), static_cast<size_t>(sp.size())));
    const Vec out = paths::pulling_flow(sv, pv, t);
    return py::array_t<double>(py::ssize_t(out.dim()), out.data());
  });
  m.def("build_cover", [](double epsilon) {
    const auto cover = paths::build_cover(epsilon);
    py::dict d;
    d["epsilon"] = cover.epsilon;
    d["size"] = cover.points.size();
    d["c_cover"] = cover.c_cover;
    return d;
  });
  m.def("canonical_path_endpoint",
        [](const model::SpinChain& chain) {
          const paths::PathEpsilons eps;
          const auto cover = paths::build_cover(eps.cover);
          const auto [label, endpoint] = paths::full_path(chain, cover, 1.0, eps);
          return py::make_tuple(label.sigma, endpoint);
        },
        py::arg("chain"));
  m.def("certify_canonical_path",
        [](const model::SpinChain& chain, double beta, double mu_arctic) {
          const paths::PathEpsilons eps;
          const auto cover = paths::build_cover(eps.cover);
          const paths::CanonicalPath path(chain, cover, eps);
          const auto trace = paths::sample_path_trace(path, 100);
          const auto cert =
              paths::certify_path(trace, beta, mu_arctic, 2 * static_cast<int>(cover.points.size()));
          py::dict d;
          d["pass"] = cert.pass;
          d["endpoint_in_arctic"] = cert.endpoint_in_arctic;
          d["energy_pass"] = cert.energy_pass;
          d["speed_pass"] = cert.speed_pass;
          d["jacobian_pass"] = cert.jacobian_pass;
          d["log_jacobian"] = cert.final_log_jacobian;
          d["log_jacobian_budget"] = cert.log_jacobian_budget;
          d["implied_t_rel_bound"] = cert.implied_t_rel_bound;
          return d;
        },
        py::arg("chain"), py::arg("beta") = 8.0, py::arg("mu_arctic") = 1e-3);
  m.def("coplanarity_residual", &paths::coplanarity_residual);

  m.def("run_experiment", [](const std::string& config_json) {
    const auto cfg = experiments::parse_config(config_json);
    std::ostringstream log;
    const int rc = experiments::run(cfg, log);
    return py::make_tuple(rc, log.str());
  });

  m.attr("__version__") = "0.1.0";
}
