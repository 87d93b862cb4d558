#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fedhybrid/experiment.hpp"
#include "fedhybrid/reference.hpp"
#include "fedhybrid/theory.hpp"

namespace py = pybind11;
using namespace fedhybrid;

namespace {

ProblemInstance quadratic_problem(const std::vector<std::pair<Matrix, Vector>>& clients,
                                  double ridge_share, double mu) {
  std::vector<ObjectivePtr> objs;
  for (const auto& [a, b] : clients) {
    objs.push_back(std::make_shared<QuadraticObjective>(a, b, ridge_share));
  }
  return ProblemInstance(objs, mu);
}

ProblemInstance logistic_problem(const std::vector<std::pair<Matrix, Vector>>& clients,
                                 double ridge_share, double mu) {
  std::vector<ObjectivePtr> objs;
  for (const auto& [x, y] : clients) {
    objs.push_back(std::make_shared<LogisticObjective>(x, y, ridge_share));
  }
  return ProblemInstance(objs, mu);
}

ExperimentConfig config_from(const std::optional<std::string>& path,
                             const std::map<std::string, std::string>& overrides) {
  ExperimentConfig c = path ? load_config(*path) : ExperimentConfig{};
  for (const auto& [k, v] : overrides) apply_setting(c, k, v);
  return c;
}

std::vector<UpdateKind> kinds_for(std::size_t n, const std::vector<std::size_t>& newton) {
  return kinds_with_newton(n, newton);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid primal-dual consensus optimization";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<NotStronglyConvex>(m, "NotStronglyConvex", PyExc_ValueError);

  py::enum_<UpdateKind>(m, "UpdateKind")
      .value("Gradient", UpdateKind::Gradient)
      .value("Newton", UpdateKind::Newton);

  py::class_<Curvature>(m, "Curvature")
      .def_readonly("m", &Curvature::m)
      .def_readonly("l", &Curvature::l)
      .def("__repr__", [](const Curvature& c) {
        return "Curvature(m=" + std::to_string(c.m) + ", l=" + std::to_string(c.l) + ")";
      });

  py::class_<ProblemInstance>(m, "Problem")
      .def_property_readonly("clients", &ProblemInstance::clients)
      .def_property_readonly("dimension", &ProblemInstance::dimension)
      .def_property_readonly("mu", &ProblemInstance::mu)
      .def_property_readonly("curvatures", &ProblemInstance::curvatures)
      .def_property_readonly("global_curvature", &ProblemInstance::global_curvature)
      .def_property_readonly("all_quadratic", &ProblemInstance::all_quadratic)
      .def("with_mu", &ProblemInstance::with_mu, py::arg("mu"))
      .def("value", &ProblemInstance::total_value, py::arg("x"))
      .def("gradient", &ProblemInstance::total_gradient, py::arg("x"))
      .def("hessian", &ProblemInstance::total_hessian, py::arg("x"))
      .def("client_value",
           [](const ProblemInstance& p, std::size_t i, const Vector& x) {
             return p.objective(i).value(x);
           })
      .def("client_gradient",
           [](const ProblemInstance& p, std::size_t i, const Vector& x) {
             return p.objective(i).gradient(x);
           })
      .def("client_samples",
           [](const ProblemInstance& p, std::size_t i) { return p.objective(i).sample_count(); });

  m.def("quadratic_problem", &quadratic_problem, py::arg("clients"), py::arg("ridge_share"),
        py::arg("mu"),
        "Least squares: clients is a list of (A, b); f_i = |A x - b|^2/(2N) + ridge/2 |x|^2");
  m.def("logistic_problem", &logistic_problem, py::arg("clients"), py::arg("ridge_share"),
        py::arg("mu"), "Logistic loss: clients is a list of (X, y) with y in {0, 1}");
  m.def(
      "problem_from_config",
      [](const std::optional<std::string>& path, const std::map<std::string, std::string>& set) {
        return build_problem(config_from(path, set));
      },
      py::arg("path") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{});

  py::class_<OptimumCertificate>(m, "Optimum")
      .def_readonly("omega", &OptimumCertificate::omega)
      .def_readonly("lam", &OptimumCertificate::lambda)
      .def_readonly("f_star", &OptimumCertificate::f_star)
      .def_readonly("residual", &OptimumCertificate::residual);
  m.def("kkt_optimum", [](const ProblemInstance& p) { return kkt_optimum(p); }, py::arg("problem"));

  py::class_<PrimalPoint>(m, "PrimalPoint")
      .def_readonly("x0", &PrimalPoint::x0)
      .def_readonly("x", &PrimalPoint::x);
  m.def("inner_argmin",
        [](const Blocks& l, const ProblemInstance& p, double mu) { return inner_argmin(l, p, mu); },
        py::arg("lam"), py::arg("problem"), py::arg("mu"));
  m.def("dual_value",
        [](const Blocks& l, const ProblemInstance& p, double mu) { return dual_value(l, p, mu); },
        py::arg("lam"), py::arg("problem"), py::arg("mu"));
  m.def("aug_lagrangian", &aug_lagrangian, py::arg("problem"), py::arg("x0"), py::arg("x"),
        py::arg("lam"), py::arg("mu"));
  m.def("dual_gradient", &dual_grad_formula, py::arg("lam"), py::arg("problem"), py::arg("mu"));
  m.def("dual_hessian", &dual_hessian_formula, py::arg("lam"), py::arg("problem"),
        py::arg("mu"));

  py::class_<StepsizePlan>(m, "StepsizePlan")
      .def_readonly("kinds", &StepsizePlan::kinds)
      .def_readonly("a", &StepsizePlan::a)
      .def_readonly("b", &StepsizePlan::b)
      .def_property_readonly("auto", [](const StepsizePlan& p) {
        return p.mode == StepsizeMode::Auto;
      });
  m.def(
      "safe_stepsizes",
      [](const ProblemInstance& p, const std::vector<std::size_t>& newton) {
        return safe_stepsizes(p.curvatures(), p.mu(), kinds_for(p.clients(), newton));
      },
      py::arg("problem"), py::arg("newton") = std::vector<std::size_t>{},
      "Largest convergence-safe stepsizes; newton lists 0-based Newton clients");
  m.def(
      "manual_plan",
      [](std::size_t n, const std::vector<std::size_t>& newton, std::vector<double> a,
         std::vector<double> b) { return manual_plan(kinds_for(n, newton), a, b); },
      py::arg("clients"), py::arg("newton"), py::arg("a"), py::arg("b"));

  py::class_<RateConstants>(m, "RateConstants")
      .def_readonly("m", &RateConstants::m)
      .def_readonly("l", &RateConstants::l)
      .def_readonly("alpha_min", &RateConstants::alpha_min)
      .def_readonly("beta_min", &RateConstants::beta_min)
      .def_readonly("beta", &RateConstants::beta)
      .def_readonly("kappa", &RateConstants::kappa)
      .def_readonly("rho", &RateConstants::rho)
      .def_readonly("rho_theorem", &RateConstants::rho_theorem);
  m.def(
      "rate",
      [](const StepsizePlan& plan, const ProblemInstance& p) {
        return rate_rho(plan, p.curvatures(), p.mu());
      },
      py::arg("plan"), py::arg("problem"));

  py::class_<Iterate>(m, "Iterate")
      .def_readonly("x0", &Iterate::x0)
      .def_readonly("x", &Iterate::x)
      .def_readonly("lam", &Iterate::lambda);
  py::class_<Snapshot>(m, "Snapshot")
      .def_readonly("k", &Snapshot::k)
      .def_readonly("state", &Snapshot::state)
      .def_readonly("uplink_bytes", &Snapshot::uplink_bytes)
      .def_readonly("downlink_bytes", &Snapshot::downlink_bytes);
  m.def(
      "run",
      [](const ProblemInstance& p, const StepsizePlan& plan, std::size_t iterations,
         std::size_t cadence, unsigned threads) {
        RunOptions o;
        o.cadence = cadence;
        o.threads = threads;
        py::gil_scoped_release release;
        return run(p, plan, iterations, o).snapshots;
      },
      py::arg("problem"), py::arg("plan"), py::arg("iterations"), py::arg("cadence") = 1,
      py::arg("threads") = 1, "Snapshots at k = 0 and every multiple of cadence");

  py::class_<IterateRecord>(m, "Record")
      .def_readonly("k", &IterateRecord::k)
      .def_readonly("delta_lambda", &IterateRecord::delta_lambda)
      .def_readonly("delta_x", &IterateRecord::delta_x)
      .def_readonly("delta", &IterateRecord::delta)
      .def_readonly("consensus_err", &IterateRecord::consensus_err)
      .def_readonly("primal_grad_norm", &IterateRecord::primal_grad_norm)
      .def_readonly("fun_gap", &IterateRecord::fun_gap);
  m.def(
      "tracking_errors",
      [](const Iterate& it, const OptimumCertificate& c, const ProblemInstance& p) {
        return tracking_errors(it, c, p, p.mu());
      },
      py::arg("iterate"), py::arg("optimum"), py::arg("problem"));

  m.def(
      "mm_step",
      [](const Blocks& l, const ProblemInstance& p, const std::string& rule, double beta) {
        if (rule != "newton" && rule != "gradient") {
          throw InvalidArgument("rule must be 'newton' or 'gradient'");
        }
        const DualRule r = rule == "newton" ? DualRule{NewtonRule{beta}}
                                            : DualRule{GradientAscentRule{beta}};
        const auto s = mm_step(l, p, p.mu(), r);
        return py::make_tuple(s.inner, s.lambda);
      },
      py::arg("lam"), py::arg("problem"), py::arg("rule") = "newton", py::arg("beta") = 1.0,
      "One method-of-multipliers step; returns (inner minimizer, new multipliers)");

  m.def(
      "fedavg",
      [](const ProblemInstance& p, double eta, std::size_t rounds, const Vector& omega0,
         std::size_t local_steps, bool uniform) {
        FedAvgOptions o;
        o.eta = eta;
        o.local_steps = local_steps;
        o.weighting = uniform ? FedAvgWeighting::Uniform : FedAvgWeighting::SampleCount;
        std::vector<Vector> out;
        for (const auto& s : fedavg_run(p, o, rounds, omega0).snapshots) out.push_back(s.omega);
        return out;
      },
      py::arg("problem"), py::arg("eta"), py::arg("rounds"), py::arg("omega0"),
      py::arg("local_steps") = 1, py::arg("uniform") = false,
      "Server models omega^0 .. omega^rounds");

  py::class_<CheckResult>(m, "Check")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("passed", &CheckResult::pass)
      .def_readonly("first_violation", &CheckResult::first_violation)
      .def_readonly("max_excess", &CheckResult::max_excess)
      .def_readonly("checked", &CheckResult::checked);
  py::class_<Report>(m, "Report")
      .def_readonly("checks", &Report::checks)
      .def_property_readonly("passed", &Report::pass)
      .def("__str__", &Report::to_text);
  m.def("curvature_check", &curvature_check, py::arg("problem"), py::arg("mu"),
        py::arg("samples"), py::arg("seed") = 1, py::arg("tol") = 1e-8);
  m.def("lemma1_check", &lemma1_check, py::arg("problem"), py::arg("mu"), py::arg("samples"),
        py::arg("seed") = 1);
  m.def(
      "descent_monitors",
      [](const ProblemInstance& p, const StepsizePlan& plan,
         const std::vector<Snapshot>& trace) {
        return descent_monitors(trace, plan, rate_rho(plan, p.curvatures(), p.mu()), p,
                                kkt_optimum(p));
      },
      py::arg("problem"), py::arg("plan"), py::arg("trace"),
      "Descent inequalities along a trace of consecutive rounds");

  m.def(
      "run_experiment",
      [](const std::optional<std::string>& path, const std::map<std::string, std::string>& set,
         unsigned threads) {
        const auto c = config_from(path, set);
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          run_experiment(c, threads, log);
        }
        return log.str();
      },
      py::arg("path") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("threads") = 1, "Write <method>.csv and manifest.json; returns the progress log");
  m.def(
      "verify_experiment",
      [](const std::optional<std::string>& path, const std::map<std::string, std::string>& set,
         unsigned threads) { return verify_experiment(config_from(path, set), threads); },
      py::arg("path") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("threads") = 1);
}
