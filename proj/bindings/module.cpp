#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "agfra/access.hpp"
#include "agfra/model.hpp"
#include "agfra/sim.hpp"
#include "agfra/solvers.hpp"
#include "agfra/theory.hpp"
#include "agfra/trainer.hpp"

namespace py = pybind11;
using namespace agfra;

namespace {

AgeGate gate_from_bools(const std::vector<bool>& open) {
    AgeGate gate;
    gate.open.assign(open.begin(), open.end());
    return gate;
}

SolverParams make_params(double omega, const Eigen::VectorXd& thetas) {
    SolverParams params;
    params.omega = omega;
    params.thetas = thetas;
    return params;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "age-aware grant-free random access: solvers, access optimization, "
              "training and closed-loop simulation";

    py::class_<SystemConfig>(m, "SystemConfig")
        .def(py::init([](int n_alarm, int n_monitor, int pilot_len, double snr_db,
                         double ad_active_prob, int age_max, double access_prob,
                         int age_threshold, double detect_tol, double support_tol,
                         std::uint64_t seed) {
                 SystemConfig cfg;
                 cfg.n_alarm = n_alarm;
                 cfg.n_monitor = n_monitor;
                 cfg.pilot_len = pilot_len;
                 cfg.snr_db = snr_db;
                 cfg.ad_active_prob = ad_active_prob;
                 cfg.age_max = age_max;
                 cfg.access_prob = access_prob;
                 cfg.age_threshold = age_threshold;
                 cfg.detect_tol = detect_tol;
                 cfg.support_tol = support_tol;
                 cfg.seed = seed;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("n_alarm"), py::arg("n_monitor"), py::arg("pilot_len"),
             py::arg("snr_db") = 20.0, py::arg("ad_active_prob") = 0.05,
             py::arg("age_max") = 100, py::arg("access_prob") = 0.05,
             py::arg("age_threshold") = 29, py::arg("detect_tol") = 0.1,
             py::arg("support_tol") = 1e-3, py::arg("seed") = 1)
        .def_readonly("n_alarm", &SystemConfig::n_alarm)
        .def_readonly("n_monitor", &SystemConfig::n_monitor)
        .def_readonly("pilot_len", &SystemConfig::pilot_len)
        .def_readonly("age_threshold", &SystemConfig::age_threshold)
        .def_readonly("access_prob", &SystemConfig::access_prob)
        .def_property_readonly("total_devices", &SystemConfig::total_devices);

    // access optimization
    m.def("avg_aoi", &avg_aoi, py::arg("delta"), py::arg("p"), py::arg("q"),
          "stationary average AoI of the age-based access chain");
    m.def("s_max", &s_max, py::arg("pilot_len"), py::arg("total_devices"),
          "largest decodable sparsity for a pilot length");
    m.def("success_rate", &success_rate, py::arg("delta"), py::arg("p"), py::arg("n_monitor"),
          py::arg("age_max"), py::arg("n_alarm_active"), py::arg("pilot_len"),
          py::arg("total_devices"));
    m.def(
        "optimize_access",
        [](int n_monitor, int age_max, int n_alarm_active, int pilot_len, int total_devices,
           double p_step, int delta_max) {
            GridSpec grid;
            grid.p_step = p_step;
            grid.delta_max = delta_max;
            const auto best =
                optimize_access(grid, n_monitor, age_max, n_alarm_active, pilot_len, total_devices);
            if (!best) throw std::runtime_error("no feasible access point on the grid");
            return py::make_tuple(best->delta, best->p, best->q, best->avg_aoi);
        },
        py::arg("n_monitor"), py::arg("age_max"), py::arg("n_alarm_active"),
        py::arg("pilot_len"), py::arg("total_devices"), py::arg("p_step") = 0.01,
        py::arg("delta_max") = 100,
        "grid search; returns (delta, p, q, avg_aoi)");

    // pilots and encoding
    m.def(
        "gaussian_pilot",
        [](int pilot_len, int total_devices, std::uint64_t seed) {
            Rng rng = make_stream(seed);
            return gaussian_pilot(pilot_len, total_devices, rng);
        },
        py::arg("pilot_len"), py::arg("total_devices"), py::arg("seed") = 0);
    m.def(
        "normalize_columns",
        [](Eigen::MatrixXd matrix) {
            normalize_columns(matrix);
            return matrix;
        },
        py::arg("matrix"));
    m.def(
        "encode",
        [](const Eigen::MatrixXd& pilot, const Eigen::VectorXd& channel, double sigma,
           std::uint64_t seed) {
            Rng rng = make_stream(seed);
            return encode(pilot, channel, sigma, rng);
        },
        py::arg("pilot"), py::arg("channel"), py::arg("sigma") = 0.0, py::arg("seed") = 0);

    // solvers
    m.def("soft_threshold", &soft_threshold, py::arg("x"), py::arg("theta"));
    m.def(
        "age_gated_threshold",
        [](const Eigen::VectorXd& x, const std::vector<bool>& gate, double theta) {
            return age_gated_threshold(x, gate_from_bools(gate), theta);
        },
        py::arg("x"), py::arg("gate"), py::arg("theta"));
    m.def("ista_solve", &ista_solve, py::arg("pilot"), py::arg("y"), py::arg("omega"),
          py::arg("theta"), py::arg("iters"));
    m.def("default_step_size", &default_step_size, py::arg("pilot"));
    m.def(
        "lista_age_forward",
        [](const Eigen::MatrixXd& pilot, const Eigen::VectorXd& y, const std::vector<bool>& gate,
           double omega, const Eigen::VectorXd& thetas, bool return_trace) {
            ForwardTrace trace;
            const Eigen::VectorXd estimate = lista_age_forward(
                pilot, y, gate_from_bools(gate), make_params(omega, thetas),
                return_trace ? &trace : nullptr);
            if (!return_trace) return py::object(py::cast(estimate));
            py::list iterates;
            for (const auto& it : trace.iterates) iterates.append(it);
            return py::object(py::make_tuple(estimate, iterates));
        },
        py::arg("pilot"), py::arg("y"), py::arg("gate"), py::arg("omega"), py::arg("thetas"),
        py::arg("return_trace") = false);

    // coherence and certification
    py::class_<CoherenceReport>(m, "CoherenceReport")
        .def_readonly("mu1", &CoherenceReport::mu1)
        .def_readonly("mu2", &CoherenceReport::mu2)
        .def_readonly("c_p", &CoherenceReport::c_p)
        .def_readonly("rate_c", &CoherenceReport::rate_c)
        .def_readonly("error_const", &CoherenceReport::error_const)
        .def_readonly("s_admissible", &CoherenceReport::s_admissible);
    m.def(
        "coherence",
        [](const Eigen::MatrixXd& pilot, const std::vector<int>& gated, int sparsity) {
            return coherence(pilot, gated, sparsity);
        },
        py::arg("pilot"), py::arg("gated") = std::vector<int>{}, py::arg("sparsity") = 2);
    m.def(
        "certify",
        [](int total_devices, int pilot_len, int sparsity, double bound_b, double noise_l1,
           double gated_fraction, int n_instances, int layers, std::uint64_t seed) {
            Rng rng = make_stream(seed);
            const CertProblem prob = make_cert_problem(
                total_devices, pilot_len, sparsity, bound_b, noise_l1, gated_fraction,
                n_instances, 500, rng);
            const CertReport rep = certify_bound(prob.pilot, prob.gated, prob.data, prob.h, layers);
            py::list margins;
            for (const LayerCert& layer : rep.layers) margins.append(layer.margin);
            py::dict out;
            out["passed"] = rep.passed();
            out["support_inclusion"] = rep.support_inclusion_ok;
            out["l1_recursion"] = rep.l1_recursion_ok;
            out["margins"] = margins;
            out["mu1"] = rep.coh.mu1;
            out["mu2"] = rep.coh.mu2;
            out["rate_c"] = rep.coh.rate_c;
            out["error_const"] = rep.coh.error_const;
            return out;
        },
        py::arg("total_devices"), py::arg("pilot_len"), py::arg("sparsity"),
        py::arg("bound_b") = 1.0, py::arg("noise_l1") = 0.0, py::arg("gated_fraction") = 0.0,
        py::arg("n_instances") = 20, py::arg("layers") = 15, py::arg("seed") = 7);

    // training
    py::class_<TrainState>(m, "TrainState")
        .def_readonly("pilot", &TrainState::pilot)
        .def_readonly("omega", &TrainState::omega)
        .def_readonly("thetas", &TrainState::thetas)
        .def_readonly("step", &TrainState::step)
        .def_property_readonly("parameter_count", &TrainState::parameter_count);
    m.def(
        "train",
        [](const SystemConfig& cfg, int layers, int steps, int stage_steps, bool stagewise,
           bool train_pilot, bool use_gate, int batch_size, double lr0) {
            TrainConfig tcfg;
            tcfg.layers = layers;
            tcfg.steps = steps;
            tcfg.stage_steps = stage_steps;
            tcfg.stagewise = stagewise;
            tcfg.train_pilot = train_pilot;
            tcfg.use_gate = use_gate;
            tcfg.batch_size = batch_size;
            tcfg.lr0 = lr0;
            TrainResult result = train(cfg, tcfg);
            return py::make_tuple(result.state, result.loss_history);
        },
        py::arg("config"), py::arg("layers") = 15, py::arg("steps") = 4000,
        py::arg("stage_steps") = 150, py::arg("stagewise") = true, py::arg("train_pilot") = true,
        py::arg("use_gate") = true, py::arg("batch_size") = 64, py::arg("lr0") = 1e-3,
        "online training; returns (state, loss_history)");
    m.def(
        "gradient_check",
        [](int total_devices, int pilot_len, int layers, std::uint64_t seed) {
            const GradCheckResult res = gradient_check(total_devices, pilot_len, layers, seed);
            return py::make_tuple(res.pilot_rel_error, res.omega_rel_error, res.theta_rel_error);
        },
        py::arg("total_devices") = 12, py::arg("pilot_len") = 8, py::arg("layers") = 3,
        py::arg("seed") = 1);

    // closed-loop simulation with a trained state
    m.def(
        "simulate",
        [](const SystemConfig& cfg, const TrainState& state, bool gated, long horizon,
           long warmup, std::uint64_t seed) {
            sim::Scheme scheme;
            scheme.name = gated ? "lista-age" : "lista";
            scheme.use_ara = true;
            scheme.gate_decoder = gated;
            scheme.pilot = state.pilot;
            scheme.estimator = sim::lista_estimator(make_params(state.omega, state.thetas), gated);
            Rng rng = make_stream(seed);
            const sim::RunResult result = sim::run(scheme, cfg, horizon, warmup, rng, false);
            py::dict out;
            out["stationary_avg_aoi"] = result.summary.stationary_avg_aoi;
            out["mean_ad_detect_rate"] = result.summary.mean_ad_detect_rate;
            out["defined_ad_slots"] = result.summary.defined_ad_slots;
            return out;
        },
        py::arg("config"), py::arg("state"), py::arg("gated") = true, py::arg("horizon") = 3000,
        py::arg("warmup") = 600, py::arg("seed") = 1);
}
