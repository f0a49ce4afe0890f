#include "agfra/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace agfra {

SolverDivergence::SolverDivergence(int layer_index)
    : std::runtime_error("solver produced a non-finite iterate at layer " +
                         std::to_string(layer_index)),
      layer(layer_index) {}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double theta) {
    if (theta < 0.0) throw std::invalid_argument("theta must be >= 0");
    Eigen::VectorXd out(x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double mag = std::abs(x[i]) - theta;
        out[i] = mag > 0.0 ? (x[i] > 0.0 ? mag : -mag) : 0.0;
    }
    return out;
}

Eigen::VectorXd age_gated_threshold(const Eigen::VectorXd& x, const AgeGate& gate, double theta) {
    if (gate.size() != x.size())
        throw std::invalid_argument("gate length must match vector length");
    Eigen::VectorXd out = soft_threshold(x, theta);
    for (int i = 0; i < out.size(); ++i)
        if (!gate.open[i]) out[i] = 0.0;
    return out;
}

SolverParams SolverParams::constant(double omega, double theta, int layers) {
    SolverParams params;
    params.omega = omega;
    params.thetas = Eigen::VectorXd::Constant(layers, theta);
    return params;
}

UnfoldKernel::UnfoldKernel(const Eigen::MatrixXd& pilot, double omega)
    : scaled_pilot_t_(omega * pilot.transpose()),
      gram_step_(Eigen::MatrixXd::Identity(pilot.cols(), pilot.cols()) -
                 scaled_pilot_t_ * pilot) {}

Eigen::VectorXd UnfoldKernel::bias(const Eigen::VectorXd& y) const {
    if (scaled_pilot_t_.cols() != y.size())
        throw std::invalid_argument("measurement length must match pilot rows");
    return scaled_pilot_t_ * y;
}

Eigen::VectorXd UnfoldKernel::run(const Eigen::VectorXd& bias_vec, const AgeGate& gate,
                                  const SolverParams& params, ForwardTrace* trace) const {
    if (gram_step_.cols() != gate.size())
        throw std::invalid_argument("gate length must match device count");

    Eigen::VectorXd h = Eigen::VectorXd::Zero(gram_step_.cols());
    if (trace) {
        trace->iterates.clear();
        trace->preactivations.clear();
        trace->iterates.push_back(h);
    }
    for (int l = 0; l < params.layers(); ++l) {
        Eigen::VectorXd v = bias_vec + gram_step_ * h;
        h = age_gated_threshold(v, gate, params.thetas[l]);
        if (!h.allFinite()) throw SolverDivergence(l);
        if (trace) {
            trace->preactivations.push_back(std::move(v));
            trace->iterates.push_back(h);
        }
    }
    return h;
}

Eigen::VectorXd ista_solve(const Eigen::MatrixXd& pilot, const Eigen::VectorXd& y,
                           double omega, double theta, int iters) {
    const UnfoldKernel kernel(pilot, omega);
    return kernel.run(kernel.bias(y), AgeGate::opened(static_cast<int>(pilot.cols())),
                      SolverParams::constant(omega, theta, iters), nullptr);
}

Eigen::VectorXd lista_age_forward(const Eigen::MatrixXd& pilot, const Eigen::VectorXd& y,
                                  const AgeGate& gate, const SolverParams& params,
                                  ForwardTrace* trace) {
    const UnfoldKernel kernel(pilot, params.omega);
    return kernel.run(kernel.bias(y), gate, params, trace);
}

double default_step_size(const Eigen::MatrixXd& pilot) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pilot.transpose() * pilot);
    return 1.0 / eig.eigenvalues().maxCoeff();
}

DetectionResult detect(const Eigen::VectorXd& estimate, const SparseChannelVector& truth,
                       const ActivityMask& mask, const SystemConfig& cfg) {
    if (estimate.size() != truth.values.size())
        throw std::invalid_argument("estimate length must match truth length");

    DetectionResult result;
    result.estimate = make_sparse(estimate);
    for (int i = 0; i < estimate.size(); ++i)
        if (std::abs(estimate[i]) > cfg.support_tol) result.estimated_support.push_back(i);

    result.per_device_success.assign(static_cast<std::size_t>(estimate.size()), 0);
    auto is_active = [&](int i) {
        return i < cfg.n_alarm ? mask.alarm_active[i] != 0
                               : mask.monitor_active[i - cfg.n_alarm] != 0;
    };
    // Success needs the device to show up in the read support, not merely a
    // small error: a zero estimate must never detect anybody.
    for (int i = 0; i < estimate.size(); ++i) {
        if (is_active(i) && std::abs(estimate[i]) > cfg.support_tol &&
            std::abs(truth.values[i] - estimate[i]) <= cfg.detect_tol)
            result.per_device_success[i] = 1;
    }
    return result;
}

std::optional<double> detection_rate(const DetectionResult& result,
                                     const std::vector<int>& true_alarm_support) {
    if (true_alarm_support.empty()) return std::nullopt;
    int hits = 0;
    for (int n : true_alarm_support) {
        const bool in_support = std::binary_search(result.estimated_support.begin(),
                                                   result.estimated_support.end(), n);
        if (in_support && result.per_device_success[n]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(true_alarm_support.size());
}

}  // namespace agfra
