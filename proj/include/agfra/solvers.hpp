#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

#include "agfra/types.hpp"

namespace agfra {

// Thrown when an iterate turns non-finite; layer reports where.
struct SolverDivergence : std::runtime_error {
    int layer;
    explicit SolverDivergence(int layer_index);
};

// sign(x) * max(|x| - theta, 0), elementwise.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double theta);

// Soft threshold with closed gate coordinates forced to exactly zero.
Eigen::VectorXd age_gated_threshold(const Eigen::VectorXd& x, const AgeGate& gate, double theta);

struct SolverParams {
    double omega = 1.0;
    Eigen::VectorXd thetas;  // one threshold per layer

    int layers() const { return static_cast<int>(thetas.size()); }
    static SolverParams constant(double omega, double theta, int layers);
};

// Per-layer iterates kept for the trainer and the theory checker.
struct ForwardTrace {
    std::vector<Eigen::VectorXd> iterates;        // h^0 .. h^L
    std::vector<Eigen::VectorXd> preactivations;  // v^0 .. v^{L-1}
};

// The layer map v = omega P^T y + (I - omega P^T P) h with the Gram part
// precomputed, so one kernel serves a whole batch sharing (P, omega). Every
// solver below runs through it, which is what makes an all-open gate with a
// constant schedule reproduce ISTA bit for bit.
class UnfoldKernel {
public:
    UnfoldKernel(const Eigen::MatrixXd& pilot, double omega);

    Eigen::VectorXd bias(const Eigen::VectorXd& y) const;  // omega P^T y
    Eigen::VectorXd run(const Eigen::VectorXd& bias_vec, const AgeGate& gate,
                        const SolverParams& params, ForwardTrace* trace = nullptr) const;
    const Eigen::MatrixXd& gram_step() const { return gram_step_; }

private:
    Eigen::MatrixXd scaled_pilot_t_;  // omega P^T
    Eigen::MatrixXd gram_step_;       // I - omega P^T P
};

// Classical ISTA from h^0 = 0: h <- soft_threshold(omega P^T y + (I - omega P^T P) h).
// Descent is guaranteed for omega <= 1/lambda_max(P^T P); not enforced.
Eigen::VectorXd ista_solve(const Eigen::MatrixXd& pilot, const Eigen::VectorXd& y,
                           double omega, double theta, int iters);

// Unfolded age-gated decoder: layer l applies the gated threshold with
// theta^l. Pass a trace pointer to retain all intermediates.
Eigen::VectorXd lista_age_forward(const Eigen::MatrixXd& pilot, const Eigen::VectorXd& y,
                                  const AgeGate& gate, const SolverParams& params,
                                  ForwardTrace* trace = nullptr);

// 1 / lambda_max(P^T P), the standard convergent step size.
double default_step_size(const Eigen::MatrixXd& pilot);

struct DetectionResult {
    std::vector<int> estimated_support;           // |estimate| > support_tol
    SparseChannelVector estimate;
    // active, in the read support, and |err| <= detect_tol
    std::vector<std::uint8_t> per_device_success;
};

DetectionResult detect(const Eigen::VectorXd& estimate, const SparseChannelVector& truth,
                       const ActivityMask& mask, const SystemConfig& cfg);

// Fraction of truly active ADs that appear in the estimated support and pass
// the detect_tol test. Undefined (nullopt) when no AD is active.
std::optional<double> detection_rate(const DetectionResult& result,
                                     const std::vector<int>& true_alarm_support);

}  // namespace agfra
