#pragma once

#include <Eigen/Dense>
#include <deque>
#include <filesystem>
#include <vector>

#include "agfra/model.hpp"
#include "agfra/solvers.hpp"

namespace agfra {

struct TrainConfig {
    int batch_size = 64;
    double lr0 = 1e-3;
    int plateau_patience = 500;          // steps without a new moving-average low
    std::vector<double> decay_factors{0.5, 0.1, 0.01};  // applied to lr0, at most once each
    int layers = 15;
    bool stagewise = true;
    int stage_steps = 150;               // greedy steps per layer when stagewise
    int steps = 4000;                    // joint fine-tune steps
    bool train_pilot = true;             // autoencoder: learn P; else P stays fixed
    bool use_gate = true;                // feed the age gate to the decoder

    void validate() const;
};

struct AdamMoments {
    Eigen::MatrixXd pilot_m, pilot_v;
    double omega_m = 0.0, omega_v = 0.0;
    Eigen::VectorXd theta_m, theta_v;
    long step = 0;
};

struct TrainState {
    Eigen::MatrixXd pilot;
    double omega = 1.0;
    Eigen::VectorXd thetas;
    AdamMoments adam;
    long step = 0;        // fine-tune steps taken
    double lr = 1e-3;
    int decays_applied = 0;
    double best_moving_avg = kInf;
    int steps_since_best = 0;
    std::deque<double> loss_window;  // last <=100 fine-tune losses
    Rng rng;

    int layers() const { return static_cast<int>(thetas.size()); }
    long parameter_count() const;
};

struct BatchItem {
    SparseChannelVector truth;
    Eigen::VectorXi ages;
    AgeGate gate;
    Eigen::VectorXd measurement;
};

// Ages are uniform on {1..age_max}; activity and channels follow
// generate_instance; measurements use the supplied pilot.
std::vector<BatchItem> make_batch(const SystemConfig& cfg, const Eigen::MatrixXd& pilot,
                                  int batch, Rng& rng);

// Sum over the batch of squared l2 estimation errors.
double loss(const std::vector<Eigen::VectorXd>& estimates,
            const std::vector<Eigen::VectorXd>& truths);

struct Gradients {
    Eigen::MatrixXd pilot;
    double omega = 0.0;
    Eigen::VectorXd thetas;

    static Gradients zero(int pilot_rows, int pilot_cols, int layers);
    void accumulate(const Gradients& other);
};

// Exact reverse-mode gradient of ||h^L - h*||^2 through the unfolded decoder
// for a single instance. P contributes through every layer (P^T y and
// I - omega P^T P) and through the encoder path y = P h* + n; the noise
// sample itself carries no gradient. The soft-threshold subgradient is taken
// as 0 at kinks and at gated coordinates. The gate must be the one the
// forward pass ran with.
Gradients backward(const Eigen::MatrixXd& pilot, double omega, const Eigen::VectorXd& thetas,
                   const SparseChannelVector& truth, const AgeGate& gate,
                   const Eigen::VectorXd& measurement, const ForwardTrace& trace);

// Fresh state: Gaussian column-normalized pilot, thetas = 0.1,
// omega = 1/lambda_max(P^T P).
TrainState init_train_state(const SystemConfig& cfg, const TrainConfig& tcfg);

struct TrainResult {
    TrainState state;
    std::vector<double> loss_history;  // greedy stage losses, then fine-tune losses
};

// Online training: greedy layer-by-layer warmup (thetas and omega only, at
// growing depth), then joint fine-tuning of all parameters with the plateau
// learning-rate schedule and pilot re-normalization after every step.
TrainResult train(const SystemConfig& cfg, const TrainConfig& tcfg);

// Continues joint fine-tuning on an existing state; appends to history.
void fine_tune(TrainState& state, const SystemConfig& cfg, const TrainConfig& tcfg,
               int steps, std::vector<double>& history);

// Versioned JSON checkpoint holding the full state (parameters, moments,
// schedule bookkeeping, RNG), plus the configs for resuming.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const SystemConfig& cfg, const TrainConfig& tcfg);

struct Checkpoint {
    TrainState state;
    SystemConfig system;
    TrainConfig train;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

// One ADAM update of a scalar parameter (beta1 = 0.9, beta2 = 0.999,
// eps = 1e-8, bias-corrected); t counts updates starting at 1. The trainer
// applies this rule to every parameter coordinate.
void adam_step_scalar(double& param, double grad, double& m, double& v, double lr, long t);

struct GradCheckResult {
    double pilot_rel_error = 0.0;
    double omega_rel_error = 0.0;
    double theta_rel_error = 0.0;  // worst layer
    double max_rel_error = 0.0;
};

// Central-difference validation of backward() on a random gated instance.
GradCheckResult gradient_check(int total_devices, int pilot_len, int layers,
                               std::uint64_t seed, double fd_step = 1e-6);

}  // namespace agfra
