#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "agfra/model.hpp"
#include "agfra/solvers.hpp"

namespace agfra {
namespace sim {

// Channel estimator plugged into the loop. The gate reflects the live ages
// when the scheme gates its decoder, and is all-open otherwise.
using Estimator = std::function<Eigen::VectorXd(
    const Eigen::MatrixXd& pilot, const Eigen::VectorXd& y, const AgeGate& gate)>;

struct Scheme {
    std::string name;
    bool use_ara = true;       // MDs transmit only when age > threshold
    bool gate_decoder = false; // requires use_ara
    Eigen::MatrixXd pilot;
    Estimator estimator;
};

struct SlotRecord {
    long t = 0;
    int n_active_ad = 0;
    int n_active_md = 0;
    double ad_detect_rate = 0.0;  // valid only when ad_rate_defined
    bool ad_rate_defined = false; // false when no AD was active
    int md_successes = 0;
    double avg_aoi = 0.0;         // mean MD age during the slot
};

struct RunSummary {
    double stationary_avg_aoi = 0.0;   // post-warmup mean over MDs and slots
    double mean_ad_detect_rate = 0.0;  // post-warmup mean over defined slots
    long horizon = 0;
    long warmup = 0;
    long defined_ad_slots = 0;
};

struct RunResult {
    std::vector<SlotRecord> slots;
    RunSummary summary;
};

struct SimState {
    Eigen::VectorXi ages;  // one entry per MD, all >= 1

    static SimState fresh(int n_monitor);
};

// One slot: activity draw, encoding, estimation, detection, AoI update.
// Solver divergence is caught and the slot counted as all-fail.
SlotRecord step(SimState& state, const Scheme& scheme, const SystemConfig& cfg, Rng& rng);

// Closed loop from all-ones ages. keep_slots=false drops the per-slot
// series (long Monte-Carlo runs) and returns the summary only.
RunResult run(const Scheme& scheme, const SystemConfig& cfg, long horizon, long warmup,
              Rng& rng, bool keep_slots = true);

// Ready-made estimators.
Estimator ista_estimator(double omega, double theta, int iters);     // omega <= 0: auto
Estimator lista_estimator(const SolverParams& params, bool gated);

}  // namespace sim
}  // namespace agfra
