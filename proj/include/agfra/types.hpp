#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "agfra/rng.hpp"

namespace agfra {

// Full scenario description. Alarm devices (ADs) occupy the first n_alarm
// columns of the pilot matrix, monitor devices (MDs) the last n_monitor.
struct SystemConfig {
    int n_alarm = 64;          // N
    int n_monitor = 128;       // K
    int pilot_len = 39;        // M
    double snr_db = 20.0;      // +infinity means noiseless
    double ad_active_prob = 0.05;
    int age_max = 100;         // a_max, support of the uniform age model
    double access_prob = 0.05; // p
    int age_threshold = 29;    // delta; an MD may transmit only when age > delta
    double detect_tol = 0.1;   // tau
    double support_tol = 1e-3; // magnitude cut for reading the support
    std::uint64_t seed = 1;

    int total_devices() const { return n_alarm + n_monitor; }

    // Throws std::invalid_argument on violated invariants.
    void validate() const;
};

// Channel vector h over all S devices together with its support.
struct SparseChannelVector {
    Eigen::VectorXd values;
    std::vector<int> support;  // indices i with values[i] != 0, ascending
};

SparseChannelVector make_sparse(const Eigen::VectorXd& values);

struct ActivityMask {
    std::vector<std::uint8_t> alarm_active;    // size N
    std::vector<std::uint8_t> monitor_active;  // size K
};

// Per-coordinate decoder gate: open[i] == 0 forces coordinate i to zero.
// Alarm coordinates are always open; monitor coordinate i is open iff
// ages[i] > age_threshold.
struct AgeGate {
    std::vector<std::uint8_t> open;

    int size() const { return static_cast<int>(open.size()); }
    bool all_open() const;

    static AgeGate opened(int total_devices);
    static AgeGate from_ages(const Eigen::VectorXi& ages, int n_alarm, int age_threshold);
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Column-wise l2 normalization (the pilot power constraint). Idempotent;
// zero columns are left untouched.
void normalize_columns(Eigen::MatrixXd& matrix);
bool columns_normalized(const Eigen::MatrixXd& matrix, double tol = 1e-9);

// M x S pilot with i.i.d. standard normal entries, columns normalized.
Eigen::MatrixXd gaussian_pilot(int pilot_len, int total_devices, Rng& rng);

// Real embedding of a complex measurement model: P -> [[Re,-Im],[Im,Re]],
// doubling both dimensions. Offered as a utility; the library itself is
// real-valued throughout.
Eigen::MatrixXd complex_stack(const Eigen::MatrixXcd& pilot);
Eigen::VectorXd complex_stack(const Eigen::VectorXcd& vec);

}  // namespace agfra
