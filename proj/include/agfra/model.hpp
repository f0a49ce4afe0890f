#pragma once

#include <Eigen/Dense>

#include "agfra/types.hpp"

namespace agfra {

struct Instance {
    SparseChannelVector channel;
    ActivityMask mask;
};

// Draws one slot of activity and channel gains. An MD is active with
// probability access_prob iff its age exceeds the threshold; an AD is active
// with probability ad_active_prob. Nonzero gains are standard normal.
Instance generate_instance(const SystemConfig& cfg, const Eigen::VectorXi& ages, Rng& rng);

// Expected number of simultaneously active devices under the uniform-age
// model: N*ad_active_prob + K*access_prob*(age_max - age_threshold)/age_max.
double expected_active_devices(const SystemConfig& cfg);

// Per-component noise standard deviation realizing cfg.snr_db, where
// SNR = E||Ph||^2 / E||n||^2 with unit-norm pilot columns and unit-variance
// gains, so E||Ph||^2 equals the expected number of active devices.
double noise_std(const SystemConfig& cfg);

// y = P h + n with i.i.d. N(0, sigma^2) noise. sigma == 0 gives exactly Ph.
// Throws std::invalid_argument on dimension mismatch.
Eigen::VectorXd encode(const Eigen::MatrixXd& pilot, const Eigen::VectorXd& channel,
                       double sigma, Rng& rng);

inline Eigen::VectorXd encode(const Eigen::MatrixXd& pilot, const SparseChannelVector& channel,
                              const SystemConfig& cfg, Rng& rng) {
    return encode(pilot, channel.values, noise_std(cfg), rng);
}

}  // namespace agfra
