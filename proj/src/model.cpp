#include "agfra/model.hpp"

#include <cmath>
#include <stdexcept>

namespace agfra {

void SystemConfig::validate() const {
    if (n_alarm < 0) throw std::invalid_argument("n_alarm must be >= 0");
    if (n_monitor < 1) throw std::invalid_argument("n_monitor must be >= 1");
    if (pilot_len < 1) throw std::invalid_argument("pilot_len must be >= 1");
    if (ad_active_prob < 0.0 || ad_active_prob > 1.0)
        throw std::invalid_argument("ad_active_prob must lie in [0,1]");
    if (access_prob < 0.0 || access_prob > 1.0)
        throw std::invalid_argument("access_prob must lie in [0,1]");
    if (age_max < 1) throw std::invalid_argument("age_max must be >= 1");
    if (age_threshold < 1 || age_threshold > age_max)
        throw std::invalid_argument("age_threshold must lie in [1, age_max]");
    if (!(detect_tol > 0.0)) throw std::invalid_argument("detect_tol must be > 0");
    if (support_tol < 0.0) throw std::invalid_argument("support_tol must be >= 0");
}

SparseChannelVector make_sparse(const Eigen::VectorXd& values) {
    SparseChannelVector out;
    out.values = values;
    for (int i = 0; i < values.size(); ++i)
        if (values[i] != 0.0) out.support.push_back(i);
    return out;
}

bool AgeGate::all_open() const {
    for (std::uint8_t g : open)
        if (!g) return false;
    return true;
}

AgeGate AgeGate::opened(int total_devices) {
    AgeGate gate;
    gate.open.assign(static_cast<std::size_t>(total_devices), 1);
    return gate;
}

AgeGate AgeGate::from_ages(const Eigen::VectorXi& ages, int n_alarm, int age_threshold) {
    AgeGate gate;
    gate.open.assign(static_cast<std::size_t>(n_alarm) + ages.size(), 1);
    for (int i = 0; i < ages.size(); ++i)
        gate.open[static_cast<std::size_t>(n_alarm) + i] = ages[i] > age_threshold ? 1 : 0;
    return gate;
}

void normalize_columns(Eigen::MatrixXd& matrix) {
    for (int j = 0; j < matrix.cols(); ++j) {
        const double norm = matrix.col(j).norm();
        // Skipping near-unit norms makes the operation exactly idempotent.
        if (norm > 0.0 && std::abs(norm - 1.0) > 1e-13) matrix.col(j) /= norm;
    }
}

bool columns_normalized(const Eigen::MatrixXd& matrix, double tol) {
    for (int j = 0; j < matrix.cols(); ++j)
        if (std::abs(matrix.col(j).norm() - 1.0) > tol) return false;
    return true;
}

Eigen::MatrixXd gaussian_pilot(int pilot_len, int total_devices, Rng& rng) {
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd pilot(pilot_len, total_devices);
    for (int j = 0; j < total_devices; ++j)
        for (int i = 0; i < pilot_len; ++i) pilot(i, j) = gauss(rng);
    normalize_columns(pilot);
    return pilot;
}

Eigen::MatrixXd complex_stack(const Eigen::MatrixXcd& pilot) {
    const Eigen::Index m = pilot.rows(), s = pilot.cols();
    Eigen::MatrixXd out(2 * m, 2 * s);
    out.topLeftCorner(m, s) = pilot.real();
    out.topRightCorner(m, s) = -pilot.imag();
    out.bottomLeftCorner(m, s) = pilot.imag();
    out.bottomRightCorner(m, s) = pilot.real();
    return out;
}

Eigen::VectorXd complex_stack(const Eigen::VectorXcd& vec) {
    Eigen::VectorXd out(2 * vec.size());
    out.head(vec.size()) = vec.real();
    out.tail(vec.size()) = vec.imag();
    return out;
}

Instance generate_instance(const SystemConfig& cfg, const Eigen::VectorXi& ages, Rng& rng) {
    if (ages.size() != cfg.n_monitor)
        throw std::invalid_argument("age vector length must equal n_monitor");

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss;

    Instance inst;
    inst.mask.alarm_active.assign(static_cast<std::size_t>(cfg.n_alarm), 0);
    inst.mask.monitor_active.assign(static_cast<std::size_t>(cfg.n_monitor), 0);
    inst.channel.values = Eigen::VectorXd::Zero(cfg.total_devices());

    for (int n = 0; n < cfg.n_alarm; ++n) {
        if (unif(rng) < cfg.ad_active_prob) {
            inst.mask.alarm_active[n] = 1;
            inst.channel.values[n] = gauss(rng);
            inst.channel.support.push_back(n);
        }
    }
    for (int k = 0; k < cfg.n_monitor; ++k) {
        if (ages[k] > cfg.age_threshold && unif(rng) < cfg.access_prob) {
            inst.mask.monitor_active[k] = 1;
            inst.channel.values[cfg.n_alarm + k] = gauss(rng);
            inst.channel.support.push_back(cfg.n_alarm + k);
        }
    }
    return inst;
}

double expected_active_devices(const SystemConfig& cfg) {
    const double eligible =
        static_cast<double>(cfg.age_max - cfg.age_threshold) / cfg.age_max;
    return cfg.n_alarm * cfg.ad_active_prob + cfg.n_monitor * cfg.access_prob * eligible;
}

double noise_std(const SystemConfig& cfg) {
    if (std::isinf(cfg.snr_db)) return 0.0;
    const double signal_power = expected_active_devices(cfg);
    const double noise_power = signal_power * std::pow(10.0, -cfg.snr_db / 10.0);
    return std::sqrt(noise_power / cfg.pilot_len);
}

Eigen::VectorXd encode(const Eigen::MatrixXd& pilot, const Eigen::VectorXd& channel,
                       double sigma, Rng& rng) {
    if (pilot.cols() != channel.size())
        throw std::invalid_argument("pilot column count must match channel length");
    Eigen::VectorXd y = pilot * channel;
    if (sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, sigma);
        for (int i = 0; i < y.size(); ++i) y[i] += gauss(rng);
    }
    return y;
}

}  // namespace agfra
