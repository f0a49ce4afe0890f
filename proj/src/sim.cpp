#include "agfra/sim.hpp"

#include <stdexcept>

namespace agfra {
namespace sim {

SimState SimState::fresh(int n_monitor) {
    SimState state;
    state.ages = Eigen::VectorXi::Ones(n_monitor);
    return state;
}

namespace {

// Like generate_instance but with the age condition dropped: plain random
// access where every MD transmits with probability p.
Instance generate_plain(const SystemConfig& cfg, Rng& rng) {
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
        if (unif(rng) < cfg.access_prob) {
            inst.mask.monitor_active[k] = 1;
            inst.channel.values[cfg.n_alarm + k] = gauss(rng);
            inst.channel.support.push_back(cfg.n_alarm + k);
        }
    }
    return inst;
}

}  // namespace

SlotRecord step(SimState& state, const Scheme& scheme, const SystemConfig& cfg, Rng& rng) {
    const Instance inst = scheme.use_ara ? generate_instance(cfg, state.ages, rng)
                                         : generate_plain(cfg, rng);
    const Eigen::VectorXd y = encode(scheme.pilot, inst.channel.values, noise_std(cfg), rng);
    const AgeGate gate = scheme.gate_decoder
                             ? AgeGate::from_ages(state.ages, cfg.n_alarm, cfg.age_threshold)
                             : AgeGate::opened(cfg.total_devices());

    Eigen::VectorXd estimate;
    try {
        estimate = scheme.estimator(scheme.pilot, y, gate);
    } catch (const SolverDivergence&) {
        estimate = Eigen::VectorXd::Zero(cfg.total_devices());  // slot counted as all-fail
    }
    const DetectionResult det = detect(estimate, inst.channel, inst.mask, cfg);

    SlotRecord rec;
    rec.avg_aoi = state.ages.cast<double>().mean();
    for (std::uint8_t a : inst.mask.alarm_active) rec.n_active_ad += a;
    for (std::uint8_t a : inst.mask.monitor_active) rec.n_active_md += a;

    std::vector<int> alarm_support;
    for (int n = 0; n < cfg.n_alarm; ++n)
        if (inst.mask.alarm_active[n]) alarm_support.push_back(n);
    if (const auto rate = detection_rate(det, alarm_support)) {
        rec.ad_detect_rate = *rate;
        rec.ad_rate_defined = true;
    }

    for (int k = 0; k < cfg.n_monitor; ++k) {
        if (det.per_device_success[cfg.n_alarm + k]) {
            state.ages[k] = 1;
            ++rec.md_successes;
        } else {
            state.ages[k] += 1;
        }
    }
    return rec;
}

RunResult run(const Scheme& scheme, const SystemConfig& cfg, long horizon, long warmup,
              Rng& rng, bool keep_slots) {
    cfg.validate();
    if (horizon <= warmup) throw std::invalid_argument("horizon must exceed warmup");
    if (scheme.gate_decoder && !scheme.use_ara)
        throw std::invalid_argument("a gated decoder requires the ARA access scheme");
    if (scheme.pilot.cols() != cfg.total_devices() || scheme.pilot.rows() != cfg.pilot_len)
        throw std::invalid_argument("scheme pilot does not match the system dimensions");

    RunResult result;
    SimState state = SimState::fresh(cfg.n_monitor);
    double aoi_sum = 0.0, rate_sum = 0.0;
    long aoi_slots = 0;
    for (long t = 0; t < horizon; ++t) {
        SlotRecord rec = step(state, scheme, cfg, rng);
        rec.t = t;
        if (t >= warmup) {
            aoi_sum += rec.avg_aoi;
            ++aoi_slots;
            if (rec.ad_rate_defined) {
                rate_sum += rec.ad_detect_rate;
                ++result.summary.defined_ad_slots;
            }
        }
        if (keep_slots) result.slots.push_back(rec);
    }
    result.summary.horizon = horizon;
    result.summary.warmup = warmup;
    result.summary.stationary_avg_aoi = aoi_sum / static_cast<double>(aoi_slots);
    result.summary.mean_ad_detect_rate =
        result.summary.defined_ad_slots > 0
            ? rate_sum / static_cast<double>(result.summary.defined_ad_slots)
            : 0.0;
    return result;
}

Estimator ista_estimator(double omega, double theta, int iters) {
    return [omega, theta, iters](const Eigen::MatrixXd& pilot, const Eigen::VectorXd& y,
                                 const AgeGate&) {
        const double w = omega > 0.0 ? omega : default_step_size(pilot);
        return ista_solve(pilot, y, w, theta, iters);
    };
}

Estimator lista_estimator(const SolverParams& params, bool gated) {
    return [params, gated](const Eigen::MatrixXd& pilot, const Eigen::VectorXd& y,
                           const AgeGate& gate) {
        const AgeGate& used = gated ? gate : AgeGate::opened(static_cast<int>(pilot.cols()));
        return lista_age_forward(pilot, y, used, params, nullptr);
    };
}

}  // namespace sim
}  // namespace agfra
