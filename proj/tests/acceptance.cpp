// Acceptance suite: every criterion prints one PASS/FAIL line and the
// process exits with the number of failures. Run with no arguments for the
// full suite or name the criteria to run a subset.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <vector>

#include "agfra/access.hpp"
#include "agfra/harness.hpp"
#include "agfra/model.hpp"
#include "agfra/sim.hpp"
#include "agfra/solvers.hpp"
#include "agfra/theory.hpp"
#include "agfra/trainer.hpp"

using namespace agfra;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// analytic vs simulated AoI

SystemConfig aoi_oracle_cfg(int gate_threshold, double p) {
    SystemConfig cfg;
    cfg.n_alarm = 2;
    cfg.n_monitor = 8;
    cfg.pilot_len = 10;
    cfg.snr_db = kInf;
    cfg.ad_active_prob = 0.1;
    cfg.age_max = 100;
    cfg.access_prob = p;
    cfg.age_threshold = gate_threshold;
    cfg.support_tol = 1e-6;
    return cfg;
}

bool check_aoi_formula(std::ostream& out) {
    Rng pick = make_stream(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0, worst_time = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        // delta counts the smallest transmitting age, so the strict gate of
        // the simulator sits one below it
        const int delta = 2 + static_cast<int>(unif(pick) * 48.0);
        const double p = 0.05 + 0.95 * unif(pick);
        const double q = 0.3 + 0.7 * unif(pick);

        const auto start = std::chrono::steady_clock::now();
        SystemConfig cfg = aoi_oracle_cfg(delta - 1, p);
        sim::Scheme scheme;
        scheme.name = "iid-oracle";
        scheme.pilot = Eigen::MatrixXd::Identity(cfg.pilot_len, cfg.total_devices());
        auto slot_rng = std::make_shared<Rng>(make_stream(5000 + trial));
        scheme.estimator = [slot_rng, q](const Eigen::MatrixXd&, const Eigen::VectorXd& y,
                                         const AgeGate&) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            if (u(*slot_rng) < q) return y;
            return Eigen::VectorXd::Zero(y.size()).eval();
        };
        Rng rng = make_stream(9000 + trial);
        const sim::RunResult result = sim::run(scheme, cfg, 1000000, 200000, rng, false);
        const double elapsed = seconds_since(start);

        const double analytic = avg_aoi(delta, p, q);
        const double rel =
            std::abs(result.summary.stationary_avg_aoi - analytic) / analytic;
        worst = std::max(worst, rel);
        worst_time = std::max(worst_time, elapsed);
        if (rel >= 0.02 || elapsed >= 60.0) {
            out << "triple (delta=" << delta << ", p=" << p << ", q=" << q
                << "): sim=" << result.summary.stationary_avg_aoi << " formula=" << analytic
                << " rel=" << rel << " time=" << elapsed << "s";
            return false;
        }
    }
    out << "20 triples, worst rel err " << worst << ", slowest " << worst_time << "s";
    return true;
}

// ---------------------------------------------------------------------------
// Table-I access parameters

bool check_table1(std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    struct Target {
        int pilot_len, delta;
        double p;
    };
    const std::vector<Target> targets = {{35, 43, 0.05}, {37, 43, 0.05}, {39, 29, 0.05},
                                         {41, 18, 0.05}, {43, 18, 0.05}, {45, 11, 0.05},
                                         {47, 11, 0.06}, {49, 11, 0.06}};
    harness::OptimizeConfig cfg;
    cfg.n_alarm = 64;
    cfg.n_monitor = 128;
    cfg.age_max = 100;
    cfg.ad_active_prob = 0.05;
    for (const Target& t : targets) cfg.pilot_lengths.push_back(t.pilot_len);

    const auto rows = harness::run_optimize(cfg);
    int exact_at_p05 = 0;
    bool within = true;
    std::ostringstream detail;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const AccessParams& got = rows[i].params;
        const Target& want = targets[i];
        detail << " M=" << want.pilot_len << ":(" << got.delta << "," << got.p << ")";
        if (std::abs(got.delta - want.delta) > 2 || std::abs(got.p - want.p) > 0.02 + 1e-12)
            within = false;
        if (want.p == 0.05 && got.delta == want.delta && std::abs(got.p - want.p) < 1e-12)
            ++exact_at_p05;
    }
    const double elapsed = seconds_since(start);
    out << "pairs" << detail.str() << "; exact delta at p=0.05 targets: " << exact_at_p05
        << "/6; " << elapsed << "s";
    return within && exact_at_p05 >= 5 && elapsed < 10.0;
}

// ---------------------------------------------------------------------------
// gate degeneracy

bool check_gate_degeneracy(std::ostream& out) {
    Rng rng = make_stream(77);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 100; ++trial) {
        const int m = 6 + static_cast<int>(unif(rng) * 14);
        const int s = m + static_cast<int>(unif(rng) * 20);
        const int layers = 1 + static_cast<int>(unif(rng) * 19);
        Eigen::MatrixXd pilot = gaussian_pilot(m, s, rng);
        Eigen::VectorXd h = Eigen::VectorXd::Zero(s);
        const int nnz = 1 + static_cast<int>(unif(rng) * 3);
        for (int k = 0; k < nnz; ++k) h[static_cast<int>(unif(rng) * s)] = gauss(rng);
        const Eigen::VectorXd y = encode(pilot, h, 0.02, rng);
        const double omega = (0.2 + 1.3 * unif(rng)) * default_step_size(pilot);
        const double theta = 0.3 * unif(rng);

        const Eigen::VectorXd a = ista_solve(pilot, y, omega, theta, layers);
        const Eigen::VectorXd b = lista_age_forward(pilot, y, AgeGate::opened(s),
                                                    SolverParams::constant(omega, theta, layers));
        if (a.size() != b.size() ||
            std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) != 0) {
            out << "mismatch at instance " << trial;
            return false;
        }
    }
    out << "100 instances bit-identical";
    return true;
}

// ---------------------------------------------------------------------------
// gradient correctness

bool check_gradients(std::ostream& out) {
    double worst = 0.0;
    for (std::uint64_t seed : {11u, 22u, 33u}) {
        const GradCheckResult res = gradient_check(12, 8, 3, seed);
        worst = std::max(worst, res.max_rel_error);
        if (res.max_rel_error >= 1e-5) {
            out << "seed " << seed << ": pilot " << res.pilot_rel_error << " omega "
                << res.omega_rel_error << " theta " << res.theta_rel_error;
            return false;
        }
    }
    out << "3 instances, worst relative error " << worst;
    return true;
}

// ---------------------------------------------------------------------------
// certification of the error bound

bool check_certification(std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng = make_stream(314);

    struct Batch {
        int total, pilot_len, sparsity, instances;
        double noise, gated;
    };
    const std::vector<Batch> batches = {{40, 32, 1, 13, 0.0, 0.0},
                                        {48, 40, 1, 12, 0.03, 0.3},
                                        {256, 224, 2, 25, 0.01, 0.3}};
    int total_instances = 0;
    double min_margin = kInf;
    for (const Batch& b : batches) {
        const CertProblem prob = make_cert_problem(b.total, b.pilot_len, b.sparsity, 1.0,
                                                   b.noise, b.gated, b.instances, 500, rng);
        const CertReport rep = certify_bound(prob.pilot, prob.gated, prob.data, prob.h, 15);
        total_instances += b.instances;
        for (const LayerCert& layer : rep.layers) min_margin = std::min(min_margin, layer.margin);
        if (!rep.support_inclusion_ok) {
            out << "support inclusion violated at S=" << b.total;
            return false;
        }
        if (!rep.l1_recursion_ok) {
            out << "l1 recursion violated at S=" << b.total;
            return false;
        }
        if (!rep.all_margins_nonneg) {
            out << "negative bound margin at S=" << b.total;
            return false;
        }
    }

    // With nothing gated the constants must be the classical ungated ones.
    Eigen::MatrixXd pilot = gaussian_pilot(40, 50, rng);
    const int s = 2;
    const CoherenceReport rep = coherence(pilot, {}, s);
    const double c_ref = -std::log(2.0 * rep.mu1 * s - rep.mu1);
    const bool identity_ok =
        rep.mu2 == rep.mu1 && std::abs(rep.rate_c - c_ref) <= 1e-12 * std::abs(c_ref);

    const double elapsed = seconds_since(start);
    out << total_instances << " instances certified, min margin " << min_margin
        << ", ungated-constants identity " << (identity_ok ? "ok" : "BROKEN") << ", " << elapsed
        << "s";
    return identity_ok && elapsed < 60.0;
}

// ---------------------------------------------------------------------------
// desk-scale scheme ordering and the threshold sweep

SystemConfig desk_cfg(std::uint64_t seed) {
    SystemConfig cfg;
    cfg.n_alarm = 16;
    cfg.n_monitor = 32;
    cfg.pilot_len = 16;
    cfg.snr_db = 20.0;
    cfg.ad_active_prob = 0.05;
    cfg.age_max = 50;
    cfg.access_prob = 0.11;  // grid optimum for this geometry
    cfg.age_threshold = 8;
    cfg.seed = seed;
    return cfg;
}

TrainConfig desk_train(bool train_pilot, bool use_gate) {
    TrainConfig tcfg;
    tcfg.layers = 8;
    tcfg.batch_size = 64;
    tcfg.stagewise = true;
    tcfg.stage_steps = 150;
    tcfg.steps = 4000;
    tcfg.train_pilot = train_pilot;
    tcfg.use_gate = use_gate;
    return tcfg;
}

struct SchemeOutcome {
    double aoi = 0.0;
    double detect = 0.0;
};

SchemeOutcome evaluate_trained(const TrainState& state, const SystemConfig& cfg, bool gated,
                               std::uint64_t sim_seed) {
    SolverParams params;
    params.omega = state.omega;
    params.thetas = state.thetas;
    sim::Scheme scheme;
    scheme.name = gated ? "gated" : "ungated";
    scheme.use_ara = true;
    scheme.gate_decoder = gated;
    scheme.pilot = state.pilot;
    scheme.estimator = sim::lista_estimator(params, gated);
    Rng rng = make_stream(sim_seed);
    const sim::RunResult result = sim::run(scheme, cfg, 3000, 600, rng, false);
    return {result.summary.stationary_avg_aoi, result.summary.mean_ad_detect_rate};
}

// One-sided sign test: probability of >= wins heads in n fair coin flips.
double sign_test_pvalue(int wins, int n) {
    double p = 0.0;
    for (int k = wins; k <= n; ++k) {
        double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(logc) * std::pow(0.5, n);
    }
    return p;
}

bool check_ordering(std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    const int n_seeds = 5;
    std::vector<SchemeOutcome> piaae(n_seeds), lista_ae(n_seeds), lista(n_seeds);

    // The desk operating point comes from the same grid search the larger
    // configurations use.
    {
        GridSpec grid;
        const auto best = optimize_access(grid, 32, 50, 1, 16, 48);
        if (!best || best->delta != 8 || std::abs(best->p - 0.11) > 1e-9) {
            out << "desk operating point moved: expected (8, 0.11)";
            return false;
        }
    }

    for (int s = 0; s < n_seeds; ++s) {
        const SystemConfig cfg = desk_cfg(100 + s);
        const TrainResult alista = train(cfg, desk_train(false, false));
        const TrainResult alista_ae = train(cfg, desk_train(true, false));
        const TrainResult apiaae = train(cfg, desk_train(true, true));
        lista[s] = evaluate_trained(alista.state, cfg, false, 9100 + s);
        lista_ae[s] = evaluate_trained(alista_ae.state, cfg, false, 9100 + s);
        piaae[s] = evaluate_trained(apiaae.state, cfg, true, 9100 + s);
    }

    auto mean = [&](const std::vector<SchemeOutcome>& xs, bool aoi) {
        double m = 0.0;
        for (const SchemeOutcome& x : xs) m += aoi ? x.aoi : x.detect;
        return m / xs.size();
    };
    int det_w1 = 0, det_w2 = 0, aoi_w1 = 0, aoi_w2 = 0;
    for (int s = 0; s < n_seeds; ++s) {
        det_w1 += piaae[s].detect >= lista_ae[s].detect;
        det_w2 += lista_ae[s].detect >= lista[s].detect;
        aoi_w1 += piaae[s].aoi <= lista_ae[s].aoi;
        aoi_w2 += lista_ae[s].aoi <= lista[s].aoi;
    }
    const double p_det1 = sign_test_pvalue(det_w1, n_seeds);
    const double p_det2 = sign_test_pvalue(det_w2, n_seeds);
    const double p_aoi1 = sign_test_pvalue(aoi_w1, n_seeds);
    const double p_aoi2 = sign_test_pvalue(aoi_w2, n_seeds);

    const bool means_ordered = mean(piaae, false) >= mean(lista_ae, false) &&
                               mean(lista_ae, false) >= mean(lista, false) &&
                               mean(piaae, true) <= mean(lista_ae, true) &&
                               mean(lista_ae, true) <= mean(lista, true);
    const double elapsed = seconds_since(start);
    out << "detect means " << mean(piaae, false) << " >= " << mean(lista_ae, false)
        << " >= " << mean(lista, false) << "; aoi means " << mean(piaae, true)
        << " <= " << mean(lista_ae, true) << " <= " << mean(lista, true) << "; sign-test p "
        << p_det1 << "/" << p_det2 << "/" << p_aoi1 << "/" << p_aoi2 << "; " << elapsed << "s";
    return means_ordered && p_det1 < 0.05 && p_det2 < 0.05 && p_aoi1 < 0.05 && p_aoi2 < 0.05 &&
           elapsed < 7200.0;
}

bool check_threshold_ushape(std::ostream& out) {
    const SystemConfig train_cfg = desk_cfg(1);
    const TrainResult apiaae = train(train_cfg, desk_train(true, true));

    const std::vector<int> sweep = {1, 2, 4, 8, 12, 16, 20, 28, 36, 45};
    std::vector<double> aoi(sweep.size(), 0.0);
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        SystemConfig cfg = train_cfg;
        cfg.age_threshold = sweep[i];
        for (std::uint64_t seed : {11u, 12u, 13u})
            aoi[i] += evaluate_trained(apiaae.state, cfg, true, seed * 131 + sweep[i]).aoi;
        aoi[i] /= 3.0;
    }
    std::size_t argmin = 0;
    std::ostringstream detail;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        detail << " " << sweep[i] << ":" << aoi[i];
        if (aoi[i] < aoi[argmin]) argmin = i;
    }
    out << "aoi by threshold:" << detail.str() << "; argmin delta=" << sweep[argmin];
    return argmin != 0 && argmin != sweep.size() - 1;
}

// ---------------------------------------------------------------------------
// plain ISTA recovery

bool check_ista_sanity(std::ostream& out) {
    Rng rng = make_stream(4242);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int total = 80, meas = 64;  // M/S = 0.8
    int ok = 0;
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::MatrixXd pilot = gaussian_pilot(meas, total, rng);
        Eigen::VectorXd h = Eigen::VectorXd::Zero(total);
        const int i = static_cast<int>(unif(rng) * total);
        int j = static_cast<int>(unif(rng) * total);
        while (j == i) j = static_cast<int>(unif(rng) * total);
        h[i] = (0.04 + 0.04 * unif(rng)) * (unif(rng) < 0.5 ? -1.0 : 1.0);
        h[j] = (0.04 + 0.04 * unif(rng)) * (unif(rng) < 0.5 ? -1.0 : 1.0);
        const Eigen::VectorXd y = pilot * h;

        // step just under the 2/L stability limit; the threshold keeps the
        // lasso bias under the error budget while still clearing the
        // off-support mass within the iteration budget
        const double omega = 1.9 * default_step_size(pilot);
        const Eigen::VectorXd rec = ista_solve(pilot, y, omega, 2e-5, 1000);

        std::vector<int> support;
        for (int k = 0; k < total; ++k)
            if (std::abs(rec[k]) > 1e-3) support.push_back(k);
        const std::vector<int> want = {std::min(i, j), std::max(i, j)};
        if (support == want && (rec - h).norm() < 1e-4) ++ok;
    }
    out << ok << "/200 recovered exactly (support + l2 < 1e-4)";
    return ok >= 190;
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<std::string, std::function<bool(std::ostream&)>> criteria = {
        {"aoi_formula", check_aoi_formula},
        {"table1", check_table1},
        {"gate_degeneracy", check_gate_degeneracy},
        {"gradients", check_gradients},
        {"certification", check_certification},
        {"ordering", check_ordering},
        {"threshold_ushape", check_threshold_ushape},
        {"ista_sanity", check_ista_sanity},
    };

    std::vector<std::string> selected;
    for (int i = 1; i < argc; ++i) selected.emplace_back(argv[i]);
    if (selected.empty())
        for (const auto& [name, fn] : criteria) selected.push_back(name);

    int failures = 0;
    for (const std::string& name : selected) {
        const auto it = criteria.find(name);
        if (it == criteria.end()) {
            std::cerr << "unknown criterion: " << name << '\n';
            return 64;
        }
        std::ostringstream detail;
        bool ok = false;
        try {
            ok = it->second(detail);
        } catch (const std::exception& e) {
            detail << "exception: " << e.what();
        }
        std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail.str() << std::endl;
        if (!ok) ++failures;
    }
    return failures;
}
