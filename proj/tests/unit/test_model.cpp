#include <doctest.h>

#include <cmath>

#include "agfra/model.hpp"

using namespace agfra;

namespace {

SystemConfig small_cfg() {
    SystemConfig cfg;
    cfg.n_alarm = 4;
    cfg.n_monitor = 16;
    cfg.pilot_len = 8;
    cfg.snr_db = 20.0;
    cfg.ad_active_prob = 0.05;
    cfg.age_max = 50;
    cfg.access_prob = 0.1;
    cfg.age_threshold = 8;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("config validation rejects bad fields") {
    SystemConfig cfg = small_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.n_monitor = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_cfg();
    cfg.age_threshold = cfg.age_max + 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_cfg();
    cfg.detect_tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_cfg();
    cfg.access_prob = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("column normalization is idempotent") {
    Rng rng = make_stream(3);
    Eigen::MatrixXd p(6, 9);
    std::normal_distribution<double> gauss;
    for (int j = 0; j < p.cols(); ++j)
        for (int i = 0; i < p.rows(); ++i) p(i, j) = 3.0 * gauss(rng);
    normalize_columns(p);
    CHECK(columns_normalized(p, 1e-12));
    Eigen::MatrixXd twice = p;
    normalize_columns(twice);
    CHECK(twice == p);  // dividing by a norm of exactly 1.0 must be a no-op

    Eigen::MatrixXd with_zero = p;
    with_zero.col(2).setZero();
    normalize_columns(with_zero);
    CHECK(with_zero.col(2).norm() == 0.0);
}

TEST_CASE("gate construction from ages") {
    Eigen::VectorXi ages(4);
    ages << 1, 9, 8, 30;
    const AgeGate gate = AgeGate::from_ages(ages, 2, 8);
    REQUIRE(gate.size() == 6);
    CHECK(gate.open[0]);
    CHECK(gate.open[1]);
    CHECK_FALSE(gate.open[2]);  // age 1
    CHECK(gate.open[3]);        // age 9 > 8
    CHECK_FALSE(gate.open[4]);  // age 8, not strictly above
    CHECK(gate.open[5]);
    CHECK_FALSE(gate.all_open());
    CHECK(AgeGate::opened(3).all_open());
}

TEST_CASE("generate_instance respects the age gate") {
    SystemConfig cfg = small_cfg();
    Rng rng = make_stream(cfg.seed);

    SUBCASE("threshold at age_max silences every MD") {
        cfg.age_threshold = cfg.age_max;
        cfg.access_prob = 1.0;
        Eigen::VectorXi ages = Eigen::VectorXi::Constant(cfg.n_monitor, cfg.age_max);
        for (int t = 0; t < 2000; ++t) {
            const Instance inst = generate_instance(cfg, ages, rng);
            for (std::uint8_t a : inst.mask.monitor_active) CHECK_FALSE(a);
        }
    }

    SUBCASE("p = 1 with all ages above the threshold activates every MD") {
        cfg.access_prob = 1.0;
        Eigen::VectorXi ages = Eigen::VectorXi::Constant(cfg.n_monitor, cfg.age_threshold + 1);
        const Instance inst = generate_instance(cfg, ages, rng);
        for (std::uint8_t a : inst.mask.monitor_active) CHECK(a);
    }

    SUBCASE("no gated MD ever activates over a million draws") {
        std::uniform_int_distribution<int> age_dist(1, cfg.age_max);
        bool violated = false;
        for (int t = 0; t < 1000000 && !violated; ++t) {
            Eigen::VectorXi ages(cfg.n_monitor);
            for (int k = 0; k < cfg.n_monitor; ++k) ages[k] = age_dist(rng);
            const Instance inst = generate_instance(cfg, ages, rng);
            for (int k = 0; k < cfg.n_monitor; ++k)
                if (inst.mask.monitor_active[k] && ages[k] <= cfg.age_threshold) violated = true;
        }
        CHECK_FALSE(violated);
    }
}

TEST_CASE("mean support size matches the binomial expectation") {
    // AD and MD activations are independent Bernoulli draws, so the mean
    // support size is ad_p*N + p*#eligible; checked within 3 sigma.
    SystemConfig cfg;
    cfg.n_alarm = 64;
    cfg.n_monitor = 128;
    cfg.pilot_len = 39;
    cfg.ad_active_prob = 0.05;
    cfg.access_prob = 0.05;
    cfg.age_max = 100;
    cfg.age_threshold = 29;
    Rng rng = make_stream(5);

    Eigen::VectorXi ages(cfg.n_monitor);
    std::uniform_int_distribution<int> age_dist(1, cfg.age_max);
    for (int k = 0; k < cfg.n_monitor; ++k) ages[k] = age_dist(rng);
    int eligible = 0;
    for (int k = 0; k < cfg.n_monitor; ++k)
        if (ages[k] > cfg.age_threshold) ++eligible;

    const int draws = 100000;
    double total = 0.0;
    for (int t = 0; t < draws; ++t)
        total += static_cast<double>(generate_instance(cfg, ages, rng).channel.support.size());
    const double mean = total / draws;
    const double expect = 0.05 * (cfg.n_alarm + eligible);
    const double sigma = std::sqrt(expect) / std::sqrt(static_cast<double>(draws));
    CHECK(std::abs(mean - expect) < 3.0 * sigma);
}

TEST_CASE("sparse vector bookkeeping") {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(5);
    v[1] = -2.0;
    v[4] = 0.5;
    const SparseChannelVector sp = make_sparse(v);
    CHECK(sp.support == std::vector<int>{1, 4});
}

TEST_CASE("encode basics") {
    Rng rng = make_stream(7);

    SUBCASE("zero channel gives zero measurement") {
        Eigen::MatrixXd p = gaussian_pilot(6, 10, rng);
        const Eigen::VectorXd y = encode(p, Eigen::VectorXd::Zero(10), 0.0, rng);
        CHECK(y.norm() == 0.0);
    }

    SUBCASE("identity pilot passes the channel through") {
        Eigen::MatrixXd p = Eigen::MatrixXd::Identity(6, 6);
        Eigen::VectorXd h = Eigen::VectorXd::Zero(6);
        h[3] = 5.0;
        CHECK(encode(p, h, 0.0, rng) == h);
    }

    SUBCASE("dimension mismatch throws") {
        Eigen::MatrixXd p = gaussian_pilot(6, 10, rng);
        CHECK_THROWS_AS(encode(p, Eigen::VectorXd::Zero(9), 0.0, rng), std::invalid_argument);
    }

    SUBCASE("noise-free encoding is linear in the channel") {
        Eigen::MatrixXd p = gaussian_pilot(6, 10, rng);
        std::normal_distribution<double> gauss;
        Eigen::VectorXd h1(10), h2(10);
        for (int i = 0; i < 10; ++i) {
            h1[i] = gauss(rng);
            h2[i] = gauss(rng);
        }
        const Eigen::VectorXd lhs = encode(p, 2.0 * h1 - 3.0 * h2, 0.0, rng);
        const Eigen::VectorXd rhs = 2.0 * encode(p, h1, 0.0, rng) - 3.0 * encode(p, h2, 0.0, rng);
        CHECK((lhs - rhs).norm() < 1e-12);
    }
}

TEST_CASE("infinite snr means exactly zero noise") {
    SystemConfig cfg = small_cfg();
    cfg.snr_db = kInf;
    CHECK(noise_std(cfg) == 0.0);
}

TEST_CASE("realized snr matches the configured value") {
    // Monte-Carlo oracle of the SNR definition: the empirical power ratio
    // E||n||^2 / E||Ph||^2 over fresh activity draws must land on
    // 10^(-snr/10) within 2%.
    SystemConfig cfg = small_cfg();
    cfg.snr_db = 10.0;
    Rng rng = make_stream(17);
    Eigen::MatrixXd pilot = gaussian_pilot(cfg.pilot_len, cfg.total_devices(), rng);
    const double sigma = noise_std(cfg);

    std::uniform_int_distribution<int> age_dist(1, cfg.age_max);
    double signal_power = 0.0, noise_power = 0.0;
    const int draws = 30000;
    for (int t = 0; t < draws; ++t) {
        Eigen::VectorXi ages(cfg.n_monitor);
        for (int k = 0; k < cfg.n_monitor; ++k) ages[k] = age_dist(rng);
        const Instance inst = generate_instance(cfg, ages, rng);
        const Eigen::VectorXd clean = pilot * inst.channel.values;
        const Eigen::VectorXd y = encode(pilot, inst.channel.values, sigma, rng);
        signal_power += clean.squaredNorm();
        noise_power += (y - clean).squaredNorm();
    }
    const double ratio = noise_power / signal_power;
    const double target = std::pow(10.0, -cfg.snr_db / 10.0);
    CHECK(std::abs(ratio - target) / target < 0.02);
}

TEST_CASE("complex stacking reproduces the complex product") {
    Rng rng = make_stream(23);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXcd p(4, 6);
    Eigen::VectorXcd h(6);
    for (int j = 0; j < 6; ++j) {
        h[j] = std::complex<double>(gauss(rng), gauss(rng));
        for (int i = 0; i < 4; ++i) p(i, j) = std::complex<double>(gauss(rng), gauss(rng));
    }
    const Eigen::VectorXd stacked = complex_stack(p) * complex_stack(h);
    const Eigen::VectorXcd direct = p * h;
    CHECK((stacked - complex_stack(direct)).norm() < 1e-12);
}
