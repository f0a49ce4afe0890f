#include "agfra/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace agfra {

using nlohmann::json;

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be > 0");
    if (plateau_patience < 1) throw std::invalid_argument("plateau_patience must be >= 1");
    if (decay_factors.size() > 3)
        throw std::invalid_argument("at most three learning-rate decays");
    if (layers < 1) throw std::invalid_argument("layers must be >= 1");
    if (stage_steps < 0 || steps < 0) throw std::invalid_argument("step counts must be >= 0");
}

long TrainState::parameter_count() const {
    return static_cast<long>(pilot.size()) + 1 + layers();
}

std::vector<BatchItem> make_batch(const SystemConfig& cfg, const Eigen::MatrixXd& pilot,
                                  int batch, Rng& rng) {
    std::uniform_int_distribution<int> age_dist(1, cfg.age_max);
    const double sigma = noise_std(cfg);
    std::vector<BatchItem> items;
    items.reserve(batch);
    for (int b = 0; b < batch; ++b) {
        Eigen::VectorXi ages(cfg.n_monitor);
        for (int k = 0; k < cfg.n_monitor; ++k) ages[k] = age_dist(rng);
        Instance inst = generate_instance(cfg, ages, rng);
        BatchItem item;
        item.gate = AgeGate::from_ages(ages, cfg.n_alarm, cfg.age_threshold);
        item.ages = std::move(ages);
        item.measurement = encode(pilot, inst.channel.values, sigma, rng);
        item.truth = std::move(inst.channel);
        items.push_back(std::move(item));
    }
    return items;
}

double loss(const std::vector<Eigen::VectorXd>& estimates,
            const std::vector<Eigen::VectorXd>& truths) {
    if (estimates.size() != truths.size())
        throw std::invalid_argument("estimate/truth batch sizes differ");
    double total = 0.0;
    for (std::size_t q = 0; q < estimates.size(); ++q)
        total += (estimates[q] - truths[q]).squaredNorm();
    return total;
}

Gradients Gradients::zero(int pilot_rows, int pilot_cols, int layers) {
    Gradients g;
    g.pilot = Eigen::MatrixXd::Zero(pilot_rows, pilot_cols);
    g.thetas = Eigen::VectorXd::Zero(layers);
    return g;
}

void Gradients::accumulate(const Gradients& other) {
    pilot += other.pilot;
    omega += other.omega;
    thetas += other.thetas;
}

Gradients backward(const Eigen::MatrixXd& pilot, double omega, const Eigen::VectorXd& thetas,
                   const SparseChannelVector& truth, const AgeGate& gate,
                   const Eigen::VectorXd& measurement, const ForwardTrace& trace) {
    const int layers = static_cast<int>(thetas.size());
    if (static_cast<int>(trace.preactivations.size()) != layers ||
        static_cast<int>(trace.iterates.size()) != layers + 1)
        throw std::invalid_argument("trace depth does not match theta schedule");

    Gradients grads = Gradients::zero(static_cast<int>(pilot.rows()),
                                      static_cast<int>(pilot.cols()), layers);
    Eigen::VectorXd g = 2.0 * (trace.iterates.back() - truth.values);
    Eigen::VectorXd g_y = Eigen::VectorXd::Zero(pilot.rows());

    for (int l = layers - 1; l >= 0; --l) {
        const Eigen::VectorXd& v = trace.preactivations[l];
        const Eigen::VectorXd& h = trace.iterates[l];

        // Pass g through the threshold: zero where gated or inside [-theta, theta].
        Eigen::VectorXd dv = Eigen::VectorXd::Zero(v.size());
        double dtheta = 0.0;
        for (int i = 0; i < v.size(); ++i) {
            if (gate.open[i] && std::abs(v[i]) > thetas[l]) {
                dv[i] = g[i];
                dtheta -= g[i] * (v[i] > 0.0 ? 1.0 : -1.0);
            }
        }
        grads.thetas[l] += dtheta;

        const Eigen::VectorXd residual = measurement - pilot * h;
        grads.omega += dv.dot(pilot.transpose() * residual);

        const Eigen::VectorXd pilot_dv = pilot * dv;
        grads.pilot.noalias() += omega * (residual * dv.transpose());
        grads.pilot.noalias() -= omega * (pilot_dv * h.transpose());
        g_y.noalias() += omega * pilot_dv;

        g = dv - omega * (pilot.transpose() * pilot_dv);
    }
    // Encoder path: y = P h* + n.
    grads.pilot.noalias() += g_y * truth.values.transpose();
    return grads;
}

void adam_step_scalar(double& param, double grad, double& m, double& v, double lr, long t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad * grad;
    const double m_hat = m / (1.0 - std::pow(b1, t));
    const double v_hat = v / (1.0 - std::pow(b2, t));
    param -= lr * m_hat / (std::sqrt(v_hat) + eps);
}

namespace {

struct StepGrads {
    Gradients grads;
    double batch_loss = 0.0;
};

StepGrads forward_backward(const TrainState& state, const SystemConfig& cfg,
                           const TrainConfig& tcfg, const std::vector<BatchItem>& batch,
                           int depth) {
    SolverParams params;
    params.omega = state.omega;
    params.thetas = state.thetas.head(depth);

    StepGrads out;
    out.grads = Gradients::zero(static_cast<int>(state.pilot.rows()),
                                static_cast<int>(state.pilot.cols()), depth);
    const AgeGate open = AgeGate::opened(cfg.total_devices());
    const UnfoldKernel kernel(state.pilot, state.omega);  // Gram shared across the batch
    for (const BatchItem& item : batch) {
        const AgeGate& gate = tcfg.use_gate ? item.gate : open;
        ForwardTrace trace;
        kernel.run(kernel.bias(item.measurement), gate, params, &trace);
        out.batch_loss += (trace.iterates.back() - item.truth.values).squaredNorm();
        out.grads.accumulate(backward(state.pilot, state.omega, params.thetas, item.truth, gate,
                                      item.measurement, trace));
    }
    return out;
}

// One optimizer step over the selected parameter groups. theta_begin/end
// select which layer thresholds move; pilot moves only when update_pilot.
void apply_step(TrainState& state, const Gradients& grads, double lr, bool update_pilot,
                int theta_begin, int theta_end) {
    ++state.adam.step;
    const long t = state.adam.step;
    if (update_pilot) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        auto& m = state.adam.pilot_m;
        auto& v = state.adam.pilot_v;
        m = b1 * m + (1.0 - b1) * grads.pilot;
        v = b2 * v + (1.0 - b2) * grads.pilot.cwiseProduct(grads.pilot);
        const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
        state.pilot -= lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
    }
    adam_step_scalar(state.omega, grads.omega, state.adam.omega_m, state.adam.omega_v, lr, t);
    for (int l = theta_begin; l < theta_end; ++l)
        adam_step_scalar(state.thetas[l], grads.thetas[l], state.adam.theta_m[l],
                    state.adam.theta_v[l], lr, t);
    state.thetas = state.thetas.cwiseMax(0.0);
    normalize_columns(state.pilot);
}

void track_plateau(TrainState& state, const TrainConfig& tcfg, double batch_loss) {
    state.loss_window.push_back(batch_loss);
    if (state.loss_window.size() > 100) state.loss_window.pop_front();
    if (state.loss_window.size() < 100) return;
    double ma = 0.0;
    for (double x : state.loss_window) ma += x;
    ma /= static_cast<double>(state.loss_window.size());
    if (ma < state.best_moving_avg) {
        state.best_moving_avg = ma;
        state.steps_since_best = 0;
        return;
    }
    if (++state.steps_since_best >= tcfg.plateau_patience &&
        state.decays_applied < static_cast<int>(tcfg.decay_factors.size())) {
        state.lr = tcfg.lr0 * tcfg.decay_factors[state.decays_applied];
        ++state.decays_applied;
        state.steps_since_best = 0;
    }
}

}  // namespace

TrainState init_train_state(const SystemConfig& cfg, const TrainConfig& tcfg) {
    cfg.validate();
    tcfg.validate();
    TrainState state;
    state.rng = make_stream(cfg.seed);
    state.pilot = gaussian_pilot(cfg.pilot_len, cfg.total_devices(), state.rng);
    state.omega = default_step_size(state.pilot);
    state.thetas = Eigen::VectorXd::Constant(tcfg.layers, 0.1);
    state.adam.pilot_m = Eigen::MatrixXd::Zero(cfg.pilot_len, cfg.total_devices());
    state.adam.pilot_v = Eigen::MatrixXd::Zero(cfg.pilot_len, cfg.total_devices());
    state.adam.theta_m = Eigen::VectorXd::Zero(tcfg.layers);
    state.adam.theta_v = Eigen::VectorXd::Zero(tcfg.layers);
    state.lr = tcfg.lr0;
    return state;
}

void fine_tune(TrainState& state, const SystemConfig& cfg, const TrainConfig& tcfg,
               int steps, std::vector<double>& history) {
    for (int s = 0; s < steps; ++s) {
        const auto batch = make_batch(cfg, state.pilot, tcfg.batch_size, state.rng);
        StepGrads sg = forward_backward(state, cfg, tcfg, batch, state.layers());
        if (!std::isfinite(sg.batch_loss))
            throw std::runtime_error("non-finite loss at fine-tune step " +
                                     std::to_string(state.step));
        apply_step(state, sg.grads, state.lr, tcfg.train_pilot, 0, state.layers());
        track_plateau(state, tcfg, sg.batch_loss);
        ++state.step;
        history.push_back(sg.batch_loss);
    }
}

TrainResult train(const SystemConfig& cfg, const TrainConfig& tcfg) {
    TrainResult result;
    result.state = init_train_state(cfg, tcfg);
    TrainState& state = result.state;

    if (tcfg.stagewise) {
        // Greedy warmup: depth-l network, training {theta^l, omega} only.
        for (int depth = 1; depth <= state.layers(); ++depth) {
            for (int s = 0; s < tcfg.stage_steps; ++s) {
                const auto batch = make_batch(cfg, state.pilot, tcfg.batch_size, state.rng);
                StepGrads sg = forward_backward(state, cfg, tcfg, batch, depth);
                if (!std::isfinite(sg.batch_loss))
                    throw std::runtime_error("non-finite loss in stage " + std::to_string(depth));
                Gradients full = Gradients::zero(static_cast<int>(state.pilot.rows()),
                                                 static_cast<int>(state.pilot.cols()),
                                                 state.layers());
                full.omega = sg.grads.omega;
                full.thetas.head(depth) = sg.grads.thetas;
                apply_step(state, full, tcfg.lr0, false, depth - 1, depth);
                result.loss_history.push_back(sg.batch_loss);
            }
        }
    }
    fine_tune(state, cfg, tcfg, tcfg.steps, result.loss_history);
    return result;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(static_cast<int>(arr.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = arr[i].get<double>();
    return v;
}

json system_to_json(const SystemConfig& cfg) {
    return json{{"n_alarm", cfg.n_alarm},
                {"n_monitor", cfg.n_monitor},
                {"pilot_len", cfg.pilot_len},
                {"snr_db", std::isinf(cfg.snr_db) ? json("inf") : json(cfg.snr_db)},
                {"ad_active_prob", cfg.ad_active_prob},
                {"age_max", cfg.age_max},
                {"access_prob", cfg.access_prob},
                {"age_threshold", cfg.age_threshold},
                {"detect_tol", cfg.detect_tol},
                {"support_tol", cfg.support_tol},
                {"seed", cfg.seed}};
}

SystemConfig system_from_json(const json& j) {
    SystemConfig cfg;
    cfg.n_alarm = j.at("n_alarm").get<int>();
    cfg.n_monitor = j.at("n_monitor").get<int>();
    cfg.pilot_len = j.at("pilot_len").get<int>();
    cfg.snr_db = j.at("snr_db").is_string() ? kInf : j.at("snr_db").get<double>();
    cfg.ad_active_prob = j.at("ad_active_prob").get<double>();
    cfg.age_max = j.at("age_max").get<int>();
    cfg.access_prob = j.at("access_prob").get<double>();
    cfg.age_threshold = j.at("age_threshold").get<int>();
    cfg.detect_tol = j.at("detect_tol").get<double>();
    cfg.support_tol = j.at("support_tol").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

json traincfg_to_json(const TrainConfig& t) {
    return json{{"batch_size", t.batch_size},
                {"lr0", t.lr0},
                {"plateau_patience", t.plateau_patience},
                {"decay_factors", t.decay_factors},
                {"layers", t.layers},
                {"stagewise", t.stagewise},
                {"stage_steps", t.stage_steps},
                {"steps", t.steps},
                {"train_pilot", t.train_pilot},
                {"use_gate", t.use_gate}};
}

TrainConfig traincfg_from_json(const json& j) {
    TrainConfig t;
    t.batch_size = j.at("batch_size").get<int>();
    t.lr0 = j.at("lr0").get<double>();
    t.plateau_patience = j.at("plateau_patience").get<int>();
    t.decay_factors = j.at("decay_factors").get<std::vector<double>>();
    t.layers = j.at("layers").get<int>();
    t.stagewise = j.at("stagewise").get<bool>();
    t.stage_steps = j.at("stage_steps").get<int>();
    t.steps = j.at("steps").get<int>();
    t.train_pilot = j.at("train_pilot").get<bool>();
    t.use_gate = j.at("use_gate").get<bool>();
    return t;
}

constexpr const char* kCheckpointFormat = "agfra-checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const SystemConfig& cfg, const TrainConfig& tcfg) {
    std::ostringstream rng_stream;
    rng_stream << state.rng;

    json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["system"] = system_to_json(cfg);
    j["train"] = traincfg_to_json(tcfg);
    j["pilot"] = matrix_to_json(state.pilot);
    j["omega"] = state.omega;
    j["thetas"] = vector_to_json(state.thetas);
    j["adam"] = {{"pilot_m", matrix_to_json(state.adam.pilot_m)},
                 {"pilot_v", matrix_to_json(state.adam.pilot_v)},
                 {"omega_m", state.adam.omega_m},
                 {"omega_v", state.adam.omega_v},
                 {"theta_m", vector_to_json(state.adam.theta_m)},
                 {"theta_v", vector_to_json(state.adam.theta_v)},
                 {"step", state.adam.step}};
    j["step"] = state.step;
    j["lr"] = state.lr;
    j["decays_applied"] = state.decays_applied;
    j["best_moving_avg"] =
        std::isinf(state.best_moving_avg) ? json("inf") : json(state.best_moving_avg);
    j["steps_since_best"] = state.steps_since_best;
    j["loss_window"] = std::vector<double>(state.loss_window.begin(), state.loss_window.end());
    j["rng"] = rng_stream.str();

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    json j;
    in >> j;
    if (j.value("format", "") != kCheckpointFormat)
        throw std::runtime_error(path.string() + " is not an agfra checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.system = system_from_json(j.at("system"));
    ckpt.train = traincfg_from_json(j.at("train"));
    TrainState& s = ckpt.state;
    s.pilot = matrix_from_json(j.at("pilot"));
    s.omega = j.at("omega").get<double>();
    s.thetas = vector_from_json(j.at("thetas"));
    const json& a = j.at("adam");
    s.adam.pilot_m = matrix_from_json(a.at("pilot_m"));
    s.adam.pilot_v = matrix_from_json(a.at("pilot_v"));
    s.adam.omega_m = a.at("omega_m").get<double>();
    s.adam.omega_v = a.at("omega_v").get<double>();
    s.adam.theta_m = vector_from_json(a.at("theta_m"));
    s.adam.theta_v = vector_from_json(a.at("theta_v"));
    s.adam.step = a.at("step").get<long>();
    s.step = j.at("step").get<long>();
    s.lr = j.at("lr").get<double>();
    s.decays_applied = j.at("decays_applied").get<int>();
    s.best_moving_avg =
        j.at("best_moving_avg").is_string() ? kInf : j.at("best_moving_avg").get<double>();
    s.steps_since_best = j.at("steps_since_best").get<int>();
    for (double x : j.at("loss_window").get<std::vector<double>>()) s.loss_window.push_back(x);
    std::istringstream rng_stream(j.at("rng").get<std::string>());
    rng_stream >> s.rng;
    return ckpt;
}

GradCheckResult gradient_check(int total_devices, int pilot_len, int layers,
                               std::uint64_t seed, double fd_step) {
    Rng rng = make_stream(seed);
    Eigen::MatrixXd pilot = gaussian_pilot(pilot_len, total_devices, rng);
    const double omega = default_step_size(pilot);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd thetas(layers);
    for (int l = 0; l < layers; ++l) thetas[l] = 0.05 + 0.1 * unif(rng);

    BatchItem item;
    item.gate.open.assign(static_cast<std::size_t>(total_devices), 1);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(total_devices);
    for (int i = 0; i < total_devices; ++i) {
        if (i >= total_devices / 2 && unif(rng) < 0.3) item.gate.open[i] = 0;
        if (item.gate.open[i] && unif(rng) < 0.3) truth[i] = gauss(rng);
    }
    item.truth = make_sparse(truth);
    Eigen::VectorXd noise(pilot_len);
    for (int i = 0; i < pilot_len; ++i) noise[i] = 0.01 * gauss(rng);
    item.measurement = pilot * truth + noise;

    auto loss_at = [&](const Eigen::MatrixXd& p, double om, const Eigen::VectorXd& th) {
        SolverParams params;
        params.omega = om;
        params.thetas = th;
        // The measurement is tied to the pilot through the encoder.
        BatchItem probe = item;
        probe.measurement = p * truth + noise;
        ForwardTrace trace;
        lista_age_forward(p, probe.measurement, probe.gate, params, &trace);
        return (trace.iterates.back() - truth).squaredNorm();
    };

    SolverParams params;
    params.omega = omega;
    params.thetas = thetas;
    ForwardTrace trace;
    lista_age_forward(pilot, item.measurement, item.gate, params, &trace);
    Gradients grads =
        backward(pilot, omega, thetas, item.truth, item.gate, item.measurement, trace);

    GradCheckResult res;
    Eigen::MatrixXd fd_pilot(pilot_len, total_devices);
    for (int i = 0; i < pilot_len; ++i) {
        for (int j = 0; j < total_devices; ++j) {
            Eigen::MatrixXd plus = pilot, minus = pilot;
            plus(i, j) += fd_step;
            minus(i, j) -= fd_step;
            fd_pilot(i, j) = (loss_at(plus, omega, thetas) - loss_at(minus, omega, thetas)) /
                             (2.0 * fd_step);
        }
    }
    res.pilot_rel_error = (grads.pilot - fd_pilot).norm() / std::max(fd_pilot.norm(), 1e-12);

    const double fd_omega =
        (loss_at(pilot, omega + fd_step, thetas) - loss_at(pilot, omega - fd_step, thetas)) /
        (2.0 * fd_step);
    res.omega_rel_error = std::abs(grads.omega - fd_omega) / std::max(std::abs(fd_omega), 1e-12);

    for (int l = 0; l < layers; ++l) {
        Eigen::VectorXd plus = thetas, minus = thetas;
        plus[l] += fd_step;
        minus[l] -= fd_step;
        const double fd =
            (loss_at(pilot, omega, plus) - loss_at(pilot, omega, minus)) / (2.0 * fd_step);
        const double denom = std::max(std::abs(fd), 1e-12);
        res.theta_rel_error = std::max(res.theta_rel_error, std::abs(grads.thetas[l] - fd) / denom);
    }
    res.max_rel_error =
        std::max({res.pilot_rel_error, res.omega_rel_error, res.theta_rel_error});
    return res;
}

}  // namespace agfra
