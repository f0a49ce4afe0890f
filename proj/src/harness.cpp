#include "agfra/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "agfra/csv.hpp"
#include "agfra/theory.hpp"

namespace agfra {
namespace harness {

using nlohmann::json;

namespace {

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return j;
}

SystemConfig parse_system(const json& j) {
    SystemConfig cfg;
    cfg.n_alarm = j.at("n_alarm").get<int>();
    cfg.n_monitor = j.at("n_monitor").get<int>();
    cfg.pilot_len = j.at("pilot_len").get<int>();
    if (j.contains("snr_db"))
        cfg.snr_db = j.at("snr_db").is_string() ? kInf : j.at("snr_db").get<double>();
    cfg.ad_active_prob = j.value("ad_active_prob", cfg.ad_active_prob);
    cfg.age_max = j.at("age_max").get<int>();
    cfg.access_prob = j.at("access_prob").get<double>();
    cfg.age_threshold = j.at("age_threshold").get<int>();
    cfg.detect_tol = j.value("detect_tol", cfg.detect_tol);
    cfg.support_tol = j.value("support_tol", cfg.support_tol);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

TrainConfig parse_train(const json& j) {
    TrainConfig t;
    t.batch_size = j.value("batch_size", t.batch_size);
    t.lr0 = j.value("lr0", t.lr0);
    t.plateau_patience = j.value("plateau_patience", t.plateau_patience);
    if (j.contains("decay_factors")) t.decay_factors = j.at("decay_factors").get<std::vector<double>>();
    t.layers = j.value("layers", t.layers);
    t.stagewise = j.value("stagewise", t.stagewise);
    t.stage_steps = j.value("stage_steps", t.stage_steps);
    t.steps = j.value("steps", t.steps);
    t.train_pilot = j.value("train_pilot", t.train_pilot);
    t.use_gate = j.value("use_gate", t.use_gate);
    t.validate();
    return t;
}

}  // namespace

OptimizeConfig load_optimize_config(const std::filesystem::path& path) {
    const json j = load_json(path);
    OptimizeConfig cfg;
    cfg.n_alarm = j.at("n_alarm").get<int>();
    cfg.n_monitor = j.at("n_monitor").get<int>();
    cfg.age_max = j.at("age_max").get<int>();
    cfg.ad_active_prob = j.value("ad_active_prob", cfg.ad_active_prob);
    cfg.pilot_lengths = j.at("pilot_lengths").get<std::vector<int>>();
    if (cfg.pilot_lengths.empty())
        throw std::invalid_argument("pilot_lengths must not be empty");
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        cfg.grid.p_min = g.value("p_min", cfg.grid.p_min);
        cfg.grid.p_max = g.value("p_max", cfg.grid.p_max);
        cfg.grid.p_step = g.value("p_step", cfg.grid.p_step);
        cfg.grid.delta_min = g.value("delta_min", cfg.grid.delta_min);
        cfg.grid.delta_max = g.value("delta_max", cfg.grid.delta_max);
        cfg.grid.delta_step = g.value("delta_step", cfg.grid.delta_step);
    }
    cfg.grid.validate();
    return cfg;
}

std::vector<OptimizeRow> run_optimize(const OptimizeConfig& cfg) {
    std::vector<OptimizeRow> rows;
    const int total = cfg.n_alarm + cfg.n_monitor;
    const int n_alarm_active = static_cast<int>(std::lround(cfg.n_alarm * cfg.ad_active_prob));
    for (int m : cfg.pilot_lengths) {
        const auto best = optimize_access(cfg.grid, cfg.n_monitor, cfg.age_max, n_alarm_active,
                                          m, total);
        if (!best)
            throw std::runtime_error("no feasible access point for pilot length " +
                                     std::to_string(m));
        rows.push_back(OptimizeRow{m, *best});
    }
    return rows;
}

TrainJob load_train_config(const std::filesystem::path& path) {
    const json j = load_json(path);
    TrainJob job;
    job.system = parse_system(j.at("system"));
    job.train = parse_train(j.value("train", json::object()));
    return job;
}

Scenario load_scenario(const std::filesystem::path& path) {
    const json j = load_json(path);
    Scenario sc;
    sc.name = j.value("name", "scenario");
    sc.base = parse_system(j.at("system"));
    const json& sweep = j.at("sweep");
    sc.sweep_kind = sweep.at("kind").get<std::string>();
    if (sc.sweep_kind != "pilot_len" && sc.sweep_kind != "snr_db" &&
        sc.sweep_kind != "age_threshold" && sc.sweep_kind != "n_devices")
        throw std::invalid_argument("unknown sweep kind " + sc.sweep_kind);
    sc.sweep_values = sweep.at("values").get<std::vector<double>>();
    if (sc.sweep_values.empty()) throw std::invalid_argument("sweep values must not be empty");
    sc.horizon = j.at("horizon").get<long>();
    sc.warmup = j.value("warmup", -1L);
    sc.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (sc.seeds.empty()) throw std::invalid_argument("seeds must not be empty");
    sc.write_slots = j.value("write_slots", true);
    for (const json& s : j.at("schemes")) {
        SchemeSpec spec;
        spec.name = s.at("name").get<std::string>();
        spec.solver = s.at("solver").get<std::string>();
        if (spec.solver != "ista" && spec.solver != "lista" && spec.solver != "lista-age")
            throw std::invalid_argument("unknown solver " + spec.solver + " in scheme " +
                                        spec.name);
        spec.use_ara = s.value("use_ara", true);
        if (spec.solver == "lista-age" && !spec.use_ara)
            throw std::invalid_argument("scheme " + spec.name +
                                        ": lista-age requires use_ara");
        if (spec.solver != "ista") {
            spec.checkpoint = s.at("checkpoint").get<std::string>();
        } else if (s.contains("ista")) {
            const json& i = s.at("ista");
            spec.ista_iters = i.value("iters", spec.ista_iters);
            spec.ista_theta = i.value("theta", spec.ista_theta);
            spec.ista_omega = i.value("omega", spec.ista_omega);
        }
        sc.schemes.push_back(std::move(spec));
    }
    if (sc.schemes.empty()) throw std::invalid_argument("schemes must not be empty");
    return sc;
}

SystemConfig apply_sweep(const SystemConfig& base, const std::string& kind, double value) {
    SystemConfig cfg = base;
    if (kind == "pilot_len") {
        cfg.pilot_len = static_cast<int>(std::lround(value));
    } else if (kind == "snr_db") {
        cfg.snr_db = value;
    } else if (kind == "age_threshold") {
        cfg.age_threshold = static_cast<int>(std::lround(value));
    } else if (kind == "n_devices") {
        // Total device count, split by the base AD:MD ratio.
        const double ratio =
            static_cast<double>(base.n_alarm) / static_cast<double>(base.total_devices());
        cfg.n_alarm = static_cast<int>(std::lround(value * ratio));
        cfg.n_monitor = static_cast<int>(std::lround(value)) - cfg.n_alarm;
    } else {
        throw std::invalid_argument("unknown sweep kind " + kind);
    }
    cfg.validate();
    return cfg;
}

namespace {

std::string format_sweep_value(double v) {
    std::string s = csv_format(CsvField{v});
    for (char& c : s)
        if (c == '.' || c == '-') c = '_';
    return s;
}

std::string substitute_value(std::string text, double value) {
    const std::string token = "{value}";
    const auto pos = text.find(token);
    if (pos == std::string::npos) return text;
    std::string v = csv_format(CsvField{value});
    return text.substr(0, pos) + v + text.substr(pos + token.size());
}

sim::Scheme resolve_scheme(const SchemeSpec& spec, const SystemConfig& cfg, double sweep_value,
                           Rng& init_rng) {
    sim::Scheme scheme;
    scheme.name = spec.name;
    scheme.use_ara = spec.use_ara;
    scheme.gate_decoder = spec.solver == "lista-age";

    if (spec.solver == "ista") {
        scheme.pilot = gaussian_pilot(cfg.pilot_len, cfg.total_devices(), init_rng);
        const double omega =
            spec.ista_omega > 0.0 ? spec.ista_omega : default_step_size(scheme.pilot);
        scheme.estimator = sim::ista_estimator(omega, spec.ista_theta, spec.ista_iters);
        return scheme;
    }

    const std::string path = substitute_value(spec.checkpoint, sweep_value);
    if (!std::filesystem::exists(path))
        throw std::invalid_argument("scheme " + spec.name + ": missing checkpoint " + path);
    const Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.state.pilot.rows() != cfg.pilot_len ||
        ckpt.state.pilot.cols() != cfg.total_devices())
        throw std::invalid_argument("scheme " + spec.name + ": checkpoint " + path +
                                    " was trained for different dimensions");
    scheme.pilot = ckpt.state.pilot;
    SolverParams params;
    params.omega = ckpt.state.omega;
    params.thetas = ckpt.state.thetas;
    scheme.estimator = sim::lista_estimator(params, scheme.gate_decoder);
    return scheme;
}

void write_slots_csv(const std::filesystem::path& path, const std::vector<sim::SlotRecord>& slots) {
    CsvWriter writer(path, {"t", "n_active_ad", "n_active_md", "ad_detect_rate", "avg_aoi"});
    for (const sim::SlotRecord& r : slots) {
        writer.row({static_cast<long long>(r.t), static_cast<long long>(r.n_active_ad),
                    static_cast<long long>(r.n_active_md),
                    r.ad_rate_defined ? CsvField{r.ad_detect_rate} : CsvField{std::string()},
                    r.avg_aoi});
    }
}

}  // namespace

std::vector<RunRow> run_scenario(const Scenario& scenario, int workers,
                                 const std::filesystem::path& slots_dir) {
    struct Task {
        std::size_t scheme_idx;
        double sweep_value;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (double value : scenario.sweep_values)
        for (std::size_t si = 0; si < scenario.schemes.size(); ++si)
            for (std::uint64_t seed : scenario.seeds) tasks.push_back(Task{si, value, seed});

    const long warmup = scenario.warmup >= 0 ? scenario.warmup : scenario.horizon / 5;
    if (!slots_dir.empty()) std::filesystem::create_directories(slots_dir);

    std::vector<RunRow> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            try {
                const SchemeSpec& spec = scenario.schemes[task.scheme_idx];
                const SystemConfig cfg =
                    apply_sweep(scenario.base, scenario.sweep_kind, task.sweep_value);
                // Pilot init (ISTA) and the run stream both derive from the
                // run seed, independent of scheduling.
                Rng init_rng = make_stream(task.seed, 0x5eedu);
                sim::Scheme scheme = resolve_scheme(spec, cfg, task.sweep_value, init_rng);
                Rng rng = make_stream(task.seed, 1);
                const bool keep = !slots_dir.empty();
                sim::RunResult result = sim::run(scheme, cfg, scenario.horizon, warmup, rng, keep);
                if (keep) {
                    const std::string file = spec.name + "__" +
                                             format_sweep_value(task.sweep_value) + "__" +
                                             std::to_string(task.seed) + ".csv";
                    write_slots_csv(slots_dir / file, result.slots);
                }
                rows[i] = RunRow{spec.name, task.sweep_value, task.seed, result.summary};
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const int n_workers = std::max(1, workers);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return rows;
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRow>& rows) {
    CsvWriter writer(path, {"scheme", "sweep_value", "seed", "stationary_avg_aoi",
                            "mean_ad_detect_rate", "defined_ad_slots", "horizon", "warmup"});
    for (const RunRow& r : rows) {
        writer.row({r.scheme, r.sweep_value, static_cast<long long>(r.seed),
                    r.summary.stationary_avg_aoi, r.summary.mean_ad_detect_rate,
                    static_cast<long long>(r.summary.defined_ad_slots),
                    static_cast<long long>(r.summary.horizon),
                    static_cast<long long>(r.summary.warmup)});
    }
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<RunRow>& rows) {
    // Keyed by (scheme, sweep value) in first-seen order.
    std::vector<std::pair<std::string, double>> keys;
    std::map<std::pair<std::string, double>, std::vector<const RunRow*>> groups;
    for (const RunRow& r : rows) {
        const auto key = std::make_pair(r.scheme, r.sweep_value);
        if (!groups.count(key)) keys.push_back(key);
        groups[key].push_back(&r);
    }
    auto mean_std = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0.0;
        return std::make_pair(mean, std::sqrt(var));
    };
    CsvWriter writer(path, {"scheme", "sweep_value", "aoi_mean", "aoi_std", "detect_mean",
                            "detect_std", "n_seeds"});
    for (const auto& key : keys) {
        std::vector<double> aoi, det;
        for (const RunRow* r : groups[key]) {
            aoi.push_back(r->summary.stationary_avg_aoi);
            det.push_back(r->summary.mean_ad_detect_rate);
        }
        const auto [am, as] = mean_std(aoi);
        const auto [dm, ds] = mean_std(det);
        writer.row({key.first, key.second, am, as, dm, ds,
                    static_cast<long long>(aoi.size())});
    }
}

CertifyConfig load_certify_config(const std::filesystem::path& path) {
    const json j = load_json(path);
    CertifyConfig cfg;
    cfg.total_devices = j.at("total_devices").get<int>();
    cfg.pilot_len = j.at("pilot_len").get<int>();
    cfg.sparsity = j.at("sparsity").get<int>();
    cfg.bound_b = j.value("bound_b", cfg.bound_b);
    cfg.noise_l1 = j.value("noise_l1", cfg.noise_l1);
    cfg.gated_fraction = j.value("gated_fraction", cfg.gated_fraction);
    cfg.n_instances = j.value("n_instances", cfg.n_instances);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.max_tries = j.value("max_tries", cfg.max_tries);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

int cmd_optimize(const std::filesystem::path& config, const std::filesystem::path& out) {
    OptimizeConfig cfg;
    try {
        cfg = load_optimize_config(config);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        const auto rows = run_optimize(cfg);
        CsvWriter writer(out, {"pilot_len", "delta", "p", "q", "avg_aoi"});
        for (const OptimizeRow& r : rows) {
            writer.row({static_cast<long long>(r.pilot_len),
                        static_cast<long long>(r.params.delta), r.params.p, r.params.q,
                        r.params.avg_aoi});
            std::cout << "M=" << r.pilot_len << "  delta*=" << r.params.delta
                      << "  p*=" << r.params.p << "  q=" << r.params.q
                      << "  avg_aoi=" << r.params.avg_aoi << '\n';
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int cmd_train(const std::filesystem::path& config, const std::filesystem::path& out,
              bool dry_run, const std::filesystem::path& resume) {
    TrainJob job;
    try {
        job = load_train_config(config);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        if (dry_run) {
            const TrainState state = init_train_state(job.system, job.train);
            std::cout << "config ok: pilot " << state.pilot.rows() << "x" << state.pilot.cols()
                      << ", layers " << state.layers() << ", parameters "
                      << state.parameter_count() << '\n';
            return kExitOk;
        }
        TrainResult result;
        if (!resume.empty()) {
            Checkpoint ckpt = load_checkpoint(resume);
            result.state = std::move(ckpt.state);
            fine_tune(result.state, job.system, job.train, job.train.steps,
                      result.loss_history);
        } else {
            result = train(job.system, job.train);
        }
        save_checkpoint(out, result.state, job.system, job.train);

        std::filesystem::path loss_path = out;
        loss_path.replace_extension();
        loss_path += "_loss.csv";
        CsvWriter writer(loss_path, {"step", "loss"});
        for (std::size_t i = 0; i < result.loss_history.size(); ++i)
            writer.row({static_cast<long long>(i), result.loss_history[i]});

        std::cout << "trained " << result.loss_history.size() << " steps; final loss "
                  << (result.loss_history.empty() ? 0.0 : result.loss_history.back())
                  << "; checkpoint " << out.string() << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int cmd_simulate(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                 int workers) {
    Scenario scenario;
    try {
        scenario = load_scenario(config);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        std::filesystem::create_directories(out_dir);
        const auto rows = run_scenario(scenario, workers,
                                       scenario.write_slots ? out_dir / "slots"
                                                            : std::filesystem::path());
        write_runs_csv(out_dir / "runs.csv", rows);
        write_aggregate_csv(out_dir / "aggregate.csv", rows);
        std::cout << scenario.name << ": " << rows.size() << " runs -> "
                  << (out_dir / "runs.csv").string() << '\n';
        return kExitOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int cmd_certify(const std::filesystem::path& config, const std::filesystem::path& out) {
    CertifyConfig cfg;
    try {
        cfg = load_certify_config(config);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        Rng rng = make_stream(cfg.seed);
        const CertProblem prob =
            make_cert_problem(cfg.total_devices, cfg.pilot_len, cfg.sparsity, cfg.bound_b,
                              cfg.noise_l1, cfg.gated_fraction, cfg.n_instances, cfg.max_tries,
                              rng);
        const CertReport rep =
            certify_bound(prob.pilot, prob.gated, prob.data, prob.h, cfg.layers);

        std::ostringstream report;
        report << "certification of the layered error bound\n"
               << "  pilot: " << cfg.pilot_len << " x " << cfg.total_devices
               << ", gated columns: " << prob.gated.size() << "\n"
               << "  dataset: " << prob.data.size() << " instances, s = " << cfg.sparsity
               << ", B = " << cfg.bound_b << ", sigma = " << cfg.noise_l1 << "\n"
               << "  mu1 = " << rep.coh.mu1 << ", mu2 = " << rep.coh.mu2
               << ", C_P = " << rep.coh.c_p << "\n"
               << "  c = " << rep.coh.rate_c << ", C = " << rep.coh.error_const
               << ", admissible s <= " << rep.coh.s_admissible << "\n"
               << "  support inclusion: " << (rep.support_inclusion_ok ? "exact" : "VIOLATED")
               << "\n"
               << "  l1 recursion:      " << (rep.l1_recursion_ok ? "holds" : "VIOLATED") << "\n"
               << "  l2 bound margins:  "
               << (rep.all_margins_nonneg ? "nonnegative at every layer" : "VIOLATED") << "\n"
               << "  verdict: " << (rep.passed() ? "PASS" : "FAIL") << "\n";
        std::cout << report.str();
        if (!out.empty()) {
            std::ofstream f(out);
            f << report.str();
            std::filesystem::path csv_path = out;
            csv_path.replace_extension();
            csv_path += "_layers.csv";
            CsvWriter writer(csv_path, {"layer", "theta", "sup_l1_error", "sup_l2_error",
                                        "bound", "margin"});
            for (std::size_t l = 0; l < rep.layers.size(); ++l) {
                const LayerCert& lc = rep.layers[l];
                writer.row({static_cast<long long>(l + 1), lc.theta, lc.sup_l1_error,
                            lc.sup_l2_error, lc.bound, lc.margin});
            }
        }
        return rep.passed() ? kExitOk : kExitCertification;
    } catch (const std::domain_error& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return kExitCertification;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int cmd_gradcheck(std::uint64_t seed) {
    try {
        bool ok = true;
        for (int trial = 0; trial < 3; ++trial) {
            const GradCheckResult res = gradient_check(12, 8, 3, seed + trial);
            std::cout << "instance " << trial << ": pilot " << res.pilot_rel_error << ", omega "
                      << res.omega_rel_error << ", theta " << res.theta_rel_error << '\n';
            ok = ok && res.max_rel_error < 1e-5;
        }
        std::cout << (ok ? "gradcheck PASS" : "gradcheck FAIL") << '\n';
        return ok ? kExitOk : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace harness
}  // namespace agfra
