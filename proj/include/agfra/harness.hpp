#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "agfra/access.hpp"
#include "agfra/sim.hpp"
#include "agfra/trainer.hpp"

namespace agfra {
namespace harness {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitCertification = 3;

struct OptimizeConfig {
    int n_alarm = 64;
    int n_monitor = 128;
    int age_max = 100;
    double ad_active_prob = 0.05;
    std::vector<int> pilot_lengths;
    GridSpec grid;
};

struct OptimizeRow {
    int pilot_len = 0;
    AccessParams params;
};

OptimizeConfig load_optimize_config(const std::filesystem::path& path);
std::vector<OptimizeRow> run_optimize(const OptimizeConfig& cfg);

struct TrainJob {
    SystemConfig system;
    TrainConfig train;
};

TrainJob load_train_config(const std::filesystem::path& path);

// Scheme as configured: solver kind plus where its parameters come from.
struct SchemeSpec {
    std::string name;
    std::string solver;  // "ista" | "lista" | "lista-age"
    bool use_ara = true;
    std::string checkpoint;   // lista/lista-age; may contain the {value} placeholder
    int ista_iters = 1000;
    double ista_theta = 0.01;
    double ista_omega = 0.0;  // <= 0: 1/lambda_max per pilot
};

struct Scenario {
    std::string name;
    SystemConfig base;
    std::string sweep_kind;  // "pilot_len" | "snr_db" | "age_threshold" | "n_devices"
    std::vector<double> sweep_values;
    std::vector<SchemeSpec> schemes;
    long horizon = 10000;
    long warmup = -1;  // <0: 20% of horizon
    std::vector<std::uint64_t> seeds;
    bool write_slots = true;
};

Scenario load_scenario(const std::filesystem::path& path);

// The base system with one sweep value applied.
SystemConfig apply_sweep(const SystemConfig& base, const std::string& kind, double value);

struct RunRow {
    std::string scheme;
    double sweep_value = 0.0;
    std::uint64_t seed = 0;
    sim::RunSummary summary;
};

// Full sweep x scheme x seed grid. Seeds derive from (run seed, fixed order)
// so results do not depend on scheduling; workers > 1 parallelizes runs.
// slots_dir non-empty: per-slot CSV per run goes there.
std::vector<RunRow> run_scenario(const Scenario& scenario, int workers,
                                 const std::filesystem::path& slots_dir);

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRow>& rows);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<RunRow>& rows);

struct CertifyConfig {
    int total_devices = 256;
    int pilot_len = 224;
    int sparsity = 2;
    double bound_b = 1.0;
    double noise_l1 = 0.01;
    double gated_fraction = 0.3;
    int n_instances = 50;
    int layers = 15;
    int max_tries = 500;
    std::uint64_t seed = 7;
};

CertifyConfig load_certify_config(const std::filesystem::path& path);

int cmd_optimize(const std::filesystem::path& config, const std::filesystem::path& out);
int cmd_train(const std::filesystem::path& config, const std::filesystem::path& out,
              bool dry_run, const std::filesystem::path& resume = {});
int cmd_simulate(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                 int workers);
int cmd_certify(const std::filesystem::path& config, const std::filesystem::path& out);
int cmd_gradcheck(std::uint64_t seed);

}  // namespace harness
}  // namespace agfra
