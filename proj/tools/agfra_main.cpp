#include <CLI11.hpp>
#include <string>

#include "agfra/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"age-aware grant-free random access laboratory"};
    app.require_subcommand(1);

    std::string config, out;
    std::uint64_t seed = 0;
    int workers = 1;
    bool dry_run = false;
    std::string resume;

    auto* optimize = app.add_subcommand("optimize", "grid-search the access parameters");
    optimize->add_option("--config", config, "optimize config (json)")->required();
    optimize->add_option("--out", out, "output csv")->default_val("optimize.csv");
    optimize->add_option("--seed", seed, "accepted for interface symmetry; analytic, no effect");

    auto* train = app.add_subcommand("train", "train the unfolded decoder");
    train->add_option("--config", config, "train config (json)")->required();
    train->add_option("--out", out, "checkpoint path")->default_val("checkpoint.json");
    train->add_flag("--dry-run", dry_run, "validate config and report parameter counts");
    train->add_option("--resume", resume, "continue fine-tuning from a checkpoint");

    auto* simulate = app.add_subcommand("simulate", "closed-loop scenario sweep");
    simulate->add_option("--config", config, "scenario config (json)")->required();
    simulate->add_option("--out", out, "output directory")->default_val("simulate_out");
    simulate->add_option("--workers", workers, "parallel runs")->default_val(1);

    auto* certify = app.add_subcommand("certify", "certify the layered error bound");
    certify->add_option("--config", config, "certify config (json)")->required();
    certify->add_option("--out", out, "report path")->default_val("certify_report.txt");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient validation");
    gradcheck->add_option("--seed", seed, "instance seed")->default_val(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : agfra::harness::kExitConfig;
    }

    if (optimize->parsed()) return agfra::harness::cmd_optimize(config, out);
    if (train->parsed()) return agfra::harness::cmd_train(config, out, dry_run, resume);
    if (simulate->parsed()) return agfra::harness::cmd_simulate(config, out, workers);
    if (certify->parsed()) return agfra::harness::cmd_certify(config, out);
    if (gradcheck->parsed()) return agfra::harness::cmd_gradcheck(seed);
    return agfra::harness::kExitConfig;
}
