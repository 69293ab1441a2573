#include "mz/experiment.hpp"
#include "mz/io.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

struct Options {
    std::string config;
    std::string output;
    long long seed = -1;
    int threads = 0;
};

constexpr double kCostWarning = 5e10;

std::string level_prefix(const mz::ExperimentConfig& cfg, const char* role, size_t level)
{
    return cfg.name + "_" + role + "_L" + std::to_string(level);
}

void warn_cost(const mz::ExperimentConfig& cfg, const mz::TimeGrid& grid, int d, int dtl)
{
    const double cost = mz::history_cost_estimate(grid, d, dtl) * (cfg.Ns_train + cfg.Ns_test);
    if (cost > kCostWarning)
        std::cerr << "warning: history sums for " << cfg.name << " need about " << mz::fmt_sci(cost) << " multiply-adds\n";
}

mz::SnapshotEnsemble load_or_generate(const mz::ExperimentConfig& cfg, const char* role)
{
    const std::string prefix = level_prefix(cfg, role, 0);
    if (std::filesystem::exists(cfg.output_dir + "/" + prefix + "_meta.txt")) return mz::read_ensemble(cfg.output_dir, prefix);
    mz::ExperimentConfig one = cfg;
    one.dt_list = {cfg.dt_list.front()};
    auto data = mz::generate_data(one);
    return std::string(role) == "train" ? data.train.front() : data.test.front();
}

int run(const std::string& command, const Options& opt)
{
    auto cfgs = mz::load_configs(opt.config);
    const char* env_out = std::getenv("MZ_OUTPUT_DIR");
    for (auto& cfg : cfgs) {
        if (!opt.output.empty())
            cfg.output_dir = opt.output;
        else if (env_out && *env_out)
            cfg.output_dir = env_out;
        if (opt.seed >= 0) {
            cfg.seed_train = static_cast<std::uint64_t>(opt.seed);
            cfg.seed_test = static_cast<std::uint64_t>(opt.seed) + 1;
        }
        if (opt.threads > 0) cfg.threads = opt.threads;
        mz::finalize(cfg, command == "convergence");
    }

    for (const auto& cfg : cfgs) {
        if (command == "generate") {
            auto data = mz::generate_data(cfg);
            mz::Metadata meta = {{"case", cfg.case_label}, {"config_hash", cfg.hash()}};
            for (size_t i = 0; i < data.train.size(); ++i) {
                mz::write_ensemble(cfg.output_dir, level_prefix(cfg, "train", i), data.train[i], meta);
                mz::write_ensemble(cfg.output_dir, level_prefix(cfg, "test", i), data.test[i], meta);
            }
            std::cout << cfg.name << ": wrote " << data.train.size() << " level(s) to " << cfg.output_dir << "\n";
        } else if (command == "reconstruct") {
            auto sys = mz::build_system(cfg.case_label, cfg.N, cfg.literal_d2);
            auto train = load_or_generate(cfg, "train");
            auto rep = mz::reconstruct(cfg, sys, train);
            mz::Metadata meta = {{"case", cfg.case_label}, {"config_hash", cfg.hash()}, {"mode", mz::to_string(rep.mode)}};
            meta["r_solve"] = sys.time_invariant ? "global" : "per_step";
            if (rep.lsqr_iterations > 0) meta["lsqr_iterations"] = std::to_string(rep.lsqr_iterations);
            mz::write_operator_sequence(cfg.output_dir, cfg.name + "_ops", rep.ops, meta);
            int deficient = 0;
            for (const auto& s : rep.steps)
                if (s.sigma_min <= 0.0) ++deficient;
            std::cout << cfg.name << ": " << mz::to_string(rep.mode) << " reconstruction, " << rep.steps.size() << " solve(s), "
                      << deficient << " rank deficient\n";
        } else if (command == "predict") {
            auto ops = mz::read_operator_sequence(cfg.output_dir, cfg.name + "_ops");
            auto test = load_or_generate(cfg, "test");
            warn_cost(cfg, test.grid, test.d, test.d_tilde);
            auto pred = mz::predict(mz::prediction_input(ops, test));
            mz::write_snapshots(cfg.output_dir + "/" + cfg.name + "_prediction.csv", test.grid, pred);
            mz::write_metadata(cfg.output_dir + "/" + cfg.name + "_prediction_meta.txt",
                               {{"source", "prediction"}, {"case", cfg.case_label}, {"config_hash", cfg.hash()},
                                {"scheme", mz::to_string(ops.scheme)}, {"E_Phi", mz::fmt_sci(mz::error_Phi(pred, test.Phi), 6)}});
            std::cout << cfg.name << ": E_Phi = " << mz::fmt_sci(mz::error_Phi(pred, test.Phi)) << "\n";
        } else if (command == "convergence") {
            auto res = mz::run_convergence(cfg);
            mz::emit(cfg, "convergence", res.artifact);
            std::cout << res.artifact.table.markdown();
        } else if (command == "finite-memory") {
            auto res = mz::run_finite_memory(cfg);
            mz::emit(cfg, "finite_memory", res.artifact);
            std::ofstream(cfg.output_dir + "/" + cfg.name + "_kernel_norms.csv") << res.lag_profile.csv();
            std::cout << res.artifact.table.markdown();
        } else if (command == "regularization") {
            auto res = mz::run_regularization(cfg);
            mz::emit(cfg, "regularization", res.artifact);
            std::cout << res.artifact.table.markdown();
        } else if (command == "diagnostics") {
            auto res = mz::run_diagnostics(cfg);
            std::filesystem::create_directories(cfg.output_dir);
            std::ofstream(cfg.output_dir + "/" + cfg.name + "_diagnostics.txt") << res.report;
            if (res.conditioning) {
                mz::Table t{{"n", "t", "kappa", "bound"}, {}};
                const auto& c = *res.conditioning;
                const double dt = c.t_fine.back() / c.kappa_step.size();
                for (size_t n = 0; n < c.kappa_step.size(); ++n)
                    t.rows.push_back({std::to_string(n + 1), mz::fmt_sci((n + 1) * dt, 6), mz::fmt_sci(c.kappa_step[n], 6),
                                      mz::fmt_sci(c.bound_step[n], 6)});
                std::ofstream(cfg.output_dir + "/" + cfg.name + "_kappa.csv") << t.csv();
            }
            std::cout << res.report;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mori-Zwanzig operator reconstruction experiments"};
    app.require_subcommand(1);
    Options opt;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"generate", "integrate training and test ensembles"},
        {"reconstruct", "solve for R, K and B"},
        {"predict", "march the learned model on the test set"},
        {"convergence", "error and rate table over the dt ladder"},
        {"finite-memory", "prediction error over kernel support bounds"},
        {"regularization", "prediction error over the lambda grid"},
        {"diagnostics", "rank, conditioning and assumption checks"}};
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--output", opt.output, "output directory");
        sub->add_option("--seed", opt.seed, "training seed; the test seed is seed + 1");
        sub->add_option("--threads", opt.threads, "worker threads for ensemble integration");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, opt);
    } catch (const mz::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << command << " failed: " << e.what() << "\n";
        return 3;
    }
}
