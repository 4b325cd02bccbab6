#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geb/config.hpp"
#include "geb/verify.hpp"
#include "geb/version.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::int64_t seed_override = -1;
    std::string out_override;
    int verbosity = 0;
};

geb::RunConfig load_config(const CommonOpts& opts) {
    geb::RunConfig cfg = opts.config_path.empty() ? geb::RunConfig{}
                                                  : geb::parse_config(opts.config_path);
    if (opts.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed_override);
    if (!opts.out_override.empty()) cfg.output_dir = opts.out_override;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
    auto* c = cmd->add_option("--config", opts.config_path, "run configuration file (JSON)");
    if (config_required) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed_override, "seed override");
    cmd->add_option("--out", opts.out_override, "output directory override");
    cmd->add_flag("-v", opts.verbosity, "verbosity (repeat for more)");
}

std::vector<double> parse_ratio_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw geb::ConfigError("--ratios produced an empty list");
    return out;
}

void print_final_metrics(const geb::RunRecord& record, int verbosity) {
    const geb::IterationMetrics& m = record.final_metrics();
    std::printf("kappa=%.6g win_rate=%.6f avg_reward=%.6f low_ref_mass=%.6f entropy=%.6f\n",
                record.kappa, m.win_rate, m.avg_reward, m.low_ref_mass, m.policy_entropy);
    if (verbosity > 0) {
        for (const geb::IterationMetrics& it : record.iterations)
            std::printf("  iter %d: dpo=%.6f bonus=%.6g ratio=%.3g win=%.4f\n", it.iteration,
                        it.loss.dpo_term, it.loss.bonus_term, it.loss.ratio, it.win_rate);
        for (const std::string& w : record.warnings) std::printf("  %s\n", w.c_str());
    }
}

int cmd_run(const CommonOpts& opts) {
    geb::RunConfig cfg = load_config(opts);
    if (cfg.output_dir.empty())
        throw geb::ConfigError("run requires an output directory (config output_dir or --out)");
    const geb::RunRecord record = geb::run_experiment(cfg);
    print_final_metrics(record, opts.verbosity);
    std::printf("outputs written to %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& ratios_csv) {
    geb::RunConfig cfg = load_config(opts);
    if (cfg.output_dir.empty())
        throw geb::ConfigError("sweep requires an output directory (config output_dir or --out)");
    std::vector<double> ratios = {1e-8, 1e-6, 1e-4, 1e-2, 1.0, 10.0};
    if (!ratios_csv.empty()) ratios = parse_ratio_list(ratios_csv);
    const auto records = geb::kappa_sweep(cfg, ratios);
    for (std::size_t i = 0; i < records.size(); ++i)
        std::printf("ratio=%-10g win_rate=%.6f\n", ratios[i],
                    records[i].final_metrics().win_rate);
    std::printf("outputs written to %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_verify(const CommonOpts& opts, const std::string& suite) {
    const std::uint64_t seed = opts.seed_override >= 0
                                   ? static_cast<std::uint64_t>(opts.seed_override)
                                   : 20250810ull;
    const auto reports = geb::verify::run_suite(suite, seed);
    bool all_pass = true;
    for (const auto& r : reports) {
        const bool ok = r.pass && !r.premise_failed;
        all_pass = all_pass && ok;
        std::printf("[%s] %-55s worst=%.3e%s\n", ok ? "PASS" : "FAIL", r.claim_id.c_str(),
                    r.worst, r.premise_failed ? " (premise failed)" : "");
        if (!ok && opts.verbosity > 0) {
            for (const auto& c : r.counterexamples)
                std::printf("        alpha=%g %s (%d,%d) value=%.6e\n", c.alpha,
                            c.design.c_str(), c.x, c.y, c.value);
        }
    }
    if (!opts.out_override.empty()) {
        std::filesystem::create_directories(opts.out_override);
        std::ofstream out(opts.out_override + "/audit_report.json");
        out << geb::verify::reports_to_json(reports) << "\n";
        std::printf("audit report written to %s/audit_report.json\n", opts.out_override.c_str());
    }
    return all_pass ? 0 : 1;
}

int cmd_gen_instance(const CommonOpts& opts) {
    geb::RunConfig cfg = load_config(opts);
    if (cfg.output_dir.empty())
        throw geb::ConfigError("gen-instance requires an output directory");
    const geb::Instance inst = geb::resolve_instance(cfg);
    std::filesystem::create_directories(cfg.output_dir);
    inst.save(cfg.output_dir + "/instance.json");
    std::printf("instance written to %s/instance.json\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_inspect(const CommonOpts& opts, const std::string& instance_path) {
    geb::Instance inst;
    if (!instance_path.empty()) {
        inst = geb::Instance::load(instance_path);
    } else {
        inst = geb::resolve_instance(load_config(opts));
    }
    std::printf("instance: %d prompt(s) x %d response(s)\n", inst.n_prompts(),
                inst.n_responses());
    for (int x = 0; x < inst.n_prompts(); ++x) {
        std::printf("prompt %d (weight %.4f):\n", x, inst.prompt_weights[x]);
        for (int y = 0; y < inst.n_responses(); ++y) {
            const bool is_needle = inst.has_needle() && inst.needle[x] == y;
            std::printf("  y=%-3d pi_ref=%-10.6f r*=%-10.4f%s\n", y, inst.ref_policy.at(x, y),
                        inst.true_reward.at(x, y), is_needle ? "  <- needle" : "");
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular laboratory for exploratory bonuses in divergence-regularized "
                 "preference optimization"};
    app.set_version_flag("--version", geb::kVersion);
    app.require_subcommand(1);

    CommonOpts run_opts, sweep_opts, verify_opts, gen_opts, inspect_opts;
    std::string ratios_csv, suite = "all", instance_path;

    auto* run = app.add_subcommand("run", "execute one experiment");
    add_common(run, run_opts, true);
    auto* sweep = app.add_subcommand("sweep", "kappa-ratio sweep");
    add_common(sweep, sweep_opts, true);
    sweep->add_option("--ratios", ratios_csv, "comma-separated target ratios");
    auto* verify = app.add_subcommand("verify", "run numerical audits");
    add_common(verify, verify_opts, false);
    verify->add_option("--suite", suite,
                       "all|optimism|collapse|equivalence|gradients|divergence");
    auto* gen = app.add_subcommand("gen-instance", "generate an instance file");
    add_common(gen, gen_opts, false);
    auto* inspect = app.add_subcommand("inspect", "print instance summary");
    add_common(inspect, inspect_opts, false);
    inspect->add_option("--path", instance_path, "instance JSON file");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(run_opts);
        if (sweep->parsed()) return cmd_sweep(sweep_opts, ratios_csv);
        if (verify->parsed()) return cmd_verify(verify_opts, suite);
        if (gen->parsed()) return cmd_gen_instance(gen_opts);
        if (inspect->parsed()) return cmd_inspect(inspect_opts, instance_path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const geb::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
