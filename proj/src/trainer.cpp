#include "geb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "geb/version.hpp"

namespace geb {

using nlohmann::json;

std::string rollout_source_name(RolloutSource s) {
    return s == RolloutSource::Reference ? "reference" : "current_policy";
}

RolloutSource rollout_source_from_name(const std::string& name) {
    if (name == "reference") return RolloutSource::Reference;
    if (name == "current_policy") return RolloutSource::CurrentPolicy;
    throw ConfigError("unknown rollout_source: " + name);
}

std::string annotation_mode_name(AnnotationMode m) {
    return m == AnnotationMode::Stochastic ? "stochastic" : "deterministic";
}

AnnotationMode annotation_mode_from_name(const std::string& name) {
    if (name == "stochastic") return AnnotationMode::Stochastic;
    if (name == "deterministic") return AnnotationMode::Deterministic;
    throw ConfigError("unknown annotation mode: " + name);
}

void RunConfig::validate() const {
    DivergenceSpec{alpha, 1e-9}.validate();
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (pairs_per_prompt < 1) throw ConfigError("pairs_per_prompt must be >= 1");
    if (histogram_samples < 1) throw ConfigError("histogram_samples must be >= 1");
    if (!(histogram_bin_width > 0.0)) throw ConfigError("histogram_bin_width must be > 0");
    if (!(optimizer.step_size > 0.0)) throw ConfigError("optimizer.step_size must be > 0");
    if (optimizer.max_steps < 1) throw ConfigError("optimizer.max_steps must be >= 1");
    if (!(optimizer.tolerance > 0.0)) throw ConfigError("optimizer.tolerance must be > 0");
    bonus.validate(alpha);
    if (instance.kind == InstanceSource::Kind::File && instance.path.empty())
        throw ConfigError("instance.kind=file requires instance.path");
}

std::int64_t Histogram::total() const {
    std::int64_t t = 0;
    for (std::int64_t c : counts) t += c;
    return t;
}

std::int64_t Histogram::count_below(double value) const {
    // Conservative: only bins entirely below the threshold count.
    std::int64_t t = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double right = lo + bin_width * static_cast<double>(k + 1);
        if (right <= value) t += counts[k];
    }
    return t;
}

double win_rate_exact(const PolicyTable& policy, const Instance& inst) {
    double total = 0.0;
    for (int x = 0; x < inst.n_prompts(); ++x) {
        double acc = 0.0;
        for (int y = 0; y < inst.n_responses(); ++y) {
            for (int yp = 0; yp < inst.n_responses(); ++yp) {
                acc += policy.probs.at(x, y) * inst.ref_policy.at(x, yp) *
                       sigmoid(inst.true_reward.at(x, y) - inst.true_reward.at(x, yp));
            }
        }
        total += inst.prompt_weights[static_cast<std::size_t>(x)] * acc;
    }
    return total;
}

double avg_reward_exact(const PolicyTable& policy, const Instance& inst) {
    double total = 0.0;
    for (int x = 0; x < inst.n_prompts(); ++x) {
        double acc = 0.0;
        for (int y = 0; y < inst.n_responses(); ++y)
            acc += policy.probs.at(x, y) * inst.true_reward.at(x, y);
        total += inst.prompt_weights[static_cast<std::size_t>(x)] * acc;
    }
    return total;
}

double policy_entropy(const PolicyTable& policy, const Instance& inst) {
    double total = 0.0;
    for (int x = 0; x < inst.n_prompts(); ++x) {
        double h = 0.0;
        for (int y = 0; y < inst.n_responses(); ++y) {
            const double p = policy.probs.at(x, y);
            if (p > 0.0) h -= p * std::log(p);
        }
        total += inst.prompt_weights[static_cast<std::size_t>(x)] * h;
    }
    return total;
}

LowRefStats low_ref_statistics(const PolicyTable& policy, const Instance& inst, int n_samples,
                               Rng& rng, double bin_width) {
    LowRefStats out;
    for (int x = 0; x < inst.n_prompts(); ++x) {
        double acc = 0.0;
        for (int y = 0; y < inst.n_responses(); ++y)
            acc -= policy.probs.at(x, y) * std::log(inst.ref_policy.at(x, y));
        out.low_ref_mass += inst.prompt_weights[static_cast<std::size_t>(x)] * acc;
    }
    // Sampled ln pi_ref histogram; lo anchored at a multiple of the width.
    const double min_log = std::log(kProbFloor) - bin_width;
    out.histogram.bin_width = bin_width;
    out.histogram.lo = std::floor(min_log / bin_width) * bin_width;
    const int bins =
        static_cast<int>(std::ceil((0.0 - out.histogram.lo) / bin_width)) + 1;
    out.histogram.counts.assign(static_cast<std::size_t>(bins), 0);
    for (int k = 0; k < n_samples; ++k) {
        const int x = rng.categorical(
            {inst.prompt_weights.data(), inst.prompt_weights.size()});
        const int y = sample_response(policy, x, rng);
        const double v = std::log(inst.ref_policy.at(x, y));
        int bin = static_cast<int>(std::floor((v - out.histogram.lo) / bin_width));
        bin = std::clamp(bin, 0, bins - 1);
        ++out.histogram.counts[static_cast<std::size_t>(bin)];
    }
    return out;
}

double kappa_from_ratio(double target_ratio, const LossBreakdown& probe,
                        std::vector<std::string>& warnings) {
    if (target_ratio != 0.0 && (target_ratio < 1e-6 || target_ratio > 1e-2))
        warnings.push_back("note: target_ratio outside the stable range [1e-6, 1e-2]");
    // A bonus at rounding scale is an analytically-zero bonus (the
    // reverse-KL FEB evaluates to ~1e-16); inverting it would blow kappa up.
    if (std::abs(probe.bonus_term) < 1e-12 * std::max(1.0, std::abs(probe.dpo_term))) {
        if (target_ratio != 0.0)
            warnings.push_back("warning: bonus term is zero at the probe point; kappa set to 0");
        return 0.0;
    }
    return target_ratio * std::abs(probe.dpo_term) / std::abs(probe.bonus_term);
}

Instance resolve_instance(const RunConfig& config) {
    if (config.instance.kind == InstanceSource::Kind::File)
        return Instance::load(config.instance.path);
    Rng rng = Rng::derive(config.seed, Rng::hash_label("instance"));
    const NeedleParams& np = config.instance.needle;
    return generate_needle_instance(np.n_prompts, np.m_responses, np.needle_ref_mass,
                                    np.reward_gap, rng, np.r_max);
}

namespace {

struct TrainState {
    Instance base;     // original instance; metrics are against this
    Instance working;  // ref_policy may be replaced when update_ref is set
    PolicyLogits logits;
    PreferenceDataset dataset;
    double kappa = 0.0;
    bool kappa_resolved = false;
};

void sample_iteration_pairs(TrainState& state, const RunConfig& config, int iteration,
                            Rng& rng) {
    const PolicyTable current = softmax_policy(state.logits);
    const Table& rollout = (config.rollout_source == RolloutSource::Reference)
                               ? state.working.ref_policy
                               : current.probs;
    const PolicyTable rollout_policy{rollout};
    const bool deterministic = config.annotation == AnnotationMode::Deterministic;
    for (int x = 0; x < state.base.n_prompts(); ++x) {
        for (int k = 0; k < config.pairs_per_prompt; ++k) {
            const int y1 = sample_response(rollout_policy, x, rng);
            const int y2 = rng.categorical_excluding(
                {rollout.row(x), static_cast<std::size_t>(rollout.cols)}, y1);
            state.dataset.pairs.push_back(
                annotate_pair(state.base, x, y1, y2, rng, deterministic));
        }
    }
    state.dataset.iteration = iteration;
}

IterationMetrics run_iteration(TrainState& state, const RunConfig& config,
                               const DivergenceSpec& div, int iteration, Rng& rng,
                               std::vector<std::string>& warnings) {
    sample_iteration_pairs(state, config, iteration, rng);

    if (!state.kappa_resolved) {
        if (config.bonus.kappa.has_value()) {
            state.kappa = *config.bonus.kappa;
        } else {
            const LossBreakdown probe = total_loss(state.logits, state.working, state.dataset,
                                                   config.bonus, 1.0, div, config.beta);
            state.kappa = kappa_from_ratio(*config.bonus.target_ratio, probe, warnings);
        }
        state.kappa_resolved = true;
    }

    std::int64_t opt_clamps = 0;
    auto grad = [&](const PolicyLogits& lg) {
        return grad_logits(lg, state.working, state.dataset, config.bonus, state.kappa, div,
                           config.beta, &opt_clamps);
    };
    const OptimResult opt = minimize_logits(state.logits, grad, config.optimizer);
    if (!opt.converged)
        warnings.push_back("warning: optimizer did not converge at iteration " +
                           std::to_string(iteration) + " (grad inf-norm " +
                           std::to_string(opt.grad_inf_norm) + ")");
    state.logits = opt.logits;

    IterationMetrics m;
    m.iteration = iteration;
    m.loss = total_loss(state.logits, state.working, state.dataset, config.bonus, state.kappa,
                        div, config.beta);
    const PolicyTable policy = softmax_policy(state.logits);
    m.win_rate = win_rate_exact(policy, state.base);
    m.avg_reward = avg_reward_exact(policy, state.base);
    double low_ref = 0.0;
    for (int x = 0; x < state.base.n_prompts(); ++x) {
        double acc = 0.0;
        for (int y = 0; y < state.base.n_responses(); ++y)
            acc -= policy.probs.at(x, y) * std::log(state.base.ref_policy.at(x, y));
        low_ref += state.base.prompt_weights[static_cast<std::size_t>(x)] * acc;
    }
    m.low_ref_mass = low_ref;
    m.policy_entropy = policy_entropy(policy, state.base);
    m.clamp_events = m.loss.clamp_events + opt_clamps;
    m.optimizer_converged = opt.converged;

    if (config.update_ref) state.working.ref_policy = policy.probs;
    return m;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

RunRecord run_experiment(const RunConfig& config) {
    config.validate();
    const DivergenceSpec div{config.alpha, 1e-9};

    RunRecord record;
    TrainState state;
    state.base = resolve_instance(config);
    state.working = state.base;
    state.logits = logits_from_policy(state.base.ref_policy);
    state.dataset.seed = config.seed;
    record.instance = state.base;

    Rng rng = Rng::derive(config.seed, Rng::hash_label("loop"));
    try {
        for (int t = 1; t <= config.iterations; ++t)
            record.iterations.push_back(
                run_iteration(state, config, div, t, rng, record.warnings));
        record.kappa = state.kappa;
        record.final_policy = softmax_policy(state.logits);
        const LowRefStats stats = low_ref_statistics(
            record.final_policy, state.base, config.histogram_samples, rng,
            config.histogram_bin_width);
        record.final_histogram = stats.histogram;
    } catch (...) {
        // Flush whatever was recorded before propagating.
        if (!config.output_dir.empty() && !record.iterations.empty())
            write_run_outputs(record, config, config.output_dir);
        throw;
    }
    if (!config.output_dir.empty()) write_run_outputs(record, config, config.output_dir);
    return record;
}

std::vector<RunRecord> kappa_sweep(const RunConfig& config, const std::vector<double>& ratios) {
    if (ratios.empty()) throw ConfigError("kappa_sweep: empty ratio list");
    std::vector<RunRecord> records;
    std::vector<std::string> lines;
    for (double ratio : ratios) {
        RunConfig cfg = config;
        cfg.bonus.kappa.reset();
        cfg.bonus.target_ratio = ratio;
        if (!config.output_dir.empty()) {
            char name[48];
            std::snprintf(name, sizeof(name), "ratio_%g", ratio);
            cfg.output_dir = config.output_dir + "/" + name;
        }
        records.push_back(run_experiment(cfg));
        const RunRecord& r = records.back();
        lines.push_back(format_double(ratio) + "," + format_double(r.kappa) + "," +
                        format_double(r.final_metrics().win_rate) + "," +
                        format_double(r.final_metrics().avg_reward));
    }
    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
        std::ofstream out(config.output_dir + "/sweep.csv");
        out << "ratio,kappa,win_rate,avg_reward\n";
        for (const std::string& line : lines) out << line << "\n";
    }
    return records;
}

std::string run_config_to_json(const RunConfig& config) {
    json j;
    if (config.instance.kind == InstanceSource::Kind::File) {
        j["instance"] = {{"kind", "file"}, {"path", config.instance.path}};
    } else {
        const NeedleParams& np = config.instance.needle;
        j["instance"] = {{"kind", "needle"},
                         {"n_prompts", np.n_prompts},
                         {"m_responses", np.m_responses},
                         {"needle_ref_mass", np.needle_ref_mass},
                         {"reward_gap", np.reward_gap},
                         {"r_max", np.r_max}};
    }
    j["alpha"] = config.alpha;
    j["beta"] = config.beta;
    j["iterations"] = config.iterations;
    j["pairs_per_prompt"] = config.pairs_per_prompt;
    j["rollout_source"] = rollout_source_name(config.rollout_source);
    j["update_ref"] = config.update_ref;
    j["annotation"] = annotation_mode_name(config.annotation);
    j["histogram_samples"] = config.histogram_samples;
    j["histogram_bin_width"] = config.histogram_bin_width;
    json b;
    b["kind"] = bonus_kind_name(config.bonus.kind);
    if (config.bonus.kind == BonusKind::GEB) {
        b["u_design"] = {{"kind", u_design_name(config.bonus.u_design.kind)},
                         {"clamp_eps", config.bonus.u_design.clamp_eps}};
    }
    if (config.bonus.kappa) b["kappa"] = *config.bonus.kappa;
    if (config.bonus.target_ratio) b["target_ratio"] = *config.bonus.target_ratio;
    b["scope"] = bonus_scope_name(config.bonus.scope);
    b["beta"] = config.bonus.beta;
    j["bonus"] = b;
    j["optimizer"] = {{"step_size", config.optimizer.step_size},
                      {"max_steps", config.optimizer.max_steps},
                      {"tolerance", config.optimizer.tolerance},
                      {"grad_clip", config.optimizer.grad_clip}};
    j["seed"] = config.seed;
    j["output_dir"] = config.output_dir;
    return j.dump(2);
}

void write_run_outputs(const RunRecord& record, const RunConfig& config,
                       const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir + "/metrics.csv");
        out << "iteration,dpo_loss,bonus_value,kappa,ratio,win_rate,avg_reward,low_ref_mass,"
               "entropy,clamp_events\n";
        for (const IterationMetrics& m : record.iterations) {
            out << m.iteration << "," << format_double(m.loss.dpo_term) << ","
                << format_double(m.loss.bonus_term) << "," << format_double(m.loss.kappa) << ","
                << format_double(m.loss.ratio) << "," << format_double(m.win_rate) << ","
                << format_double(m.avg_reward) << "," << format_double(m.low_ref_mass) << ","
                << format_double(m.policy_entropy) << "," << m.clamp_events << "\n";
        }
    }
    {
        std::ofstream out(out_dir + "/histogram.csv");
        out << "bin_left,bin_right,count\n";
        const Histogram& h = record.final_histogram;
        for (std::size_t k = 0; k < h.counts.size(); ++k) {
            const double left = h.lo + h.bin_width * static_cast<double>(k);
            out << format_double(left) << "," << format_double(left + h.bin_width) << ","
                << h.counts[k] << "\n";
        }
    }
    {
        json summary;
        summary["config"] = json::parse(run_config_to_json(config));
        summary["seed"] = config.seed;
        summary["version"] = kVersion;
        summary["kappa"] = record.kappa;
        const IterationMetrics& fm = record.final_metrics();
        summary["final"] = {{"win_rate", fm.win_rate},
                            {"avg_reward", fm.avg_reward},
                            {"low_ref_mass", fm.low_ref_mass},
                            {"entropy", fm.policy_entropy},
                            {"dpo_loss", fm.loss.dpo_term},
                            {"bonus_value", fm.loss.bonus_term},
                            {"ratio", fm.loss.ratio},
                            {"clamp_events", fm.clamp_events}};
        summary["warnings"] = record.warnings;
        summary["audit_report"] = nullptr;
        std::ofstream out(out_dir + "/summary.json");
        out << summary.dump(2) << "\n";
    }
    record.instance.save(out_dir + "/instance.json");
}

} // namespace geb
