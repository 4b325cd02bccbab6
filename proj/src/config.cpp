#include "geb/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace geb {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key '" + it.key() + "' in " + where);
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

InstanceSource parse_instance(const json& j) {
    reject_unknown_keys(j, {"kind", "path", "n_prompts", "m_responses", "needle_ref_mass",
                            "reward_gap", "r_max"},
                        "instance");
    InstanceSource src;
    const std::string kind = get_or<std::string>(j, "kind", "needle");
    if (kind == "file") {
        src.kind = InstanceSource::Kind::File;
        if (!j.contains("path")) throw ConfigError("instance.kind=file requires 'path'");
        src.path = j.at("path").get<std::string>();
        return src;
    }
    if (kind != "needle") throw ConfigError("instance.kind must be 'needle' or 'file'");
    src.kind = InstanceSource::Kind::Needle;
    src.needle.n_prompts = get_or<int>(j, "n_prompts", 1);
    src.needle.m_responses = get_or<int>(j, "m_responses", 4);
    src.needle.needle_ref_mass = get_or<double>(j, "needle_ref_mass", 0.01);
    src.needle.reward_gap = get_or<double>(j, "reward_gap", 2.0);
    src.needle.r_max = get_or<double>(j, "r_max", kDefaultRewardMax);
    return src;
}

BonusSpec parse_bonus(const json& j, double run_beta, double alpha) {
    reject_unknown_keys(j, {"kind", "u_design", "kappa", "target_ratio", "scope", "beta"},
                        "bonus");
    BonusSpec spec;
    spec.kind = bonus_kind_from_name(get_or<std::string>(j, "kind", "none"));
    if (j.contains("u_design")) {
        const json& d = j.at("u_design");
        reject_unknown_keys(d, {"kind", "clamp_eps"}, "bonus.u_design");
        spec.u_design.kind = u_design_from_name(d.at("kind").get<std::string>());
        spec.u_design.clamp_eps = get_or<double>(d, "clamp_eps", 1e-9);
    } else if (spec.kind == BonusKind::GEB) {
        throw ConfigError("bonus.kind=geb requires bonus.u_design");
    }
    if (j.contains("kappa") && j.contains("target_ratio"))
        throw ConfigError("bonus.kappa and bonus.target_ratio are mutually exclusive");
    if (j.contains("kappa")) spec.kappa = j.at("kappa").get<double>();
    if (j.contains("target_ratio")) spec.target_ratio = j.at("target_ratio").get<double>();
    if (!spec.kappa && !spec.target_ratio) {
        if (spec.kind == BonusKind::None)
            spec.kappa = 0.0;
        else
            throw ConfigError("bonus requires exactly one of kappa / target_ratio");
    }
    if (j.contains("scope")) {
        spec.scope = bonus_scope_from_name(j.at("scope").get<std::string>());
    } else {
        // FEB defaults to the full expectation (its analysis object);
        // GEB restricts to rejected responses.
        spec.scope = (spec.kind == BonusKind::GEB) ? BonusScope::RejectedOnly
                                                   : BonusScope::FullExpectation;
    }
    spec.beta = get_or<double>(j, "beta", run_beta);
    spec.validate(alpha);
    return spec;
}

OptimizerConfig parse_optimizer(const json& j) {
    reject_unknown_keys(j, {"step_size", "max_steps", "tolerance", "grad_clip"}, "optimizer");
    OptimizerConfig opt;
    opt.step_size = get_or<double>(j, "step_size", 0.5);
    opt.max_steps = get_or<int>(j, "max_steps", 2000);
    opt.tolerance = get_or<double>(j, "tolerance", 1e-8);
    opt.grad_clip = get_or<double>(j, "grad_clip", 10.0);
    return opt;
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    reject_unknown_keys(j, {"instance", "alpha", "beta", "iterations", "pairs_per_prompt",
                            "rollout_source", "update_ref", "annotation", "histogram_samples",
                            "histogram_bin_width", "bonus", "optimizer", "seed", "output_dir"},
                        "config");
    RunConfig cfg;
    cfg.alpha = get_or<double>(j, "alpha", 1.0);
    cfg.beta = get_or<double>(j, "beta", 1.0);
    cfg.iterations = get_or<int>(j, "iterations", 3);
    cfg.pairs_per_prompt = get_or<int>(j, "pairs_per_prompt", 8);
    cfg.rollout_source =
        rollout_source_from_name(get_or<std::string>(j, "rollout_source", "reference"));
    cfg.update_ref = get_or<bool>(j, "update_ref", false);
    cfg.annotation = annotation_mode_from_name(get_or<std::string>(j, "annotation", "stochastic"));
    cfg.histogram_samples = get_or<int>(j, "histogram_samples", 4096);
    cfg.histogram_bin_width = get_or<double>(j, "histogram_bin_width", 0.25);
    if (j.contains("instance")) cfg.instance = parse_instance(j.at("instance"));
    if (j.contains("bonus")) {
        cfg.bonus = parse_bonus(j.at("bonus"), cfg.beta, cfg.alpha);
    } else {
        cfg.bonus.kind = BonusKind::None;
        cfg.bonus.kappa = 0.0;
        cfg.bonus.beta = cfg.beta;
    }
    if (j.contains("optimizer")) cfg.optimizer = parse_optimizer(j.at("optimizer"));
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
    cfg.output_dir = get_or<std::string>(j, "output_dir", "");
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

} // namespace geb
