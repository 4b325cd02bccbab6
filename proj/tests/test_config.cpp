#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geb/config.hpp"

using namespace geb;

TEST_CASE("minimal config fills the documented defaults") {
    const RunConfig cfg = parse_config_text(R"({
        "instance": {"kind": "needle", "n_prompts": 1, "m_responses": 4},
        "alpha": 0.5
    })");
    CHECK(cfg.alpha == 0.5);
    CHECK(cfg.beta == 1.0);
    CHECK(cfg.iterations == 3);
    CHECK(cfg.pairs_per_prompt == 8);
    CHECK(cfg.rollout_source == RolloutSource::Reference);
    CHECK(cfg.update_ref == false);
    CHECK(cfg.annotation == AnnotationMode::Stochastic);
    CHECK(cfg.bonus.kind == BonusKind::None);
    CHECK(cfg.bonus.kappa.has_value());
    CHECK(*cfg.bonus.kappa == 0.0);
    CHECK(cfg.optimizer.step_size == 0.5);
    CHECK(cfg.optimizer.max_steps == 2000);
    CHECK(cfg.optimizer.tolerance == 1e-8);
    CHECK(cfg.seed == 0);
}

TEST_CASE("unknown keys are rejected by name") {
    try {
        (void)parse_config_text(R"({"alpha": 1.0, "alhpa": 0.5})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("alhpa") != std::string::npos);
    }
    CHECK_THROWS_AS((void)parse_config_text(R"({"bonus": {"kind": "none", "foo": 1}})"),
                    ConfigError);
    CHECK_THROWS_AS((void)parse_config_text(R"({"optimizer": {"lr": 0.5}})"), ConfigError);
    CHECK_THROWS_AS(
        (void)parse_config_text(R"({"instance": {"kind": "needle", "shape": 3}})"),
        ConfigError);
}

TEST_CASE("kappa and target_ratio are mutually exclusive") {
    CHECK_THROWS_AS((void)parse_config_text(R"({
        "bonus": {"kind": "geb", "u_design": {"kind": "inverse"},
                  "kappa": 0.1, "target_ratio": 0.01}
    })"),
                    ConfigError);
}

TEST_CASE("alpha outside [0,1] is rejected") {
    try {
        (void)parse_config_text(R"({"alpha": 1.5})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("[0,1]") != std::string::npos);
    }
}

TEST_CASE("bonus scope defaults depend on the bonus kind") {
    const RunConfig geb = parse_config_text(R"({
        "bonus": {"kind": "geb", "u_design": {"kind": "linear"}, "target_ratio": 1e-3}
    })");
    CHECK(geb.bonus.scope == BonusScope::RejectedOnly);
    const RunConfig feb = parse_config_text(R"({
        "bonus": {"kind": "feb", "kappa": 1.0}
    })");
    CHECK(feb.bonus.scope == BonusScope::FullExpectation);
}

TEST_CASE("geb requires a u_design and an admissible alpha pairing") {
    CHECK_THROWS_AS((void)parse_config_text(R"({
        "bonus": {"kind": "geb", "kappa": 1.0}
    })"),
                    ConfigError);
    // sigmoid-ratio is only admissible when alpha is below its u lower bound
    CHECK_THROWS_AS((void)parse_config_text(R"({
        "alpha": 0.5,
        "bonus": {"kind": "geb", "u_design": {"kind": "sigmoid_ratio"}, "kappa": 1.0}
    })"),
                    ConfigError);
    CHECK_NOTHROW((void)parse_config_text(R"({
        "alpha": 0.0,
        "bonus": {"kind": "geb", "u_design": {"kind": "sigmoid_ratio"}, "kappa": 1.0}
    })"));
}

TEST_CASE("bonus beta defaults to the run beta") {
    const RunConfig cfg = parse_config_text(R"({
        "beta": 2.5,
        "bonus": {"kind": "feb", "kappa": 1.0}
    })");
    CHECK(cfg.bonus.beta == 2.5);
}

TEST_CASE("file instance source requires a path") {
    CHECK_THROWS_AS((void)parse_config_text(R"({"instance": {"kind": "file"}})"), ConfigError);
    const RunConfig cfg =
        parse_config_text(R"({"instance": {"kind": "file", "path": "inst.json"}})");
    CHECK(cfg.instance.kind == InstanceSource::Kind::File);
    CHECK(cfg.instance.path == "inst.json");
}

TEST_CASE("config echo round trips through the serializer") {
    const RunConfig cfg = parse_config_text(R"({
        "instance": {"kind": "needle", "n_prompts": 2, "m_responses": 5,
                     "needle_ref_mass": 0.02, "reward_gap": 1.5},
        "alpha": 0.25, "beta": 0.7, "iterations": 4, "pairs_per_prompt": 6,
        "rollout_source": "current_policy", "update_ref": true,
        "annotation": "deterministic",
        "bonus": {"kind": "geb", "u_design": {"kind": "arctanh"},
                  "target_ratio": 1e-3, "scope": "full_expectation"},
        "optimizer": {"step_size": 0.2, "max_steps": 500, "tolerance": 1e-9},
        "seed": 123, "output_dir": "out"
    })");
    const RunConfig back = parse_config_text(run_config_to_json(cfg));
    CHECK(back.alpha == cfg.alpha);
    CHECK(back.beta == cfg.beta);
    CHECK(back.iterations == cfg.iterations);
    CHECK(back.pairs_per_prompt == cfg.pairs_per_prompt);
    CHECK(back.rollout_source == cfg.rollout_source);
    CHECK(back.update_ref == cfg.update_ref);
    CHECK(back.annotation == cfg.annotation);
    CHECK(back.bonus.kind == cfg.bonus.kind);
    CHECK(back.bonus.u_design.kind == cfg.bonus.u_design.kind);
    CHECK(back.bonus.scope == cfg.bonus.scope);
    CHECK(back.optimizer.max_steps == cfg.optimizer.max_steps);
    CHECK(back.seed == cfg.seed);
    CHECK(back.instance.needle.m_responses == 5);
}
