#ifndef GEB_TRAINER_HPP
#define GEB_TRAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "geb/bonus.hpp"
#include "geb/objective.hpp"
#include "geb/optimizer.hpp"
#include "geb/tabular.hpp"

namespace geb {

enum class RolloutSource { Reference, CurrentPolicy };
enum class AnnotationMode { Stochastic, Deterministic };

std::string rollout_source_name(RolloutSource s);
RolloutSource rollout_source_from_name(const std::string& name);
std::string annotation_mode_name(AnnotationMode m);
AnnotationMode annotation_mode_from_name(const std::string& name);

struct NeedleParams {
    int n_prompts = 1;
    int m_responses = 4;
    double needle_ref_mass = 0.01;
    double reward_gap = 2.0;
    double r_max = kDefaultRewardMax;
};

struct InstanceSource {
    enum class Kind { Needle, File };
    Kind kind = Kind::Needle;
    NeedleParams needle;
    std::string path;
};

struct RunConfig {
    InstanceSource instance;
    double alpha = 1.0;
    double beta = 1.0;
    int iterations = 3; // T
    int pairs_per_prompt = 8;
    RolloutSource rollout_source = RolloutSource::Reference;
    bool update_ref = false;
    AnnotationMode annotation = AnnotationMode::Stochastic;
    int histogram_samples = 4096;
    double histogram_bin_width = 0.25;
    BonusSpec bonus;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    std::string output_dir; // empty: no files written

    void validate() const;
};

struct Histogram {
    double bin_width = 0.25;
    double lo = 0.0; // left edge of counts[0]
    std::vector<std::int64_t> counts;

    std::int64_t total() const;
    // Count mass strictly below the given value.
    std::int64_t count_below(double value) const;
};

struct IterationMetrics {
    int iteration = 0;
    LossBreakdown loss;
    double win_rate = 0.0;
    double avg_reward = 0.0;
    double low_ref_mass = 0.0;
    double policy_entropy = 0.0;
    std::int64_t clamp_events = 0;
    bool optimizer_converged = true;
};

struct RunRecord {
    std::vector<IterationMetrics> iterations;
    Histogram final_histogram;
    double kappa = 0.0;
    PolicyTable final_policy;
    Instance instance;
    std::vector<std::string> warnings;

    const IterationMetrics& final_metrics() const { return iterations.back(); }
};

// Exact expected Bradley-Terry win probability of the policy against the
// reference under the ground-truth reward.
double win_rate_exact(const PolicyTable& policy, const Instance& inst);

double avg_reward_exact(const PolicyTable& policy, const Instance& inst);

// Prompt-weighted Shannon entropy of the policy rows, in nats.
double policy_entropy(const PolicyTable& policy, const Instance& inst);

struct LowRefStats {
    double low_ref_mass = 0.0; // E_{x~rho, y~pi} [-ln pi_ref(y|x)], exact
    Histogram histogram;       // ln pi_ref(y|x) over n_samples draws from pi
};

LowRefStats low_ref_statistics(const PolicyTable& policy, const Instance& inst, int n_samples,
                               Rng& rng, double bin_width = 0.25);

// kappa = target_ratio * |dpo_term| / |bonus_term| from a probe at kappa=1.
// Zero bonus yields kappa=0 with a warning; targets outside [1e-6, 1e-2]
// get a guidance note.
double kappa_from_ratio(double target_ratio, const LossBreakdown& probe,
                        std::vector<std::string>& warnings);

// Executes T iterations of the online loop and (when output_dir is set)
// writes metrics.csv, histogram.csv, summary.json and the instance
// snapshot into it.
RunRecord run_experiment(const RunConfig& config);

// Independent runs per target ratio with a shared instance and seed
// schedule; writes one subdirectory per ratio plus sweep.csv.
std::vector<RunRecord> kappa_sweep(const RunConfig& config, const std::vector<double>& ratios);

// Resolve the configured instance source (generation consumes a stream
// derived from the run seed, so gen-instance and run agree).
Instance resolve_instance(const RunConfig& config);

void write_run_outputs(const RunRecord& record, const RunConfig& config,
                       const std::string& out_dir);

std::string run_config_to_json(const RunConfig& config);

} // namespace geb

#endif
