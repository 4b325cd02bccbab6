#ifndef GEB_TABULAR_HPP
#define GEB_TABULAR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "geb/errors.hpp"
#include "geb/rng.hpp"
#include "geb/table.hpp"

namespace geb {

// Probability floor applied after softmax so log(pi) and 1/pi stay finite.
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kRowSumTol = 1e-12;
inline constexpr double kDefaultRewardMax = 5.0;

// Finite prompt/response world: prompt weights rho, a row-stochastic
// reference policy, and a ground-truth reward table.
struct Instance {
    std::vector<double> prompt_weights;
    Table ref_policy;
    Table true_reward;
    std::vector<int> needle; // optional; -1 per prompt when absent
    double r_max = kDefaultRewardMax;

    int n_prompts() const { return ref_policy.rows; }
    int n_responses() const { return ref_policy.cols; }
    bool has_needle() const;
    void validate() const;

    std::string to_json() const;
    static Instance from_json(const std::string& text);
    void save(const std::string& path) const;
    static Instance load(const std::string& path);
};

struct PolicyLogits {
    Table theta;
};

struct PolicyTable {
    Table probs;
};

struct PreferencePair {
    int x = 0;
    int winner = 0;
    int loser = 0;
};

struct PreferenceDataset {
    std::vector<PreferencePair> pairs;
    int iteration = 0;
    std::uint64_t seed = 0;
};

// Row-wise exponential normalization; invariant to per-row logit shifts.
// Entries are floored at kProbFloor (and rows renormalized) so downstream
// logs and reciprocals stay finite.
PolicyTable softmax_policy(const PolicyLogits& logits);

// sigma(r*(x,y1) - r*(x,y2)) under the ground-truth reward.
double bt_preference_prob(const Instance& inst, int x, int y1, int y2);

// Categorical draw from row x of the policy.
int sample_response(const PolicyTable& policy, int x, Rng& rng);

// Winner drawn with the Bradley-Terry probability; deterministic mode
// ranks by true reward with ties broken toward the lower index.
PreferencePair annotate_pair(const Instance& inst, int x, int y1, int y2, Rng& rng,
                             bool deterministic = false);

// Synthetic instance whose optimal response per prompt carries tiny
// reference mass: ref mass needle_ref_mass on the needle, the remainder
// uniform; needle reward exceeds every other response by reward_gap,
// other rewards drawn uniformly from [min(0, reward_gap - r_max), 0].
Instance generate_needle_instance(int n_prompts, int m_responses, double needle_ref_mass,
                                  double reward_gap, Rng& rng,
                                  double r_max = kDefaultRewardMax);

// Logistic function, numerically stable at both tails.
double sigmoid(double z);

// theta = elementwise log of a row-stochastic table (the pi_0 = pi_ref init).
PolicyLogits logits_from_policy(const Table& probs);

} // namespace geb

#endif
