#ifndef GEB_VERIFY_HPP
#define GEB_VERIFY_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geb/bonus.hpp"
#include "geb/objective.hpp"
#include "geb/optimizer.hpp"
#include "geb/tabular.hpp"

namespace geb::verify {

struct Counterexample {
    double alpha = 0.0;
    std::string design;
    int x = 0;
    int y = 0;
    double value = 0.0;
};

struct AuditReport {
    std::string claim_id;
    std::string grid;
    double worst = 0.0;
    bool pass = true;
    bool premise_failed = false;
    std::string note;
    std::vector<Counterexample> counterexamples;

    void finalize() { pass = counterexamples.empty(); }
    std::string to_json() const;
};

// Bonus functional of (policy_table, ref_table) with everything else bound.
using BonusFn = std::function<double(const Table&, const Table&)>;

BonusFn make_feb_fn(const std::vector<double>& weights, DivergenceSpec div, double beta);
BonusFn make_geb_fn(const std::vector<double>& weights, UDesign design, DivergenceSpec div,
                    double beta);

// Central 4-point mixed finite difference of the bonus in the raw
// coordinates pi(y|x) and pi_s(y|x) (no renormalization; the sampling
// table defaults to pi_ref but any checkpoint can be passed).
double mixed_second_derivative(const BonusFn& bonus, const Table& policy, const Table& sampling,
                               int x, int y, double delta = 1e-4);

// Simplex-respecting variant: both perturbations move along e_y - e_y2.
double mixed_second_derivative_tangent(const BonusFn& bonus, const Table& policy,
                                       const Table& sampling, int x, int y, int y2,
                                       double delta = 1e-4);

// Random well-interior instance/policy generators used by the audits.
Instance random_instance(Rng& rng, int n_prompts, int m_responses);
PolicyTable random_interior_policy(Rng& rng, int n_prompts, int m_responses);

enum class OptimismExpectation { StrictlyNegative, NonNegative, Zero };

// Samples mixed second derivatives at random interior (policy, instance,
// x, y) tuples and checks the expected sign pattern.
AuditReport optimism_audit(const BonusSpec& spec, const std::vector<double>& alphas, int points,
                           Rng& rng, OptimismExpectation expectation, double delta = 1e-4,
                           double strict_tol = 1e-8, double zero_tol = 1e-6);

// Finite-difference check of the two sufficient conditions for strict
// optimism of a u-design:
// du/dpi + pi_ref d2u/dpi dpi_ref + ((alpha-1) pi_ref / u)(du/dpi)(du/dpi_ref) < 0
// and u > alpha, over a (p, q) grid.
AuditReport optimism_condition_check(const UDesign& design, double alpha, double beta,
                                      int grid_points);

struct CollapseResult {
    PolicyTable final_policy;
    double tv_distance = 0.0;
    double grad_inf_norm = 0.0;
    bool converged = false;
    double bonus_at_start = 0.0;
};

// Maximizes the FEB objective E_{pi_ref} h(pi/pi_ref) alone by gradient
// ascent on logits and reports total variation to pi_ref.
CollapseResult feb_collapse_test(double alpha, const Instance& inst,
                                 const OptimizerConfig& budget, Rng& rng);
CollapseResult feb_collapse_from(double alpha, const Instance& inst, const PolicyLogits& start,
                                 const OptimizerConfig& budget);

// Gradient of the normalized GEB objective in the convention of its
// equivalence proof: the per-prompt normalizer Z_R(x) is held fixed
// during differentiation, which makes the gradient exactly
// Lambda(x) times the unnormalized one.
Table normalized_bonus_grad_logits(const PolicyLogits& logits, const Instance& inst,
                                   const UDesign& design, const DivergenceSpec& div,
                                   double beta);
Table unnormalized_bonus_grad_logits(const PolicyLogits& logits, const Instance& inst,
                                     const UDesign& design, const DivergenceSpec& div,
                                     double beta);

// Three checks: (a) stationary points of either bonus objective are
// stationary for the other; (b) full-loss training with the two bonus
// forms converges to the same policy; (c) Lambda(x) is constant in y and
// positive.
AuditReport normalized_equivalence_test(const UDesign& design, double alpha, const Instance& inst,
                                     int seeds, std::uint64_t master_seed);

// At alpha=1 the FEB term vanishes identically, so training with it (any
// kappa) must match bonus-free training exactly.
AuditReport reverse_kl_bonus_invariance_test(const Instance& inst, const PreferenceDataset& dataset,
                                         double beta, const std::vector<double>& kappas,
                                         int seeds, std::uint64_t master_seed);

// Analytic-vs-finite-difference audit of total-loss gradients across
// bonus kinds, designs and the alpha grid.
AuditReport gradient_fidelity_audit(const std::vector<double>& alphas, std::uint64_t seed,
                                    double fd_step = 1e-5, double tol = 1e-5);

// Named suites used by the CLI. Collapse certifies strict-monotonicity
// cells and the flat-objective signature of the reverse-KL cell.
std::vector<AuditReport> suite_divergence(std::uint64_t seed);
std::vector<AuditReport> suite_optimism(std::uint64_t seed);
std::vector<AuditReport> suite_collapse(std::uint64_t seed);
std::vector<AuditReport> suite_equivalence(std::uint64_t seed);
std::vector<AuditReport> suite_gradients(std::uint64_t seed);
std::vector<AuditReport> run_suite(const std::string& name, std::uint64_t seed);

std::string reports_to_json(const std::vector<AuditReport>& reports);

} // namespace geb::verify

#endif
