#ifndef GEB_BONUS_HPP
#define GEB_BONUS_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "geb/divergence.hpp"
#include "geb/tabular.hpp"

namespace geb {

// Designs for the reference-regulated reward argument u(pi, pi_ref).
// With p = pi(y|x), q = pi_ref(y|x):
//   Linear       u = 1 + alpha - p
//   Inverse      u = 1/p
//   Arctanh      u = arctanh(1 - p) + alpha
//   SelmLog      u = -ln(p) + 1
//   SigmoidRatio u = 1 - sigmoid(-beta ln(p/q))
//   RatioDiagnostic u = p/q (internal consistency probe; not a bonus design)
enum class UDesignKind { Linear, Inverse, Arctanh, SelmLog, SigmoidRatio, RatioDiagnostic };

struct UDesign {
    UDesignKind kind = UDesignKind::Linear;
    double clamp_eps = 1e-9;
};

std::string u_design_name(UDesignKind kind);
UDesignKind u_design_from_name(const std::string& name);

// u and its partials at one (p, q) point. Probabilities are clamped to
// [clamp_eps, 1 - clamp_eps] before evaluation; partials are zero where a
// clamp is active (the evaluation no longer responds to that coordinate).
struct UEval {
    double u = 0.0;
    double du_dp = 0.0;
    double du_dq = 0.0;
    bool clamped = false;
};

UEval u_eval(const UDesign& design, double p, double q, double alpha, double beta);

// Value-only accessor with the u > alpha design guard (RatioDiagnostic is
// exempt: the ratio legitimately ranges over all of (0, inf)).
double u_value(const UDesign& design, double p, double q, double alpha, double beta);

// Lower bound of u over the clamped domain; used at configuration time to
// enforce u > alpha pointwise (SigmoidRatio is only admissible when alpha
// sits strictly below this bound).
double u_lower_bound(const UDesign& design, double alpha, double beta);

enum class BonusKind { None, FEB, GEB };
enum class BonusScope { FullExpectation, RejectedOnly };

std::string bonus_kind_name(BonusKind kind);
BonusKind bonus_kind_from_name(const std::string& name);
std::string bonus_scope_name(BonusScope scope);
BonusScope bonus_scope_from_name(const std::string& name);

struct BonusSpec {
    BonusKind kind = BonusKind::None;
    UDesign u_design;                    // GEB only
    std::optional<double> kappa;         // exactly one of kappa/target_ratio
    std::optional<double> target_ratio;
    BonusScope scope = BonusScope::FullExpectation;
    double beta = 1.0;

    void validate(double alpha) const;
};

// All evaluators below take raw tables so that audit code can perturb
// single entries without renormalizing; they never assume row sums.
// clamp_events, when non-null, accumulates the number of clamped
// u-evaluations.

// beta * sum_x rho(x) sum_y q(y|x) h(p(y|x)/q(y|x))      (ratio form)
double feb_bonus(const Table& policy, const Table& ref, const std::vector<double>& weights,
                 const DivergenceSpec& div, double beta, std::int64_t* clamp_events = nullptr);

// beta * sum_x rho(x) sum_y q(y|x) h(u(p,q))             (design form)
double geb_bonus(const Table& policy, const Table& ref, const std::vector<double>& weights,
                 const UDesign& design, const DivergenceSpec& div, double beta,
                 std::int64_t* clamp_events = nullptr);

// beta * sum_x rho(x) sum_y q [ (u/Z) f'(u) - f(u/Z) ], Z(x) = sum_y q u.
// (normalized form; exists to validate its equivalence to the design form.)
double geb_bonus_normalized(const Table& policy, const Table& ref,
                            const std::vector<double>& weights, const UDesign& design,
                            const DivergenceSpec& div, double beta,
                            std::int64_t* clamp_events = nullptr);

// Loser-only estimator: mean over pairs of beta*h(u(p(y_l|x), q(y_l|x)))
// (GEB) or beta*h(p(y_l|x)/q(y_l|x)) (FEB).
double bonus_on_rejected(const PreferenceDataset& dataset, const Table& policy,
                         const Table& ref, const BonusSpec& spec, const DivergenceSpec& div,
                         std::int64_t* clamp_events = nullptr);

// Scope-dispatching evaluator used by the training loss. Returns 0 for
// BonusKind::None.
double bonus_value(const BonusSpec& spec, const DivergenceSpec& div, const Table& policy,
                   const Table& ref, const std::vector<double>& weights,
                   const PreferenceDataset& dataset, std::int64_t* clamp_events = nullptr);

// d(bonus)/d(policy entries), raw coordinates, accumulated into grad
// (same shape as policy) scaled by `scale`.
void accumulate_bonus_grad_p(const BonusSpec& spec, const DivergenceSpec& div,
                             const Table& policy, const Table& ref,
                             const std::vector<double>& weights,
                             const PreferenceDataset& dataset, double scale, Table& grad,
                             std::int64_t* clamp_events = nullptr);

// Per-prompt normalizer Z_R(x) = sum_y q(y|x) u(x,y).
std::vector<double> geb_normalizers(const Table& policy, const Table& ref,
                                    const UDesign& design, double alpha, double beta);

// Lambda(x) = [f'(u) + u f''(u) - f'(u/Z)] / [Z u f''(u)], evaluated
// entrywise; constant in y for alpha-divergences.
Table equivalence_scale_entrywise(const Table& policy, const Table& ref, const UDesign& design,
                               const DivergenceSpec& div, double beta);

} // namespace geb

#endif
