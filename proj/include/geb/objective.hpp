#ifndef GEB_OBJECTIVE_HPP
#define GEB_OBJECTIVE_HPP

#include <cstdint>

#include "geb/bonus.hpp"
#include "geb/divergence.hpp"
#include "geb/tabular.hpp"

namespace geb {

struct LossBreakdown {
    double dpo_term = 0.0;
    double bonus_term = 0.0; // unweighted; total = dpo_term - kappa * bonus_term
    double total = 0.0;
    double ratio = 0.0; // |kappa * bonus_term| / |dpo_term|
    double kappa = 0.0;
    std::int64_t clamp_events = 0;
};

// Per-pair f-DPO loss: -ln sigma(beta f'(u_w) - beta f'(u_l)) with
// u = pi/pi_ref. At alpha=1 this is exactly the standard DPO pair loss.
double fdpo_pair_loss(const PolicyTable& policy, const Instance& inst,
                      const PreferencePair& pair, const DivergenceSpec& div, double beta);

// Mean pair loss over the dataset minus kappa times the scope-dispatched
// bonus. `kappa` must already be resolved (see kappa_from_ratio).
LossBreakdown total_loss(const PolicyLogits& logits, const Instance& inst,
                         const PreferenceDataset& dataset, const BonusSpec& bonus,
                         double kappa, const DivergenceSpec& div, double beta);

// Exact gradient of total_loss with respect to every logit. Each row has
// zero sum (softmax shift invariance). Valid at interior policies where
// no probability clamp is active.
Table grad_logits(const PolicyLogits& logits, const Instance& inst,
                  const PreferenceDataset& dataset, const BonusSpec& bonus, double kappa,
                  const DivergenceSpec& div, double beta,
                  std::int64_t* clamp_events = nullptr);

// J(pi, r) = E_{x~rho, y~pi} r - beta E_{x~rho, y~pi_ref} f(pi/pi_ref).
double rl_objective(const PolicyTable& policy, const Table& reward, const Instance& inst,
                    const DivergenceSpec& div, double beta);

// Row-normalized pi_ref * (f')^{-1}(r/beta). Maximizes rl_objective for
// rewards given as the Z-free class representative beta*f'(pi/pi_ref)
// (any reward at alpha=1, where the per-prompt offset factors out).
PolicyTable closed_form_optimal_policy(const Table& reward, const Instance& inst,
                                       const DivergenceSpec& div, double beta);

// beta * f'(pi/pi_ref), the Z-free representative of the reward class.
Table reward_from_policy(const PolicyTable& policy, const Instance& inst,
                         const DivergenceSpec& div, double beta);

// ln(1 + e^x) without overflow.
double softplus(double x);

} // namespace geb

#endif
