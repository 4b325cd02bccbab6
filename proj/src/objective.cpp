#include "geb/objective.hpp"

#include <cmath>

namespace geb {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

namespace {

double pair_margin(const PolicyTable& policy, const Instance& inst, const PreferencePair& pair,
                   const DivergenceSpec& div, double beta) {
    const double uw = policy.probs.at(pair.x, pair.winner) / inst.ref_policy.at(pair.x, pair.winner);
    const double ul = policy.probs.at(pair.x, pair.loser) / inst.ref_policy.at(pair.x, pair.loser);
    return beta * (f_prime(div, uw) - f_prime(div, ul));
}

// d(mean pair loss)/d(policy entries), raw coordinates, added into grad.
void accumulate_dpo_grad_p(const PolicyTable& policy, const Instance& inst,
                           const PreferenceDataset& dataset, const DivergenceSpec& div,
                           double beta, Table& grad) {
    const double inv_n = 1.0 / static_cast<double>(dataset.pairs.size());
    for (const PreferencePair& pair : dataset.pairs) {
        const double z = pair_margin(policy, inst, pair, div, beta);
        const double coeff = -sigmoid(-z) * beta * inv_n; // d softplus(-z)/dz
        const double pw = policy.probs.at(pair.x, pair.winner);
        const double pl = policy.probs.at(pair.x, pair.loser);
        const double qw = inst.ref_policy.at(pair.x, pair.winner);
        const double ql = inst.ref_policy.at(pair.x, pair.loser);
        grad.at(pair.x, pair.winner) += coeff * f_second(div, pw / qw) / qw;
        grad.at(pair.x, pair.loser) -= coeff * f_second(div, pl / ql) / ql;
    }
}

} // namespace

double fdpo_pair_loss(const PolicyTable& policy, const Instance& inst,
                      const PreferencePair& pair, const DivergenceSpec& div, double beta) {
    return softplus(-pair_margin(policy, inst, pair, div, beta));
}

LossBreakdown total_loss(const PolicyLogits& logits, const Instance& inst,
                         const PreferenceDataset& dataset, const BonusSpec& bonus,
                         double kappa, const DivergenceSpec& div, double beta) {
    if (dataset.pairs.empty()) throw NumericError("total_loss: empty preference dataset");
    const PolicyTable policy = softmax_policy(logits);
    LossBreakdown out;
    out.kappa = kappa;
    for (const PreferencePair& pair : dataset.pairs)
        out.dpo_term += fdpo_pair_loss(policy, inst, pair, div, beta);
    out.dpo_term /= static_cast<double>(dataset.pairs.size());
    if (bonus.kind != BonusKind::None && kappa != 0.0) {
        out.bonus_term = bonus_value(bonus, div, policy.probs, inst.ref_policy,
                                     inst.prompt_weights, dataset, &out.clamp_events);
    }
    out.total = out.dpo_term - kappa * out.bonus_term;
    out.ratio = (out.dpo_term != 0.0) ? std::abs(kappa * out.bonus_term) / std::abs(out.dpo_term)
                                      : 0.0;
    return out;
}

Table grad_logits(const PolicyLogits& logits, const Instance& inst,
                  const PreferenceDataset& dataset, const BonusSpec& bonus, double kappa,
                  const DivergenceSpec& div, double beta, std::int64_t* clamp_events) {
    if (dataset.pairs.empty()) throw NumericError("grad_logits: empty preference dataset");
    const PolicyTable policy = softmax_policy(logits);
    Table grad_p(policy.probs.rows, policy.probs.cols);
    accumulate_dpo_grad_p(policy, inst, dataset, div, beta, grad_p);
    if (bonus.kind != BonusKind::None && kappa != 0.0)
        accumulate_bonus_grad_p(bonus, div, policy.probs, inst.ref_policy, inst.prompt_weights,
                                dataset, -kappa, grad_p, clamp_events);
    // Chain through softmax: g_theta = p .* (g_p - <p, g_p>) per row.
    Table grad_theta(grad_p.rows, grad_p.cols);
    for (int x = 0; x < grad_p.rows; ++x) {
        double dot = 0.0;
        for (int y = 0; y < grad_p.cols; ++y) dot += policy.probs.at(x, y) * grad_p.at(x, y);
        for (int y = 0; y < grad_p.cols; ++y)
            grad_theta.at(x, y) = policy.probs.at(x, y) * (grad_p.at(x, y) - dot);
    }
    return grad_theta;
}

double rl_objective(const PolicyTable& policy, const Table& reward, const Instance& inst,
                    const DivergenceSpec& div, double beta) {
    double value = 0.0;
    for (int x = 0; x < policy.probs.rows; ++x) {
        double expected_r = 0.0;
        double penalty = 0.0;
        for (int y = 0; y < policy.probs.cols; ++y) {
            const double p = policy.probs.at(x, y);
            const double q = inst.ref_policy.at(x, y);
            expected_r += p * reward.at(x, y);
            penalty += q * f_value(div, p / q);
        }
        value += inst.prompt_weights[static_cast<std::size_t>(x)] * (expected_r - beta * penalty);
    }
    return value;
}

PolicyTable closed_form_optimal_policy(const Table& reward, const Instance& inst,
                                       const DivergenceSpec& div, double beta) {
    PolicyTable out{Table(reward.rows, reward.cols)};
    for (int x = 0; x < reward.rows; ++x) {
        double z = 0.0;
        for (int y = 0; y < reward.cols; ++y) {
            double v;
            try {
                v = f_prime_inverse(div, reward.at(x, y) / beta);
            } catch (const DomainError& e) {
                throw DomainError("closed_form_optimal_policy: reward entry (" +
                                  std::to_string(x) + "," + std::to_string(y) + ") r=" +
                                  std::to_string(reward.at(x, y)) + ": " + e.what());
            }
            out.probs.at(x, y) = inst.ref_policy.at(x, y) * v;
            z += out.probs.at(x, y);
        }
        for (int y = 0; y < reward.cols; ++y) out.probs.at(x, y) /= z;
    }
    return out;
}

Table reward_from_policy(const PolicyTable& policy, const Instance& inst,
                         const DivergenceSpec& div, double beta) {
    Table r(policy.probs.rows, policy.probs.cols);
    for (int x = 0; x < r.rows; ++x)
        for (int y = 0; y < r.cols; ++y)
            r.at(x, y) = beta * f_prime(div, policy.probs.at(x, y) / inst.ref_policy.at(x, y));
    return r;
}

} // namespace geb
