#include "geb/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace geb::verify {

using nlohmann::json;

std::string AuditReport::to_json() const {
    json j;
    j["claim_id"] = claim_id;
    j["grid"] = grid;
    j["worst"] = worst;
    j["pass"] = pass;
    j["premise_failed"] = premise_failed;
    if (!note.empty()) j["note"] = note;
    j["counterexamples"] = json::array();
    for (const Counterexample& c : counterexamples) {
        j["counterexamples"].push_back(
            {{"alpha", c.alpha}, {"design", c.design}, {"x", c.x}, {"y", c.y}, {"value", c.value}});
    }
    return j.dump(2);
}

std::string reports_to_json(const std::vector<AuditReport>& reports) {
    json arr = json::array();
    for (const AuditReport& r : reports) arr.push_back(json::parse(r.to_json()));
    return arr.dump(2);
}

BonusFn make_feb_fn(const std::vector<double>& weights, DivergenceSpec div, double beta) {
    return [weights, div, beta](const Table& policy, const Table& ref) {
        return feb_bonus(policy, ref, weights, div, beta);
    };
}

BonusFn make_geb_fn(const std::vector<double>& weights, UDesign design, DivergenceSpec div,
                    double beta) {
    return [weights, design, div, beta](const Table& policy, const Table& ref) {
        return geb_bonus(policy, ref, weights, design, div, beta);
    };
}

double mixed_second_derivative(const BonusFn& bonus, const Table& policy, const Table& sampling,
                               int x, int y, double delta) {
    const double p = policy.at(x, y);
    const double q = sampling.at(x, y);
    if (!(p - delta > 0.0) || !(p + delta < 1.0) || !(q - delta > 0.0) || !(q + delta < 1.0))
        throw DomainError("mixed_second_derivative: perturbation escapes (0,1); shrink delta");
    Table pol = policy;
    Table smp = sampling;
    auto eval = [&](double dp, double dq) {
        pol.at(x, y) = p + dp;
        smp.at(x, y) = q + dq;
        return bonus(pol, smp);
    };
    const double v = (eval(delta, delta) - eval(delta, -delta) - eval(-delta, delta) +
                      eval(-delta, -delta)) /
                     (4.0 * delta * delta);
    return v;
}

double mixed_second_derivative_tangent(const BonusFn& bonus, const Table& policy,
                                       const Table& sampling, int x, int y, int y2,
                                       double delta) {
    Table pol = policy;
    Table smp = sampling;
    auto eval = [&](double dp, double dq) {
        pol.at(x, y) = policy.at(x, y) + dp;
        pol.at(x, y2) = policy.at(x, y2) - dp;
        smp.at(x, y) = sampling.at(x, y) + dq;
        smp.at(x, y2) = sampling.at(x, y2) - dq;
        return bonus(pol, smp);
    };
    return (eval(delta, delta) - eval(delta, -delta) - eval(-delta, delta) +
            eval(-delta, -delta)) /
           (4.0 * delta * delta);
}

namespace {

// Rows mixed with uniform mass so every entry stays well interior.
Table random_interior_rows(Rng& rng, int n, int m) {
    Table t(n, m);
    for (int x = 0; x < n; ++x) {
        double z = 0.0;
        for (int y = 0; y < m; ++y) {
            t.at(x, y) = std::exp(rng.normal());
            z += t.at(x, y);
        }
        double s = 0.0;
        for (int y = 0; y < m; ++y) {
            t.at(x, y) = 0.85 * t.at(x, y) / z + 0.15 / m;
            s += t.at(x, y);
        }
        for (int y = 0; y < m; ++y) t.at(x, y) /= s;
    }
    return t;
}

Table chain_softmax(const Table& probs, const Table& grad_p) {
    Table g(grad_p.rows, grad_p.cols);
    for (int x = 0; x < grad_p.rows; ++x) {
        double dot = 0.0;
        for (int y = 0; y < grad_p.cols; ++y) dot += probs.at(x, y) * grad_p.at(x, y);
        for (int y = 0; y < grad_p.cols; ++y)
            g.at(x, y) = probs.at(x, y) * (grad_p.at(x, y) - dot);
    }
    return g;
}

PolicyLogits random_logits(Rng& rng, int n, int m, double scale = 1.0) {
    PolicyLogits lg{Table(n, m)};
    for (double& v : lg.theta.data) v = scale * rng.normal();
    return lg;
}

double lambda_of_z(const DivergenceSpec& div, double z) {
    const double a = div.alpha;
    if (1.0 - a < div.boundary_tol) return (std::log(z) + 1.0) / z;
    // (z^(1-a) - a)/(z(1-a)) written via expm1 for stability near a=1
    return (std::expm1((1.0 - a) * std::log(z)) / (1.0 - a) + 1.0) / z;
}

} // namespace

Instance random_instance(Rng& rng, int n_prompts, int m_responses) {
    Instance inst;
    inst.ref_policy = random_interior_rows(rng, n_prompts, m_responses);
    inst.true_reward = Table(n_prompts, m_responses);
    for (double& r : inst.true_reward.data) r = rng.uniform(-2.0, 2.0);
    inst.prompt_weights.assign(n_prompts, 0.0);
    double z = 0.0;
    for (double& w : inst.prompt_weights) {
        w = 0.2 + rng.uniform01();
        z += w;
    }
    for (double& w : inst.prompt_weights) w /= z;
    inst.validate();
    return inst;
}

PolicyTable random_interior_policy(Rng& rng, int n_prompts, int m_responses) {
    return PolicyTable{random_interior_rows(rng, n_prompts, m_responses)};
}

AuditReport optimism_audit(const BonusSpec& spec, const std::vector<double>& alphas, int points,
                           Rng& rng, OptimismExpectation expectation, double delta,
                           double strict_tol, double zero_tol) {
    AuditReport report;
    const std::string design = spec.kind == BonusKind::GEB ? u_design_name(spec.u_design.kind)
                                                           : bonus_kind_name(spec.kind);
    report.claim_id = "optimism/" + design;
    std::ostringstream grid;
    grid << points << " random interior points per alpha, delta=" << delta;
    report.grid = grid.str();
    double worst = (expectation == OptimismExpectation::StrictlyNegative)
                       ? -std::numeric_limits<double>::infinity()
                       : std::numeric_limits<double>::infinity();
    for (double alpha : alphas) {
        const DivergenceSpec div{alpha, 1e-9};
        const bool at_reverse_kl = std::abs(alpha - 1.0) < 1e-12;
        for (int k = 0; k < points; ++k) {
            const int n = 1 + rng.uniform_int(2);
            const int m = 3 + rng.uniform_int(3);
            const Instance inst = random_instance(rng, n, m);
            const PolicyTable pol = random_interior_policy(rng, n, m);
            const int x = rng.uniform_int(n);
            const int y = rng.uniform_int(m);
            const BonusFn fn = (spec.kind == BonusKind::FEB)
                                   ? make_feb_fn(inst.prompt_weights, div, spec.beta)
                                   : make_geb_fn(inst.prompt_weights, spec.u_design, div,
                                                 spec.beta);
            const double v =
                mixed_second_derivative(fn, pol.probs, inst.ref_policy, x, y, delta);
            bool ok = true;
            switch (expectation) {
                case OptimismExpectation::StrictlyNegative:
                    ok = v <= -strict_tol;
                    worst = std::max(worst, v);
                    break;
                case OptimismExpectation::NonNegative:
                    ok = at_reverse_kl ? std::abs(v) < zero_tol : v >= -strict_tol;
                    worst = std::min(worst, at_reverse_kl ? zero_tol - std::abs(v) : v);
                    break;
                case OptimismExpectation::Zero:
                    ok = std::abs(v) < zero_tol;
                    worst = std::min(worst, zero_tol - std::abs(v));
                    break;
            }
            if (!ok) report.counterexamples.push_back({alpha, design, x, y, v});
        }
    }
    report.worst = worst;
    report.finalize();
    return report;
}

AuditReport optimism_condition_check(const UDesign& design, double alpha, double beta,
                                      int grid_points) {
    const double lb = u_lower_bound(design, alpha, beta);
    if (!(alpha < lb))
        throw ConfigError("design '" + u_design_name(design.kind) +
                          "' invalid for alpha=" + std::to_string(alpha) +
                          " (requires alpha < " + std::to_string(lb) + ")");
    AuditReport report;
    report.claim_id = "optimism_condition/" + u_design_name(design.kind) + "/alpha=" +
                      std::to_string(alpha);
    report.grid = std::to_string(grid_points) + "x" + std::to_string(grid_points) +
                  " (p,q) grid on [0.02,0.98]";
    auto u_at = [&](double p, double q) { return u_eval(design, p, q, alpha, beta).u; };
    const double d1 = 1e-6; // first derivatives
    const double d2 = 1e-5; // mixed second derivative
    double worst_condition = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_points; ++i) {
        const double p = 0.02 + (0.98 - 0.02) * i / (grid_points - 1);
        for (int j = 0; j < grid_points; ++j) {
            const double q = 0.02 + (0.98 - 0.02) * j / (grid_points - 1);
            const double u = u_at(p, q);
            if (!(u > alpha)) {
                report.counterexamples.push_back({alpha, u_design_name(design.kind), i, j, u});
                continue;
            }
            const double up = (u_at(p + d1, q) - u_at(p - d1, q)) / (2.0 * d1);
            const double uq = (u_at(p, q + d1) - u_at(p, q - d1)) / (2.0 * d1);
            const double upq = (u_at(p + d2, q + d2) - u_at(p + d2, q - d2) -
                                u_at(p - d2, q + d2) + u_at(p - d2, q - d2)) /
                               (4.0 * d2 * d2);
            const double condition = up + q * upq + (alpha - 1.0) * q / u * up * uq;
            worst_condition = std::max(worst_condition, condition);
            if (!(condition < 0.0))
                report.counterexamples.push_back(
                    {alpha, u_design_name(design.kind), i, j, condition});
        }
    }
    report.worst = worst_condition;
    report.finalize();
    return report;
}

CollapseResult feb_collapse_from(double alpha, const Instance& inst, const PolicyLogits& start,
                                 const OptimizerConfig& budget) {
    const DivergenceSpec div{alpha, 1e-9};
    const int n = inst.n_prompts();
    const int m = inst.n_responses();
    const UDesign ratio{UDesignKind::RatioDiagnostic, 1e-15};
    auto grad = [&](const PolicyLogits& lg) {
        const PolicyTable pi = softmax_policy(lg);
        Table gp(n, m);
        for (int x = 0; x < n; ++x) {
            const double w = inst.prompt_weights[static_cast<std::size_t>(x)];
            for (int y = 0; y < m; ++y) {
                const UEval e =
                    u_eval(ratio, pi.probs.at(x, y), inst.ref_policy.at(x, y), alpha, 1.0);
                // minimize the negated objective
                gp.at(x, y) = -w * h_prime(div, e.u) * e.du_dp * inst.ref_policy.at(x, y);
            }
        }
        return chain_softmax(pi.probs, gp);
    };
    CollapseResult res;
    res.bonus_at_start = feb_bonus(softmax_policy(start).probs, inst.ref_policy,
                                   inst.prompt_weights, div, 1.0);
    const OptimResult opt = minimize_logits(start, grad, budget);
    res.final_policy = softmax_policy(opt.logits);
    res.tv_distance = total_variation(res.final_policy.probs, inst.ref_policy);
    res.grad_inf_norm = opt.grad_inf_norm;
    res.converged = opt.converged;
    return res;
}

CollapseResult feb_collapse_test(double alpha, const Instance& inst,
                                 const OptimizerConfig& budget, Rng& rng) {
    return feb_collapse_from(alpha, inst,
                             random_logits(rng, inst.n_prompts(), inst.n_responses()), budget);
}

Table unnormalized_bonus_grad_logits(const PolicyLogits& logits, const Instance& inst,
                                     const UDesign& design, const DivergenceSpec& div,
                                     double beta) {
    const PolicyTable pi = softmax_policy(logits);
    Table gp(pi.probs.rows, pi.probs.cols);
    BonusSpec spec;
    spec.kind = BonusKind::GEB;
    spec.u_design = design;
    spec.scope = BonusScope::FullExpectation;
    spec.beta = beta;
    accumulate_bonus_grad_p(spec, div, pi.probs, inst.ref_policy, inst.prompt_weights, {}, 1.0,
                            gp);
    return chain_softmax(pi.probs, gp);
}

Table normalized_bonus_grad_logits(const PolicyLogits& logits, const Instance& inst,
                                   const UDesign& design, const DivergenceSpec& div,
                                   double beta) {
    const PolicyTable pi = softmax_policy(logits);
    Table gp(pi.probs.rows, pi.probs.cols);
    BonusSpec spec;
    spec.kind = BonusKind::GEB;
    spec.u_design = design;
    spec.scope = BonusScope::FullExpectation;
    spec.beta = beta;
    accumulate_bonus_grad_p(spec, div, pi.probs, inst.ref_policy, inst.prompt_weights, {}, 1.0,
                            gp);
    const std::vector<double> z =
        geb_normalizers(pi.probs, inst.ref_policy, design, div.alpha, beta);
    for (int x = 0; x < gp.rows; ++x) {
        const double lam = lambda_of_z(div, z[static_cast<std::size_t>(x)]);
        for (int y = 0; y < gp.cols; ++y) gp.at(x, y) *= lam;
    }
    return chain_softmax(pi.probs, gp);
}

namespace {

PreferenceDataset sample_reference_dataset(const Instance& inst, int pairs_per_prompt,
                                           Rng& rng) {
    PreferenceDataset ds;
    const PolicyTable ref{inst.ref_policy};
    for (int x = 0; x < inst.n_prompts(); ++x) {
        for (int k = 0; k < pairs_per_prompt; ++k) {
            const int y1 = sample_response(ref, x, rng);
            const int y2 = rng.categorical_excluding(
                {inst.ref_policy.row(x), static_cast<std::size_t>(inst.n_responses())}, y1);
            ds.pairs.push_back(annotate_pair(inst, x, y1, y2, rng));
        }
    }
    return ds;
}

} // namespace

namespace {

// Every unordered pair in both orientations plus one reward-ranked extra
// copy. Both orientations make the pair loss coercive, so the training
// loss has an interior minimizer and "converged policy" is well defined.
PreferenceDataset symmetric_tilted_dataset(const Instance& inst) {
    PreferenceDataset ds;
    for (int x = 0; x < inst.n_prompts(); ++x) {
        for (int y = 0; y < inst.n_responses(); ++y) {
            for (int y2 = y + 1; y2 < inst.n_responses(); ++y2) {
                ds.pairs.push_back({x, y, y2});
                ds.pairs.push_back({x, y2, y});
                const bool y_better = inst.true_reward.at(x, y) >= inst.true_reward.at(x, y2);
                ds.pairs.push_back({x, y_better ? y : y2, y_better ? y2 : y});
            }
        }
    }
    return ds;
}

// Finite difference of the normalized bonus value with the per-prompt
// normalizer frozen at the evaluation point (the differentiation
// convention under which the equivalence is proved).
Table fd_normalized_bonus_grad_logits(const PolicyLogits& logits, const Instance& inst,
                                      const UDesign& design, const DivergenceSpec& div,
                                      double beta, double fd_step) {
    const PolicyTable at = softmax_policy(logits);
    const std::vector<double> z_frozen =
        geb_normalizers(at.probs, inst.ref_policy, design, div.alpha, beta);
    auto frozen_value = [&](const PolicyLogits& lg) {
        const PolicyTable pi = softmax_policy(lg);
        double total = 0.0;
        for (int x = 0; x < pi.probs.rows; ++x) {
            const double zx = z_frozen[static_cast<std::size_t>(x)];
            double row = 0.0;
            for (int y = 0; y < pi.probs.cols; ++y) {
                const double u =
                    u_eval(design, pi.probs.at(x, y), inst.ref_policy.at(x, y), div.alpha, beta)
                        .u;
                row += inst.ref_policy.at(x, y) *
                       ((u / zx) * f_prime(div, u) - f_value(div, u / zx));
            }
            total += inst.prompt_weights[static_cast<std::size_t>(x)] * row;
        }
        return beta * total;
    };
    Table g(logits.theta.rows, logits.theta.cols);
    for (int x = 0; x < g.rows; ++x) {
        for (int y = 0; y < g.cols; ++y) {
            PolicyLogits pert = logits;
            pert.theta.at(x, y) += fd_step;
            const double up = frozen_value(pert);
            pert.theta.at(x, y) -= 2.0 * fd_step;
            const double dn = frozen_value(pert);
            g.at(x, y) = (up - dn) / (2.0 * fd_step);
        }
    }
    return g;
}

} // namespace

AuditReport normalized_equivalence_test(const UDesign& design, double alpha, const Instance& inst,
                                     int seeds, std::uint64_t master_seed) {
    AuditReport report;
    report.claim_id = "normalized_equivalence/" + u_design_name(design.kind) + "/alpha=" +
                      std::to_string(alpha);
    report.grid = std::to_string(seeds) + " seeds, stationarity tol 1e-6, training TV tol 1e-3";
    const DivergenceSpec div{alpha, 1e-9};
    const double beta = 1.0;
    const int n = inst.n_prompts();
    const int m = inst.n_responses();
    double worst = 0.0;

    // (c) Lambda(x) constancy in y and positivity, on random policies.
    {
        Rng rng = Rng::derive(master_seed, 7001);
        for (int k = 0; k < 8; ++k) {
            const PolicyTable pol = random_interior_policy(rng, n, m);
            const Table lam = equivalence_scale_entrywise(pol.probs, inst.ref_policy, design, div, beta);
            for (int x = 0; x < n; ++x) {
                double mean = 0.0;
                for (int y = 0; y < m; ++y) mean += lam.at(x, y);
                mean /= m;
                for (int y = 0; y < m; ++y) {
                    const double dev = std::abs(lam.at(x, y) - mean);
                    worst = std::max(worst, dev);
                    if (dev > 1e-8) {
                        report.premise_failed = true;
                        report.note = "Lambda varies in y; premise of the equivalence fails";
                    }
                    if (!(lam.at(x, y) > 0.0))
                        report.counterexamples.push_back(
                            {alpha, "lambda_nonpositive", x, y, lam.at(x, y)});
                }
            }
        }
    }
    if (report.premise_failed) {
        report.finalize();
        report.worst = worst;
        return report;
    }

    auto grad_h_at = [&](const PolicyLogits& lg) {
        return unnormalized_bonus_grad_logits(lg, inst, design, div, beta);
    };
    auto grad_hat_at = [&](const PolicyLogits& lg) {
        return normalized_bonus_grad_logits(lg, inst, design, div, beta);
    };

    // Gradient structure: the frozen-normalizer gradient of the normalized
    // form must match Lambda(x) times the design-form gradient, independently
    // finite-differenced. This is the identity the stationarity transfer
    // rests on, and it holds at every policy, not just stationary ones.
    {
        Rng rng = Rng::derive(master_seed, 7002);
        for (int k = 0; k < 20; ++k) {
            const PolicyLogits lg = random_logits(rng, n, m);
            const Table analytic = grad_hat_at(lg);
            const Table fd = fd_normalized_bonus_grad_logits(lg, inst, design, div, beta, 1e-6);
            for (int x = 0; x < n; ++x) {
                for (int y = 0; y < m; ++y) {
                    const double rel = std::abs(fd.at(x, y) - analytic.at(x, y)) /
                                       std::max({std::abs(fd.at(x, y)),
                                                 std::abs(analytic.at(x, y)), 1.0});
                    worst = std::max(worst, rel);
                    if (!(rel < 1e-6))
                        report.counterexamples.push_back(
                            {alpha, "lambda_gradient_structure", x, y, rel});
                }
            }
        }
    }

    // (a) cross-vanishing at numerically stationary points of either
    // objective. Stationary points are hunted by descent/ascent from
    // random starts; near-vertex starts cover the boundary-stationary
    // designs whose saturating tails plain descent cannot finish.
    const OptimizerConfig bonus_budget{0.5, 60000, 1e-9};
    const OptimizerConfig train_budget{0.5, 40000, 1e-9};
    int stationary_points = 0;
    for (int s = 0; s < seeds; ++s) {
        Rng rng = Rng::derive(master_seed, 500 + static_cast<std::uint64_t>(s));
        std::vector<PolicyLogits> starts;
        starts.push_back(random_logits(rng, n, m));
        {
            PolicyLogits corner{Table(n, m, 0.0)};
            for (int x = 0; x < n; ++x) corner.theta.at(x, rng.uniform_int(m)) = 25.0;
            starts.push_back(corner);
        }
        for (const PolicyLogits& start : starts) {
            for (double sign : {1.0, -1.0}) {
                auto dir_h = [&](const PolicyLogits& lg) {
                    Table g = grad_h_at(lg);
                    for (double& v : g.data) v *= sign;
                    return g;
                };
                const OptimResult at_h = minimize_logits(start, dir_h, bonus_budget);
                if (at_h.converged) {
                    ++stationary_points;
                    const double cross = grad_hat_at(at_h.logits).max_abs();
                    worst = std::max(worst, cross);
                    if (!(cross < 1e-6))
                        report.counterexamples.push_back(
                            {alpha, "cross_grad_normalized", s, 0, cross});
                }
                auto dir_hat = [&](const PolicyLogits& lg) {
                    Table g = grad_hat_at(lg);
                    for (double& v : g.data) v *= sign;
                    return g;
                };
                const OptimResult at_hat = minimize_logits(start, dir_hat, bonus_budget);
                if (at_hat.converged) {
                    ++stationary_points;
                    const double cross = grad_h_at(at_hat.logits).max_abs();
                    worst = std::max(worst, cross);
                    if (!(cross < 1e-6))
                        report.counterexamples.push_back(
                            {alpha, "cross_grad_unnormalized", s, 0, cross});
                }
            }
        }

        // (b) full-training-loss twin runs from pi_0 = pi_ref. The
        // symmetric core keeps the pair loss coercive so both runs have a
        // minimizer to converge to; the sampled tail varies per seed.
        PreferenceDataset ds = symmetric_tilted_dataset(inst);
        const PreferenceDataset extra = sample_reference_dataset(inst, 2, rng);
        ds.pairs.insert(ds.pairs.end(), extra.pairs.begin(), extra.pairs.end());
        const PolicyLogits init = logits_from_policy(inst.ref_policy);
        BonusSpec spec;
        spec.kind = BonusKind::GEB;
        spec.u_design = design;
        spec.scope = BonusScope::FullExpectation;
        spec.beta = beta;
        spec.kappa = 1.0;
        const LossBreakdown probe = total_loss(init, inst, ds, spec, 1.0, div, beta);
        const double kappa = (probe.bonus_term != 0.0)
                                 ? 1e-3 * std::abs(probe.dpo_term) / std::abs(probe.bonus_term)
                                 : 0.0;
        auto grad_train_h = [&](const PolicyLogits& lg) {
            return grad_logits(lg, inst, ds, spec, kappa, div, beta);
        };
        BonusSpec none;
        none.kind = BonusKind::None;
        none.kappa = 0.0;
        auto grad_train_hat = [&](const PolicyLogits& lg) {
            Table g = grad_logits(lg, inst, ds, none, 0.0, div, beta);
            const Table gb = grad_hat_at(lg);
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] -= kappa * gb.data[i];
            return g;
        };
        const OptimResult run_h = minimize_logits(init, grad_train_h, train_budget);
        const OptimResult run_hat = minimize_logits(init, grad_train_hat, train_budget);
        const double tv = total_variation(softmax_policy(run_h.logits).probs,
                                          softmax_policy(run_hat.logits).probs);
        worst = std::max(worst, tv);
        if (!(tv < 1e-3)) report.counterexamples.push_back({alpha, "training_tv", s, 0, tv});
    }
    if (stationary_points == 0)
        report.note = "no numerically stationary point reached within budget";

    report.worst = worst;
    report.finalize();
    return report;
}

AuditReport reverse_kl_bonus_invariance_test(const Instance& inst, const PreferenceDataset& dataset,
                                         double beta, const std::vector<double>& kappas,
                                         int seeds, std::uint64_t master_seed) {
    AuditReport report;
    report.claim_id = "reverse_kl_bonus_invariance";
    report.grid = std::to_string(seeds) + " seeds x " + std::to_string(kappas.size()) +
                  " kappas, TV tol 1e-6";
    const DivergenceSpec div{1.0, 1e-9};
    const OptimizerConfig budget{0.5, 2000, 1e-8};
    BonusSpec none;
    none.kind = BonusKind::None;
    none.kappa = 0.0;
    BonusSpec feb;
    feb.kind = BonusKind::FEB;
    feb.scope = BonusScope::FullExpectation;
    feb.beta = beta;
    feb.kappa = 1.0;
    double worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        Rng rng = Rng::derive(master_seed, static_cast<std::uint64_t>(s));
        const PolicyLogits theta0 = random_logits(rng, inst.n_prompts(), inst.n_responses());
        auto g_none = [&](const PolicyLogits& lg) {
            return grad_logits(lg, inst, dataset, none, 0.0, div, beta);
        };
        const OptimResult base = minimize_logits(theta0, g_none, budget);
        const Table base_policy = softmax_policy(base.logits).probs;
        for (double kappa : kappas) {
            auto g_feb = [&](const PolicyLogits& lg) {
                return grad_logits(lg, inst, dataset, feb, kappa, div, beta);
            };
            const OptimResult with_feb = minimize_logits(theta0, g_feb, budget);
            const double tv = total_variation(base_policy, softmax_policy(with_feb.logits).probs);
            worst = std::max(worst, tv);
            if (!(tv < 1e-6))
                report.counterexamples.push_back({1.0, "kappa=" + std::to_string(kappa), s, 0, tv});
        }
    }
    report.worst = worst;
    report.finalize();
    return report;
}

AuditReport gradient_fidelity_audit(const std::vector<double>& alphas, std::uint64_t seed,
                                    double fd_step, double tol) {
    AuditReport report;
    report.claim_id = "gradient_fidelity";
    report.grid = "all bonus kinds x alpha grid, central FD step " + std::to_string(fd_step);
    struct Case {
        BonusKind kind;
        UDesignKind design;
        BonusScope scope;
    };
    const std::vector<Case> cases = {
        {BonusKind::None, UDesignKind::Linear, BonusScope::FullExpectation},
        {BonusKind::FEB, UDesignKind::Linear, BonusScope::FullExpectation},
        {BonusKind::FEB, UDesignKind::Linear, BonusScope::RejectedOnly},
        {BonusKind::GEB, UDesignKind::Linear, BonusScope::FullExpectation},
        {BonusKind::GEB, UDesignKind::Inverse, BonusScope::RejectedOnly},
        {BonusKind::GEB, UDesignKind::Arctanh, BonusScope::FullExpectation},
        {BonusKind::GEB, UDesignKind::SelmLog, BonusScope::RejectedOnly},
        {BonusKind::GEB, UDesignKind::SigmoidRatio, BonusScope::FullExpectation},
    };
    Rng rng = Rng::derive(seed, 31);
    double worst = 0.0;
    for (double alpha : alphas) {
        const DivergenceSpec div{alpha, 1e-9};
        for (const Case& c : cases) {
            if (c.kind == BonusKind::GEB && c.design == UDesignKind::SigmoidRatio && alpha > 0.0)
                continue; // admissible only below its u lower bound
            const int n = 2, m = 4;
            const Instance inst = random_instance(rng, n, m);
            PreferenceDataset ds = sample_reference_dataset(inst, 4, rng);
            PolicyLogits lg = random_logits(rng, n, m, 0.7);
            BonusSpec spec;
            spec.kind = c.kind;
            spec.u_design = UDesign{c.design, 1e-9};
            spec.scope = c.scope;
            spec.beta = 1.0;
            spec.kappa = 0.5;
            const double kappa = 0.5;
            const double beta = 1.0;
            const Table analytic = grad_logits(lg, inst, ds, spec, kappa, div, beta);
            for (int x = 0; x < n; ++x) {
                for (int y = 0; y < m; ++y) {
                    PolicyLogits pert = lg;
                    pert.theta.at(x, y) += fd_step;
                    const double up = total_loss(pert, inst, ds, spec, kappa, div, beta).total;
                    pert.theta.at(x, y) -= 2.0 * fd_step;
                    const double dn = total_loss(pert, inst, ds, spec, kappa, div, beta).total;
                    const double fd = (up - dn) / (2.0 * fd_step);
                    const double an = analytic.at(x, y);
                    const double rel =
                        std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
                    worst = std::max(worst, rel);
                    if (!(rel < tol))
                        report.counterexamples.push_back(
                            {alpha, bonus_kind_name(c.kind) + "/" + u_design_name(c.design), x, y,
                             rel});
                }
            }
        }
    }
    report.worst = worst;
    report.finalize();
    return report;
}

// ---------------------------------------------------------------------------
// Named suites

namespace {

std::vector<double> log_grid_avoiding_one(int points) {
    // 10^-3 .. 10^3; point count chosen so u = 1 is never hit exactly.
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k)
        g[static_cast<std::size_t>(k)] = std::pow(10.0, -3.0 + 6.0 * k / (points - 1));
    return g;
}

} // namespace

std::vector<AuditReport> suite_divergence(std::uint64_t /*seed*/) {
    std::vector<AuditReport> out;
    const std::vector<double> alphas = {0.0, 1e-7, 0.25, 0.5, 0.75, 1.0 - 1e-7, 1.0};
    const std::vector<double> ugrid = log_grid_avoiding_one(20);

    // Branch consistency near the boundary alphas.
    {
        AuditReport r;
        r.claim_id = "divergence/branch_consistency";
        r.grid = "alpha in {1e-7, 1-1e-7}, u log-grid [1e-3,1e3], rel tol 1e-4";
        double worst = 0.0;
        auto rel = [](double a, double b) {
            return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
        };
        for (double alpha : {1e-7, 1.0 - 1e-7}) {
            const DivergenceSpec gen{alpha, 1e-9}; // general branch (tol below alpha gap)
            const DivergenceSpec lim{alpha < 0.5 ? 0.0 : 1.0, 1e-9};
            for (double u : ugrid) {
                const double checks[4][2] = {
                    {f_value(gen, u), f_value(lim, u)},
                    {f_prime(gen, u), f_prime(lim, u)},
                    {h_value(gen, u), h_value(lim, u)},
                    {f_second(gen, u), f_second(lim, u)},
                };
                for (const auto& c : checks) {
                    const double e = rel(c[0], c[1]);
                    worst = std::max(worst, e);
                    if (!(e < 1e-4))
                        r.counterexamples.push_back({alpha, "branch", 0, 0, e});
                }
            }
        }
        r.worst = worst;
        r.finalize();
        out.push_back(r);
    }
    // Convexity: f'' > 0 everywhere.
    {
        AuditReport r;
        r.claim_id = "divergence/convexity";
        r.grid = "alpha grid x u log-grid";
        double worst = std::numeric_limits<double>::infinity();
        for (double alpha : alphas) {
            const DivergenceSpec div{alpha, 1e-9};
            for (double u : ugrid) {
                const double v = f_second(div, u);
                worst = std::min(worst, v);
                if (!(v > 0.0)) r.counterexamples.push_back({alpha, "f_second", 0, 0, v});
            }
        }
        r.worst = worst;
        r.finalize();
        out.push_back(r);
    }
    // Central finite difference of f matches f'.
    {
        AuditReport r;
        r.claim_id = "divergence/derivative_consistency";
        r.grid = "step 1e-6*u, rel tol 1e-6";
        double worst = 0.0;
        for (double alpha : alphas) {
            const DivergenceSpec div{alpha, 1e-9};
            for (double u : ugrid) {
                const double d = 1e-6 * u;
                const double fd = (f_value(div, u + d) - f_value(div, u - d)) / (2.0 * d);
                const double an = f_prime(div, u);
                const double rel = std::abs(fd - an) / std::max(std::abs(an), 1e-6);
                worst = std::max(worst, rel);
                if (!(rel < 1e-6)) r.counterexamples.push_back({alpha, "f_prime_fd", 0, 0, rel});
            }
        }
        r.worst = worst;
        r.finalize();
        out.push_back(r);
    }
    // Round trip f' o (f')^-1 = id.
    {
        AuditReport r;
        r.claim_id = "divergence/round_trip";
        r.grid = "v grid within the range of f', abs tol 1e-10";
        double worst = 0.0;
        for (double alpha : alphas) {
            const DivergenceSpec div{alpha, 1e-9};
            const double hi =
                (alpha > 1.0 - 1e-9) ? 5.0 : std::min(0.99 / (1.0 - alpha), 30.0);
            for (int k = 0; k < 30; ++k) {
                const double v = -5.0 + (hi + 5.0) * k / 29.0;
                const double err = std::abs(f_prime(div, f_prime_inverse(div, v)) - v);
                worst = std::max(worst, err);
                if (!(err < 1e-10)) r.counterexamples.push_back({alpha, "round_trip", k, 0, err});
            }
        }
        r.worst = worst;
        r.finalize();
        out.push_back(r);
    }
    // h strictly increasing (what makes the bonus-alone optimum unique).
    {
        AuditReport r;
        r.claim_id = "divergence/h_monotone";
        r.grid = "pairwise comparisons on the u log-grid";
        double worst = std::numeric_limits<double>::infinity();
        for (double alpha : alphas) {
            const DivergenceSpec div{alpha, 1e-9};
            for (std::size_t k = 0; k + 1 < ugrid.size(); ++k) {
                const double gap = h_value(div, ugrid[k + 1]) - h_value(div, ugrid[k]);
                worst = std::min(worst, gap);
                if (!(gap > 0.0))
                    r.counterexamples.push_back({alpha, "h_monotone", static_cast<int>(k), 0, gap});
            }
        }
        r.worst = worst;
        r.finalize();
        out.push_back(r);
    }
    return out;
}

std::vector<AuditReport> suite_optimism(std::uint64_t seed) {
    std::vector<AuditReport> out;
    {
        BonusSpec feb;
        feb.kind = BonusKind::FEB;
        feb.scope = BonusScope::FullExpectation;
        feb.beta = 1.0;
        feb.kappa = 1.0;
        Rng rng = Rng::derive(seed, 11);
        AuditReport r = optimism_audit(feb, {0.0, 0.25, 0.5, 0.75}, 200, rng,
                                       OptimismExpectation::NonNegative);
        r.claim_id = "optimism_failure/feb";
        out.push_back(r);
        Rng rng1 = Rng::derive(seed, 12);
        AuditReport rz =
            optimism_audit(feb, {1.0}, 200, rng1, OptimismExpectation::Zero);
        rz.claim_id = "optimism_failure/feb_reverse_kl_zero";
        out.push_back(rz);
    }
    const UDesignKind designs[] = {UDesignKind::Linear, UDesignKind::Inverse,
                                   UDesignKind::Arctanh, UDesignKind::SelmLog};
    int stream = 20;
    for (UDesignKind d : designs) {
        BonusSpec geb;
        geb.kind = BonusKind::GEB;
        geb.u_design = UDesign{d, 1e-9};
        geb.scope = BonusScope::FullExpectation;
        geb.beta = 1.0;
        geb.kappa = 1.0;
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(stream++));
        out.push_back(optimism_audit(geb, {0.0, 0.5, 1.0}, 200, rng,
                                     OptimismExpectation::StrictlyNegative));
        for (double alpha : {0.0, 0.5, 1.0})
            out.push_back(optimism_condition_check(UDesign{d, 1e-9}, alpha, 1.0, 15));
    }
    return out;
}

std::vector<AuditReport> suite_collapse(std::uint64_t seed) {
    std::vector<AuditReport> out;
    AuditReport strict;
    strict.claim_id = "collapse/strictly_monotone_alphas";
    strict.grid = "10 random instances x alpha in {0,0.25,0.5,0.75}, TV tol 1e-4";
    AuditReport flat;
    flat.claim_id = "collapse/reverse_kl_flat_objective";
    flat.grid = "10 random instances, |bonus| tol 1e-9, TV-to-start tol 1e-8";
    const OptimizerConfig budget{0.5, 20000, 1e-9};
    double worst_tv = 0.0;
    double worst_flat = 0.0;
    for (int k = 0; k < 10; ++k) {
        Rng rng = Rng::derive(seed, 100 + static_cast<std::uint64_t>(k));
        const int n = 1 + rng.uniform_int(3);
        const int m = 3 + rng.uniform_int(4);
        const Instance inst = random_instance(rng, n, m);
        for (double alpha : {0.0, 0.25, 0.5, 0.75}) {
            const CollapseResult res = feb_collapse_test(alpha, inst, budget, rng);
            worst_tv = std::max(worst_tv, res.tv_distance);
            if (!(res.tv_distance < 1e-4))
                strict.counterexamples.push_back({alpha, "tv", k, 0, res.tv_distance});
        }
        // alpha=1: the bonus is identically zero on the simplex, so ascent
        // from any start stays put.
        const PolicyLogits start = random_logits(rng, n, m);
        const CollapseResult res = feb_collapse_from(1.0, inst, start, budget);
        const double drift =
            total_variation(res.final_policy.probs, softmax_policy(start).probs);
        worst_flat = std::max(worst_flat, std::max(drift, std::abs(res.bonus_at_start)));
        if (!(std::abs(res.bonus_at_start) < 1e-9))
            flat.counterexamples.push_back({1.0, "bonus_nonzero", k, 0, res.bonus_at_start});
        if (!(drift < 1e-8))
            flat.counterexamples.push_back({1.0, "drift", k, 0, drift});
    }
    strict.worst = worst_tv;
    strict.finalize();
    flat.worst = worst_flat;
    flat.finalize();
    out.push_back(strict);
    out.push_back(flat);
    return out;
}

std::vector<AuditReport> suite_equivalence(std::uint64_t seed) {
    std::vector<AuditReport> out;
    const UDesignKind designs[] = {UDesignKind::Linear, UDesignKind::Inverse,
                                   UDesignKind::Arctanh};
    int stream = 300;
    for (UDesignKind d : designs) {
        for (double alpha : {0.5, 1.0}) {
            Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(stream++));
            const Instance inst = random_instance(rng, 2, 4);
            out.push_back(normalized_equivalence_test(UDesign{d, 1e-9}, alpha, inst, 5,
                                                   seed + static_cast<std::uint64_t>(stream)));
        }
    }
    {
        Rng rng = Rng::derive(seed, 400);
        const Instance inst = random_instance(rng, 2, 4);
        const PreferenceDataset ds = sample_reference_dataset(inst, 8, rng);
        out.push_back(reverse_kl_bonus_invariance_test(inst, ds, 1.0, {0.1, 1.0, 10.0}, 3, seed + 1));
    }
    return out;
}

std::vector<AuditReport> suite_gradients(std::uint64_t seed) {
    return {gradient_fidelity_audit({0.0, 0.25, 0.5, 0.75, 1.0}, seed)};
}

std::vector<AuditReport> run_suite(const std::string& name, std::uint64_t seed) {
    if (name == "divergence") return suite_divergence(seed);
    if (name == "optimism") return suite_optimism(seed);
    if (name == "collapse") return suite_collapse(seed);
    if (name == "equivalence") return suite_equivalence(seed);
    if (name == "gradients") return suite_gradients(seed);
    if (name == "all") {
        std::vector<AuditReport> all;
        for (const char* s : {"divergence", "optimism", "collapse", "equivalence", "gradients"}) {
            auto part = run_suite(s, seed);
            all.insert(all.end(), part.begin(), part.end());
        }
        return all;
    }
    throw ConfigError("unknown verify suite: " + name +
                      " (expected all|optimism|collapse|equivalence|gradients|divergence)");
}

} // namespace geb::verify
