#include "geb/bonus.hpp"

#include <algorithm>
#include <cmath>

namespace geb {

std::string u_design_name(UDesignKind kind) {
    switch (kind) {
        case UDesignKind::Linear: return "linear";
        case UDesignKind::Inverse: return "inverse";
        case UDesignKind::Arctanh: return "arctanh";
        case UDesignKind::SelmLog: return "selm_log";
        case UDesignKind::SigmoidRatio: return "sigmoid_ratio";
        case UDesignKind::RatioDiagnostic: return "ratio_diagnostic";
    }
    return "unknown";
}

UDesignKind u_design_from_name(const std::string& name) {
    if (name == "linear") return UDesignKind::Linear;
    if (name == "inverse") return UDesignKind::Inverse;
    if (name == "arctanh") return UDesignKind::Arctanh;
    if (name == "selm_log") return UDesignKind::SelmLog;
    if (name == "sigmoid_ratio") return UDesignKind::SigmoidRatio;
    if (name == "ratio_diagnostic") return UDesignKind::RatioDiagnostic;
    throw ConfigError("unknown u_design kind: " + name);
}

std::string bonus_kind_name(BonusKind kind) {
    switch (kind) {
        case BonusKind::None: return "none";
        case BonusKind::FEB: return "feb";
        case BonusKind::GEB: return "geb";
    }
    return "unknown";
}

BonusKind bonus_kind_from_name(const std::string& name) {
    if (name == "none") return BonusKind::None;
    if (name == "feb") return BonusKind::FEB;
    if (name == "geb") return BonusKind::GEB;
    throw ConfigError("unknown bonus kind: " + name);
}

std::string bonus_scope_name(BonusScope scope) {
    return scope == BonusScope::FullExpectation ? "full_expectation" : "rejected_only";
}

BonusScope bonus_scope_from_name(const std::string& name) {
    if (name == "full_expectation") return BonusScope::FullExpectation;
    if (name == "rejected_only") return BonusScope::RejectedOnly;
    throw ConfigError("unknown bonus scope: " + name);
}

UEval u_eval(const UDesign& design, double p, double q, double alpha, double beta) {
    UEval e;
    const double eps = design.clamp_eps;
    double pc = std::clamp(p, eps, 1.0 - eps);
    double qc = std::clamp(q, eps, 1.0 - eps);
    const bool p_clamped = (pc != p);
    const bool q_clamped = (qc != q);
    e.clamped = p_clamped || (q_clamped && design.kind == UDesignKind::SigmoidRatio) ||
                (q_clamped && design.kind == UDesignKind::RatioDiagnostic);
    switch (design.kind) {
        case UDesignKind::Linear:
            e.u = 1.0 + alpha - pc;
            e.du_dp = -1.0;
            break;
        case UDesignKind::Inverse:
            e.u = 1.0 / pc;
            e.du_dp = -1.0 / (pc * pc);
            break;
        case UDesignKind::Arctanh:
            e.u = std::atanh(1.0 - pc) + alpha;
            e.du_dp = -1.0 / (pc * (2.0 - pc));
            break;
        case UDesignKind::SelmLog:
            e.u = -std::log(pc) + 1.0;
            e.du_dp = -1.0 / pc;
            break;
        case UDesignKind::SigmoidRatio: {
            const double s = sigmoid(beta * std::log(pc / qc));
            e.u = s; // 1 - sigmoid(-z) = sigmoid(z)
            const double sp = s * (1.0 - s);
            e.du_dp = sp * beta / pc;
            e.du_dq = -sp * beta / qc;
            break;
        }
        case UDesignKind::RatioDiagnostic:
            e.u = pc / qc;
            e.du_dp = 1.0 / qc;
            e.du_dq = -pc / (qc * qc);
            break;
    }
    if (p_clamped) e.du_dp = 0.0;
    if (q_clamped) e.du_dq = 0.0;
    return e;
}

double u_value(const UDesign& design, double p, double q, double alpha, double beta) {
    const UEval e = u_eval(design, p, q, alpha, beta);
    if (design.kind != UDesignKind::RatioDiagnostic && !(e.u > alpha))
        throw ConfigError("u design '" + u_design_name(design.kind) + "' violates u > alpha (u=" +
                          std::to_string(e.u) + ", alpha=" + std::to_string(alpha) + ")");
    return e.u;
}

double u_lower_bound(const UDesign& design, double alpha, double beta) {
    const double eps = design.clamp_eps;
    const double p_hi = 1.0 - eps;
    switch (design.kind) {
        case UDesignKind::Linear: return 1.0 + alpha - p_hi;
        case UDesignKind::Inverse: return 1.0 / p_hi;
        case UDesignKind::Arctanh: return std::atanh(1.0 - p_hi) + alpha;
        case UDesignKind::SelmLog: return -std::log(p_hi) + 1.0;
        case UDesignKind::SigmoidRatio: return sigmoid(beta * std::log(eps / (1.0 - eps)));
        case UDesignKind::RatioDiagnostic: return 0.0;
    }
    return 0.0;
}

void BonusSpec::validate(double alpha) const {
    if (kappa.has_value() == target_ratio.has_value())
        throw ConfigError("exactly one of kappa / target_ratio must be set");
    if (kappa && !(*kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
    if (target_ratio && !(*target_ratio >= 0.0)) throw ConfigError("target_ratio must be >= 0");
    if (!(beta > 0.0)) throw ConfigError("bonus beta must be > 0");
    if (kind == BonusKind::GEB) {
        if (u_design.kind == UDesignKind::RatioDiagnostic)
            throw ConfigError("ratio_diagnostic is an internal probe, not a trainable design");
        const double lb = u_lower_bound(u_design, alpha, beta);
        if (!(alpha < lb))
            throw ConfigError("u design '" + u_design_name(u_design.kind) +
                              "' requires alpha < " + std::to_string(lb) +
                              " over the clamped domain, got alpha=" + std::to_string(alpha));
    }
}

namespace {

inline void count_clamp(std::int64_t* counter, bool clamped) {
    if (counter && clamped) ++*counter;
}

// Shared expectation loop: beta * sum_x rho(x) sum_y q * term(x, y).
template <typename Term>
double ref_expectation(const Table& ref, const std::vector<double>& weights, double beta,
                       Term&& term) {
    double total = 0.0;
    for (int x = 0; x < ref.rows; ++x) {
        double row = 0.0;
        for (int y = 0; y < ref.cols; ++y) row += ref.at(x, y) * term(x, y);
        total += weights[static_cast<std::size_t>(x)] * row;
    }
    return beta * total;
}

} // namespace

double feb_bonus(const Table& policy, const Table& ref, const std::vector<double>& weights,
                 const DivergenceSpec& div, double beta, std::int64_t* clamp_events) {
    const UDesign ratio{UDesignKind::RatioDiagnostic, 1e-15};
    return ref_expectation(ref, weights, beta, [&](int x, int y) {
        const UEval e = u_eval(ratio, policy.at(x, y), ref.at(x, y), div.alpha, beta);
        count_clamp(clamp_events, e.clamped);
        return h_value(div, e.u);
    });
}

double geb_bonus(const Table& policy, const Table& ref, const std::vector<double>& weights,
                 const UDesign& design, const DivergenceSpec& div, double beta,
                 std::int64_t* clamp_events) {
    return ref_expectation(ref, weights, beta, [&](int x, int y) {
        const UEval e = u_eval(design, policy.at(x, y), ref.at(x, y), div.alpha, beta);
        count_clamp(clamp_events, e.clamped);
        if (design.kind != UDesignKind::RatioDiagnostic && !(e.u > div.alpha) )
            throw NumericError("geb_bonus: u <= alpha at (" + std::to_string(x) + "," +
                               std::to_string(y) + "), u=" + std::to_string(e.u));
        if (!(e.u > 0.0))
            throw NumericError("geb_bonus: u <= 0 at (" + std::to_string(x) + "," +
                               std::to_string(y) + ")");
        return h_value(div, e.u);
    });
}

std::vector<double> geb_normalizers(const Table& policy, const Table& ref,
                                    const UDesign& design, double alpha, double beta) {
    std::vector<double> z(static_cast<std::size_t>(policy.rows), 0.0);
    for (int x = 0; x < policy.rows; ++x) {
        double s = 0.0;
        for (int y = 0; y < policy.cols; ++y)
            s += ref.at(x, y) * u_eval(design, policy.at(x, y), ref.at(x, y), alpha, beta).u;
        z[static_cast<std::size_t>(x)] = s;
    }
    return z;
}

double geb_bonus_normalized(const Table& policy, const Table& ref,
                            const std::vector<double>& weights, const UDesign& design,
                            const DivergenceSpec& div, double beta,
                            std::int64_t* clamp_events) {
    const std::vector<double> z = geb_normalizers(policy, ref, design, div.alpha, beta);
    for (std::size_t x = 0; x < z.size(); ++x)
        if (!(z[x] > 0.0))
            throw NumericError("geb_bonus_normalized: Z_R <= 0 at prompt " + std::to_string(x));
    return ref_expectation(ref, weights, beta, [&](int x, int y) {
        const UEval e = u_eval(design, policy.at(x, y), ref.at(x, y), div.alpha, beta);
        count_clamp(clamp_events, e.clamped);
        const double zx = z[static_cast<std::size_t>(x)];
        return (e.u / zx) * f_prime(div, e.u) - f_value(div, e.u / zx);
    });
}

double bonus_on_rejected(const PreferenceDataset& dataset, const Table& policy,
                         const Table& ref, const BonusSpec& spec, const DivergenceSpec& div,
                         std::int64_t* clamp_events) {
    if (dataset.pairs.empty())
        throw NumericError("bonus_on_rejected: empty preference dataset");
    const UDesign design = (spec.kind == BonusKind::FEB)
                               ? UDesign{UDesignKind::RatioDiagnostic, 1e-15}
                               : spec.u_design;
    double total = 0.0;
    for (const PreferencePair& pair : dataset.pairs) {
        const UEval e = u_eval(design, policy.at(pair.x, pair.loser), ref.at(pair.x, pair.loser),
                               div.alpha, spec.beta);
        count_clamp(clamp_events, e.clamped);
        total += h_value(div, e.u);
    }
    return spec.beta * total / static_cast<double>(dataset.pairs.size());
}

double bonus_value(const BonusSpec& spec, const DivergenceSpec& div, const Table& policy,
                   const Table& ref, const std::vector<double>& weights,
                   const PreferenceDataset& dataset, std::int64_t* clamp_events) {
    if (spec.kind == BonusKind::None) return 0.0;
    if (spec.scope == BonusScope::RejectedOnly)
        return bonus_on_rejected(dataset, policy, ref, spec, div, clamp_events);
    if (spec.kind == BonusKind::FEB)
        return feb_bonus(policy, ref, weights, div, spec.beta, clamp_events);
    return geb_bonus(policy, ref, weights, spec.u_design, div, spec.beta, clamp_events);
}

void accumulate_bonus_grad_p(const BonusSpec& spec, const DivergenceSpec& div,
                             const Table& policy, const Table& ref,
                             const std::vector<double>& weights,
                             const PreferenceDataset& dataset, double scale, Table& grad,
                             std::int64_t* clamp_events) {
    if (spec.kind == BonusKind::None || scale == 0.0) return;
    const UDesign design = (spec.kind == BonusKind::FEB)
                               ? UDesign{UDesignKind::RatioDiagnostic, 1e-15}
                               : spec.u_design;
    if (spec.scope == BonusScope::RejectedOnly) {
        if (dataset.pairs.empty())
            throw NumericError("bonus gradient: empty preference dataset");
        const double w = scale * spec.beta / static_cast<double>(dataset.pairs.size());
        for (const PreferencePair& pair : dataset.pairs) {
            const UEval e = u_eval(design, policy.at(pair.x, pair.loser),
                                   ref.at(pair.x, pair.loser), div.alpha, spec.beta);
            count_clamp(clamp_events, e.clamped);
            grad.at(pair.x, pair.loser) += w * h_prime(div, e.u) * e.du_dp;
        }
        return;
    }
    for (int x = 0; x < policy.rows; ++x) {
        const double w = scale * spec.beta * weights[static_cast<std::size_t>(x)];
        for (int y = 0; y < policy.cols; ++y) {
            const UEval e = u_eval(design, policy.at(x, y), ref.at(x, y), div.alpha, spec.beta);
            count_clamp(clamp_events, e.clamped);
            grad.at(x, y) += w * ref.at(x, y) * h_prime(div, e.u) * e.du_dp;
        }
    }
}

Table equivalence_scale_entrywise(const Table& policy, const Table& ref, const UDesign& design,
                               const DivergenceSpec& div, double beta) {
    const std::vector<double> z = geb_normalizers(policy, ref, design, div.alpha, beta);
    Table lam(policy.rows, policy.cols);
    for (int x = 0; x < policy.rows; ++x) {
        const double zx = z[static_cast<std::size_t>(x)];
        for (int y = 0; y < policy.cols; ++y) {
            const double u = u_eval(design, policy.at(x, y), ref.at(x, y), div.alpha, beta).u;
            lam.at(x, y) = (f_prime(div, u) + u * f_second(div, u) - f_prime(div, u / zx)) /
                           (zx * u * f_second(div, u));
        }
    }
    return lam;
}

} // namespace geb
