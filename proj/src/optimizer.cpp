#include "geb/optimizer.hpp"

#include <cmath>

#include "geb/errors.hpp"

namespace geb {

OptimResult minimize_logits(const PolicyLogits& initial,
                            const std::function<Table(const PolicyLogits&)>& grad_fn,
                            const OptimizerConfig& config) {
    OptimResult res;
    res.logits = initial;
    for (int step = 0; step < config.max_steps; ++step) {
        const Table g = grad_fn(res.logits);
        if (!g.all_finite()) throw NumericError("optimizer: non-finite gradient");
        res.grad_inf_norm = g.max_abs();
        res.steps = step;
        if (res.grad_inf_norm < config.tolerance) {
            res.converged = true;
            return res;
        }
        const double scale =
            (config.grad_clip > 0.0 && res.grad_inf_norm > config.grad_clip)
                ? config.grad_clip / res.grad_inf_norm
                : 1.0;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            res.logits.theta.data[i] -= config.step_size * scale * g.data[i];
    }
    const Table g = grad_fn(res.logits);
    res.grad_inf_norm = g.max_abs();
    res.steps = config.max_steps;
    res.converged = res.grad_inf_norm < config.tolerance;
    return res;
}

} // namespace geb
