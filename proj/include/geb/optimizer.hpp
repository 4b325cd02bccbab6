#ifndef GEB_OPTIMIZER_HPP
#define GEB_OPTIMIZER_HPP

#include <functional>

#include "geb/tabular.hpp"

namespace geb {

// Full-batch gradient descent with a constant step over policy logits.
// Tabular scale makes anything fancier unnecessary and hurts
// reproducibility. The clip bounds the step in the boundary regime where
// the alpha<1 pair loss has unbounded logit gradients (f''(u)*pi grows
// like pi^(alpha-1) as pi -> 0); it is inactive on interior trajectories.
struct OptimizerConfig {
    double step_size = 0.5;
    int max_steps = 2000;
    double tolerance = 1e-8; // gradient infinity-norm
    double grad_clip = 10.0; // infinity-norm cap applied before the step
};

struct OptimResult {
    PolicyLogits logits;
    int steps = 0;
    double grad_inf_norm = 0.0;
    bool converged = false;
};

// grad_fn(logits) must return d(loss)/d(logits).
OptimResult minimize_logits(const PolicyLogits& initial,
                            const std::function<Table(const PolicyLogits&)>& grad_fn,
                            const OptimizerConfig& config);

} // namespace geb

#endif
