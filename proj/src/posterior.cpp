#include "screff/posterior.hpp"

#include <cmath>

namespace screff {

Target make_posterior_target(std::shared_ptr<const LikelihoodModel> model,
                             const PriorSpec& prior) {
  const ParamLayout layout{model->n_covariates()};
  Target target;
  target.dim = layout.dim();
  target.value_and_grad = [model, prior, layout](std::span<const double> u,
                                                 std::span<double> grad) {
    double lp = model->value_and_grad(layout, u, grad);
    if (!std::isfinite(lp)) return lp;
    lp += log_prior(u, layout, prior);
    add_grad_log_prior(u, layout, prior, grad);
    return lp;
  };
  return target;
}

}  // namespace screff
