#pragma once

#include <memory>

#include "screff/likelihood.hpp"
#include "screff/priors.hpp"
#include "screff/sampler.hpp"

namespace screff {

/// Unnormalized log posterior (marginal likelihood + unconstrained-scale
/// priors) as a sampler target. The returned Target shares ownership of the
/// model, so it stays valid on its own.
Target make_posterior_target(std::shared_ptr<const LikelihoodModel> model,
                             const PriorSpec& prior);

}  // namespace screff
