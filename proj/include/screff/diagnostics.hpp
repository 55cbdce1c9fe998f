#pragma once

#include <span>

#include "screff/sampler.hpp"

namespace screff {

/// Split potential-scale-reduction statistic. `values` holds n_chains
/// consecutive blocks of `len` draws; each chain is halved before the
/// between/within variance comparison. Returns +infinity (degenerate-chain
/// sentinel) when the within-chain variance is zero. No rank normalization
/// is applied.
double split_rhat(std::span<const double> values, int n_chains, int len);

/// Effective sample size combined across (split) chains, truncating the
/// autocorrelation sum at the initial monotone positive sequence of lag
/// pairs. Shares split_rhat's +infinity sentinel for degenerate chains.
double split_ess(std::span<const double> values, int n_chains, int len);

/// split_rhat applied to one parameter of a sampler result.
double gelman_rubin(const PosteriorDraws& draws, int param_index);

/// split_ess applied to one parameter of a sampler result.
double effective_sample_size(const PosteriorDraws& draws, int param_index);

}  // namespace screff
