#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace screff {

/// Differentiable log-density target. value_and_grad returns the log
/// density at the position and fills the gradient (same length).
struct Target {
  int dim = 0;
  std::function<double(std::span<const double>, std::span<double>)>
      value_and_grad;
};

struct SamplerConfig {
  int n_chains = 4;
  int n_iter = 4000;    ///< total iterations per chain, warmup included
  int n_warmup = 3000;  ///< adaptation iterations, discarded
  int max_tree_depth = 10;
  double target_accept = 0.8;
  std::uint64_t seed = 0;
  bool parallel_chains = true;
};

/// Post-warmup draws on the unconstrained scale, stored chain-major.
struct PosteriorDraws {
  int n_chains = 0;
  int n_kept = 0;  ///< retained draws per chain
  int dim = 0;
  std::vector<double> draws;            ///< [n_chains * n_kept, dim] row-major
  std::vector<int> chain_id;            ///< per row
  std::vector<double> log_post;         ///< per row
  std::vector<std::uint8_t> divergent;  ///< per row
  std::vector<double> step_size;        ///< adapted step size per chain
  std::vector<int> n_divergent;         ///< post-warmup divergences per chain
  std::vector<double> mean_accept;      ///< post-warmup mean acceptance per chain

  int total_rows() const { return n_chains * n_kept; }
  double value(int row, int k) const {
    return draws[static_cast<std::size_t>(row) * dim + k];
  }
  std::span<const double> row(int r) const {
    return {draws.data() + static_cast<std::size_t>(r) * dim,
            static_cast<std::size_t>(dim)};
  }
  /// One parameter's values as a chain-major contiguous copy.
  std::vector<double> column(int k) const;
};

/// Dynamic multinomial no-U-turn sampler with dual-averaging step-size
/// adaptation and windowed diagonal mass-matrix estimation. Chains run in
/// parallel on independent RNG streams keyed by (seed, chain); results are
/// byte-identical for a given config regardless of scheduling.
///
/// Initialization draws unconstrained coordinates uniformly from (-2, 2),
/// retrying up to 100 times until the target is finite. A trajectory whose
/// energy error exceeds 1000 is counted as divergent and not expanded.
PosteriorDraws sample_posterior(const Target& target,
                                const SamplerConfig& config);

/// One leapfrog step of (q, p) under the target with a diagonal inverse
/// mass; exposed for direct testing of the integrator.
void leapfrog_step(const Target& target, std::span<const double> inv_mass,
                   std::vector<double>& q, std::vector<double>& p,
                   double step);

}  // namespace screff
