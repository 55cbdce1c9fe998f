#include "screff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "screff/rng.hpp"
#include "screff/types.hpp"

namespace screff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDivergenceThreshold = 1000.0;  // energy error cutoff

struct PhasePoint {
  std::vector<double> q, p, grad;
  double logp = -kInf;
};

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// One chain of the sampler; owns its RNG stream and adaptation state.
class NutsChain {
 public:
  NutsChain(const Target& target, const SamplerConfig& cfg, int chain_id)
      : target_(target),
        cfg_(cfg),
        rng_(cfg.seed, static_cast<std::uint64_t>(chain_id) + 1),
        dim_(target.dim),
        inv_mass_(target.dim, 1.0) {}

  void run(std::span<double> out_draws, std::span<double> out_logp,
           std::span<std::uint8_t> out_div) {
    initialize();
    step_ = find_reasonable_step();
    da_reset(step_);
    build_warmup_windows();

    std::vector<double> window_acc;  // positions within the current window
    int window_idx = 0;
    for (int m = 0; m < cfg_.n_warmup; ++m) {
      const IterStats st = transition();
      da_update(st.accept);
      step_ = std::exp(da_log_step_);
      if (window_idx < static_cast<int>(window_ends_.size())) {
        if (m >= window_starts_[window_idx]) {
          for (double v : state_.q) window_acc.push_back(v);
        }
        if (m + 1 == window_ends_[window_idx]) {
          update_inv_mass(window_acc);
          window_acc.clear();
          ++window_idx;
          step_ = find_reasonable_step();
          da_reset(step_);
        }
      }
    }
    step_ = std::exp(da_log_step_bar_);  // averaged step for sampling

    const int n_kept = cfg_.n_iter - cfg_.n_warmup;
    n_divergent_ = 0;
    double accept_sum = 0.0;
    for (int m = 0; m < n_kept; ++m) {
      const IterStats st = transition();
      accept_sum += st.accept;
      if (st.divergent) ++n_divergent_;
      std::copy(state_.q.begin(), state_.q.end(),
                out_draws.begin() + static_cast<std::size_t>(m) * dim_);
      out_logp[m] = state_.logp;
      out_div[m] = st.divergent ? 1 : 0;
    }
    mean_accept_ = n_kept > 0 ? accept_sum / n_kept : 0.0;
  }

  double step() const { return step_; }
  int n_divergent() const { return n_divergent_; }
  double mean_accept() const { return mean_accept_; }

 private:
  struct IterStats {
    double accept = 0.0;
    bool divergent = false;
  };

  struct Proposal {
    std::vector<double> q, grad;
    double logp = -kInf;
  };

  struct Subtree {
    PhasePoint left, right;
    Proposal prop;
    std::vector<double> rho;
    double log_sum_w = -kInf;
    double sum_alpha = 0.0;
    int n_alpha = 0;
    bool divergent = false;
    bool valid = true;
  };

  void initialize() {
    state_.q.resize(dim_);
    state_.grad.resize(dim_);
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (double& v : state_.q) v = rng_.uniform() * 4.0 - 2.0;
      state_.logp = target_.value_and_grad(state_.q, state_.grad);
      if (std::isfinite(state_.logp)) return;
    }
    throw NumericalError(
        "sampler initialization failed: no finite posterior density in 100 "
        "attempts");
  }

  double kinetic(std::span<const double> p) const {
    double k = 0.0;
    for (int i = 0; i < dim_; ++i) k += inv_mass_[i] * p[i] * p[i];
    return 0.5 * k;
  }

  std::vector<double> sample_momentum() {
    std::vector<double> p(dim_);
    for (int i = 0; i < dim_; ++i)
      p[i] = rng_.normal() / std::sqrt(inv_mass_[i]);
    return p;
  }

  PhasePoint leapfrog(const PhasePoint& from, double eps) {
    PhasePoint pt;
    pt.q = from.q;
    pt.p = from.p;
    pt.grad = from.grad;
    for (int i = 0; i < dim_; ++i) pt.p[i] += 0.5 * eps * pt.grad[i];
    for (int i = 0; i < dim_; ++i) pt.q[i] += eps * inv_mass_[i] * pt.p[i];
    pt.logp = target_.value_and_grad(pt.q, pt.grad);
    if (std::isfinite(pt.logp))
      for (int i = 0; i < dim_; ++i) pt.p[i] += 0.5 * eps * pt.grad[i];
    return pt;
  }

  // Heuristic initial step: double or halve until the one-step acceptance
  // probability crosses 1/2.
  double find_reasonable_step() {
    double eps = 1.0;
    PhasePoint pt;
    pt.q = state_.q;
    pt.grad = state_.grad;
    pt.logp = state_.logp;
    pt.p = sample_momentum();
    const double h0 = -pt.logp + kinetic(pt.p);
    PhasePoint next = leapfrog(pt, eps);
    double dh = std::isfinite(next.logp) ? h0 - (-next.logp + kinetic(next.p))
                                         : -kInf;
    const double dir = dh > std::log(0.5) ? 1.0 : -1.0;
    for (int it = 0; it < 100; ++it) {
      if (dir > 0.0 && !(dh > std::log(0.5))) break;
      if (dir < 0.0 && !(dh < std::log(0.5))) break;
      eps *= dir > 0.0 ? 2.0 : 0.5;
      if (eps > 1e7 || eps < 1e-10) break;
      next = leapfrog(pt, eps);
      dh = std::isfinite(next.logp) ? h0 - (-next.logp + kinetic(next.p))
                                    : -kInf;
    }
    return eps;
  }

  // Dual averaging toward the target acceptance statistic.
  void da_reset(double eps) {
    da_mu_ = std::log(10.0 * eps);
    da_log_step_ = std::log(eps);
    da_log_step_bar_ = std::log(eps);
    da_h_bar_ = 0.0;
    da_count_ = 0;
  }

  void da_update(double accept) {
    ++da_count_;
    constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    const double m = static_cast<double>(da_count_);
    const double eta_h = 1.0 / (m + t0);
    da_h_bar_ = (1.0 - eta_h) * da_h_bar_ + eta_h * (cfg_.target_accept - accept);
    da_log_step_ = da_mu_ - std::sqrt(m) / gamma * da_h_bar_;
    const double eta = std::pow(m, -kappa);
    da_log_step_bar_ = eta * da_log_step_ + (1.0 - eta) * da_log_step_bar_;
  }

  // Stan-style warmup schedule: a step-size-only opening buffer, doubling
  // variance-estimation windows, and a closing buffer.
  void build_warmup_windows() {
    window_starts_.clear();
    window_ends_.clear();
    const int w = cfg_.n_warmup;
    if (w < 20) return;  // too short to adapt the metric
    int init_buf = 75, term_buf = 50, base = 25;
    if (init_buf + term_buf + base > w) {
      init_buf = static_cast<int>(0.15 * w);
      term_buf = static_cast<int>(0.10 * w);
      base = w - init_buf - term_buf;
    }
    int start = init_buf;
    int width = base;
    while (start < w - term_buf) {
      int end = start + width;
      // Absorb a final fragment that could not fit another doubling.
      if (end + 2 * width > w - term_buf) end = w - term_buf;
      window_starts_.push_back(start);
      window_ends_.push_back(end);
      start = end;
      width *= 2;
    }
  }

  void update_inv_mass(const std::vector<double>& acc) {
    const int n = static_cast<int>(acc.size()) / dim_;
    if (n < 2) return;
    for (int k = 0; k < dim_; ++k) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += acc[static_cast<std::size_t>(i) * dim_ + k];
      mean /= n;
      double ss = 0.0;
      for (int i = 0; i < n; ++i) {
        const double dv = acc[static_cast<std::size_t>(i) * dim_ + k] - mean;
        ss += dv * dv;
      }
      const double var = ss / (n - 1.0);
      // Shrink toward unit scale as regularization on short windows.
      inv_mass_[k] =
          var * n / (n + 5.0) + 1e-3 * (5.0 / (n + 5.0));
      if (!(inv_mass_[k] > 0.0)) inv_mass_[k] = 1.0;
    }
  }

  bool uturn(const std::vector<double>& rho, const std::vector<double>& p_left,
             const std::vector<double>& p_right) const {
    double a = 0.0, b = 0.0;
    for (int i = 0; i < dim_; ++i) {
      a += inv_mass_[i] * p_left[i] * rho[i];
      b += inv_mass_[i] * p_right[i] * rho[i];
    }
    return a < 0.0 || b < 0.0;
  }

  Subtree build_leaf(const PhasePoint& from, int dir) {
    Subtree st;
    PhasePoint pt = leapfrog(from, dir * step_);
    const double h = std::isfinite(pt.logp) ? -pt.logp + kinetic(pt.p) : kInf;
    const double dh = h0_ - h;  // log multinomial weight relative to start
    st.divergent = !(dh > -kDivergenceThreshold);
    st.log_sum_w = st.divergent ? -kInf : dh;
    st.sum_alpha = std::isfinite(dh) ? std::min(1.0, std::exp(dh)) : 0.0;
    st.n_alpha = 1;
    st.prop = Proposal{pt.q, pt.grad, pt.logp};
    st.rho = pt.p;
    st.left = pt;
    st.right = std::move(pt);
    return st;
  }

  Subtree build_tree(int depth, const PhasePoint& from, int dir) {
    if (depth == 0) return build_leaf(from, dir);
    Subtree first = build_tree(depth - 1, from, dir);
    if (first.divergent || !first.valid) return first;
    Subtree second =
        build_tree(depth - 1, dir > 0 ? first.right : first.left, dir);

    Subtree merged;
    merged.left = dir > 0 ? first.left : second.left;
    merged.right = dir > 0 ? second.right : first.right;
    merged.sum_alpha = first.sum_alpha + second.sum_alpha;
    merged.n_alpha = first.n_alpha + second.n_alpha;
    merged.divergent = second.divergent;
    merged.valid = second.valid;
    if (merged.divergent || !merged.valid) return merged;

    merged.log_sum_w = log_sum_exp(first.log_sum_w, second.log_sum_w);
    // Multinomial merge: adopt the fresh half's proposal with probability
    // proportional to its weight share.
    const double take_second = second.log_sum_w - merged.log_sum_w;
    merged.prop = std::log(rng_.uniform_pos()) < take_second
                      ? std::move(second.prop)
                      : std::move(first.prop);
    merged.rho = first.rho;
    for (int i = 0; i < dim_; ++i) merged.rho[i] += second.rho[i];
    merged.valid = !uturn(merged.rho, merged.left.p, merged.right.p);
    return merged;
  }

  IterStats transition() {
    PhasePoint start;
    start.q = state_.q;
    start.grad = state_.grad;
    start.logp = state_.logp;
    start.p = sample_momentum();
    h0_ = -start.logp + kinetic(start.p);

    PhasePoint left = start, right = start;
    Proposal sel{start.q, start.grad, start.logp};
    double log_sum_w = 0.0;  // weight of the initial point: exp(h0 - h0)
    std::vector<double> rho = start.p;
    double sum_alpha = 0.0;
    int n_alpha = 0;
    IterStats stats;

    for (int depth = 0; depth < cfg_.max_tree_depth; ++depth) {
      const int dir = rng_.uniform() < 0.5 ? -1 : 1;
      Subtree sub = build_tree(depth, dir > 0 ? right : left, dir);
      sum_alpha += sub.sum_alpha;
      n_alpha += sub.n_alpha;
      if (sub.divergent) {
        stats.divergent = true;
        break;
      }
      if (!sub.valid) break;

      // Biased progressive sampling favoring the new half of the doubled
      // trajectory.
      if (std::log(rng_.uniform_pos()) < sub.log_sum_w - log_sum_w)
        sel = std::move(sub.prop);
      log_sum_w = log_sum_exp(log_sum_w, sub.log_sum_w);
      if (dir > 0)
        right = sub.right;
      else
        left = sub.left;
      for (int i = 0; i < dim_; ++i) rho[i] += sub.rho[i];
      if (uturn(rho, left.p, right.p)) break;
    }

    state_.q = std::move(sel.q);
    state_.grad = std::move(sel.grad);
    state_.logp = sel.logp;
    stats.accept = n_alpha > 0 ? sum_alpha / n_alpha : 0.0;
    return stats;
  }

  const Target& target_;
  SamplerConfig cfg_;
  RngStream rng_;
  int dim_;
  std::vector<double> inv_mass_;
  PhasePoint state_;
  double step_ = 1.0;
  double h0_ = 0.0;
  double da_mu_ = 0.0, da_log_step_ = 0.0, da_log_step_bar_ = 0.0,
         da_h_bar_ = 0.0;
  int da_count_ = 0;
  std::vector<int> window_starts_, window_ends_;
  int n_divergent_ = 0;
  double mean_accept_ = 0.0;
};

}  // namespace

std::vector<double> PosteriorDraws::column(int k) const {
  std::vector<double> out(total_rows());
  for (int r = 0; r < total_rows(); ++r) out[r] = value(r, k);
  return out;
}

void leapfrog_step(const Target& target, std::span<const double> inv_mass,
                   std::vector<double>& q, std::vector<double>& p,
                   double step) {
  const int dim = target.dim;
  std::vector<double> grad(dim);
  target.value_and_grad(q, grad);
  for (int i = 0; i < dim; ++i) p[i] += 0.5 * step * grad[i];
  for (int i = 0; i < dim; ++i) q[i] += step * inv_mass[i] * p[i];
  target.value_and_grad(q, grad);
  for (int i = 0; i < dim; ++i) p[i] += 0.5 * step * grad[i];
}

PosteriorDraws sample_posterior(const Target& target,
                                const SamplerConfig& config) {
  if (target.dim <= 0 || !target.value_and_grad)
    throw ConfigError("sample_posterior: target is not set up");
  if (config.n_chains < 1) throw ConfigError("n_chains must be >= 1");
  if (config.n_warmup < 0 || config.n_warmup >= config.n_iter)
    throw ConfigError("need 0 <= n_warmup < n_iter");
  if (config.max_tree_depth < 1 || config.max_tree_depth > 14)
    throw ConfigError("max_tree_depth must be in 1..14");
  if (!(config.target_accept > 0.0 && config.target_accept < 1.0))
    throw ConfigError("target_accept must be in (0, 1)");

  const int n_kept = config.n_iter - config.n_warmup;
  PosteriorDraws out;
  out.n_chains = config.n_chains;
  out.n_kept = n_kept;
  out.dim = target.dim;
  out.draws.resize(static_cast<std::size_t>(config.n_chains) * n_kept *
                   target.dim);
  out.log_post.resize(static_cast<std::size_t>(config.n_chains) * n_kept);
  out.divergent.resize(out.log_post.size());
  out.chain_id.resize(out.log_post.size());
  out.step_size.resize(config.n_chains);
  out.n_divergent.resize(config.n_chains);
  out.mean_accept.resize(config.n_chains);

  std::vector<std::string> errors(config.n_chains);
  auto run_chain = [&](int c) {
    try {
      NutsChain chain(target, config, c);
      const std::size_t row0 = static_cast<std::size_t>(c) * n_kept;
      chain.run({out.draws.data() + row0 * target.dim,
                 static_cast<std::size_t>(n_kept) * target.dim},
                {out.log_post.data() + row0, static_cast<std::size_t>(n_kept)},
                {out.divergent.data() + row0, static_cast<std::size_t>(n_kept)});
      out.step_size[c] = chain.step();
      out.n_divergent[c] = chain.n_divergent();
      out.mean_accept[c] = chain.mean_accept();
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  };

  if (config.parallel_chains && config.n_chains > 1) {
    std::vector<std::thread> threads;
    threads.reserve(config.n_chains);
    for (int c = 0; c < config.n_chains; ++c)
      threads.emplace_back(run_chain, c);
    for (auto& t : threads) t.join();
  } else {
    for (int c = 0; c < config.n_chains; ++c) run_chain(c);
  }
  for (int c = 0; c < config.n_chains; ++c)
    if (!errors[c].empty())
      throw NumericalError("chain " + std::to_string(c) + ": " + errors[c]);

  for (int c = 0; c < config.n_chains; ++c)
    for (int m = 0; m < n_kept; ++m)
      out.chain_id[static_cast<std::size_t>(c) * n_kept + m] = c;
  return out;
}

}  // namespace screff
