#pragma once

#include <span>
#include <vector>

#include "screff/types.hpp"

namespace screff {

/// Identifies which of the four observed-data patterns produced a subject's
/// marginal likelihood contribution.
struct CaseContribution {
  EventPattern pattern = EventPattern::Neither;
  double loglik = 0.0;
};

/// Log likelihood of one subject conditional on their frailty:
///   delta_r * log h1(y_r) + delta_t (1 - delta_r) * log h2(y_r)
///   + delta_r delta_t * log h3(y_t | y_r)
///   - H1(y_r) - H2(y_r) - H3(y_t | y_r)
/// where h/H are the (cumulative) transition hazards at frailty gamma and
/// H3 is zero unless the nonterminal event was observed.
double conditional_loglik(const SubjectRecord& s, double gamma,
                          const ModelParams& params);

/// Log likelihood of one subject with the gamma frailty integrated out;
/// hazards are evaluated at reference frailty 1:
///   delta_r delta_t * log(1 + v) + event terms
///   - (1/v + delta_r + delta_t) * log(1 + v * (H1 + H2 + H3))
/// with v the frailty variance. Uses log1p-based evaluation so small v is
/// handled accurately.
double marginal_loglik(const SubjectRecord& s, const ModelParams& params);

/// marginal_loglik together with its event-pattern tag.
CaseContribution marginal_case_contribution(const SubjectRecord& s,
                                            const ModelParams& params);

/// Sum of marginal log likelihoods over a dataset.
double total_marginal_loglik(std::span<const SubjectRecord> data,
                             const ModelParams& params);

/// Gradient of total_marginal_loglik composed with ParamLayout::constrain,
/// i.e. with respect to the unconstrained vector (chain rule through the
/// exp transforms included). Writes into grad (length layout.dim()) and
/// returns the log likelihood value.
double grad_total_marginal_loglik(std::span<const SubjectRecord> data,
                                  const ParamLayout& layout,
                                  std::span<const double> u,
                                  std::span<double> grad);

/// Validated, cached view of a dataset for repeated likelihood and gradient
/// evaluation (the sampler's hot path).
class LikelihoodModel {
 public:
  explicit LikelihoodModel(std::vector<SubjectRecord> data);

  int n() const { return static_cast<int>(data_.size()); }
  int n_covariates() const { return p_; }
  const std::vector<SubjectRecord>& data() const { return data_; }

  double total_marginal_loglik(const ModelParams& params) const;

  /// Log likelihood and its unconstrained-scale gradient in one pass.
  double value_and_grad(const ParamLayout& layout, std::span<const double> u,
                        std::span<double> grad) const;

 private:
  struct Prepared {
    int z, dr, dt;
    double y_r, log_y_r;
    double sojourn, log_sojourn;  // y_t - y_r; meaningful when dr = 1
    std::size_t x_offset;
  };

  std::vector<SubjectRecord> data_;
  std::vector<Prepared> prep_;
  std::vector<double> x_;  // packed covariates, p_ per subject
  int p_ = 0;

  double subject_value_and_grad(const Prepared& s, const ParamLayout& layout,
                                std::span<const double> u,
                                std::span<double> grad, bool want_grad) const;
};

}  // namespace screff
