#pragma once

#include "drcal/model_core.hpp"
#include "drcal/two_step.hpp"

namespace drcal {

enum class RobustVariance {
    product_second_moment,  // E{(eps r)^2} / E^2{w z r}
    centered,               // numerator centered at its mean
};

struct DebiasedOptions {
    RobustVariance robust_variance = RobustVariance::product_second_moment;
};

// One-step corrections of the joint-fit coefficient of z. The exposure projection is a
// (weighted) penalized least-squares fit of z on x.
DrFit debiased_linear(const Dataset& data, const TwoStepConfig& cfg, const DebiasedOptions& opts = {});
DrFit debiased_loglinear(const Dataset& data, const TwoStepConfig& cfg, const DebiasedOptions& opts = {});
DrFit debiased_logistic(const Dataset& data, const TwoStepConfig& cfg, const DebiasedOptions& opts = {});

// Reuses an existing joint outcome fit.
DrFit debiased_linear(const Dataset& data, const TwoStepConfig& cfg, const OutcomeFit& joint,
                      const DebiasedOptions& opts = {});
DrFit debiased_loglinear(const Dataset& data, const TwoStepConfig& cfg, const OutcomeFit& joint,
                         const DebiasedOptions& opts = {});
DrFit debiased_logistic(const Dataset& data, const TwoStepConfig& cfg, const OutcomeFit& joint,
                        const DebiasedOptions& opts = {});

// Dispatch on the family; MarMean has no debiased comparator.
DrFit debiased_fit(const Dataset& data, const Family& family, const TwoStepConfig& cfg, const OutcomeFit& joint,
                   const DebiasedOptions& opts = {});

}  // namespace drcal
