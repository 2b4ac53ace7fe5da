#pragma once

#include <string>

#include "coxsub/two_step.hpp"

namespace coxsub {

/// Full-data fit result document (schema coxsub.fit.v1): beta, se (from the
/// inverse information), loglik, convergence metadata, and optionally the
/// Breslow baseline.
std::string fit_json(const Dataset& d, const FitResult& fit, const BaselineHazard* baseline);

/// Subsample estimate document (schema coxsub.subfit.v1): beta, se, cov, the
/// baseline curve with variance, and draw provenance (method, seeds, q).
std::string subfit_json(const Dataset& d, const SubsampleEstimate& est);

/// Shared helper: serialize a baseline curve set as
/// [{"stratum":label,"t":..,"cumhaz":..,"var":..}, ...].
std::string baseline_json(const Dataset& d, const BaselineHazard& baseline);

}  // namespace coxsub
