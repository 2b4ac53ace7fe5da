#pragma once

#include <optional>

#include "coxsub/data_model.hpp"

namespace coxsub {

/// Synthetic rare-event survival designs used for validation and
/// benchmarking.  Failure times follow a piecewise-constant baseline hazard
/// (early_rate before change_time, late_rate after) scaled by exp(beta'X).
///
/// Covariate designs (r = 6):
///   A: X_j ~ U(0,4) iid                     (late rate 0.075)
///   B: X_j ~ U(0,u_j), u = (1,6,2,2,1,6)    (late rate 0.15; 0.05 when
///                                            time-dependent)
///   C: X_1..X_3 ~ U(0,4);  X_4 = .5X_1+.5X_2+N(0,.1);  X_5 = X_1+N(0,1);
///      X_6 = X_1+N(1,1.5)  — N(m,v) with v a variance — (late rate 0.05)
///
/// Censoring is Exp(censor_rate), independent of X; with time_dependent set,
/// censoring instead follows its own Cox model on (X, test count).  The
/// time-dependent covariate counts clinic tests: up to four, with U(3,12)
/// inter-test gaps; each test raises the failure log-hazard by beta_dep and
/// the censoring log-hazard by beta_censor_dep.  delayed_entry draws a
/// left-truncation time U(0, 0.9T) per subject.
struct SimConfig {
    char setting = 'A';
    Index n = 15000;
    std::uint64_t seed = 1;
    bool delayed_entry = false;
    bool time_dependent = false;

    Vector beta;                      ///< empty -> (.3,-.5,.1,-.1,.1,-.3)
    double beta_dep = 0.25;

    double early_rate = 0.001;
    double change_time = 6.0;
    std::optional<double> late_rate;  ///< empty -> setting default

    double censor_rate = 0.2;
    Vector beta_censor;               ///< empty -> (.15,-.1,.15,-.1,.15,-.1)
    double beta_censor_dep = 0.2;
    double censor_early_rate = 0.2;
    double censor_late_rate = 0.15;
};

Vector default_beta();
Vector default_beta_censor();
double default_late_rate(const SimConfig& cfg);

CovMatrix gen_covariates(const SimConfig& cfg);

/// Time-independent design: one record per subject.
Dataset gen_survival(const SimConfig& cfg, const CovMatrix& x);

/// Time-dependent design: start-stop pseudo-records split at test times, with
/// the running test count appended as covariate "ntests".
Dataset gen_time_dependent(const SimConfig& cfg, const CovMatrix& x);

/// gen_covariates + the appropriate survival generator.
Dataset simulate(const SimConfig& cfg);

/// Raw per-subject draws of the time-dependent design, exposed so tests can
/// validate the inversion sampler and the V-C conditional independence.
struct TdSubject {
    std::vector<double> tests;  ///< test times (may extend past follow-up)
    double v = 0.0;             ///< latent failure time
    double c = 0.0;             ///< latent censoring time
};
TdSubject gen_td_subject(const SimConfig& cfg, Eigen::Ref<const Eigen::RowVectorXd> x, Index i);

/// Cumulative hazard along a piecewise path; exposed for the oracle tests.
double piecewise_cumhaz(double t, double early_rate, double late_rate, double change_time,
                        double loghr_base, double loghr_step, const std::vector<double>& steps);

/// Exact inverse of piecewise_cumhaz in t: the smallest t with cumulative
/// hazard >= e.  This is the inversion gen_survival/gen_td_subject sample
/// through; exposed for the oracle tests.
double invert_piecewise_cumhaz(double e, double early_rate, double late_rate,
                               double change_time, double loghr_base, double loghr_step = 0.0,
                               const std::vector<double>& steps = {});

}  // namespace coxsub
