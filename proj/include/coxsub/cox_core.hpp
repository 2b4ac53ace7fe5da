#pragma once

#include <optional>
#include <vector>

#include "coxsub/data_model.hpp"

namespace coxsub {

/// Per-record nonnegative weights.  Full-data fits use all ones; subsample
/// fits use 1 for events and multiplicity/(prob*q) for drawn censored records.
struct WeightVector {
    Vector w;

    static WeightVector ones(Index n) { return {Vector::Ones(n)}; }
    bool conforms(const Dataset& d) const { return w.size() == d.n(); }
};

/// Weighted risk-set sums over one stratum's event-time grid, stored in
/// centered form: every sum carries the factor exp(-max_lp), where max_lp is
/// the stratum's largest linear predictor.  Ratios (s1/s0, s2/s0) are
/// unaffected; absolute quantities are rescaled by exp(-max_lp) as needed.
struct StratumSums {
    std::vector<double> times;  ///< distinct event times, ascending
    Vector s0;                  ///< K;       sum of w*exp(lp) over the risk set
    Matrix s1;                  ///< r x K;   ... times X_i
    Matrix s2;                  ///< r*r x K; ... times vec(X_i X_i'); empty unless requested
    Vector event_w;             ///< K; total weight of events at each time
    Eigen::VectorXi event_n;    ///< K; raw event count at each time
    Matrix event_wx;            ///< r x K; weighted covariate sum of the events
    Vector event_wlp;           ///< K; weighted centered linear predictors of the events
    double max_lp = 0.0;        ///< centering shift
};

struct SweepSums {
    std::vector<StratumSums> strata;
    bool with_s2 = false;
};

/// One pass per stratum over records sorted by exit time (descending), with a
/// second pointer over entry times subtracting records before their entry, so
/// delayed entry costs nothing extra.  O(n log n) for the sort (cached in the
/// Dataset), O(n r^2) accumulation when s2 is requested, O(n r) otherwise.
SweepSums sweep_sums(const Dataset& d, const WeightVector& w, const Vector& beta, bool with_s2);

struct ScoreInfo {
    double loglik = 0.0;
    Vector gradient;  ///< weighted score, summed over events
    Matrix info;      ///< observed information scaled by 1/n_scale (positive definite)
};

/// Weighted partial log-likelihood, score, and scaled observed information in
/// one sweep.  n_scale defaults to d.n(); the two-step pipeline passes the
/// full-data n when fitting on a compacted subsample so that downstream
/// variance formulas keep their scale.
ScoreInfo score_and_info(const Dataset& d, const WeightVector& w, const Vector& beta,
                         Index n_scale = -1);

struct NewtonOptions {
    double tol = 1e-9;
    int max_iter = 25;
    Vector init;            ///< empty -> zero vector
    Index n_scale = -1;     ///< see score_and_info
};

struct FitResult {
    Vector beta;
    Matrix info;      ///< observed information at beta, scaled by 1/n_scale
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    double max_grad = 0.0;  ///< max-abs score component at beta
    Index n_scale = 0;
};

/// Newton-Raphson with step-halving (up to 10 halvings per iteration).
/// Converged when the max-abs score component drops below tol * n_scale or
/// the relative log-likelihood change drops below tol.  Returns the last
/// iterate with converged=false when max_iter is exhausted; throws
/// SingularInformation / MonotoneLikelihood / EmptyRiskSet on hard failures.
FitResult newton_raphson(const Dataset& d, const WeightVector& w, const NewtonOptions& opt = {});

/// Baseline cumulative hazard of one stratum evaluated on a grid.
struct BaselineCurve {
    Index stratum = 0;
    std::vector<double> times;      ///< evaluation grid (event times by default)
    std::vector<double> increments; ///< cumulative differences between grid points
    std::vector<double> cumulative; ///< nondecreasing, right-continuous
    std::vector<double> variance;   ///< empty unless estimated
};

struct BaselineHazard {
    std::vector<BaselineCurve> strata;
};

/// Breslow estimator: increments (event weight)/s0 at each event time, using
/// the same weighted risk-set sums as the fit.  Zero events in a stratum give
/// an identically-zero curve.
BaselineHazard breslow(const Dataset& d, const WeightVector& w, const Vector& beta);

}  // namespace coxsub
