#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coxsub/sampling.hpp"

namespace coxsub {

/// Subsample materialized for fitting: all events plus each distinct drawn
/// censored record once, carrying aggregated weight multiplicity/(prob*q).
/// Fitting on this compacted dataset with n_scale = n_full reproduces the
/// weighted estimating equations of the full-data representation at
/// O(q + n_events) cost per sweep.
struct CompactSubsample {
    explicit CompactSubsample(Dataset ds) : data(std::move(ds)) {}

    Dataset data;
    WeightVector weights;
    std::vector<Index> orig_rows;    ///< row in data -> record id in the source dataset
    std::vector<Index> drawn_rows;   ///< rows of data holding drawn censored records
    std::vector<int> drawn_mult;     ///< multiplicities, aligned with drawn_rows
    std::vector<double> drawn_prob;  ///< plan probabilities, aligned with drawn_rows
    Index q = 0;
    Index n_full = 0;
};

CompactSubsample compact_subsample(const Dataset& d, const SubsampleDraw& draw);

/// Between-record variability term of the subsampling variance, from
/// full-data residuals:  phi = n^-2 [ sum_C a_i a_i'/p_i - (sum_C a_i)(sum_C a_i)' ].
/// Zero-probability records must carry zero residuals (0/0 := 0).
Matrix phi_full(const Dataset& d, const ScoreResiduals& res, const SamplingPlan& plan);

/// Subsample-only plug-in estimate of phi from weighted residuals on the
/// compacted subsample:
///   phi~ = n^-2 [ q^-1 sum_draws a~ a~'/p^2 - q^-2 (sum_draws a~/p)(...)' ].
Matrix phi_subsample(const CompactSubsample& cs, const ScoreResiduals& res_w);

/// Coefficient covariance q^-1 V = n^-1 I^-1 + q^-1 I^-1 phi I^-1 (both the
/// full-data-noise and subsampling-noise components are kept).
Matrix cov_beta(const Matrix& info, const Matrix& phi, Index q, Index n);

/// Breslow curve plus variance
///   var(t) = sum_{u<=t} dN(u)/s0(u)^2 + H(t)' cov H(t),
///   H(t)   = sum_{u<=t} s1(u) dN(u)/s0(u)^2,
/// evaluated on the given grid (event times when the grid is empty), using
/// the risk-set sums of whatever (dataset, weights) pair is passed in.
BaselineHazard baseline_with_variance(const Dataset& d, const WeightVector& w, const Vector& beta,
                                      const Matrix& cov, const std::vector<double>& grid = {});

/// Same curve from an already-built risk grid (skips the sweep).
BaselineHazard baseline_with_variance(const Dataset& d, const RiskGrid& g, const Matrix& cov,
                                      const std::vector<double>& grid = {});

struct TwoStepOptions {
    SamplingMethod method = SamplingMethod::l_opt;
    Index q = 0;
    std::uint64_t seed = 1;
    double tol = 1e-9;
    int max_iter = 25;
    bool full_data_breslow = false;  ///< use full-data risk sums for the baseline
    bool with_baseline = true;
    std::vector<double> baseline_grid;  ///< empty -> event times
};

/// Sparse record of one multinomial draw for audit output.
struct DrawSummary {
    std::uint64_t seed = 0;
    Index q = 0;
    std::vector<std::pair<Index, int>> drawn;  ///< (record id, multiplicity)
};

struct SubsampleEstimate {
    Vector beta;        ///< two-step coefficient estimate
    Matrix cov;         ///< estimated covariance of beta
    Matrix phi;         ///< between-record variability term
    Matrix info;        ///< weighted observed information at beta (n-scaled)
    Vector pilot_beta;
    FitResult fit;         ///< final weighted fit provenance
    FitResult pilot_fit;
    SamplingPlan plan;     ///< plan behind the final draw (censored-pool order)
    BaselineHazard baseline;
    SamplingMethod method = SamplingMethod::uniform;
    std::uint64_t seed = 0;
    DrawSummary pilot_draw, final_draw;
    Index q = 0, n = 0, n_events = 0;
    bool full_data_breslow = false;
};

/// Two-step subsampling estimator: a uniform pilot draw of q censored records
/// is fit first; its estimate prices the residual-based probabilities for a
/// fresh draw of q, which is fit together with all events.  method=uniform
/// skips the second stage and returns the pilot fit.  Pilot and final seeds
/// are derived from the master seed, so results are reproducible.
SubsampleEstimate two_step_fit(const Dataset& d, const TwoStepOptions& opt);

inline SubsampleEstimate two_step_fit(const Dataset& d, Index q, SamplingMethod method,
                                      std::uint64_t seed) {
    TwoStepOptions opt;
    opt.q = q;
    opt.method = method;
    opt.seed = seed;
    return two_step_fit(d, opt);
}

}  // namespace coxsub
