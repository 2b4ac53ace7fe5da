#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coxsub/cox_core.hpp"

namespace coxsub {

/// Per-record score residuals a_i(beta): the integral of
/// {X_i - s1/s0} Y_i(t) exp(beta'X_i) / s0 against the event counting
/// process.  With non-unit weights the weighted sums are used throughout,
/// giving the subsample analogue.
struct ScoreResiduals {
    CovMatrix a;         ///< n x r (row-major), row i = a_i(beta)'
    Vector computed_at;  ///< beta used
};

/// Weighted risk-set sums on each stratum's event-time grid, plus the prefix
/// sums that drive score residuals.  Built in one sequential pass over the
/// records (range addition on each record's event-time window) followed by a
/// prefix pass over the grid, so it costs O(n r + K r) once and can then be
/// reused by residuals, sampling plans, and the baseline hazard without
/// re-sweeping the data.
struct RiskGrid {
    Vector elp;                    ///< exp(lp_i - maxlp[stratum(i)]) per record
    std::vector<double> maxlp;     ///< per-stratum centering constants
    std::vector<Vector> s0;        ///< per stratum: S0 at each event time (centered scale)
    std::vector<Matrix> s1;        ///< per stratum: r x K, S1 at each event time
    std::vector<Vector> event_w;   ///< per stratum: total event weight at each time
    std::vector<Vector> cum0;      ///< per stratum: prefix of event_w/s0
    std::vector<Matrix> cum1;      ///< per stratum: prefix of s1 * event_w / s0^2
    Vector computed_at;            ///< beta used
};

RiskGrid risk_grid(const Dataset& d, const WeightVector& w, const Vector& beta);

/// Evaluated via per-stratum prefix sums over the event-time grid plus each
/// record's precomputed event-time window: O(n r + K r) after the sweep.
ScoreResiduals score_residuals(const Dataset& d, const WeightVector& w, const Vector& beta);

/// Residuals from an already-built grid (same values, no second sweep).
ScoreResiduals score_residuals(const Dataset& d, const RiskGrid& g);

/// Censored records whose (entry, exit] contains no event time of their
/// stratum; they contribute nothing to the partial likelihood and get zero
/// sampling probability under the residual-based plans.
std::vector<Index> exclusion_set(const Dataset& d);

enum class SamplingMethod { uniform, l_opt, a_opt };

std::string method_name(SamplingMethod m);
SamplingMethod method_from_name(const std::string& name);

/// Sampling probabilities over the censored pool (aligned with
/// Dataset::censored_ids()).
struct SamplingPlan {
    Vector probs;                 ///< sums to 1; zero exactly on zero_set
    SamplingMethod method = SamplingMethod::uniform;
    std::vector<Index> zero_set;  ///< record ids with probability zero
    std::optional<Vector> computed_at_beta;
};

/// Uniform probabilities 1/n_c for every censored record (pilot / baseline
/// comparator; nothing is excluded).
SamplingPlan probs_uniform(const Dataset& d);

/// Probability proportional to ||a_m||_2 (minimizes the trace of the
/// first-order variance of the subsample estimator).
SamplingPlan probs_L(const Dataset& d, const ScoreResiduals& res);

/// Fused variant: computes the censored-record norms straight from the grid
/// prefix sums without materializing the n x r residual matrix.  Produces
/// bit-identical probabilities to the ScoreResiduals overload.
SamplingPlan probs_L(const Dataset& d, const RiskGrid& g);

/// Probability proportional to ||info^{-1} a_m||_2, i.e. the norm of the
/// approximate leave-one-out coefficient change (dfbeta).
SamplingPlan probs_A(const Dataset& d, const ScoreResiduals& res, const Matrix& info);

/// Fused variant of the above (censored residuals built directly from the
/// grid; bit-identical probabilities).
SamplingPlan probs_A(const Dataset& d, const RiskGrid& g, const Matrix& info);

/// Multinomial draw of q censored records (with replacement).
struct SubsampleDraw {
    Eigen::VectorXi multiplicities;  ///< censored pool, sums to q
    /// (pool position, multiplicity) for the distinct drawn records,
    /// ascending by pool position; the sparse view of `multiplicities`
    std::vector<std::pair<Index, int>> drawn;
    Index q = 0;
    std::uint64_t seed = 0;
    Vector probs;                    ///< plan probabilities (kept for variance estimation)

    /// Weights over the full dataset: events 1, drawn censored m/(p*q), else 0.
    WeightVector expanded_weights(const Dataset& d) const;
};

/// Deterministic inverse-CDF walk: q counter-based uniforms, sorted, merged
/// against the cumulative probabilities in censored-pool order.  Draws are
/// reproducible bit-for-bit given (plan, q, seed).
SubsampleDraw draw_multinomial(const Dataset& d, const SamplingPlan& plan, Index q,
                               std::uint64_t seed);

/// Audit export, one row per censored record: id,prob (ids as in the source CSV).
void export_plan_csv(const Dataset& d, const SamplingPlan& plan, std::ostream& out);
void export_plan_csv(const Dataset& d, const SamplingPlan& plan, const std::string& path);

}  // namespace coxsub
