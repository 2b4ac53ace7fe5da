#include "coxsub/two_step.hpp"

#include <algorithm>
#include <optional>
#include <cmath>

#include "coxsub/rng.hpp"

namespace coxsub {

CompactSubsample compact_subsample(const Dataset& d, const SubsampleDraw& draw) {
    const auto& cens = d.censored_ids();
    const auto& evs = d.event_ids();
    if (draw.multiplicities.size() != static_cast<Index>(cens.size()))
        throw DataError("draw does not match censored pool");

    // merge events and drawn censored records into dataset order; the two
    // lists are disjoint and each already ascending
    const auto& drawn_c = draw.drawn;
    std::vector<Index> rows;
    rows.reserve(evs.size() + drawn_c.size());
    std::vector<std::pair<Index, Index>> drawn_at;  // (row in subset, pool position)
    drawn_at.reserve(drawn_c.size());
    std::size_t ie = 0, ic = 0;
    while (ie < evs.size() || ic < drawn_c.size()) {
        if (ic == drawn_c.size() || (ie < evs.size() && evs[ie] < cens[drawn_c[ic].first])) {
            rows.push_back(evs[ie++]);
        } else {
            drawn_at.emplace_back(static_cast<Index>(rows.size()), drawn_c[ic].first);
            rows.push_back(cens[drawn_c[ic++].first]);
        }
    }

    CompactSubsample cs(d.subset(rows));
    cs.q = draw.q;
    cs.n_full = d.n();
    cs.orig_rows = std::move(rows);
    cs.weights.w = Vector::Ones(static_cast<Index>(cs.orig_rows.size()));
    for (const auto& [k, c] : drawn_at) {
        cs.weights.w[k] = draw.multiplicities[c] / (draw.probs[c] * static_cast<double>(draw.q));
        cs.drawn_rows.push_back(k);
        cs.drawn_mult.push_back(draw.multiplicities[c]);
        cs.drawn_prob.push_back(draw.probs[c]);
    }
    return cs;
}

Matrix phi_full(const Dataset& d, const ScoreResiduals& res, const SamplingPlan& plan) {
    const int r = d.r();
    const auto& cens = d.censored_ids();
    if (plan.probs.size() != static_cast<Index>(cens.size()))
        throw DataError("sampling plan does not match censored pool");
    Matrix outer = Matrix::Zero(r, r);
    Vector total = Vector::Zero(r);
    Vector ai(r);
    for (std::size_t c = 0; c < cens.size(); ++c) {
        const Index i = cens[c];
        const double p = plan.probs[static_cast<Index>(c)];
        ai = res.a.row(i).transpose();
        if (p == 0.0) {
            if (ai.norm() != 0.0) throw ZeroProbPositiveResidual(i);
            continue;
        }
        outer.noalias() += (ai * ai.transpose()) / p;
        total += ai;
    }
    const double n2 = static_cast<double>(d.n()) * static_cast<double>(d.n());
    return (outer - total * total.transpose()) / n2;
}

Matrix phi_subsample(const CompactSubsample& cs, const ScoreResiduals& res_w) {
    const int r = static_cast<int>(res_w.a.cols());
    Matrix outer = Matrix::Zero(r, r);
    Vector total = Vector::Zero(r);
    Vector ai(r);
    for (std::size_t k = 0; k < cs.drawn_rows.size(); ++k) {
        const double m = cs.drawn_mult[k];
        const double p = cs.drawn_prob[k];
        ai = res_w.a.row(cs.drawn_rows[k]).transpose();
        outer.noalias() += m * (ai * ai.transpose()) / (p * p);
        total += m * ai / p;
    }
    const double n2 = static_cast<double>(cs.n_full) * static_cast<double>(cs.n_full);
    const double q = static_cast<double>(cs.q);
    return (outer / q - total * total.transpose() / (q * q)) / n2;
}

Matrix cov_beta(const Matrix& info, const Matrix& phi, Index q, Index n) {
    auto ldlt = info.ldlt();
    if (ldlt.info() != Eigen::Success) throw SingularInformation();
    const Vector dvec = ldlt.vectorD();
    const double dmax = dvec.maxCoeff();
    if (!(dmax > 0.0) || dvec.minCoeff() <= dmax * 1e-12) throw SingularInformation();
    const Matrix inv = ldlt.solve(Matrix::Identity(info.rows(), info.cols()));
    Matrix cov = inv / static_cast<double>(n) + inv * phi * inv / static_cast<double>(q);
    return (cov + cov.transpose()) / 2.0;
}

namespace {

// one stratum's Breslow walk with the delta-method variance accumulators
BaselineCurve baseline_curve(int stratum, const std::vector<double>& times, const Vector& event_w,
                             const Vector& s0, const Matrix& s1, double max_lp, const Matrix& cov,
                             const std::vector<double>& grid) {
    const int K = static_cast<int>(times.size());
    const int r = static_cast<int>(s1.rows());
    const double shift = std::exp(-max_lp);

    BaselineCurve curve;
    curve.stratum = stratum;
    const std::vector<double>& pts = grid.empty() ? times : grid;

    double cum = 0.0, mart = 0.0;
    Vector h = Vector::Zero(r);
    int k = 0;
    double prev = 0.0;
    for (double g : pts) {
        while (k < K && times[k] <= g) {
            if (event_w[k] > 0.0) {
                const double inv0 = event_w[k] / s0[k];
                cum += inv0 * shift;
                mart += inv0 / s0[k] * shift * shift;
                h += s1.col(k) * (inv0 / s0[k]) * shift;
            }
            ++k;
        }
        curve.times.push_back(g);
        curve.cumulative.push_back(cum);
        curve.increments.push_back(cum - prev);
        prev = cum;
        curve.variance.push_back(mart + h.dot(cov * h));
    }
    return curve;
}

}  // namespace

BaselineHazard baseline_with_variance(const Dataset& d, const WeightVector& w, const Vector& beta,
                                      const Matrix& cov, const std::vector<double>& grid) {
    const SweepSums sums = sweep_sums(d, w, beta, false);
    BaselineHazard out;
    for (int s = 0; s < d.n_strata(); ++s) {
        const auto& S = sums.strata[s];
        out.strata.push_back(baseline_curve(s, S.times, S.event_w, S.s0, S.s1, S.max_lp, cov, grid));
    }
    return out;
}

BaselineHazard baseline_with_variance(const Dataset& d, const RiskGrid& g, const Matrix& cov,
                                      const std::vector<double>& grid) {
    BaselineHazard out;
    for (int s = 0; s < d.n_strata(); ++s)
        out.strata.push_back(baseline_curve(s, d.event_times(s), g.event_w[s], g.s0[s], g.s1[s],
                                            g.maxlp[s], cov, grid));
    return out;
}

namespace {

DrawSummary summarize(const Dataset& d, const SubsampleDraw& draw) {
    DrawSummary s;
    s.seed = draw.seed;
    s.q = draw.q;
    const auto& cens = d.censored_ids();
    s.drawn.reserve(draw.drawn.size());
    for (const auto& [c, m] : draw.drawn) s.drawn.emplace_back(cens[c], m);
    return s;
}

}  // namespace

SubsampleEstimate two_step_fit(const Dataset& d, const TwoStepOptions& opt) {
    if (opt.q <= 0) throw DataError("subsample size q must be positive");
    if (d.n_events() == 0) throw DataError("dataset has no events");

    const std::uint64_t pilot_seed = CounterRng::derive(opt.seed, 1);
    const std::uint64_t final_seed = CounterRng::derive(opt.seed, 2);

    NewtonOptions nopt;
    nopt.tol = opt.tol;
    nopt.max_iter = opt.max_iter;
    nopt.n_scale = d.n();

    const SamplingPlan pilot_plan = probs_uniform(d);
    const SubsampleDraw pilot_draw = draw_multinomial(d, pilot_plan, opt.q, pilot_seed);
    CompactSubsample pilot_cs = compact_subsample(d, pilot_draw);
    // When a second stage follows, the pilot only prices the sampling
    // probabilities, so a crude tolerance suffices: its O(q^-1/2) sampling
    // noise dwarfs 1e-4 of Newton slack.  method=uniform returns the pilot
    // itself, which therefore gets the caller's tolerance.
    NewtonOptions pilot_opt = nopt;
    if (opt.method != SamplingMethod::uniform)
        pilot_opt.tol = std::max(opt.tol, 1e-4);
    FitResult pilot_fit;
    try {
        pilot_fit = newton_raphson(pilot_cs.data, pilot_cs.weights, pilot_opt);
    } catch (const NumericError& e) {
        throw PilotDegenerate(e.what());
    }
    if (!pilot_fit.converged) throw PilotDegenerate("pilot fit did not converge");

    SubsampleEstimate est;
    est.method = opt.method;
    est.seed = opt.seed;
    est.q = opt.q;
    est.n = d.n();
    est.n_events = d.n_events();
    est.pilot_beta = pilot_fit.beta;
    est.pilot_fit = pilot_fit;
    est.pilot_draw = summarize(d, pilot_draw);
    est.full_data_breslow = opt.full_data_breslow;

    std::optional<CompactSubsample> cs;
    if (opt.method == SamplingMethod::uniform) {
        est.fit = pilot_fit;
        est.final_draw = est.pilot_draw;
        est.plan = pilot_plan;
        cs.emplace(std::move(pilot_cs));
    } else {
        const WeightVector ones = WeightVector::ones(d.n());
        const RiskGrid grid = risk_grid(d, ones, pilot_fit.beta);
        SamplingPlan plan;
        if (opt.method == SamplingMethod::l_opt) {
            plan = probs_L(d, grid);
        } else {
            const Matrix info = score_and_info(d, ones, pilot_fit.beta).info;
            plan = probs_A(d, grid, info);
        }
        const SubsampleDraw draw = draw_multinomial(d, plan, opt.q, final_seed);
        cs.emplace(compact_subsample(d, draw));
        nopt.init = pilot_fit.beta;
        est.fit = newton_raphson(cs->data, cs->weights, nopt);
        est.final_draw = summarize(d, draw);
        est.plan = std::move(plan);
    }

    est.beta = est.fit.beta;
    est.info = est.fit.info;

    // one grid over the compact subsample at the final beta serves both the
    // variance pieces and (by default) the weighted Breslow curve
    const RiskGrid grid_w = risk_grid(cs->data, cs->weights, est.beta);
    est.phi = phi_subsample(*cs, score_residuals(cs->data, grid_w));
    est.cov = cov_beta(est.info, est.phi, est.q, est.n);

    if (opt.with_baseline) {
        if (opt.full_data_breslow) {
            est.baseline = baseline_with_variance(d, WeightVector::ones(d.n()), est.beta,
                                                  est.cov, opt.baseline_grid);
        } else {
            est.baseline = baseline_with_variance(cs->data, grid_w, est.cov, opt.baseline_grid);
        }
    }
    return est;
}

}  // namespace coxsub
