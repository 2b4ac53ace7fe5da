#include "coxsub/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "coxsub/format.hpp"
#include "coxsub/rng.hpp"

namespace coxsub {

namespace {

// Writes a_i(beta) for record i into buf[0..r); returns false (writing
// nothing) when the record's window covers no event time, i.e. a_i = 0.
// Both the materialized residual matrix and the fused sampling plans fill
// rows through this one function so their values match bit for bit.
bool residual_row(const Dataset& d, const RiskGrid& g, Index i, double* buf) {
    const int lo = d.first_event_index(i);
    const int hi = d.last_event_index(i);
    if (lo > hi) return false;
    const int r = d.r();
    const Index s = d.stratum(i);
    const double g0 = g.cum0[s][hi] - (lo > 0 ? g.cum0[s][lo - 1] : 0.0);
    const double* chi = g.cum1[s].col(hi).data();
    const double* clo = lo > 0 ? g.cum1[s].col(lo - 1).data() : nullptr;
    const double e = g.elp[i];
    const auto& x = d.covariates();
    for (int j = 0; j < r; ++j) {
        const double g1j = clo ? chi[j] - clo[j] : chi[j];
        buf[j] = e * (x(i, j) * g0 - g1j);
    }
    return true;
}

// Fixed-order scalar 2-norm, shared by the plan overloads for the same
// bit-for-bit reason (vectorized reductions split by pointer alignment).
double norm_r(const double* p, int r) {
    double ss = 0.0;
    for (int j = 0; j < r; ++j) ss += p[j] * p[j];
    return std::sqrt(ss);
}

}  // namespace

RiskGrid risk_grid(const Dataset& d, const WeightVector& w, const Vector& beta) {
    if (!w.conforms(d)) throw DataError("weight vector does not match dataset size");
    if (beta.size() != d.r()) throw DataError("coefficient vector does not match covariate count");
    const int r = d.r();
    const Vector lp = d.covariates() * beta;

    RiskGrid g;
    g.computed_at = beta;

    // per-stratum centering by the max weighted linear predictor, then the
    // centered hazard scale e^{lp - max_lp} in one vectorized exp pass
    g.maxlp.assign(d.n_strata(), -std::numeric_limits<double>::infinity());
    for (Index i = 0; i < d.n(); ++i) {
        double& m = g.maxlp[d.stratum(i)];
        if (w.w[i] > 0.0 && lp[i] > m) m = lp[i];
    }
    for (double& m : g.maxlp)
        if (!std::isfinite(m)) m = 0.0;
    g.elp.resize(d.n());
    for (Index i = 0; i < d.n(); ++i) g.elp[i] = lp[i] - g.maxlp[d.stratum(i)];
    g.elp = g.elp.array().exp();

    // Risk-set sums via range addition: record i is at risk at event-time
    // index k of its stratum exactly for first_event_index(i) <= k <=
    // last_event_index(i), so one sequential pass over records into a
    // difference array yields S0/S1 on the whole grid after a prefix sum.
    std::vector<Vector> diff0(d.n_strata());
    std::vector<Matrix> diff1(d.n_strata());
    for (int s = 0; s < d.n_strata(); ++s) {
        const int K = static_cast<int>(d.event_times(s).size());
        diff0[s] = Vector::Zero(K + 1);
        diff1[s] = Matrix::Zero(r, K + 1);
    }
    for (Index i = 0; i < d.n(); ++i) {
        const int lo = d.first_event_index(i);
        const int hi = d.last_event_index(i);
        if (lo > hi) continue;
        const double e = w.w[i] * g.elp[i];
        if (e == 0.0) continue;
        const Index s = d.stratum(i);
        diff0[s][lo] += e;
        diff0[s][hi + 1] -= e;
        auto x = d.covariates().row(i).transpose();
        diff1[s].col(lo) += e * x;
        diff1[s].col(hi + 1) -= e * x;
    }

    // prefix pass over each stratum's grid, storing both the pointwise sums
    // (S0, S1, event weight) and the cumulative quantities
    //   cum0[k] = sum_{j<=k} ew_j / s0_j,  cum1[:,k] = sum_{j<=k} s1_j ew_j / s0_j^2
    g.s0.resize(d.n_strata());
    g.s1.resize(d.n_strata());
    g.event_w.resize(d.n_strata());
    g.cum0.resize(d.n_strata());
    g.cum1.resize(d.n_strata());
    Vector s1run(r), c1(r);
    for (int s = 0; s < d.n_strata(); ++s) {
        const auto& times = d.event_times(s);
        const int K = static_cast<int>(times.size());
        const auto& ev_ids = d.events_by_time(s);
        const auto& off = d.event_time_offsets(s);
        g.s0[s].resize(K);
        g.s1[s].resize(r, K);
        g.event_w[s].resize(K);
        g.cum0[s].resize(K);
        g.cum1[s].resize(r, K);
        double s0 = 0.0, c0 = 0.0;
        s1run.setZero();
        c1.setZero();
        for (int k = 0; k < K; ++k) {
            s0 += diff0[s][k];
            s1run += diff1[s].col(k);
            double ew = 0.0;
            for (Index j = off[k]; j < off[k + 1]; ++j) ew += w.w[ev_ids[j]];
            if (ew > 0.0) {
                if (!(s0 > 0.0 && std::isfinite(s0))) throw EmptyRiskSet(times[k]);
                const double inv = ew / s0;
                c0 += inv;
                c1 += s1run * (inv / s0);
            }
            g.s0[s][k] = s0;
            g.s1[s].col(k) = s1run;
            g.event_w[s][k] = ew;
            g.cum0[s][k] = c0;
            g.cum1[s].col(k) = c1;
        }
    }
    return g;
}

ScoreResiduals score_residuals(const Dataset& d, const RiskGrid& g) {
    ScoreResiduals out;
    out.computed_at = g.computed_at;
    out.a = CovMatrix::Zero(d.n(), d.r());
    for (Index i = 0; i < d.n(); ++i) residual_row(d, g, i, out.a.row(i).data());
    return out;
}

ScoreResiduals score_residuals(const Dataset& d, const WeightVector& w, const Vector& beta) {
    return score_residuals(d, risk_grid(d, w, beta));
}

std::vector<Index> exclusion_set(const Dataset& d) {
    std::vector<Index> out;
    for (Index i : d.censored_ids())
        if (d.first_event_index(i) > d.last_event_index(i)) out.push_back(i);
    return out;
}

std::string method_name(SamplingMethod m) {
    switch (m) {
        case SamplingMethod::uniform: return "uniform";
        case SamplingMethod::l_opt: return "l-opt";
        case SamplingMethod::a_opt: return "a-opt";
    }
    return "?";
}

SamplingMethod method_from_name(const std::string& name) {
    if (name == "uniform") return SamplingMethod::uniform;
    if (name == "l-opt") return SamplingMethod::l_opt;
    if (name == "a-opt") return SamplingMethod::a_opt;
    throw DataError("unknown sampling method '" + name + "'");
}

SamplingPlan probs_uniform(const Dataset& d) {
    const Index nc = d.n_censored();
    if (nc == 0) throw NoCensored();
    SamplingPlan plan;
    plan.method = SamplingMethod::uniform;
    plan.probs = Vector::Constant(nc, 1.0 / static_cast<double>(nc));
    return plan;
}

namespace {

SamplingPlan plan_from_norms(const Dataset& d, Vector norms, SamplingMethod method,
                             const Vector& beta) {
    const double total = norms.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw AllZeroResiduals();
    SamplingPlan plan;
    plan.method = method;
    plan.computed_at_beta = beta;
    plan.probs = norms / total;
    const auto& ids = d.censored_ids();
    for (Index c = 0; c < plan.probs.size(); ++c)
        if (plan.probs[c] == 0.0) plan.zero_set.push_back(ids[c]);
    return plan;
}

}  // namespace

SamplingPlan probs_L(const Dataset& d, const ScoreResiduals& res) {
    const auto& ids = d.censored_ids();
    if (ids.empty()) throw NoCensored();
    const int r = static_cast<int>(res.a.cols());
    Vector norms(static_cast<Index>(ids.size()));
    for (std::size_t c = 0; c < ids.size(); ++c) norms[c] = norm_r(res.a.row(ids[c]).data(), r);
    return plan_from_norms(d, std::move(norms), SamplingMethod::l_opt, res.computed_at);
}

SamplingPlan probs_L(const Dataset& d, const RiskGrid& g) {
    const auto& ids = d.censored_ids();
    if (ids.empty()) throw NoCensored();
    const int r = d.r();
    double buf[64];
    Vector heap;
    double* p = buf;
    if (r > 64) {
        heap.resize(r);
        p = heap.data();
    }
    Vector norms(static_cast<Index>(ids.size()));
    for (std::size_t c = 0; c < ids.size(); ++c)
        norms[c] = residual_row(d, g, ids[c], p) ? norm_r(p, r) : 0.0;
    return plan_from_norms(d, std::move(norms), SamplingMethod::l_opt, g.computed_at);
}

namespace {

Eigen::LDLT<Matrix> checked_ldlt(const Matrix& info) {
    auto ldlt = info.ldlt();
    if (ldlt.info() != Eigen::Success) throw SingularInformation();
    const Vector dvec = ldlt.vectorD();
    const double dmax = dvec.maxCoeff();
    if (!(dmax > 0.0) || dvec.minCoeff() <= dmax * 1e-12) throw SingularInformation();
    return ldlt;
}

SamplingPlan plan_from_residual_block(const Dataset& d, Matrix ac, const Matrix& info,
                                      const Vector& beta) {
    const auto ldlt = checked_ldlt(info);
    const Matrix solved = ldlt.solve(ac);
    const Index nc = ac.cols();
    const int r = static_cast<int>(ac.rows());
    Vector norms(nc);
    for (Index c = 0; c < nc; ++c) norms[c] = norm_r(solved.col(c).data(), r);
    return plan_from_norms(d, std::move(norms), SamplingMethod::a_opt, beta);
}

}  // namespace

SamplingPlan probs_A(const Dataset& d, const ScoreResiduals& res, const Matrix& info) {
    const auto& ids = d.censored_ids();
    if (ids.empty()) throw NoCensored();
    // one batched solve over the censored residual block
    const Index nc = static_cast<Index>(ids.size());
    Matrix ac(res.a.cols(), nc);
    for (Index c = 0; c < nc; ++c) ac.col(c) = res.a.row(ids[c]).transpose();
    return plan_from_residual_block(d, std::move(ac), info, res.computed_at);
}

SamplingPlan probs_A(const Dataset& d, const RiskGrid& g, const Matrix& info) {
    const auto& ids = d.censored_ids();
    if (ids.empty()) throw NoCensored();
    const Index nc = static_cast<Index>(ids.size());
    const int r = d.r();
    Matrix ac = Matrix::Zero(r, nc);
    for (Index c = 0; c < nc; ++c) residual_row(d, g, ids[c], ac.col(c).data());
    return plan_from_residual_block(d, std::move(ac), info, g.computed_at);
}

SubsampleDraw draw_multinomial(const Dataset& d, const SamplingPlan& plan, Index q,
                               std::uint64_t seed) {
    const auto& ids = d.censored_ids();
    const Index nc = static_cast<Index>(ids.size());
    if (nc == 0) throw NoCensored();
    if (plan.probs.size() != nc) throw DataError("sampling plan does not match censored pool");
    if (q <= 0) throw DataError("subsample size q must be positive");

    Index last_pos = -1;
    for (Index c = 0; c < nc; ++c)
        if (plan.probs[c] > 0.0) last_pos = c;
    if (last_pos < 0) throw AllZeroResiduals();

    CounterRng rng(seed);
    std::vector<double> u(static_cast<std::size_t>(q));
    for (Index j = 0; j < q; ++j) u[j] = rng.uniform(static_cast<std::uint64_t>(j));
    std::sort(u.begin(), u.end());

    SubsampleDraw draw;
    draw.q = q;
    draw.seed = seed;
    draw.probs = plan.probs;
    draw.multiplicities = Eigen::VectorXi::Zero(nc);
    // merge the sorted uniforms against the cumulative probabilities,
    // accumulating the prefix sum on the fly; the final positive entry acts
    // as 1 so every uniform lands somewhere
    Index c = 0;
    double acc = plan.probs[0];
    for (double uj : u) {
        while (c < nc && (uj >= (c == last_pos ? 1.0 : acc) || plan.probs[c] == 0.0)) {
            ++c;
            if (c < nc) acc += plan.probs[c];
        }
        const Index pos = std::min(c, last_pos);
        draw.multiplicities[pos] += 1;
        if (!draw.drawn.empty() && draw.drawn.back().first == pos)
            draw.drawn.back().second += 1;
        else
            draw.drawn.emplace_back(pos, 1);
    }

    return draw;
}

WeightVector SubsampleDraw::expanded_weights(const Dataset& d) const {
    const auto& ids = d.censored_ids();
    if (multiplicities.size() != static_cast<Index>(ids.size()))
        throw DataError("draw does not match censored pool");
    WeightVector w;
    w.w = Vector::Zero(d.n());
    for (Index i : d.event_ids()) w.w[i] = 1.0;
    const double qd = static_cast<double>(q);
    for (Index c = 0; c < multiplicities.size(); ++c) {
        if (multiplicities[c] == 0) continue;
        w.w[ids[c]] = multiplicities[c] / (probs[c] * qd);
    }
    return w;
}

void export_plan_csv(const Dataset& d, const SamplingPlan& plan, std::ostream& out) {
    out << "id,prob\n";
    const auto& ids = d.censored_ids();
    for (Index c = 0; c < plan.probs.size(); ++c)
        out << d.source_id(ids[c]) << ',' << format_double(plan.probs[c]) << '\n';
}

void export_plan_csv(const Dataset& d, const SamplingPlan& plan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    export_plan_csv(d, plan, out);
}

}  // namespace coxsub
