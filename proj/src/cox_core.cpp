#include "coxsub/cox_core.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace coxsub {

SweepSums sweep_sums(const Dataset& d, const WeightVector& w, const Vector& beta, bool with_s2) {
    if (!w.conforms(d)) throw DataError("weight vector does not match dataset size");
    if (beta.size() != d.r()) throw DataError("coefficient vector does not match covariate count");
    const int r = d.r();
    const Vector lp = d.covariates() * beta;

    SweepSums out;
    out.with_s2 = with_s2;
    out.strata.resize(d.n_strata());

    Vector xi(r);
    for (int s = 0; s < d.n_strata(); ++s) {
        auto& S = out.strata[s];
        const auto& times = d.event_times(s);
        const int K = static_cast<int>(times.size());
        S.times = times;
        S.s0 = Vector::Zero(K);
        S.s1 = Matrix::Zero(r, K);
        if (with_s2) S.s2 = Matrix::Zero(r * r, K);
        S.event_w = Vector::Zero(K);
        S.event_n = Eigen::VectorXi::Zero(K);
        S.event_wx = Matrix::Zero(r, K);
        S.event_wlp = Vector::Zero(K);

        // center linear predictors by the stratum max over weighted records
        double maxlp = -std::numeric_limits<double>::infinity();
        for (Index i : d.by_exit_desc(s))
            if (w.w[i] > 0.0 && lp[i] > maxlp) maxlp = lp[i];
        if (!std::isfinite(maxlp)) maxlp = 0.0;
        S.max_lp = maxlp;

        const auto& ev_ids = d.events_by_time(s);
        const auto& off = d.event_time_offsets(s);
        for (int k = 0; k < K; ++k) {
            for (Index j = off[k]; j < off[k + 1]; ++j) {
                const Index i = ev_ids[j];
                const double wi = w.w[i];
                S.event_w[k] += wi;
                S.event_n[k] += 1;
                S.event_wx.col(k) += wi * d.covariates().row(i).transpose();
                S.event_wlp[k] += wi * (lp[i] - maxlp);
            }
        }

        double acc0 = 0.0, sub0 = 0.0;
        Vector acc1 = Vector::Zero(r), sub1 = Vector::Zero(r);
        Matrix acc2, sub2;
        if (with_s2) {
            acc2 = Matrix::Zero(r, r);
            sub2 = Matrix::Zero(r, r);
        }
        const auto& exits = d.by_exit_desc(s);
        const auto& entries = d.by_entry_desc(s);
        std::size_t pe = 0, pn = 0;
        for (int k = K - 1; k >= 0; --k) {
            const double t = times[k];
            while (pe < exits.size() && d.exit(exits[pe]) >= t) {
                const Index i = exits[pe++];
                const double wi = w.w[i];
                if (wi == 0.0) continue;
                const double e = wi * std::exp(lp[i] - maxlp);
                xi = d.covariates().row(i).transpose();
                acc0 += e;
                acc1 += e * xi;
                if (with_s2) acc2.noalias() += e * (xi * xi.transpose());
            }
            while (pn < entries.size() && d.entry(entries[pn]) >= t) {
                const Index i = entries[pn++];
                const double wi = w.w[i];
                if (wi == 0.0) continue;
                const double e = wi * std::exp(lp[i] - maxlp);
                xi = d.covariates().row(i).transpose();
                sub0 += e;
                sub1 += e * xi;
                if (with_s2) sub2.noalias() += e * (xi * xi.transpose());
            }
            S.s0[k] = acc0 - sub0;
            S.s1.col(k) = acc1 - sub1;
            if (with_s2) {
                Matrix m = acc2 - sub2;
                S.s2.col(k) = Eigen::Map<Vector>(m.data(), r * r);
            }
            if (S.event_w[k] > 0.0 && !(S.s0[k] > 0.0 && std::isfinite(S.s0[k])))
                throw EmptyRiskSet(t);
        }
    }
    return out;
}

ScoreInfo score_and_info(const Dataset& d, const WeightVector& w, const Vector& beta,
                         Index n_scale) {
    // Single fused sweep: the log-likelihood, score, and information
    // contributions are accumulated at each event time while the running
    // S0/S1/S2 sums are maintained, without materializing per-event-time
    // columns.  This is the Newton-Raphson hot path.
    if (!w.conforms(d)) throw DataError("weight vector does not match dataset size");
    if (beta.size() != d.r()) throw DataError("coefficient vector does not match covariate count");
    const Index ns = n_scale > 0 ? n_scale : d.n();
    const int r = d.r();
    const Vector lp = d.covariates() * beta;

    ScoreInfo out;
    out.gradient = Vector::Zero(r);
    // the information contribution is symmetric; accumulate its packed lower
    // triangle with plain loops (r is small, Eigen's triangular-view dispatch
    // costs more than the arithmetic here) and mirror once at the end
    std::vector<double> info_tri(static_cast<std::size_t>(r) * (r + 1) / 2, 0.0);
    Vector xi(r), acc1(r), sub1(r), ratio(r), ewx(r);
    Matrix acc2(r, r), sub2(r, r);
    Vector s0log, ewlog;
    for (int s = 0; s < d.n_strata(); ++s) {
        const auto& times = d.event_times(s);
        const int K = static_cast<int>(times.size());
        if (K == 0) continue;

        // center linear predictors by the stratum max over weighted records
        double maxlp = -std::numeric_limits<double>::infinity();
        for (Index i : d.by_exit_desc(s))
            if (w.w[i] > 0.0 && lp[i] > maxlp) maxlp = lp[i];
        if (!std::isfinite(maxlp)) maxlp = 0.0;

        double acc0 = 0.0, sub0 = 0.0;
        acc1.setZero();
        sub1.setZero();
        acc2.setZero();
        sub2.setZero();
        // log(S0) terms are collected and folded in vectorized after the
        // sweep; entries the sweep never reaches stay at log(1)*0 = 0
        s0log = Vector::Ones(K);
        ewlog = Vector::Zero(K);
        const auto& exits = d.by_exit_desc(s);
        const auto& entries = d.by_entry_desc(s);
        const auto& ev_ids = d.events_by_time(s);
        const auto& off = d.event_time_offsets(s);
        std::size_t pe = 0, pn = 0;
        for (int k = K - 1; k >= 0; --k) {
            const double t = times[k];
            while (pe < exits.size() && d.exit(exits[pe]) >= t) {
                const Index i = exits[pe++];
                const double wi = w.w[i];
                if (wi == 0.0) continue;
                const double e = wi * std::exp(lp[i] - maxlp);
                xi = d.covariates().row(i).transpose();
                acc0 += e;
                acc1 += e * xi;
                acc2.noalias() += e * (xi * xi.transpose());
            }
            while (pn < entries.size() && d.entry(entries[pn]) >= t) {
                const Index i = entries[pn++];
                const double wi = w.w[i];
                if (wi == 0.0) continue;
                const double e = wi * std::exp(lp[i] - maxlp);
                xi = d.covariates().row(i).transpose();
                sub0 += e;
                sub1 += e * xi;
                sub2.noalias() += e * (xi * xi.transpose());
            }

            double ew = 0.0, ewlp = 0.0;
            ewx.setZero();
            for (Index j = off[k]; j < off[k + 1]; ++j) {
                const Index i = ev_ids[j];
                const double wi = w.w[i];
                if (wi == 0.0) continue;
                ew += wi;
                ewlp += wi * (lp[i] - maxlp);
                ewx.noalias() += wi * d.covariates().row(i).transpose();
            }
            if (ew == 0.0) continue;
            const double s0 = acc0 - sub0;
            if (!(s0 > 0.0 && std::isfinite(s0))) throw EmptyRiskSet(t);
            const double inv = 1.0 / s0;
            const double ewinv = ew * inv;
            s0log[k] = s0;
            ewlog[k] = ew;
            out.loglik += ewlp;
            ratio = (acc1 - sub1) * inv;
            out.gradient.noalias() += ewx - ew * ratio;
            const double* a2 = acc2.data();
            const double* b2 = sub2.data();
            const double* rt = ratio.data();
            double* it = info_tri.data();
            for (int a = 0; a < r; ++a) {
                const double ra = ew * rt[a];
                for (int b = 0; b <= a; ++b)
                    *it++ += ewinv * (a2[b * r + a] - b2[b * r + a]) - ra * rt[b];
            }
        }
        out.loglik -= ewlog.dot(s0log.array().log().matrix());
    }
    out.info.resize(r, r);
    {
        const double* it = info_tri.data();
        for (int a = 0; a < r; ++a)
            for (int b = 0; b <= a; ++b) {
                const double v = *it++ / static_cast<double>(ns);
                out.info(a, b) = v;
                out.info(b, a) = v;
            }
    }
    if (!std::isfinite(out.loglik) || !out.gradient.allFinite() || !out.info.allFinite())
        throw NumericError("non-finite partial likelihood quantities");
    return out;
}

namespace {

Vector solve_spd(const Matrix& m, const Vector& b) {
    auto ldlt = m.ldlt();
    if (ldlt.info() != Eigen::Success) throw SingularInformation();
    const Vector dvec = ldlt.vectorD();
    const double dmax = dvec.maxCoeff();
    if (!(dmax > 0.0) || dvec.minCoeff() <= dmax * 1e-12) throw SingularInformation();
    return ldlt.solve(b);
}

}  // namespace

FitResult newton_raphson(const Dataset& d, const WeightVector& w, const NewtonOptions& opt) {
    const Index ns = opt.n_scale > 0 ? opt.n_scale : d.n();
    const double n = static_cast<double>(ns);
    Vector beta = opt.init.size() ? opt.init : Vector::Zero(d.r());
    if (beta.size() != d.r()) throw DataError("init vector does not match covariate count");

    ScoreInfo si = score_and_info(d, w, beta, ns);
    double max_grad = si.gradient.size() ? si.gradient.cwiseAbs().maxCoeff() : 0.0;
    bool converged = max_grad < opt.tol * n;
    int iter = 0;

    while (!converged && iter < opt.max_iter) {
        ++iter;
        if (beta.cwiseAbs().maxCoeff() > 50.0 && max_grad >= opt.tol * n)
            throw MonotoneLikelihood();

        Vector delta = solve_spd(si.info, si.gradient / n);
        const double old_ll = si.loglik;
        Vector candidate = beta + delta;
        ScoreInfo cand = score_and_info(d, w, candidate, ns);
        for (int h = 0; h < 10 && cand.loglik < old_ll; ++h) {
            delta *= 0.5;
            candidate = beta + delta;
            cand = score_and_info(d, w, candidate, ns);
        }
        beta = candidate;
        si = std::move(cand);
        max_grad = si.gradient.cwiseAbs().maxCoeff();
        converged = max_grad < opt.tol * n ||
                    std::fabs(si.loglik - old_ll) <= opt.tol * (std::fabs(old_ll) + opt.tol);
    }
    if (!converged && beta.cwiseAbs().maxCoeff() > 50.0 && max_grad >= opt.tol * n)
        throw MonotoneLikelihood();

    FitResult fit;
    fit.beta = std::move(beta);
    fit.info = std::move(si.info);
    fit.loglik = si.loglik;
    fit.iterations = iter;
    fit.converged = converged;
    fit.max_grad = max_grad;
    fit.n_scale = ns;
    return fit;
}

BaselineHazard breslow(const Dataset& d, const WeightVector& w, const Vector& beta) {
    const SweepSums sums = sweep_sums(d, w, beta, false);
    BaselineHazard out;
    for (int s = 0; s < d.n_strata(); ++s) {
        const auto& S = sums.strata[s];
        BaselineCurve curve;
        curve.stratum = s;
        curve.times = S.times;
        const double shift = std::exp(-S.max_lp);
        double cum = 0.0;
        for (std::size_t k = 0; k < S.times.size(); ++k) {
            const double inc = S.event_w[k] > 0.0 ? S.event_w[k] / S.s0[k] * shift : 0.0;
            cum += inc;
            curve.increments.push_back(inc);
            curve.cumulative.push_back(cum);
        }
        out.strata.push_back(std::move(curve));
    }
    return out;
}

}  // namespace coxsub
