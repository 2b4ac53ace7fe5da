#pragma once

// Independent reference implementations used only by tests: direct
// double-loop transcriptions of the estimating-equation formulas, finite
// differences, and derivative-free maximizers.  Deliberately naive — O(n*K)
// or worse — so they share no code path with the library.

#include <cmath>
#include <functional>
#include <vector>

#include "coxsub/cox_core.hpp"
#include "coxsub/rng.hpp"

namespace oracle {

using coxsub::CovMatrix;
using coxsub::Dataset;
using coxsub::Index;
using coxsub::Matrix;
using coxsub::Vector;
using coxsub::WeightVector;

inline bool at_risk(const Dataset& d, Index i, double t) {
    return d.entry(i) < t && t <= d.exit(i);
}

struct Sums {
    double s0 = 0.0;
    Vector s1;
    Matrix s2;
};

/// Weighted risk-set sums at one (stratum, time) by looping every record.
inline Sums naive_sums(const Dataset& d, const WeightVector& w, const Vector& beta,
                       Index stratum, double t) {
    const int r = d.r();
    Sums s;
    s.s1 = Vector::Zero(r);
    s.s2 = Matrix::Zero(r, r);
    for (Index i = 0; i < d.n(); ++i) {
        if (d.stratum(i) != stratum || !at_risk(d, i, t)) continue;
        const double e = w.w[i] * std::exp(d.covariates().row(i) * beta);
        const Vector xi = d.covariates().row(i).transpose();
        s.s0 += e;
        s.s1 += e * xi;
        s.s2 += e * (xi * xi.transpose());
    }
    return s;
}

inline double naive_loglik(const Dataset& d, const WeightVector& w, const Vector& beta) {
    double ll = 0.0;
    for (Index i = 0; i < d.n(); ++i) {
        if (!d.event(i)) continue;
        const auto s = naive_sums(d, w, beta, d.stratum(i), d.exit(i));
        ll += w.w[i] * (d.covariates().row(i) * beta - std::log(s.s0));
    }
    return ll;
}

inline Vector naive_score(const Dataset& d, const WeightVector& w, const Vector& beta) {
    Vector g = Vector::Zero(d.r());
    for (Index i = 0; i < d.n(); ++i) {
        if (!d.event(i)) continue;
        const auto s = naive_sums(d, w, beta, d.stratum(i), d.exit(i));
        g += w.w[i] * (d.covariates().row(i).transpose() - s.s1 / s.s0);
    }
    return g;
}

inline Matrix naive_info(const Dataset& d, const WeightVector& w, const Vector& beta,
                         Index n_scale = -1) {
    Matrix m = Matrix::Zero(d.r(), d.r());
    for (Index i = 0; i < d.n(); ++i) {
        if (!d.event(i)) continue;
        const auto s = naive_sums(d, w, beta, d.stratum(i), d.exit(i));
        const Vector ratio = s.s1 / s.s0;
        m += w.w[i] * (s.s2 / s.s0 - ratio * ratio.transpose());
    }
    return m / static_cast<double>(n_scale > 0 ? n_scale : d.n());
}

/// Literal transcription of the score residual: for every record, sum
/// {X_i - s1/s0} Y_i(t) exp(beta'X_i) / s0 * dN(t) over the event times of
/// its stratum.
inline Matrix naive_residuals(const Dataset& d, const WeightVector& w, const Vector& beta) {
    Matrix a = Matrix::Zero(d.n(), d.r());
    for (Index i = 0; i < d.n(); ++i) {
        const Index st = d.stratum(i);
        const auto& times = d.event_times(st);
        const auto& counts = d.event_counts(st);
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (!at_risk(d, i, times[k])) continue;
            const auto s = naive_sums(d, w, beta, st, times[k]);
            const double e = std::exp(d.covariates().row(i) * beta);
            a.row(i) += counts[k] * e / s.s0 *
                        (d.covariates().row(i) - s.s1.transpose() / s.s0);
        }
    }
    return a;
}

/// Breslow curve by direct summation.
inline std::vector<double> naive_breslow(const Dataset& d, const WeightVector& w,
                                         const Vector& beta, Index stratum) {
    const auto& times = d.event_times(stratum);
    std::vector<double> cum;
    double acc = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        double wdn = 0.0;
        for (Index i : d.event_ids())
            if (d.stratum(i) == stratum && d.exit(i) == times[k]) wdn += w.w[i];
        acc += wdn / naive_sums(d, w, beta, stratum, times[k]).s0;
        cum.push_back(acc);
    }
    return cum;
}

inline Vector fd_gradient(const Dataset& d, const WeightVector& w, const Vector& beta,
                          double h = 1e-6) {
    Vector g(beta.size());
    for (Index j = 0; j < beta.size(); ++j) {
        Vector up = beta, dn = beta;
        up[j] += h;
        dn[j] -= h;
        g[j] = (naive_loglik(d, w, up) - naive_loglik(d, w, dn)) / (2.0 * h);
    }
    return g;
}

inline Matrix fd_neg_hessian(const Dataset& d, const WeightVector& w, const Vector& beta,
                             double h = 1e-5) {
    const Index r = beta.size();
    Matrix m(r, r);
    for (Index j = 0; j < r; ++j) {
        Vector up = beta, dn = beta;
        up[j] += h;
        dn[j] -= h;
        const Vector gu = fd_gradient(d, w, up, h);
        const Vector gd = fd_gradient(d, w, dn, h);
        m.col(j) = -(gu - gd) / (2.0 * h);
    }
    return (m + m.transpose()) / 2.0;
}

/// Golden-section maximizer for concave 1-d functions.
inline double golden_max(const std::function<double(double)>& f, double lo, double hi,
                         double tol = 1e-10) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a), dd = a + phi * (b - a);
    double fc = f(c), fd = f(dd);
    while (b - a > tol) {
        if (fc > fd) {
            b = dd;
            dd = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = dd;
            fc = fd;
            dd = a + phi * (b - a);
            fd = f(dd);
        }
    }
    return (a + b) / 2.0;
}

/// Refining grid search for a concave 2-d function.
inline std::pair<double, double> grid_max_2d(const std::function<double(double, double)>& f,
                                             double lo1, double hi1, double lo2, double hi2,
                                             int rounds = 12, int pts = 21) {
    double a1 = lo1, b1 = hi1, a2 = lo2, b2 = hi2;
    double x1 = 0.0, x2 = 0.0;
    for (int round = 0; round < rounds; ++round) {
        double best = -1e300;
        for (int i = 0; i < pts; ++i) {
            for (int j = 0; j < pts; ++j) {
                const double t1 = a1 + (b1 - a1) * i / (pts - 1);
                const double t2 = a2 + (b2 - a2) * j / (pts - 1);
                const double v = f(t1, t2);
                if (v > best) {
                    best = v;
                    x1 = t1;
                    x2 = t2;
                }
            }
        }
        const double w1 = (b1 - a1) / (pts - 1), w2 = (b2 - a2) / (pts - 1);
        a1 = x1 - 2 * w1;
        b1 = x1 + 2 * w1;
        a2 = x2 - 2 * w2;
        b2 = x2 + 2 * w2;
    }
    return {x1, x2};
}

/// Small random survival dataset for property tests.
inline Dataset random_dataset(coxsub::RngStream& rng, int n, int r, bool delayed = false,
                              int strata = 1, double event_frac = 0.4) {
    std::vector<coxsub::SurvivalRecord> recs;
    for (int i = 0; i < n; ++i) {
        coxsub::SurvivalRecord rec;
        rec.source_id = i + 1;
        rec.exit = rng.uniform(0.1, 10.0);
        if (delayed) rec.entry = rng.uniform() * 0.8 * rec.exit;
        rec.event = rng.uniform() < event_frac;
        rec.stratum = static_cast<Index>(rng.uniform() * strata);
        for (int j = 0; j < r; ++j) rec.covariates.push_back(rng.uniform(-1.0, 1.0));
        recs.push_back(std::move(rec));
    }
    return Dataset(std::move(recs));
}

inline bool close(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * (1.0 + std::fabs(b));
}

inline bool close_vec(const Vector& a, const Vector& b, double tol) {
    return (a - b).norm() <= tol * (1.0 + b.norm());
}

inline bool close_mat(const Matrix& a, const Matrix& b, double tol) {
    return (a - b).norm() <= tol * (1.0 + b.norm());
}

}  // namespace oracle
