#include <algorithm>
#include <cmath>
#include <map>

#include "coxsub/simgen.hpp"
#include "coxsub/rng.hpp"
#include "doctest.h"

using namespace coxsub;

namespace {

double ks_uniform(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        d = std::max(d, std::fabs(xs[i] - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(xs[i] - static_cast<double>(i + 1) / n));
    }
    return d;
}

double corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("simgen") {

TEST_CASE("covariate designs have the documented moments and correlations") {
    SimConfig cfg;
    cfg.n = 15000;
    cfg.seed = 3;

    cfg.setting = 'A';
    const CovMatrix xa = gen_covariates(cfg);
    REQUIRE(xa.rows() == 15000);
    REQUIRE(xa.cols() == 6);
    for (int j = 0; j < 6; ++j) {
        const double mean = xa.col(j).mean();
        const double se = std::sqrt(16.0 / 12.0 / 15000.0);
        CHECK(std::fabs(mean - 2.0) < 3.0 * se);
        CHECK(xa.col(j).minCoeff() >= 0.0);
        CHECK(xa.col(j).maxCoeff() <= 4.0);
    }

    cfg.setting = 'B';
    const CovMatrix xb = gen_covariates(cfg);
    const double ub[6] = {1, 6, 2, 2, 1, 6};
    for (int j = 0; j < 6; ++j) {
        CHECK(xb.col(j).maxCoeff() <= ub[j]);
        CHECK(xb.col(j).maxCoeff() > 0.98 * ub[j]);
    }

    cfg.setting = 'C';
    const CovMatrix xc = gen_covariates(cfg);
    std::vector<double> x1(xc.rows()), x4(xc.rows()), x5(xc.rows()), x6(xc.rows());
    for (Index i = 0; i < xc.rows(); ++i) {
        x1[i] = xc(i, 0);
        x4[i] = xc(i, 3);
        x5[i] = xc(i, 4);
        x6[i] = xc(i, 5);
    }
    // corr(X1, X5) = sqrt(v/(v+1)) with v = Var Unif(0,4) = 4/3
    CHECK(std::fabs(corr(x1, x5) - 0.7559) < 0.02);
    // X6 noise has sd 1.5, i.e. variance 2.25
    CHECK(std::fabs(corr(x1, x6) - std::sqrt((4.0 / 3.0) / (4.0 / 3.0 + 2.25))) < 0.02);
    // strongest pairwise correlation about 0.75
    double strongest = 0.0;
    for (int a = 0; a < 6; ++a)
        for (int b = a + 1; b < 6; ++b) {
            std::vector<double> va(xc.rows()), vb(xc.rows());
            for (Index i = 0; i < xc.rows(); ++i) {
                va[i] = xc(i, a);
                vb[i] = xc(i, b);
            }
            strongest = std::max(strongest, std::fabs(corr(va, vb)));
        }
    CHECK(strongest == doctest::Approx(0.76).epsilon(0.04));
    // X6 mean is shifted by the +1 noise mean
    double m6 = 0;
    for (double v : x6) m6 += v;
    CHECK(std::fabs(m6 / 15000.0 - 3.0) < 0.05);
}

TEST_CASE("generation is deterministic and prefix-stable in n") {
    SimConfig small;
    small.setting = 'B';
    small.n = 100;
    small.seed = 17;
    small.delayed_entry = true;
    SimConfig big = small;
    big.n = 250;
    const Dataset ds = simulate(small);
    const Dataset db = simulate(big);
    const Dataset ds2 = simulate(small);
    REQUIRE(ds.n() == 100);
    for (Index i = 0; i < ds.n(); ++i) {
        CHECK(ds.exit(i) == ds2.exit(i));
        CHECK(ds.exit(i) == db.exit(i));  // per-subject streams: prefixes agree
        CHECK(ds.entry(i) == db.entry(i));
        CHECK(ds.event(i) == db.event(i));
    }
}

TEST_CASE("delayed entry modifies only the entry column") {
    SimConfig cfg;
    cfg.setting = 'C';
    cfg.n = 4000;
    cfg.seed = 5;
    const Dataset base = simulate(cfg);
    cfg.delayed_entry = true;
    const Dataset delayed = simulate(cfg);
    REQUIRE(base.n() == delayed.n());
    for (Index i = 0; i < base.n(); ++i) {
        CHECK(base.exit(i) == delayed.exit(i));
        CHECK(base.event(i) == delayed.event(i));
        CHECK(base.entry(i) == 0.0);
        CHECK(delayed.entry(i) >= 0.0);
        CHECK(delayed.entry(i) < 0.9 * delayed.exit(i) + 1e-12);
    }
    // roughly uniform over (0, 0.9 T): mean entry fraction ~ 0.45
    double frac = 0.0;
    for (Index i = 0; i < delayed.n(); ++i) frac += delayed.entry(i) / delayed.exit(i);
    CHECK(std::fabs(frac / static_cast<double>(delayed.n()) - 0.45) < 0.02);
}

TEST_CASE("competing exponentials: event probability is rate/(rate+censor)") {
    SimConfig cfg;
    cfg.setting = 'A';
    cfg.n = 20000;
    cfg.seed = 11;
    cfg.beta = Vector::Zero(6);
    cfg.early_rate = 0.3;
    cfg.late_rate = 0.3;  // single-rate failure hazard
    cfg.censor_rate = 0.2;
    const Dataset d = simulate(cfg);
    const double p = static_cast<double>(d.n_events()) / static_cast<double>(d.n());
    const double expect = 0.3 / 0.5;
    const double se = std::sqrt(expect * (1 - expect) / 20000.0);
    CHECK(std::fabs(p - expect) < 3.0 * se);
}

TEST_CASE("piecewise-exponential inversion matches its own cumulative hazard (PIT)") {
    // u = 1 - exp(-H(V)) must be uniform when V is drawn by inverting H
    SimConfig cfg;
    cfg.setting = 'A';
    cfg.n = 10000;
    cfg.seed = 23;
    cfg.censor_rate = 1e-12;  // effectively no censoring: exit = failure time
    const Dataset d = simulate(cfg);
    const Vector beta = default_beta();
    std::vector<double> u;
    for (Index i = 0; i < d.n(); ++i) {
        if (!d.event(i)) continue;
        const double lp = d.covariates().row(i) * beta;
        const double H =
            piecewise_cumhaz(d.exit(i), cfg.early_rate, 0.075, cfg.change_time, lp, 0.0, {});
        u.push_back(1.0 - std::exp(-H));
    }
    REQUIRE(u.size() > 9900);  // almost everyone fails without censoring
    CHECK(ks_uniform(u) < 0.02);
}

TEST_CASE("piecewise-exponential inversion matches a thinning sampler") {
    // independent oracle: Lewis-Shedler thinning with the dominating constant
    // hazard max(early, late) * exp(lp)
    const double early = 0.05, late = 0.4, change = 3.0, lp = 0.35;
    const int n = 10000;

    std::vector<double> inv;
    {
        RngStream rng(401);
        for (int i = 0; i < n; ++i) {
            SimConfig cfg;  // use the library inversion through gen interface
            // direct draw through the exposed hazard walker
            const double e = rng.exp1();
            inv.push_back(invert_piecewise_cumhaz(e, early, late, change, lp));
        }
    }
    std::vector<double> thin;
    {
        RngStream rng(402);
        const double hmax = std::max(early, late) * std::exp(lp);
        for (int i = 0; i < n; ++i) {
            double t = 0.0;
            for (;;) {
                t += rng.exponential(hmax);
                const double h = (t < change ? early : late) * std::exp(lp);
                if (rng.uniform() < h / hmax) break;
            }
            thin.push_back(t);
        }
    }
    std::sort(inv.begin(), inv.end());
    std::sort(thin.begin(), thin.end());
    // two-sample KS distance
    double ks = 0.0;
    std::size_t a = 0, b = 0;
    while (a < inv.size() && b < thin.size()) {
        if (inv[a] <= thin[b])
            ++a;
        else
            ++b;
        ks = std::max(ks, std::fabs(static_cast<double>(a) / n - static_cast<double>(b) / n));
    }
    CHECK(ks < 0.02);
}

TEST_CASE("time-dependent data is well-formed start-stop with a counting covariate") {
    SimConfig cfg;
    cfg.setting = 'A';
    cfg.n = 3000;
    cfg.seed = 29;
    cfg.time_dependent = true;
    const Dataset d = simulate(cfg);
    REQUIRE(d.r() == 7);
    CHECK(d.covariate_names().back() == "ntests");

    std::map<Index, std::vector<Index>> by_subject;
    for (Index k = 0; k < d.n(); ++k) by_subject[d.source_id(k)].push_back(k);
    CHECK(by_subject.size() == 3000);
    for (const auto& [sid, rows] : by_subject) {
        REQUIRE(rows.size() <= 5);  // at most 4 tests => 5 segments
        int events = 0;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const Index k = rows[j];
            CHECK(d.covariates()(k, 6) == static_cast<double>(j));  // cumulative count
            if (j > 0) {
                CHECK(d.entry(rows[j]) == d.exit(rows[j - 1]));  // contiguous
                // time-independent covariates repeat across segments
                for (int c = 0; c < 6; ++c)
                    CHECK(d.covariates()(rows[j], c) == d.covariates()(rows[0], c));
            }
            events += d.event(k) ? 1 : 0;
        }
        if (events) CHECK(d.event(rows.back()));
        CHECK(events <= 1);
    }
}

TEST_CASE("time-dependent failure and censoring times are faithful to their hazards") {
    SimConfig cfg;
    cfg.setting = 'A';
    cfg.n = 8000;
    cfg.seed = 31;
    cfg.time_dependent = true;
    const CovMatrix x = gen_covariates(cfg);
    const Vector beta = default_beta();
    const Vector beta_c = default_beta_censor();

    std::vector<double> uv, uc;
    for (Index i = 0; i < cfg.n; ++i) {
        const TdSubject s = gen_td_subject(cfg, x.row(i), i);
        const double lp = x.row(i) * beta;
        const double lpc = x.row(i) * beta_c;
        uv.push_back(1.0 - std::exp(-piecewise_cumhaz(s.v, cfg.early_rate,
                                                      default_late_rate(cfg), cfg.change_time,
                                                      lp, cfg.beta_dep, s.tests)));
        uc.push_back(1.0 - std::exp(-piecewise_cumhaz(s.c, cfg.censor_early_rate,
                                                      cfg.censor_late_rate, cfg.change_time,
                                                      lpc, cfg.beta_censor_dep, s.tests)));
    }
    CHECK(ks_uniform(uv) < 0.02);
    CHECK(ks_uniform(uc) < 0.02);
    // conditional independence given covariates: the PIT values decorrelate
    CHECK(std::fabs(corr(uv, uc)) < 0.04);
}

TEST_CASE("delayed entry in time-dependent designs clips segments") {
    SimConfig cfg;
    cfg.setting = 'A';
    cfg.n = 2000;
    cfg.seed = 37;
    cfg.time_dependent = true;
    cfg.delayed_entry = true;
    const Dataset d = simulate(cfg);
    std::map<Index, std::vector<Index>> by_subject;
    for (Index k = 0; k < d.n(); ++k) by_subject[d.source_id(k)].push_back(k);
    for (const auto& [sid, rows] : by_subject) {
        for (std::size_t j = 0; j + 1 < rows.size(); ++j)
            CHECK(d.entry(rows[j + 1]) == d.exit(rows[j]));
        CHECK(d.entry(rows.front()) >= 0.0);
    }
}

TEST_CASE("different seeds give different datasets") {
    SimConfig a;
    a.setting = 'A';
    a.n = 50;
    a.seed = 1;
    SimConfig b = a;
    b.seed = 2;
    const Dataset da = simulate(a);
    const Dataset db = simulate(b);
    bool any_diff = false;
    for (Index i = 0; i < da.n(); ++i) any_diff = any_diff || da.exit(i) != db.exit(i);
    CHECK(any_diff);
}

}  // TEST_SUITE
