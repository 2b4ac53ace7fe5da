#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "coxsub/data_model.hpp"
#include "coxsub/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace coxsub;

namespace {

Dataset tiny() {
    std::vector<SurvivalRecord> recs;
    auto add = [&](Index id, double en, double ex, bool ev, std::vector<double> x,
                   Index st = 0) {
        SurvivalRecord r;
        r.source_id = id;
        r.entry = en;
        r.exit = ex;
        r.event = ev;
        r.covariates = std::move(x);
        r.stratum = st;
        recs.push_back(std::move(r));
    };
    add(1, 0.0, 1.0, true, {1.0, 0.5});
    add(2, 0.0, 2.0, false, {-1.0, 0.25});
    add(3, 0.5, 3.0, true, {0.0, 2.0});
    add(4, 0.0, 3.0, false, {2.0, -1.0});
    add(5, 1.5, 4.0, true, {1.0, 1.0}, 1);
    add(6, 0.0, 5.0, false, {0.5, 0.5}, 1);
    return Dataset(std::move(recs), {"age", "dose"}, {});
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("constructor validates intervals and covariate shape") {
    std::vector<SurvivalRecord> recs(1);
    recs[0].source_id = 1;
    recs[0].entry = 2.0;
    recs[0].exit = 1.0;  // entry after exit
    recs[0].covariates = {1.0};
    CHECK_THROWS_AS(Dataset(std::move(recs)), InvalidInterval);

    std::vector<SurvivalRecord> recs2(2);
    recs2[0].source_id = 1;
    recs2[0].exit = 1.0;
    recs2[0].covariates = {1.0, 2.0};
    recs2[1].source_id = 2;
    recs2[1].exit = 2.0;
    recs2[1].covariates = {1.0};  // ragged
    CHECK_THROWS_AS(Dataset(std::move(recs2)), DataError);

    std::vector<SurvivalRecord> recs3(1);
    recs3[0].source_id = 1;
    recs3[0].exit = 1.0;
    recs3[0].covariates = {std::nan("")};
    CHECK_THROWS_AS(Dataset(std::move(recs3)), DataError);
}

TEST_CASE("event time indexes are sorted, unique, and complete") {
    const Dataset d = tiny();
    REQUIRE(d.n_strata() == 2);
    REQUIRE(d.n() == 6);
    CHECK(d.n_events() == 3);
    CHECK(d.n_censored() == 3);
    CHECK(d.event_times(0) == std::vector<double>{1.0, 3.0});
    CHECK(d.event_times(1) == std::vector<double>{4.0});
    CHECK(d.event_counts(0) == std::vector<int>{1, 1});

    // first/last event index windows agree with a brute-force scan
    for (Index i = 0; i < d.n(); ++i) {
        const auto& times = d.event_times(d.stratum(i));
        Index lo = static_cast<Index>(times.size()), hi = -1;
        for (Index k = 0; k < static_cast<Index>(times.size()); ++k) {
            if (oracle::at_risk(d, i, times[k])) {
                lo = std::min(lo, k);
                hi = std::max(hi, k);
            }
        }
        if (hi < 0) {
            CHECK(d.first_event_index(i) > d.last_event_index(i));
        } else {
            CHECK(d.first_event_index(i) == lo);
            CHECK(d.last_event_index(i) == hi);
        }
    }
}

TEST_CASE("csv round trip preserves every field exactly") {
    RngStream rng(8);
    const Dataset d = oracle::random_dataset(rng, 60, 3, true, 2);
    const char* path = "roundtrip_test.csv";
    write_csv(d, path);
    const Dataset back = load_csv(path, CsvSchema{});
    std::remove(path);

    REQUIRE(back.n() == d.n());
    REQUIRE(back.r() == d.r());
    REQUIRE(back.n_strata() == d.n_strata());
    for (Index i = 0; i < d.n(); ++i) {
        CHECK(back.source_id(i) == d.source_id(i));
        CHECK(back.entry(i) == d.entry(i));  // exact: shortest round-trip format
        CHECK(back.exit(i) == d.exit(i));
        CHECK(back.event(i) == d.event(i));
        CHECK(back.stratum(i) == d.stratum(i));
        for (Index j = 0; j < d.r(); ++j)
            CHECK(back.covariates()(i, j) == d.covariates()(i, j));
    }
}

TEST_CASE("csv loader reports precise errors") {
    auto write_file = [](const char* path, const std::string& text) {
        std::ofstream out(path);
        out << text;
    };
    const char* p = "bad_input_test.csv";
    write_file(p, "id,stop\n1,2.0\n");
    CHECK_THROWS_AS(load_csv(p, CsvSchema{}), MissingColumn);  // no event column
    write_file(p, "id,stop,event,x1\n1,2.0,1,oops\n");
    CHECK_THROWS_AS(load_csv(p, CsvSchema{}), NonNumericValue);
    write_file(p, "id,stop,event,x1\n1,2.0,3,1.0\n");
    CHECK_THROWS_AS(load_csv(p, CsvSchema{}), DataError);  // event not 0/1
    write_file(p, "id,start,stop,event,x1\n1,5.0,2.0,1,1.0\n");
    CHECK_THROWS_AS(load_csv(p, CsvSchema{}), InvalidInterval);
    std::remove(p);
}

TEST_CASE("csv loader accepts column names or positional indexes") {
    const char* p = "schema_test.csv";
    {
        std::ofstream out(p);
        out << "subject,t0,t1,fail,grp,z\n7,0.5,2.5,1,east,1.25\n8,0,1,0,west,-2\n";
    }
    CsvSchema s;
    s.id = "subject";
    s.start = "t0";
    s.stop = "t1";
    s.event = "fail";
    s.stratum = "grp";
    const Dataset d = load_csv(p, s);
    std::remove(p);
    REQUIRE(d.n() == 2);
    CHECK(d.r() == 1);
    CHECK(d.covariate_names() == std::vector<std::string>{"z"});
    CHECK(d.entry(0) == 0.5);
    CHECK(d.n_strata() == 2);
    CHECK(d.stratum_labels()[0] == "east");
}

TEST_CASE("subset keeps source ids and re-densifies strata") {
    const Dataset d = tiny();
    const Dataset s = d.subset({4, 5});  // the two stratum-1 records
    REQUIRE(s.n() == 2);
    CHECK(s.n_strata() == 1);
    CHECK(s.stratum(0) == 0);
    CHECK(s.source_id(0) == 5);
    CHECK(s.source_id(1) == 6);
    CHECK(s.covariates()(0, 1) == 1.0);
    CHECK(s.event_times(0) == std::vector<double>{4.0});
}

TEST_CASE("split_at_times preserves exposure and puts the event on the last piece") {
    const Dataset d = tiny();
    const SplitResult sr = split_at_times(d, {0.75, 2.0, 3.5});
    const Dataset& sp = sr.data;

    // per-source exposure and event flags survive the split
    for (Index i = 0; i < d.n(); ++i) {
        double exposure = 0.0;
        int events = 0;
        Index last_piece = -1;
        for (Index k = 0; k < sp.n(); ++k) {
            if (sr.map.pseudo_to_source[k] != i) continue;
            CHECK(sp.entry(k) >= d.entry(i));
            CHECK(sp.exit(k) <= d.exit(i));
            exposure += sp.exit(k) - sp.entry(k);
            events += sp.event(k) ? 1 : 0;
            last_piece = k;
            for (Index j = 0; j < d.r(); ++j)
                CHECK(sp.covariates()(k, j) == d.covariates()(i, j));
        }
        CHECK(exposure == doctest::Approx(d.exit(i) - d.entry(i)).epsilon(1e-12));
        CHECK(events == (d.event(i) ? 1 : 0));
        if (d.event(i)) CHECK(sp.event(last_piece));
    }

    // pieces never straddle a cut
    for (Index k = 0; k < sp.n(); ++k)
        for (double c : {0.75, 2.0, 3.5})
            CHECK(!(sp.entry(k) < c && c < sp.exit(k)));
}

TEST_CASE("split_at_event_times leaves each piece spanning at most one event time") {
    RngStream rng(77);
    const Dataset d = oracle::random_dataset(rng, 80, 2, true, 2);
    const SplitResult sr = split_at_event_times(d);
    const Dataset& sp = sr.data;
    for (Index k = 0; k < sp.n(); ++k) {
        const auto& times = sp.event_times(sp.stratum(k));
        int covered = 0;
        for (double t : times) covered += (sp.entry(k) < t && t <= sp.exit(k));
        CHECK(covered <= 1);
    }
    // the map is a bijection onto pieces
    std::set<Index> sources;
    for (Index k = 0; k < sp.n(); ++k) sources.insert(sr.map.pseudo_to_source[k]);
    CHECK(static_cast<Index>(sources.size()) == d.n());
}

TEST_CASE("apply_time_transform multiplies by g at the covered event time") {
    const Dataset d = tiny();
    // record 3 (index 2) spans event times 1.0 and 3.0 -> must be split first
    CHECK_THROWS_AS(apply_time_transform(d, 0, [](double t) { return t; }), NotSplit);

    const SplitResult sr = split_at_event_times(d);
    const Dataset td = apply_time_transform(sr.data, 0, [](double t) { return 10.0 * t; },
                                            "age_x10t");
    REQUIRE(td.r() == 3);
    CHECK(td.covariate_names().back() == "age_x10t");
    for (Index k = 0; k < td.n(); ++k) {
        const auto& times = td.event_times(td.stratum(k));
        double expect = 0.0;
        for (double t : times)
            if (td.entry(k) < t && t <= td.exit(k)) expect = td.covariates()(k, 0) * 10.0 * t;
        CHECK(td.covariates()(k, 2) == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("write_csv emits a stratum column only for stratified data") {
    const Dataset d = tiny();
    std::ostringstream out;
    write_csv(d, out);
    CHECK(out.str().substr(0, out.str().find('\n')) ==
          "id,start,stop,event,stratum,age,dose");

    const Dataset s = d.subset({0, 1});
    std::ostringstream out2;
    write_csv(s, out2);
    CHECK(out2.str().substr(0, out2.str().find('\n')) == "id,start,stop,event,age,dose");
}

}  // TEST_SUITE
