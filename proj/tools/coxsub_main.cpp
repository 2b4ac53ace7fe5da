// coxsub: Cox proportional-hazards fitting with optimal subsampling for
// massive rare-event data.  Subcommands: fit, subfit, simulate, bench.
//
// Exit codes: 0 success, 1 numerical failure, 2 usage or input error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coxsub/bench.hpp"
#include "coxsub/json_io.hpp"

namespace {

using namespace coxsub;

int resolve_column(const Dataset& d, const std::string& col) {
    const auto& names = d.covariate_names();
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == col) return static_cast<int>(j);
    try {
        const int idx = std::stoi(col);
        if (idx >= 0 && idx < d.r()) return idx;
    } catch (...) {
    }
    throw DataError("no covariate column '" + col + "'");
}

Dataset prepare(const std::string& input, bool split_events, const std::string& tt_log) {
    Dataset d = load_csv(input);
    if (split_events) d = split_at_event_times(d).data;
    if (!tt_log.empty()) {
        const int col = resolve_column(d, tt_log);
        d = apply_time_transform(d, col, [](double t) { return std::log(t); });
    }
    return d;
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

std::vector<double> parse_grid(const std::string& spec) {
    // "start:stop:step"
    std::vector<double> parts;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto next = spec.find(':', pos);
        parts.push_back(std::stod(spec.substr(pos, next - pos)));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (parts.size() != 3 || parts[2] <= 0.0)
        throw DataError("baseline grid must be start:stop:step");
    std::vector<double> grid;
    for (double t = parts[0]; t <= parts[1] + 1e-12; t += parts[2]) grid.push_back(t);
    return grid;
}

struct FitArgs {
    std::string input, output, tt_log;
    double tol = 1e-9;
    int max_iter = 25;
    bool split_events = false, allow_nonconverged = false, with_baseline = false;
};

int run_fit(const FitArgs& a) {
    const Dataset d = prepare(a.input, a.split_events, a.tt_log);
    NewtonOptions opt;
    opt.tol = a.tol;
    opt.max_iter = a.max_iter;
    const FitResult fit = newton_raphson(d, WeightVector::ones(d.n()), opt);
    BaselineHazard baseline;
    if (a.with_baseline) baseline = breslow(d, WeightVector::ones(d.n()), fit.beta);
    emit(fit_json(d, fit, a.with_baseline ? &baseline : nullptr), a.output);
    if (!fit.converged && !a.allow_nonconverged) {
        std::cerr << "coxsub: fit did not converge in " << fit.iterations << " iterations\n";
        return 1;
    }
    return 0;
}

struct SubfitArgs {
    std::string input, output, tt_log, method = "l-opt", grid, export_plan;
    std::int64_t q = 0;
    std::uint64_t seed = 1;
    double tol = 1e-9;
    int max_iter = 25;
    bool split_events = false, allow_nonconverged = false, full_breslow = false;
};

int run_subfit(const SubfitArgs& a) {
    const Dataset d = prepare(a.input, a.split_events, a.tt_log);
    TwoStepOptions opt;
    opt.method = method_from_name(a.method);
    opt.q = a.q;
    opt.seed = a.seed;
    opt.tol = a.tol;
    opt.max_iter = a.max_iter;
    opt.full_data_breslow = a.full_breslow;
    if (!a.grid.empty()) opt.baseline_grid = parse_grid(a.grid);
    const SubsampleEstimate est = two_step_fit(d, opt);
    if (!a.export_plan.empty()) export_plan_csv(d, est.plan, a.export_plan);
    emit(subfit_json(d, est), a.output);
    if (!est.fit.converged && !a.allow_nonconverged) {
        std::cerr << "coxsub: subsample fit did not converge\n";
        return 1;
    }
    return 0;
}

struct SimArgs {
    std::string setting = "A", output;
    std::int64_t n = 15000;
    std::uint64_t seed = 1;
    bool delayed = false, time_dep = false;
};

int run_simulate(const SimArgs& a) {
    SimConfig cfg;
    if (a.setting.size() != 1) throw DataError("setting must be A, B, or C");
    cfg.setting = a.setting[0];
    cfg.n = a.n;
    cfg.seed = a.seed;
    cfg.delayed_entry = a.delayed;
    cfg.time_dependent = a.time_dep;
    const Dataset d = simulate(cfg);
    if (a.output.empty()) {
        write_csv(d, std::cout);
    } else {
        write_csv(d, a.output);
    }
    return 0;
}

struct BenchArgs {
    std::string setting = "A", output, json_summary;
    std::vector<std::string> methods{"uniform", "l-opt", "a-opt"};
    std::vector<double> q_mults{1.0, 2.0, 3.0};
    std::int64_t n = 15000;
    int replicates = 100, threads = 1;
    std::uint64_t seed = 1;
    bool delayed = false, time_dep = false, omit_runtime = false;
};

int run_bench(const BenchArgs& a) {
    BenchConfig cfg;
    if (a.setting.size() != 1) throw DataError("setting must be A, B, or C");
    cfg.sim.setting = a.setting[0];
    cfg.sim.n = a.n;
    cfg.sim.delayed_entry = a.delayed;
    cfg.sim.time_dependent = a.time_dep;
    cfg.replicates = a.replicates;
    cfg.master_seed = a.seed;
    cfg.threads = a.threads;
    cfg.q_multipliers = a.q_mults;
    cfg.methods.clear();
    for (const auto& m : a.methods) cfg.methods.push_back(method_from_name(m));
    const BenchResult res = run_benchmark(cfg);
    if (a.output.empty()) {
        write_bench_csv(res, std::cout, !a.omit_runtime);
    } else {
        write_bench_csv(res, a.output, !a.omit_runtime);
    }
    if (!a.json_summary.empty()) write_bench_json(res, a.json_summary, !a.omit_runtime);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cox proportional-hazards regression with optimal subsampling for rare events"};
    app.require_subcommand(1);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "full-data partial-likelihood fit");
    fit->add_option("--input", fa.input, "input CSV (id,stop,event[,start,stratum],covariates)")
        ->required();
    fit->add_option("--output", fa.output, "output JSON path (default: stdout)");
    fit->add_option("--tol", fa.tol, "convergence tolerance");
    fit->add_option("--max-iter", fa.max_iter, "maximum Newton iterations");
    fit->add_flag("--split-at-events", fa.split_events, "split records at event times first");
    fit->add_option("--tt-log", fa.tt_log,
                    "append covariate * log(event time) column (data must be split)");
    fit->add_flag("--baseline", fa.with_baseline, "include the Breslow baseline in the output");
    fit->add_flag("--allow-nonconverged", fa.allow_nonconverged,
                  "exit 0 even if the fit did not converge");

    SubfitArgs sa;
    auto* subfit = app.add_subcommand("subfit", "two-step subsample fit");
    subfit->add_option("--input", sa.input, "input CSV")->required();
    subfit->add_option("--output", sa.output, "output JSON path (default: stdout)");
    subfit->add_option("--q", sa.q, "number of censored records to draw")->required();
    subfit->add_option("--method", sa.method, "sampling method: uniform, l-opt, a-opt");
    subfit->add_option("--seed", sa.seed, "master seed (pilot/final seeds derived)");
    subfit->add_option("--tol", sa.tol, "convergence tolerance");
    subfit->add_option("--max-iter", sa.max_iter, "maximum Newton iterations");
    subfit->add_flag("--split-at-events", sa.split_events, "split records at event times first");
    subfit->add_option("--tt-log", sa.tt_log,
                       "append covariate * log(event time) column (data must be split)");
    subfit->add_flag("--full-breslow", sa.full_breslow,
                     "baseline from full-data risk sums instead of the weighted subsample");
    subfit->add_option("--baseline-grid", sa.grid, "baseline evaluation grid start:stop:step");
    subfit->add_option("--export-plan", sa.export_plan,
                       "write the sampling probabilities to this CSV");
    subfit->add_flag("--allow-nonconverged", sa.allow_nonconverged,
                     "exit 0 even if the fit did not converge");

    SimArgs ma;
    auto* sim = app.add_subcommand("simulate", "generate a synthetic rare-event dataset");
    sim->add_option("--setting", ma.setting, "covariate design: A, B, or C");
    sim->add_option("--n", ma.n, "number of subjects");
    sim->add_option("--seed", ma.seed, "seed");
    sim->add_flag("--delayed-entry", ma.delayed, "draw left-truncation times");
    sim->add_flag("--time-dependent", ma.time_dep,
                  "time-dependent design (start-stop pseudo-records)");
    sim->add_option("--output", ma.output, "output CSV path (default: stdout)");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "replicate benchmark of subsampling methods");
    bench->add_option("--setting", ba.setting, "covariate design: A, B, or C");
    bench->add_option("--n", ba.n, "number of subjects per replicate");
    bench->add_option("--replicates", ba.replicates, "number of replicates");
    bench->add_option("--q-mult", ba.q_mults, "subsample multipliers of the event count");
    bench->add_option("--methods", ba.methods, "sampling methods to benchmark");
    bench->add_option("--seed", ba.seed, "master seed");
    bench->add_option("--threads", ba.threads, "worker threads");
    bench->add_flag("--delayed-entry", ba.delayed, "draw left-truncation times");
    bench->add_flag("--time-dependent", ba.time_dep, "time-dependent design");
    bench->add_option("--output", ba.output, "output CSV path (default: stdout)");
    bench->add_option("--json-summary", ba.json_summary, "also write a JSON summary here");
    bench->add_flag("--omit-runtime", ba.omit_runtime,
                    "blank wall-time columns for byte-reproducible output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fit->parsed()) return run_fit(fa);
        if (subfit->parsed()) return run_subfit(sa);
        if (sim->parsed()) return run_simulate(ma);
        if (bench->parsed()) return run_bench(ba);
    } catch (const DataError& e) {
        std::cerr << "coxsub: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "coxsub: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
