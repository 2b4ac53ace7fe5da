#include "coxsub/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "coxsub/format.hpp"
#include "coxsub/rng.hpp"

namespace coxsub {

double rmse(const std::vector<Vector>& estimates, const Vector& target) {
    if (estimates.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& b : estimates) acc += (b - target).squaredNorm();
    return std::sqrt(acc / static_cast<double>(estimates.size()));
}

double rmse_paired(const std::vector<Vector>& estimates, const std::vector<Vector>& targets) {
    if (estimates.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < estimates.size(); ++k)
        acc += (estimates[k] - targets[k]).squaredNorm();
    return std::sqrt(acc / static_cast<double>(estimates.size()));
}

Matrix empirical_covariance(const std::vector<Vector>& estimates) {
    const Index m = static_cast<Index>(estimates.size());
    if (m < 2) throw DataError("need at least two estimates for an empirical covariance");
    const Index r = estimates.front().size();
    Vector mean = Vector::Zero(r);
    for (const auto& b : estimates) mean += b;
    mean /= static_cast<double>(m);
    Matrix cov = Matrix::Zero(r, r);
    for (const auto& b : estimates) {
        const Vector c = b - mean;
        cov.noalias() += c * c.transpose();
    }
    return cov / static_cast<double>(m - 1);
}

SeAgreement se_agreement(const std::vector<Matrix>& replicate_covs, const Matrix& empirical_cov) {
    if (replicate_covs.empty()) throw DataError("no replicate covariances");
    const Index r = empirical_cov.rows();
    Matrix mean_cov = Matrix::Zero(r, r);
    for (const auto& c : replicate_covs) mean_cov += c;
    mean_cov /= static_cast<double>(replicate_covs.size());

    SeAgreement out;
    out.mean_se = Vector::Zero(r);
    for (const auto& c : replicate_covs)
        out.mean_se += c.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.mean_se /= static_cast<double>(replicate_covs.size());
    out.emp_sd = empirical_cov.diagonal().cwiseSqrt();
    out.ratio = out.mean_se.cwiseQuotient(out.emp_sd);
    out.frobenius = (mean_cov - empirical_cov).norm();
    return out;
}

namespace {

struct CellSample {
    bool ok = false;
    Vector beta;
    Matrix cov;
    Index q = 0;
    double seconds = 0.0;
};

struct ReplicateOut {
    bool pl_ok = false;
    Vector beta_pl;
    double pl_seconds = 0.0;
    Index n_events = 0;
    std::vector<CellSample> cells;  // methods x multipliers, row-major
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg) {
    const std::size_t n_methods = cfg.methods.size();
    const std::size_t n_mults = cfg.q_multipliers.size();
    std::vector<ReplicateOut> reps(cfg.replicates);

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= cfg.replicates) return;
            ReplicateOut& out = reps[k];
            out.cells.resize(n_methods * n_mults);

            SimConfig sc = cfg.sim;
            sc.seed = CounterRng::derive(cfg.master_seed, 100 + static_cast<std::uint64_t>(k));
            Dataset d = simulate(sc);
            out.n_events = d.n_events();

            try {
                NewtonOptions nopt;
                nopt.tol = cfg.tol;
                nopt.max_iter = cfg.max_iter;
                const auto t0 = std::chrono::steady_clock::now();
                FitResult pl = newton_raphson(d, WeightVector::ones(d.n()), nopt);
                out.pl_seconds = seconds_since(t0);
                out.beta_pl = pl.beta;
                out.pl_ok = pl.converged;
            } catch (const CoxError&) {
                out.pl_ok = false;
            }
            if (!out.pl_ok) continue;

            for (std::size_t mi = 0; mi < n_methods; ++mi) {
                for (std::size_t qi = 0; qi < n_mults; ++qi) {
                    CellSample& cell = out.cells[mi * n_mults + qi];
                    TwoStepOptions topt;
                    topt.method = cfg.methods[mi];
                    topt.q = std::max<Index>(1, std::llround(cfg.q_multipliers[qi] *
                                                             static_cast<double>(d.n_events())));
                    topt.seed = CounterRng::derive(
                        CounterRng::derive(cfg.master_seed, 200 + static_cast<std::uint64_t>(k)),
                        static_cast<std::uint64_t>(mi * 64 + qi));
                    topt.tol = cfg.tol;
                    topt.max_iter = cfg.max_iter;
                    topt.with_baseline = false;
                    try {
                        const auto t0 = std::chrono::steady_clock::now();
                        SubsampleEstimate est = two_step_fit(d, topt);
                        cell.seconds = seconds_since(t0);
                        cell.beta = est.beta;
                        cell.cov = est.cov;
                        cell.q = est.q;
                        cell.ok = est.fit.converged;
                    } catch (const CoxError&) {
                        cell.ok = false;
                    }
                }
            }
        }
    };

    const int nthreads = std::max(1, cfg.threads);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    BenchResult res;
    res.setting = cfg.sim.setting;
    res.n = cfg.sim.n;
    res.delayed_entry = cfg.sim.delayed_entry;
    res.time_dependent = cfg.sim.time_dependent;
    res.replicates = cfg.replicates;
    Vector bt = cfg.sim.beta.size() ? cfg.sim.beta : default_beta();
    if (cfg.sim.time_dependent) {
        bt.conservativeResize(bt.size() + 1);
        bt[bt.size() - 1] = cfg.sim.beta_dep;
    }
    res.beta_true = bt;

    // full-data cell
    BenchCell pl_cell;
    pl_cell.method = "pl";
    std::vector<Vector> pl_betas;
    std::vector<double> pl_q;
    for (const auto& rep : reps) {
        if (!rep.pl_ok) {
            ++pl_cell.failed;
            continue;
        }
        ++pl_cell.ok;
        pl_betas.push_back(rep.beta_pl);
        pl_cell.mean_seconds += rep.pl_seconds;
        pl_q.push_back(static_cast<double>(rep.n_events));
    }
    if (pl_cell.ok > 0) pl_cell.mean_seconds /= pl_cell.ok;
    const double pl_rmse = rmse(pl_betas, bt);
    pl_cell.rmse_true = pl_rmse;
    pl_cell.rr = 1.0;
    {
        double m = 0.0, s = 0.0;
        for (double v : pl_q) m += v;
        if (!pl_q.empty()) m /= pl_q.size();
        for (double v : pl_q) s += (v - m) * (v - m);
        if (pl_q.size() > 1) s = std::sqrt(s / (pl_q.size() - 1));
        pl_cell.q_mean = m;
        pl_cell.q_sd = s;
    }
    if (cfg.keep_estimates) pl_cell.betas = pl_betas;
    res.cells.push_back(std::move(pl_cell));

    for (std::size_t mi = 0; mi < n_methods; ++mi) {
        for (std::size_t qi = 0; qi < n_mults; ++qi) {
            BenchCell cell;
            cell.method = method_name(cfg.methods[mi]);
            cell.q_mult = cfg.q_multipliers[qi];
            std::vector<Vector> betas, targets;
            std::vector<double> qs;
            for (const auto& rep : reps) {
                if (!rep.pl_ok) {
                    ++cell.failed;
                    continue;
                }
                const CellSample& s = rep.cells[mi * n_mults + qi];
                if (!s.ok) {
                    ++cell.failed;
                    continue;
                }
                ++cell.ok;
                betas.push_back(s.beta);
                targets.push_back(rep.beta_pl);
                qs.push_back(static_cast<double>(s.q));
                cell.mean_seconds += s.seconds;
                if (cfg.keep_estimates) {
                    cell.betas.push_back(s.beta);
                    cell.covs.push_back(s.cov);
                }
            }
            if (cell.ok > 0) cell.mean_seconds /= cell.ok;
            cell.rmse_true = rmse(betas, bt);
            cell.rmse_pl = rmse_paired(betas, targets);
            cell.rr = pl_rmse > 0.0 ? cell.rmse_true / pl_rmse : 0.0;
            double m = 0.0, s = 0.0;
            for (double v : qs) m += v;
            if (!qs.empty()) m /= qs.size();
            for (double v : qs) s += (v - m) * (v - m);
            if (qs.size() > 1) s = std::sqrt(s / (qs.size() - 1));
            cell.q_mean = m;
            cell.q_sd = s;
            res.cells.push_back(std::move(cell));
        }
    }
    return res;
}

void write_bench_csv(const BenchResult& res, const std::string& path, bool include_runtime) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_bench_csv(res, out, include_runtime);
}

void write_bench_csv(const BenchResult& res, std::ostream& out, bool include_runtime) {
    out << "setting,delayed_entry,time_dependent,n,replicates,failed,method,q_mult,"
           "q_mean,q_sd,rmse_true,rmse_pl,rr,mean_seconds\n";
    for (const auto& c : res.cells) {
        out << res.setting << ',' << (res.delayed_entry ? 1 : 0) << ','
            << (res.time_dependent ? 1 : 0) << ',' << res.n << ',' << res.replicates << ','
            << c.failed << ',' << c.method << ',' << format_double(c.q_mult) << ','
            << format_double(c.q_mean) << ',' << format_double(c.q_sd) << ','
            << format_double(c.rmse_true) << ',' << format_double(c.rmse_pl) << ','
            << format_double(c.rr) << ',';
        if (include_runtime) out << format_double(c.mean_seconds);
        out << '\n';
    }
}

void write_bench_json(const BenchResult& res, std::ostream& out, bool include_runtime) {
    nlohmann::json doc;
    doc["schema"] = "coxsub.bench.v1";
    doc["setting"] = std::string(1, res.setting);
    doc["delayed_entry"] = res.delayed_entry;
    doc["time_dependent"] = res.time_dependent;
    doc["n"] = res.n;
    doc["replicates"] = res.replicates;
    doc["beta_true"] = std::vector<double>(res.beta_true.begin(), res.beta_true.end());
    auto& cells = doc["cells"];
    cells = nlohmann::json::array();
    for (const auto& c : res.cells) {
        nlohmann::json j;
        j["method"] = c.method;
        j["q_mult"] = c.q_mult;
        j["q_mean"] = c.q_mean;
        j["q_sd"] = c.q_sd;
        j["rmse_true"] = c.rmse_true;
        j["rmse_pl"] = c.rmse_pl;
        j["rr"] = c.rr;
        j["ok"] = c.ok;
        j["failed"] = c.failed;
        if (include_runtime) j["mean_seconds"] = c.mean_seconds;
        cells.push_back(std::move(j));
    }
    out << doc.dump(2) << '\n';
}

void write_bench_json(const BenchResult& res, const std::string& path, bool include_runtime) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_bench_json(res, out, include_runtime);
}

}  // namespace coxsub
