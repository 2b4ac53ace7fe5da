#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coxsub/simgen.hpp"
#include "coxsub/two_step.hpp"

namespace coxsub {

/// Root mean squared distance of the estimates from a common target:
/// sqrt(mean ||b_k - target||^2).
double rmse(const std::vector<Vector>& estimates, const Vector& target);

/// Same, with a per-replicate target (e.g. each replicate's full-data fit).
double rmse_paired(const std::vector<Vector>& estimates, const std::vector<Vector>& targets);

/// Textbook two-pass sample covariance of the estimates.
Matrix empirical_covariance(const std::vector<Vector>& estimates);

struct SeAgreement {
    Vector mean_se;    ///< mean estimated SE per coefficient
    Vector emp_sd;     ///< empirical SD per coefficient
    Vector ratio;      ///< mean_se / emp_sd
    double frobenius;  ///< || mean(cov) - empirical cov ||_F
};

SeAgreement se_agreement(const std::vector<Matrix>& replicate_covs, const Matrix& empirical_cov);

struct BenchConfig {
    SimConfig sim;
    std::vector<SamplingMethod> methods{SamplingMethod::uniform, SamplingMethod::l_opt,
                                        SamplingMethod::a_opt};
    std::vector<double> q_multipliers{1.0, 2.0, 3.0};
    int replicates = 100;
    std::uint64_t master_seed = 1;
    int threads = 1;
    double tol = 1e-9;
    int max_iter = 25;
    bool keep_estimates = false;  ///< retain per-replicate betas and covariances
};

/// One aggregated output row (a method at one subsample-size multiplier; the
/// full-data fit appears as method "pl" with q_mult 0).
struct BenchCell {
    std::string method;
    double q_mult = 0.0;
    double q_mean = 0.0, q_sd = 0.0;
    double rmse_true = 0.0;  ///< vs the data-generating coefficients
    double rmse_pl = 0.0;    ///< vs each replicate's full-data fit
    double rr = 0.0;         ///< rmse_true / rmse_true(pl)
    double mean_seconds = 0.0;
    int ok = 0, failed = 0;

    // populated when keep_estimates is set
    std::vector<Vector> betas;
    std::vector<Matrix> covs;
};

struct BenchResult {
    char setting = 'A';
    Index n = 0;
    bool delayed_entry = false, time_dependent = false;
    int replicates = 0;
    Vector beta_true;
    std::vector<BenchCell> cells;
};

/// Simulate `replicates` datasets (seeds derived per replicate, so any thread
/// count yields identical estimates), fit the full-data estimator and every
/// method x multiplier subsample estimator, and aggregate RMSEs, subsample
/// sizes, and wall times.  Individual replicate failures are counted and
/// excluded cell by cell.
BenchResult run_benchmark(const BenchConfig& cfg);

/// CSV with one row per cell.  Columns: setting,delayed_entry,time_dependent,
/// n,replicates,failed,method,q_mult,q_mean,q_sd,rmse_true,rmse_pl,rr,
/// mean_seconds.  Wall times are timing noise; pass include_runtime=false to
/// blank that column for byte-reproducible output.
void write_bench_csv(const BenchResult& res, const std::string& path, bool include_runtime = true);
void write_bench_csv(const BenchResult& res, std::ostream& out, bool include_runtime = true);

/// JSON mirror of the CSV plus the true coefficient vector.
void write_bench_json(const BenchResult& res, const std::string& path, bool include_runtime = true);
void write_bench_json(const BenchResult& res, std::ostream& out, bool include_runtime = true);

}  // namespace coxsub
