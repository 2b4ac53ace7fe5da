#include "coxsub/json_io.hpp"

#include <cmath>

#include <json.hpp>

namespace coxsub {

namespace {

nlohmann::json vec_json(const Vector& v) {
    return std::vector<double>(v.begin(), v.end());
}

nlohmann::json mat_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    }
    return rows;
}

nlohmann::json baseline_obj(const Dataset& d, const BaselineHazard& baseline) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& curve : baseline.strata) {
        for (std::size_t k = 0; k < curve.times.size(); ++k) {
            nlohmann::json pt;
            if (baseline.strata.size() > 1)
                pt["stratum"] = d.stratum_labels()[curve.stratum];
            pt["t"] = curve.times[k];
            pt["cumhaz"] = curve.cumulative[k];
            if (!curve.variance.empty()) pt["var"] = curve.variance[k];
            arr.push_back(std::move(pt));
        }
    }
    return arr;
}

}  // namespace

std::string baseline_json(const Dataset& d, const BaselineHazard& baseline) {
    return baseline_obj(d, baseline).dump(2) + "\n";
}

std::string fit_json(const Dataset& d, const FitResult& fit, const BaselineHazard* baseline) {
    nlohmann::json doc;
    doc["schema"] = "coxsub.fit.v1";
    doc["coefficients"] = d.covariate_names();
    doc["beta"] = vec_json(fit.beta);
    // classical SEs: inverse of the total (unscaled) information
    const Matrix total_info = fit.info * static_cast<double>(fit.n_scale);
    const Matrix cov = total_info.ldlt().solve(Matrix::Identity(fit.beta.size(), fit.beta.size()));
    Vector se(fit.beta.size());
    for (Index j = 0; j < fit.beta.size(); ++j) se[j] = std::sqrt(std::max(0.0, cov(j, j)));
    doc["se"] = vec_json(se);
    doc["loglik"] = fit.loglik;
    doc["iterations"] = fit.iterations;
    doc["converged"] = fit.converged;
    doc["max_grad"] = fit.max_grad;
    doc["n"] = d.n();
    doc["n_events"] = d.n_events();
    if (baseline) doc["baseline"] = baseline_obj(d, *baseline);
    return doc.dump(2) + "\n";
}

std::string subfit_json(const Dataset& d, const SubsampleEstimate& est) {
    nlohmann::json doc;
    doc["schema"] = "coxsub.subfit.v1";
    doc["coefficients"] = d.covariate_names();
    doc["beta"] = vec_json(est.beta);
    Vector se(est.beta.size());
    for (Index j = 0; j < est.beta.size(); ++j)
        se[j] = std::sqrt(std::max(0.0, est.cov(j, j)));
    doc["se"] = vec_json(se);
    doc["cov"] = mat_json(est.cov);
    doc["pilot_beta"] = vec_json(est.pilot_beta);
    if (!est.baseline.strata.empty()) doc["baseline"] = baseline_obj(d, est.baseline);

    nlohmann::json meta;
    meta["method"] = method_name(est.method);
    meta["q"] = est.q;
    meta["n"] = est.n;
    meta["n_events"] = est.n_events;
    meta["seed"] = est.seed;
    meta["seeds"] = {{"pilot", est.pilot_draw.seed}, {"final", est.final_draw.seed}};
    meta["iterations"] = {{"pilot", est.pilot_fit.iterations}, {"final", est.fit.iterations}};
    meta["converged"] = est.fit.converged;
    meta["breslow"] = est.full_data_breslow ? "full" : "weighted";
    doc["meta"] = std::move(meta);
    return doc.dump(2) + "\n";
}

}  // namespace coxsub
