#pragma once

// JSON conversions for parameters, boxes and estimation results.

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "stableou/errors.hpp"
#include "stableou/estimators.hpp"
#include "stableou/model.hpp"

namespace stableou {

using Json = nlohmann::json;

inline Json vector_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Json params_json(const ModelParams& t) {
    return {{"lambda", t.lambda}, {"mu", vector_json(t.mu)}, {"beta", t.beta()}, {"sigma", t.sigma}};
}

namespace detail {

inline double number_field(const Json& j, const std::string& key, const std::string& prefix) {
    if (!j.contains(key)) throw ValidationError(prefix + key, "missing");
    if (!j.at(key).is_number()) throw ValidationError(prefix + key, "must be a number");
    const double v = j.at(key).get<double>();
    if (!std::isfinite(v)) throw ValidationError(prefix + key, "must be finite");
    return v;
}

}  // namespace detail

/// {lambda, mu[], beta, sigma}; field names in errors carry `prefix`.
inline ModelParams params_from_json(const Json& j, const std::string& prefix = "") {
    if (!j.is_object()) throw ValidationError(prefix.empty() ? "params" : prefix, "must be an object");
    const double lambda = detail::number_field(j, "lambda", prefix);
    const double beta = detail::number_field(j, "beta", prefix);
    const double sigma = detail::number_field(j, "sigma", prefix);
    if (!j.contains("mu") || !j.at("mu").is_array() || j.at("mu").empty())
        throw ValidationError(prefix + "mu", "must be a non-empty array");
    Vector mu(static_cast<Eigen::Index>(j.at("mu").size()));
    for (std::size_t i = 0; i < j.at("mu").size(); ++i) {
        const Json& e = j.at("mu")[i];
        if (!e.is_number()) throw ValidationError(prefix + "mu", "entries must be numbers");
        mu(static_cast<Eigen::Index>(i)) = e.get<double>();
    }
    if (!(beta > 0.0 && beta < 2.0)) throw ValidationError(prefix + "beta", "must lie in (0, 2)");
    if (!(sigma > 0.0)) throw ValidationError(prefix + "sigma", "must be positive");
    return ModelParams(lambda, mu, StabilityIndex(beta), sigma);
}

inline Json box_json(const ParamBox& b) {
    return {{"lambda", {b.lambda_lo, b.lambda_hi}},
            {"mu", {b.mu_lo, b.mu_hi}},
            {"beta", {b.beta_lo, b.beta_hi}},
            {"sigma", {b.sigma_lo, b.sigma_hi}}};
}

/// Any subset of {lambda, mu, beta, sigma}: [lo, hi]; missing entries keep defaults.
inline ParamBox box_from_json(const Json& j, const std::string& prefix = "box.") {
    ParamBox b;
    if (!j.is_object()) throw ValidationError("box", "must be an object");
    auto read = [&](const char* key, double& lo, double& hi) {
        if (!j.contains(key)) return;
        const Json& e = j.at(key);
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw ValidationError(prefix + key, "must be [lower, upper]");
        lo = e[0].get<double>();
        hi = e[1].get<double>();
    };
    read("lambda", b.lambda_lo, b.lambda_hi);
    read("mu", b.mu_lo, b.mu_hi);
    read("beta", b.beta_lo, b.beta_hi);
    read("sigma", b.sigma_lo, b.sigma_hi);
    b.validate();
    return b;
}

inline Json result_json(const EstimationResult& r, Pipeline pipeline) {
    Json j;
    j["pipeline"] = to_string(pipeline);
    j["theta0"] = params_json(r.prelim.theta0);
    if (r.theta1) j["theta1"] = params_json(*r.theta1);
    if (r.theta_mle) j["theta_mle"] = params_json(*r.theta_mle);
    if (r.inference) {
        const Studentized& s = *r.inference;
        j["stderr"] = vector_json(s.stderr_);
        Json ci = Json::array();
        for (auto [lo, hi] : s.ci95) ci.push_back({lo, hi});
        j["ci95"] = ci;
        j["info_hat"] = {{"drift_block", Json::array()}, {"tail_block", Json::array()}};
        for (Eigen::Index i = 0; i < s.info_hat.drift_block.rows(); ++i)
            j["info_hat"]["drift_block"].push_back(vector_json(s.info_hat.drift_block.row(i).transpose()));
        for (Eigen::Index i = 0; i < 2; ++i)
            j["info_hat"]["tail_block"].push_back(vector_json(s.info_hat.tail_block.row(i).transpose()));
        j["norming"] = {{"block_drift", s.norming.block_drift},
                        {"block_tail",
                         {{s.norming.block_tail(0, 0), s.norming.block_tail(0, 1)},
                          {s.norming.block_tail(1, 0), s.norming.block_tail(1, 1)}}}};
    }
    Json diag = {{"r_used", r.prelim.r_used},
                 {"lad_objective_value", r.prelim.lad_objective},
                 {"pv_ratio", r.prelim.pv_ratio},
                 {"iterations", r.prelim.iterations}};
    if (r.prelim.beta_pilot > 0.0) diag["beta_pilot"] = r.prelim.beta_pilot;
    if (r.theta1) diag["information_condition_number"] = r.condition_number;
    if (r.theta_mle) {
        diag["refine_iterations"] = r.refine_iterations;
        diag["refine_gradient_norm"] = r.refine_gradient_norm;
    }
    j["diagnostics"] = diag;
    j["flags"] = r.flags;
    return j;
}

}  // namespace stableou
