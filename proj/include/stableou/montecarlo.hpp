#pragma once

// Replication engine: simulate paths under a known theta, run an estimation
// pipeline, and aggregate bias / RMSE / studentized-error diagnostics per grid size.
// Results depend only on the config (per-replication random streams, ordered
// reduction), never on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "stableou/errors.hpp"
#include "stableou/estimators.hpp"
#include "stableou/model.hpp"
#include "stableou/rng.hpp"
#include "stableou/serialization.hpp"

namespace stableou {

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// sup_x |F_n(x) - cdf(x)| for the empirical distribution of `values`.
template <class Cdf>
double ks_statistic(std::vector<double> values, Cdf&& cdf) {
    if (values.empty()) throw DomainError("KS statistic needs at least one value");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double F = cdf(values[i]);
        d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
    }
    return d;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// KS statistic against N(0, 1); needs at least 50 values.
inline double ks_normal(const std::vector<double>& values) {
    if (values.size() < 50) throw DomainError("ks_normal needs at least 50 values");
    return ks_statistic(values, normal_cdf);
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

// ---------------------------------------------------------------------------
// Configuration and report

struct McConfig {
    ModelParams theta_true{1.0, Vector::Constant(2, 0.5), StabilityIndex(1.5), 1.0};
    CovariateSpec covariate = CovariateSpec::harmonic(1.0);
    std::string covariate_name = "harmonic";
    std::vector<std::size_t> n_grid{1000, 2000, 4000};
    double T = 1.0;
    double y0 = 0.0;
    std::size_t replications = 500;
    std::uint64_t seed = 1;
    EstimateOptions estimation;
    std::string outputs;  // directory for report files; empty = none

    void validate() const {
        if (n_grid.empty()) throw ValidationError("n_grid", "must not be empty");
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            if (n_grid[i] < 4) throw ValidationError("n_grid", "entries must be >= 4");
            if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ValidationError("n_grid", "must be strictly increasing");
            if (!(static_cast<double>(n_grid[i]) > T)) throw ValidationError("n_grid", "entries must exceed T");
        }
        if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("T", "must be positive");
        if (replications < 1) throw ValidationError("replications", "must be positive");
        if (covariate.q() != theta_true.q()) throw ValidationError("covariate", "dimension must match theta.mu");
        if (!estimation.preliminary.box.contains(theta_true)) throw ValidationError("theta", "outside the parameter box");
        if (estimation.refine_steps < 1) throw ValidationError("refine_steps", "must be >= 1");
    }
};

/// Outcome of one replication.
struct ReplicationRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::optional<FailureReason> failure;
    std::string failure_stage;
    Vector theta0, theta_final, stderr_;
    std::vector<std::string> flags;
};

/// Per-component summary of errors theta_hat - theta_true.
struct ComponentStats {
    std::string component;
    double bias = 0.0, rmse = 0.0;
    double rate_rmse = 0.0, rate_sd = 0.0;  // of rate-normalized errors
    std::optional<double> ks;               // studentized errors vs N(0, 1)
    std::optional<double> coverage;         // of the 95% intervals
};

struct GridPointReport {
    std::size_t n = 0;
    std::size_t successes = 0;
    std::map<FailureReason, std::size_t> failures;
    std::map<std::string, std::size_t> flag_counts;
    std::vector<ComponentStats> theta0;  // preliminary estimator
    std::vector<ComponentStats> final;   // pipeline output (absent for the preliminary pipeline)
    double median_norm_theta0 = 0.0;     // median |phi_n(theta)^{-1}(theta_hat - theta)|
    std::optional<double> median_norm_final;
    std::vector<ReplicationRecord> records;
};

struct McReport {
    std::vector<GridPointReport> grid;
    double wall_clock_seconds = 0.0;  // kept out of the JSON report
};

/// Preliminary rates: sqrt(n) h^{1-1/beta} for (lambda, mu), sqrt(n) for beta, sqrt(n)/log(1/h) for sigma.
inline Vector preliminary_rates(const ModelParams& theta, std::size_t n, double T) {
    const double dn = static_cast<double>(n), h = T / dn, rn = std::sqrt(dn);
    Vector r(static_cast<Eigen::Index>(theta.p()));
    r.head(static_cast<Eigen::Index>(theta.q() + 1)).setConstant(rn * std::pow(h, 1.0 - 1.0 / theta.beta()));
    r(r.size() - 2) = rn;
    r(r.size() - 1) = rn / std::log(1.0 / h);
    return r;
}

inline std::vector<std::string> component_names(std::size_t q) {
    std::vector<std::string> names{"lambda"};
    for (std::size_t k = 1; k <= q; ++k) names.push_back("mu" + std::to_string(k));
    names.emplace_back("beta");
    names.emplace_back("sigma");
    return names;
}

// ---------------------------------------------------------------------------
// Engine

/// One replication: simulate with its own stream and run the pipeline.
inline ReplicationRecord run_replication(const McConfig& cfg, std::size_t n, std::size_t index, TabulatedFamily& family) {
    ReplicationRecord rec;
    rec.index = index;
    rec.seed = hash_seed({cfg.seed, n, index});
    Engine rng(rec.seed);
    const ObservedPath path = simulate_path(cfg.theta_true, cfg.covariate, cfg.y0, n, cfg.T, rng);
    try {
        const EstimationResult res = estimate(path, cfg.estimation, family);
        rec.theta0 = res.prelim.theta0.to_vector();
        rec.flags = res.flags;
        if (cfg.estimation.pipeline != Pipeline::preliminary) {
            rec.theta_final = res.estimate().to_vector();
            rec.stderr_ = res.inference->stderr_;
        }
        if (!rec.theta0.allFinite() || !rec.theta_final.allFinite() || !rec.stderr_.allFinite())
            throw EstimationError(FailureReason::non_finite, "aggregate", "non-finite estimate");
    } catch (const EstimationError& e) {
        rec.failure = e.reason();
        rec.failure_stage = e.stage();
    } catch (const AccuracyError&) {
        rec.failure = FailureReason::accuracy_not_reached;
        rec.failure_stage = "density";
    } catch (const std::exception&) {
        rec.failure = FailureReason::non_finite;
        rec.failure_stage = "unknown";
    }
    return rec;
}

namespace detail {

inline std::vector<ComponentStats> summarize(const std::vector<const ReplicationRecord*>& ok,
                                             Vector ReplicationRecord::*field, const ModelParams& truth,
                                             const Vector& rates, bool studentized) {
    const auto names = component_names(truth.q());
    const Vector t = truth.to_vector();
    std::vector<ComponentStats> out;
    const double m = static_cast<double>(ok.size());
    for (Eigen::Index k = 0; k < t.size(); ++k) {
        ComponentStats s;
        s.component = names[static_cast<std::size_t>(k)];
        if (ok.empty()) {
            out.push_back(s);
            continue;
        }
        double sum = 0, sum2 = 0;
        std::vector<double> z;
        std::size_t covered = 0;
        for (const ReplicationRecord* r : ok) {
            const double e = (r->*field)(k) - t(k);
            sum += e;
            sum2 += e * e;
            if (studentized) {
                const double zk = e / r->stderr_(k);
                z.push_back(zk);
                if (std::abs(zk) <= 1.96) ++covered;
            }
        }
        s.bias = sum / m;
        s.rmse = std::sqrt(sum2 / m);
        s.rate_rmse = rates(k) * s.rmse;
        s.rate_sd = rates(k) * std::sqrt(std::max(0.0, sum2 / m - s.bias * s.bias));
        if (studentized) {
            s.coverage = static_cast<double>(covered) / m;
            if (z.size() >= 50) s.ks = ks_normal(z);
        }
        out.push_back(s);
    }
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

using ProgressCallback = std::function<void(std::size_t n, std::size_t done, std::size_t total)>;

/// Runs every grid point. `threads` = 0 means hardware concurrency.
inline McReport run_experiment(const McConfig& cfg, unsigned threads = 0, const ProgressCallback& progress = {}) {
    cfg.validate();
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const auto start = std::chrono::steady_clock::now();
    McReport report;
    const bool has_final = cfg.estimation.pipeline != Pipeline::preliminary;
    for (std::size_t n : cfg.n_grid) {
        GridPointReport gp;
        gp.n = n;
        gp.records.resize(cfg.replications);
        std::atomic<std::size_t> next{0}, done{0};
        std::mutex progress_mutex;
        auto worker = [&] {
            TabulatedFamily family(8);
            for (std::size_t i = next++; i < cfg.replications; i = next++) {
                gp.records[i] = run_replication(cfg, n, i, family);
                const std::size_t d = ++done;
                if (progress) {
                    std::lock_guard lock(progress_mutex);
                    progress(n, d, cfg.replications);
                }
            }
        };
        const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.replications));
        if (used <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < used; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }

        std::vector<const ReplicationRecord*> ok;
        for (const ReplicationRecord& r : gp.records) {
            if (r.failure) {
                ++gp.failures[*r.failure];
            } else {
                ok.push_back(&r);
                for (const std::string& f : r.flags) ++gp.flag_counts[f];
            }
        }
        gp.successes = ok.size();
        const Vector rates = preliminary_rates(cfg.theta_true, n, cfg.T);
        gp.theta0 = detail::summarize(ok, &ReplicationRecord::theta0, cfg.theta_true, rates, false);
        const Matrix phi = norming_matrix(cfg.theta_true, n, cfg.T).full(cfg.theta_true.q());
        const Eigen::FullPivLU<Matrix> phi_lu(phi);
        const Vector truth = cfg.theta_true.to_vector();
        std::vector<double> norm0, norm1;
        for (const ReplicationRecord* r : ok) {
            norm0.push_back(phi_lu.solve(Vector(r->theta0 - truth)).norm());
            if (has_final) norm1.push_back(phi_lu.solve(Vector(r->theta_final - truth)).norm());
        }
        gp.median_norm_theta0 = detail::median(norm0);
        if (has_final) {
            gp.final = detail::summarize(ok, &ReplicationRecord::theta_final, cfg.theta_true, rates, true);
            gp.median_norm_final = detail::median(norm1);
        }
        report.grid.push_back(std::move(gp));
    }
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline Json config_json(const McConfig& cfg) {
    Json j;
    j["theta"] = params_json(cfg.theta_true);
    j["covariate"] = cfg.covariate_name;
    j["n_grid"] = cfg.n_grid;
    j["T"] = cfg.T;
    j["y0"] = cfg.y0;
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    j["pipeline"] = to_string(cfg.estimation.pipeline);
    j["information"] = to_string(cfg.estimation.information);
    j["refine_steps"] = cfg.estimation.refine_steps;
    if (cfg.estimation.preliminary.fix_r) j["fix_r"] = *cfg.estimation.preliminary.fix_r;
    j["box"] = box_json(cfg.estimation.preliminary.box);
    return j;
}

inline Json stats_json(const std::vector<ComponentStats>& stats) {
    Json a = Json::array();
    for (const ComponentStats& s : stats) {
        Json j = {{"component", s.component}, {"bias", s.bias},         {"rmse", s.rmse},
                  {"rate_rmse", s.rate_rmse}, {"rate_sd", s.rate_sd}};
        j["ks"] = s.ks ? Json(*s.ks) : Json(nullptr);
        j["coverage"] = s.coverage ? Json(*s.coverage) : Json(nullptr);
        a.push_back(j);
    }
    return a;
}

/// The report as JSON; deterministic given the config (no timing information).
inline Json report_json(const McReport& rep, const McConfig& cfg) {
    Json j;
    j["config"] = config_json(cfg);
    j["grid"] = Json::array();
    for (const GridPointReport& gp : rep.grid) {
        Json g;
        g["n"] = gp.n;
        g["replications"] = gp.records.size();
        g["successes"] = gp.successes;
        Json f = Json::object();
        for (FailureReason r : all_failure_reasons) f[to_string(r)] = gp.failures.count(r) ? gp.failures.at(r) : 0;
        g["failures"] = f;
        g["flags"] = gp.flag_counts;
        g["theta0"] = stats_json(gp.theta0);
        g["median_norm_theta0"] = gp.median_norm_theta0;
        if (!gp.final.empty()) {
            g["final"] = stats_json(gp.final);
            g["median_norm_final"] = *gp.median_norm_final;
        }
        j["grid"].push_back(g);
    }
    return j;
}

}  // namespace stableou
