#pragma once

// Preliminary estimators (LAD for the drift, power variation for the tail
// parameters), the one-step estimator, Newton refinement and studentized
// confidence intervals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stableou/errors.hpp"
#include "stableou/likelihood.hpp"
#include "stableou/model.hpp"
#include "stableou/stable_dist.hpp"

namespace stableou {

// ---------------------------------------------------------------------------
// L1 regression

struct L1Fit {
    Vector coef;
    double objective = 0.0;
    int iterations = 0;
};

namespace detail {

inline double median_abs(const Vector& r) {
    std::vector<double> a(static_cast<std::size_t>(r.size()));
    for (Eigen::Index i = 0; i < r.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(r(i));
    auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
    std::nth_element(a.begin(), mid, a.end());
    return *mid;
}

}  // namespace detail

/// Minimizes sum_i |y_i - X_i b| by smoothed IRLS (epsilon 1e-2 -> 1e-10 relative
/// to the residual scale) followed by an exact fit through the best-fitting rows.
inline L1Fit l1_regression(const Matrix& X, const Vector& y) {
    const Eigen::Index n = X.rows(), p = X.cols();
    Vector scale = X.cwiseAbs().colwise().maxCoeff().transpose();
    for (Eigen::Index k = 0; k < p; ++k)
        if (!(scale(k) > 0.0)) throw EstimationError(FailureReason::lad_degenerate_design, "lad", "zero design column");
    const Matrix Xs = X * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Matrix> qr(Xs);
    qr.setThreshold(1e-10);
    if (n < p || qr.rank() < p)
        throw EstimationError(FailureReason::lad_degenerate_design, "lad", "design rank below " + std::to_string(p));

    auto objective = [&](const Vector& b) { return (y - Xs * b).cwiseAbs().sum(); };
    L1Fit fit;
    Vector b = qr.solve(y);
    Vector r = y - Xs * b;
    double obj = r.cwiseAbs().sum();
    double s = detail::median_abs(r);
    if (!(s > 0.0)) s = r.cwiseAbs().maxCoeff();
    if (s > 0.0) {
        for (double eps = 1e-2; eps >= 1e-10 * 0.999; eps *= 0.1) {
            const double e2 = (eps * s) * (eps * s);
            for (int it = 0; it < 50; ++it) {
                const Vector w = (r.array().square() + e2).rsqrt().sqrt().matrix();
                const Vector bn = (w.asDiagonal() * Xs).colPivHouseholderQr().solve(w.cwiseProduct(y));
                const Vector rn = y - Xs * bn;
                const double on = rn.cwiseAbs().sum();
                ++fit.iterations;
                const bool small = std::abs(obj - on) <= 1e-14 * std::max(obj, 1e-300);
                if (on <= obj) {
                    b = bn;
                    r = rn;
                    obj = on;
                }
                if (small) break;
            }
        }
        // exact fit through the p rows with smallest residuals that span the design
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(),
                  [&](Eigen::Index i, Eigen::Index j) { return std::abs(r(i)) < std::abs(r(j)); });
        Matrix A(0, p);
        Vector rhs(0);
        for (Eigen::Index i : order) {
            Matrix A2(A.rows() + 1, p);
            A2 << A, Xs.row(i);
            if (Eigen::FullPivLU<Matrix>(A2).rank() == A2.rows()) {
                A = A2;
                rhs.conservativeResize(rhs.size() + 1);
                rhs(rhs.size() - 1) = y(i);
                if (A.rows() == p) break;
            }
        }
        if (A.rows() == p) {
            const Vector bv = A.fullPivLu().solve(rhs);
            const double ov = objective(bv);
            if (ov <= obj) {
                b = bv;
                obj = ov;
            }
        }
    }
    fit.coef = scale.cwiseInverse().asDiagonal() * b;
    fit.objective = obj;
    return fit;
}

// ---------------------------------------------------------------------------
// LAD for (lambda, mu)

struct LadResult {
    double lambda = 0.0;
    Vector mu;
    double a = 1.0;  // e^{-lambda h}
    double objective = 0.0;
    int iterations = 0;
    bool projected = false;  // a <= 0 at the optimum, replaced by the box minimum
};

/// Minimizes sum_j |Y_j - a Y_{j-1} - mu . int_j X ds| over (a, mu), then lambda = -log(a) / h.
inline LadResult lad_fit(const ObservedPath& path, const ParamBox& box = {}) {
    const auto n = static_cast<Eigen::Index>(path.n()), q = static_cast<Eigen::Index>(path.q());
    if (n < q + 2) throw EstimationError(FailureReason::lad_degenerate_design, "lad", "need n >= q + 2");
    const Vector& y = path.y();
    Matrix X(n, q + 1);
    X.col(0) = y.head(n);
    X.rightCols(q) = path.x_int();
    const L1Fit fit = l1_regression(X, y.tail(n));
    LadResult r;
    r.a = fit.coef(0);
    r.mu = fit.coef.tail(q);
    r.objective = fit.objective;
    r.iterations = fit.iterations;
    const double h = path.h();
    if (!(r.a > 0.0)) {
        r.projected = true;
        r.a = box.a_min(h);
        const L1Fit sub = l1_regression(path.x_int(), y.tail(n) - r.a * y.head(n));
        r.mu = sub.coef;
        r.objective = sub.objective;
        r.iterations += sub.iterations;
    }
    r.lambda = -std::log(r.a) / h;
    return r;
}

// ---------------------------------------------------------------------------
// Power variation for (beta, sigma)

struct PowerVariation {
    double v1 = 0.0;  // sum_{j>=2} |dY_j - dY_{j-1}|^r
    double v2 = 0.0;  // sum_{j>=4} |dY_j - dY_{j-1} + dY_{j-2} - dY_{j-3}|^r
};

inline PowerVariation power_variation(const ObservedPath& path, double r) {
    if (!(r > 0.0 && r < 2.0)) throw DomainError("power variation order r must lie in (0, 2)");
    const Vector& y = path.y();
    const auto n = static_cast<Eigen::Index>(path.n());
    PowerVariation pv;
    for (Eigen::Index j = 2; j <= n; ++j) {
        const double d = (y(j) - y(j - 1)) - (y(j - 1) - y(j - 2));
        pv.v1 += std::pow(std::abs(d), r);
        if (j >= 4) {
            const double d2 = (y(j) - y(j - 1)) - (y(j - 1) - y(j - 2)) + (y(j - 2) - y(j - 3)) - (y(j - 3) - y(j - 4));
            pv.v2 += std::pow(std::abs(d2), r);
        }
    }
    return pv;
}

/// Open interval of admissible power-variation orders at stability index beta.
inline std::pair<double, double> r_window(double beta) {
    return {std::abs(beta - 1.0) / (2.0 * std::min(beta, 1.0)), beta / 2.0};
}

inline constexpr double beta_floor = 2.0 / 3.0 + 1e-6;
inline constexpr double beta_ceiling = 2.0 - 1e-6;

struct PvResult {
    double beta = 0.0, sigma = 0.0;
    double ratio = 0.0;  // V'' / V'
    bool beta_clamped = false;
};

/// Order used to check r < beta: when r >= beta the ratio tends to 2 and the
/// estimate at r itself tends to r.
inline constexpr double r_guard = 0.25;

namespace detail {

inline PowerVariation checked_power_variation(const ObservedPath& path, double r) {
    const PowerVariation pv = power_variation(path, r);
    const double ratio = pv.v2 / pv.v1;
    if (!(pv.v1 > 0.0 && pv.v2 > 0.0) || !(ratio > 1.0) || !std::isfinite(ratio))
        throw EstimationError(FailureReason::pv_ratio_out_of_range, "power_variation",
                              "V''/V' = " + std::to_string(ratio));
    return pv;
}

}  // namespace detail

/// beta = r log 2 / log(V''/V'), sigma = T^{-1/beta} { n^{r/beta - 1} V' / m(r, beta) }^{1/r}.
inline PvResult pv_fit(const ObservedPath& path, double r) {
    const PowerVariation pv = detail::checked_power_variation(path, r);
    PvResult out;
    out.ratio = pv.v2 / pv.v1;
    if (r > r_guard) {
        const PowerVariation g = detail::checked_power_variation(path, r_guard);
        const double bg = r_guard * std::numbers::ln2 / std::log(g.v2 / g.v1);
        if (r >= bg)
            throw EstimationError(FailureReason::r_outside_beta_window, "power_variation",
                                  "r = " + std::to_string(r) + ", beta at r = 0.25: " + std::to_string(bg));
    }
    double b = r * std::numbers::ln2 / std::log(out.ratio);
    if (b < beta_floor || b > beta_ceiling) {
        out.beta_clamped = true;
        b = std::clamp(b, beta_floor, beta_ceiling);
    }
    if (r >= b)
        throw EstimationError(FailureReason::r_outside_beta_window, "power_variation",
                              "r = " + std::to_string(r) + ", beta = " + std::to_string(b));
    out.beta = b;
    const double n = static_cast<double>(path.n());
    const double m = frac_abs_moment(r, StabilityIndex(b));
    out.sigma = std::pow(path.T(), -1.0 / b) * std::pow(std::pow(n, r / b - 1.0) * pv.v1 / m, 1.0 / r);
    return out;
}

// ---------------------------------------------------------------------------
// Preliminary estimate

struct PreliminaryOptions {
    std::optional<double> fix_r;  // skip the pilot and use this order
    double r_pilot = 0.25;
    ParamBox box;
};

struct PreliminaryEstimate {
    ModelParams theta0;
    double r_used = 0.0;
    double beta_pilot = 0.0;
    double lad_objective = 0.0;
    double pv_ratio = 0.0;
    int iterations = 0;
    std::vector<std::string> flags;
};

inline PreliminaryEstimate initial_estimate(const ObservedPath& path, const PreliminaryOptions& opts = {}) {
    double r;
    double beta_pilot = 0.0;
    if (opts.fix_r) {
        r = *opts.fix_r;
        if (!(r > 0.0 && r < 2.0)) throw DomainError("fixed r must lie in (0, 2)");
    } else {
        beta_pilot = pv_fit(path, opts.r_pilot).beta;
        auto [lo, hi] = r_window(beta_pilot);
        if (!(opts.r_pilot > lo && opts.r_pilot < hi)) {
            beta_pilot = pv_fit(path, 0.5 * (lo + hi)).beta;
            std::tie(lo, hi) = r_window(beta_pilot);
        }
        r = 0.5 * (lo + hi);
        if (!(r > lo && r < hi)) throw EstimationError(FailureReason::r_outside_beta_window, "r_selection", "empty window");
    }
    const PvResult pv = pv_fit(path, r);
    const LadResult lad = lad_fit(path, opts.box);

    std::vector<std::string> flags;
    if (pv.beta_clamped) flags.emplace_back("beta_clamped");
    if (lad.projected) flags.emplace_back("lad_projected");
    Vector v(static_cast<Eigen::Index>(path.q() + 3));
    v(0) = lad.lambda;
    v.segment(1, static_cast<Eigen::Index>(path.q())) = lad.mu;
    v(v.size() - 2) = pv.beta;
    v(v.size() - 1) = pv.sigma;
    if (!v.allFinite()) throw EstimationError(FailureReason::non_finite, "preliminary", "non-finite estimate");
    bool clamped = false;
    v = opts.box.clamp(v, clamped);
    if (clamped) flags.emplace_back("theta0_clamped");
    return {ModelParams::from_vector(v), r, beta_pilot, lad.objective, pv.ratio, lad.iterations, std::move(flags)};
}

// ---------------------------------------------------------------------------
// One-step and refinement

/// Curvature used in the Newton step: the observed information I_n(theta) or the
/// plug-in limit I(theta) (Fisher scoring).
enum class StepInformation { observed, fisher };

inline const char* to_string(StepInformation s) { return s == StepInformation::observed ? "observed" : "fisher"; }

struct OneStepResult {
    ModelParams theta1;
    double condition_number = 0.0;  // of the information matrix actually used
    bool fisher_scoring = false;
    bool clamped = false;
};

namespace detail {

inline double condition_number(const Matrix& m) {
    const Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    return sv(0) / sv(sv.size() - 1);
}

inline bool positive_definite(const Matrix& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues()(0) > 0.0;
}

}  // namespace detail

/// theta1 = theta0 + phi_n I^{-1} Delta_n, with I = I_n(theta0) (the Newton step,
/// falling back to Fisher scoring when I_n is singular) or I = I(theta0).
template <class Family>
OneStepResult one_step(const ObservedPath& path, const ModelParams& theta0, Family& family, const ParamBox& box = {},
                       StepInformation info = StepInformation::observed) {
    const LikelihoodValue v = evaluate(theta0, path, family, info == StepInformation::observed ? 2 : 1);
    if (!std::isfinite(v.loglik) || !v.score.allFinite() || (v.hessian.size() && !v.hessian.allFinite()))
        throw EstimationError(FailureReason::non_finite, "one_step", "likelihood not finite at theta0");
    const Matrix phi = norming_matrix(theta0, path.n(), path.T()).full(theta0.q());
    const Vector delta = phi.transpose() * v.score;

    OneStepResult out{theta0};
    Matrix I;
    if (info == StepInformation::observed) {
        I = -phi.transpose() * v.hessian * phi;
        I = 0.5 * (I + I.transpose());
        out.condition_number = detail::condition_number(I);
    }
    if (info == StepInformation::fisher || !(std::isfinite(out.condition_number) && out.condition_number < 1e14)) {
        out.fisher_scoring = true;
        I = fisher_info(theta0, path, family).full();
        out.condition_number = detail::condition_number(I);
        if (!(std::isfinite(out.condition_number) && out.condition_number < 1e14))
            throw EstimationError(info == StepInformation::fisher ? FailureReason::singular_information
                                                                  : FailureReason::singular_hessian,
                                  "one_step", "information matrix singular");
    }
    const Vector step = I.fullPivLu().solve(delta);
    Vector t1 = theta0.to_vector() + phi * step;
    if (!t1.allFinite()) throw EstimationError(FailureReason::non_finite, "one_step", "non-finite step");
    t1 = box.clamp(t1, out.clamped);
    out.theta1 = ModelParams::from_vector(t1);
    return out;
}

struct RefineResult {
    ModelParams theta;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;  // |phi_n^T score| at the returned point
};

/// Up to k Newton steps with step halving, stopping once |phi_n^T score| < tol.
/// Steps use I_n when it is positive definite and Fisher scoring otherwise.
template <class Family>
RefineResult newton_refine(const ObservedPath& path, const ModelParams& theta1, int k, Family& family,
                           const ParamBox& box = {}, double tol = 1e-8) {
    if (k < 1) throw DomainError("refinement needs k >= 1");
    RefineResult out{theta1};
    ModelParams cur = theta1;
    LikelihoodValue v = evaluate(cur, path, family, 2);
    for (int it = 0;; ++it) {
        if (!std::isfinite(v.loglik) || !v.score.allFinite() || !v.hessian.allFinite())
            throw EstimationError(FailureReason::non_finite, "refine", "likelihood not finite");
        const Matrix phi = norming_matrix(cur, path.n(), path.T()).full(cur.q());
        const Vector delta = phi.transpose() * v.score;
        out.gradient_norm = delta.norm();
        out.theta = cur;
        out.iterations = it;
        if (out.gradient_norm < tol) {
            out.converged = true;
            return out;
        }
        if (it == k) return out;
        Matrix I = -phi.transpose() * v.hessian * phi;
        I = 0.5 * (I + I.transpose());
        if (!detail::positive_definite(I)) I = fisher_info(cur, path, family).full();
        Vector step = I.fullPivLu().solve(delta);
        if (!step.allFinite()) throw EstimationError(FailureReason::singular_hessian, "refine", "singular information");
        const double floor = v.loglik - 1e-10 * std::max(1.0, std::abs(v.loglik));
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
            bool clamped = false;
            const Vector cand = box.clamp(Vector(cur.to_vector() + phi * step), clamped);
            const ModelParams next = ModelParams::from_vector(cand);
            if (evaluate(next, path, family, 0).loglik >= floor) {
                cur = next;
                v = evaluate(cur, path, family, 2);
                accepted = true;
                break;
            }
        }
        if (!accepted) return out;
    }
}

// ---------------------------------------------------------------------------
// Studentization

struct Studentized {
    FisherInfo info_hat;
    NormingMatrix norming;
    Vector stderr_;
    Matrix covariance;  // phi_n I^{-1} phi_n^T
    std::vector<std::pair<double, double>> ci95;
};

/// Plug-in standard errors: Cov(theta_hat) ~ phi_n(theta_hat) I(theta_hat)^{-1} phi_n(theta_hat)^T.
template <class Family>
Studentized studentize(const ObservedPath& path, const ModelParams& theta_hat, Family& family) {
    Studentized s{fisher_info(theta_hat, path, family), norming_matrix(theta_hat, path.n(), path.T()), {}, {}, {}};
    const Matrix F = s.info_hat.full();
    const Eigen::SelfAdjointEigenSolver<Matrix> es(F);
    const auto& ev = es.eigenvalues();
    if (!(ev(0) > 1e-12 * std::abs(ev(ev.size() - 1))))
        throw EstimationError(FailureReason::singular_information, "studentize", "plug-in information not positive definite");
    const Matrix phi = s.norming.full(theta_hat.q());
    s.covariance = phi * es.operatorInverseSqrt() * es.operatorInverseSqrt() * phi.transpose();
    s.stderr_ = s.covariance.diagonal().cwiseSqrt();
    const Vector th = theta_hat.to_vector();
    for (Eigen::Index k = 0; k < th.size(); ++k) s.ci95.emplace_back(th(k) - 1.96 * s.stderr_(k), th(k) + 1.96 * s.stderr_(k));
    return s;
}

// ---------------------------------------------------------------------------
// Full pipeline

enum class Pipeline { preliminary, one_step, refined };

inline const char* to_string(Pipeline p) {
    switch (p) {
    case Pipeline::preliminary: return "prelim";
    case Pipeline::one_step: return "one-step";
    case Pipeline::refined: return "refined";
    }
    return "unknown";
}

struct EstimateOptions {
    Pipeline pipeline = Pipeline::one_step;
    StepInformation information = StepInformation::fisher;
    PreliminaryOptions preliminary;
    int refine_steps = 20;
};

struct EstimationResult {
    PreliminaryEstimate prelim;
    std::optional<ModelParams> theta1;
    std::optional<ModelParams> theta_mle;
    std::optional<Studentized> inference;  // at theta_mle if refined, else theta1
    double condition_number = 0.0;
    double refine_gradient_norm = 0.0;
    int refine_iterations = 0;
    std::vector<std::string> flags;

    /// The final point estimate of the chosen pipeline.
    const ModelParams& estimate() const {
        if (theta_mle) return *theta_mle;
        if (theta1) return *theta1;
        return prelim.theta0;
    }
};

template <class Family>
EstimationResult estimate(const ObservedPath& path, const EstimateOptions& opts, Family& family) {
    EstimationResult res{initial_estimate(path, opts.preliminary), {}, {}, {}, 0.0, 0.0, 0, {}};
    res.flags = res.prelim.flags;
    if (opts.pipeline == Pipeline::preliminary) return res;
    const ParamBox& box = opts.preliminary.box;
    const OneStepResult os = one_step(path, res.prelim.theta0, family, box, opts.information);
    res.theta1 = os.theta1;
    res.condition_number = os.condition_number;
    if (os.fisher_scoring && opts.information == StepInformation::observed)
        res.flags.emplace_back("fisher_scoring_fallback");
    if (os.clamped) res.flags.emplace_back("theta1_clamped");
    const ModelParams* final_theta = &*res.theta1;
    if (opts.pipeline == Pipeline::refined) {
        const RefineResult rr = newton_refine(path, *res.theta1, opts.refine_steps, family, box);
        res.theta_mle = rr.theta;
        res.refine_iterations = rr.iterations;
        res.refine_gradient_norm = rr.gradient_norm;
        if (!rr.converged) res.flags.emplace_back("refine_not_converged");
        final_theta = &*res.theta_mle;
    }
    res.inference = studentize(path, *final_theta, family);
    return res;
}

inline EstimationResult estimate(const ObservedPath& path, const EstimateOptions& opts = {}) {
    return estimate(path, opts, detail::default_family());
}

}  // namespace stableou
