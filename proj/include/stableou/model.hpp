#pragma once

// OU regression model dY = (mu.X_t - lambda Y)dt + sigma dJ_t observed on the
// regular grid t_j = j T / n: parameters, covariates, paths, residuals, exact
// simulation, and the time-rescaling transform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/bernoulli.hpp>

#include "stableou/detail/quadrature.hpp"
#include "stableou/errors.hpp"
#include "stableou/rng.hpp"
#include "stableou/stable_dist.hpp"

namespace stableou {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// eta(x) = (1 - e^{-x}) / x and E(x) = log eta(x) with two derivatives.

/// E(x), E'(x), E''(x) where E = log eta.
struct LogEta {
    double value, d1, d2;
};

namespace detail {

// log(sinh z / z) and its first two derivatives; even in z.
inline LogEta log_sinhc(double z) {
    const double a = std::abs(z);
    if (a < 0.5) {
        // sum_n 4^n B_2n z^2n / (2n (2n)!)
        double v = 0, d1 = 0, d2 = 0, zp = 1.0;  // zp = z^{2n-2}
        const double z2 = z * z;
        double fact = 1.0, four = 1.0;
        for (int n = 1; n <= 12; ++n) {
            fact *= (2.0 * n - 1.0) * (2.0 * n);
            four *= 4.0;
            const double c = four * boost::math::bernoulli_b2n<double>(n) / fact;
            d2 += c * (2.0 * n - 1.0) * zp;
            d1 += c * zp * z;
            v += c * zp * z2 / (2.0 * n);
            zp *= z2;
        }
        return {v, d1, d2};
    }
    const double s = z < 0 ? -1.0 : 1.0;
    const double v = a < 20.0 ? std::log(std::sinh(a) / a)
                              : a + std::log1p(-std::exp(-2.0 * a)) - std::numbers::ln2 - std::log(a);
    const double sh = a < 350.0 ? std::sinh(a) : std::numeric_limits<double>::infinity();
    return {v, s * (1.0 / std::tanh(a) - 1.0 / a), 1.0 / (a * a) - 1.0 / (sh * sh)};
}

}  // namespace detail

inline LogEta log_eta(double x) {
    // eta(x) = e^{-x/2} sinh(x/2) / (x/2)
    const LogEta l = detail::log_sinhc(0.5 * x);
    return {-0.5 * x + l.value, -0.5 + 0.5 * l.d1, 0.25 * l.d2};
}

/// eta(x) = (1 - e^{-x}) / x with eta(0) = 1.
inline double eta(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - x / 2.0 + x * x / 6.0;
    return -std::expm1(-x) / x;
}

// ---------------------------------------------------------------------------
// Parameters

class ModelParams {
public:
    double lambda = 0.0;
    Vector mu;
    double sigma = 1.0;

    ModelParams(double lambda_, Vector mu_, StabilityIndex beta_, double sigma_)
        : lambda(lambda_), mu(std::move(mu_)), sigma(sigma_), beta_(beta_) {
        validate();
    }

    double beta() const { return beta_.value(); }
    StabilityIndex stability() const { return beta_; }
    void set_beta(double b) { beta_ = StabilityIndex(b); }

    std::size_t q() const { return static_cast<std::size_t>(mu.size()); }
    /// Number of scalar parameters, q + 3.
    std::size_t p() const { return q() + 3; }

    /// Throws DomainError on sigma <= 0, non-finite entries, or q = 0.
    void validate() const {
        if (mu.size() < 1) throw DomainError("mu must have at least one component");
        if (!std::isfinite(lambda) || !mu.allFinite()) throw DomainError("lambda and mu must be finite");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive and finite");
    }

    /// Stacked (lambda, mu_1..mu_q, beta, sigma).
    Vector to_vector() const {
        Vector v(p());
        v(0) = lambda;
        v.segment(1, mu.size()) = mu;
        v(p() - 2) = beta();
        v(p() - 1) = sigma;
        return v;
    }

    static ModelParams from_vector(const Vector& v) {
        if (v.size() < 4) throw DomainError("parameter vector needs at least 4 entries");
        const auto q = v.size() - 3;
        return ModelParams(v(0), v.segment(1, q), StabilityIndex(v(q + 1)), v(q + 2));
    }

    friend bool operator==(const ModelParams& a, const ModelParams& b) {
        return a.lambda == b.lambda && a.mu == b.mu && a.beta() == b.beta() && a.sigma == b.sigma;
    }

private:
    StabilityIndex beta_;
};

/// Bounded convex parameter box; mu bounds apply to every component.
struct ParamBox {
    double lambda_lo = -100.0, lambda_hi = 100.0;
    double mu_lo = -1e3, mu_hi = 1e3;
    double beta_lo = 0.5, beta_hi = 1.99;
    double sigma_lo = 1e-6, sigma_hi = 1e6;

    void validate() const {
        if (!(lambda_lo < lambda_hi)) throw ValidationError("box.lambda", "lower bound must be below upper bound");
        if (!(mu_lo < mu_hi)) throw ValidationError("box.mu", "lower bound must be below upper bound");
        if (!(0.0 < beta_lo && beta_lo < beta_hi && beta_hi < 2.0))
            throw ValidationError("box.beta", "need 0 < lower < upper < 2");
        if (!(0.0 < sigma_lo && sigma_lo < sigma_hi)) throw ValidationError("box.sigma", "need 0 < lower < upper");
    }

    bool contains(const ModelParams& t) const {
        return t.lambda >= lambda_lo && t.lambda <= lambda_hi && t.mu.minCoeff() >= mu_lo &&
               t.mu.maxCoeff() <= mu_hi && t.beta() >= beta_lo && t.beta() <= beta_hi && t.sigma >= sigma_lo &&
               t.sigma <= sigma_hi;
    }

    /// Nearest point of the box; sets `clamped` when anything moved.
    ModelParams clamp(const ModelParams& t, bool& clamped) const {
        Vector v = clamp(t.to_vector(), clamped);
        return ModelParams::from_vector(v);
    }

    Vector clamp(const Vector& v, bool& clamped) const {
        Vector out = v;
        const auto p = v.size();
        auto fix = [&](Eigen::Index i, double lo, double hi) {
            double c = std::isnan(out(i)) ? lo : std::clamp(out(i), lo, hi);
            if (c != out(i)) clamped = true;
            out(i) = c;
        };
        fix(0, lambda_lo, lambda_hi);
        for (Eigen::Index i = 1; i < p - 2; ++i) fix(i, mu_lo, mu_hi);
        fix(p - 2, beta_lo, beta_hi);
        fix(p - 1, sigma_lo, sigma_hi);
        return out;
    }

    /// Smallest admissible autoregressive factor e^{-lambda h}.
    double a_min(double h) const { return std::exp(-lambda_hi * h); }
};

/// theta_T = (T lambda, T mu, beta, T^{1/beta} sigma): parameters of the same process on [0, 1].
inline ModelParams rescale_params(const ModelParams& theta, double T) {
    if (!(T > 0.0)) throw DomainError("time horizon must be positive");
    return ModelParams(T * theta.lambda, T * theta.mu, theta.stability(), std::pow(T, 1.0 / theta.beta()) * theta.sigma);
}

// ---------------------------------------------------------------------------
// Covariates

enum class Interpolation { linear, step };

/// Deterministic regressor X on [0, T]: either an analytic function or values
/// tabulated on a fine grid.
class CovariateSpec {
public:
    enum class Kind { analytic, tabulated };
    using Function = std::function<void(double t, double* out)>;

    static CovariateSpec analytic(std::size_t q, Function fn, std::string name = "analytic") {
        if (q < 1) throw ValidationError("covariate", "dimension must be at least 1");
        CovariateSpec c;
        c.kind_ = Kind::analytic;
        c.q_ = q;
        c.fn_ = std::move(fn);
        c.name_ = std::move(name);
        return c;
    }

    /// X_t = (1, ..., 1) in dimension q.
    static CovariateSpec constant(std::size_t q = 1) {
        return analytic(q, [q](double, double* out) { std::fill(out, out + q, 1.0); }, "constant");
    }

    /// X_t = (1, cos(2 pi t / T)).
    static CovariateSpec harmonic(double T) {
        const double w = 2.0 * std::numbers::pi / T;
        return analytic(2, [w](double t, double* out) { out[0] = 1.0; out[1] = std::cos(w * t); }, "harmonic");
    }

    /// Values on a sorted grid `times` (rows of `values`), right-continuous step or linear in between.
    static CovariateSpec tabulated(Vector times, Matrix values, Interpolation interp) {
        if (times.size() < 2 || values.rows() != times.size() || values.cols() < 1)
            throw ValidationError("covariate", "tabulated covariate needs >= 2 rows and matching value rows");
        for (Eigen::Index i = 1; i < times.size(); ++i)
            if (!(times(i) > times(i - 1))) throw ValidationError("covariate", "grid times must be strictly increasing");
        if (!values.allFinite()) throw ValidationError("covariate", "values must be finite");
        CovariateSpec c;
        c.kind_ = Kind::tabulated;
        c.q_ = static_cast<std::size_t>(values.cols());
        c.times_ = std::move(times);
        c.values_ = std::move(values);
        c.interp_ = interp;
        c.name_ = "tabulated";
        return c;
    }

    Kind kind() const { return kind_; }
    std::size_t q() const { return q_; }
    const std::string& name() const { return name_; }
    Interpolation interpolation() const { return interp_; }
    const Vector& times() const { return times_; }
    const Matrix& values() const { return values_; }

    void value(double t, double* out) const {
        if (kind_ == Kind::analytic) {
            fn_(t, out);
            return;
        }
        const auto N = times_.size();
        if (t <= times_(0)) {
            for (std::size_t k = 0; k < q_; ++k) out[k] = values_(0, static_cast<Eigen::Index>(k));
            return;
        }
        if (t >= times_(N - 1)) {
            for (std::size_t k = 0; k < q_; ++k) out[k] = values_(N - 1, static_cast<Eigen::Index>(k));
            return;
        }
        const auto i = cell(t);
        const double w = interp_ == Interpolation::step ? 0.0 : (t - times_(i)) / (times_(i + 1) - times_(i));
        for (std::size_t k = 0; k < q_; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            out[k] = (1.0 - w) * values_(i, kk) + w * values_(i + 1, kk);
        }
    }

    Vector value(double t) const {
        Vector v(static_cast<Eigen::Index>(q_));
        value(t, v.data());
        return v;
    }

    /// X^T_t = X_{tT}, the covariate on the rescaled clock.
    CovariateSpec rescaled(double T) const {
        if (kind_ == Kind::tabulated) return tabulated(times_ / T, values_, interp_);
        auto fn = fn_;
        return analytic(q_, [fn, T](double t, double* out) { fn(t * T, out); }, name_);
    }

    /// Quadrature nodes on [a, b]: GL4 on `subdiv` equal pieces for analytic
    /// covariates, GL4 on every fine-grid cell piece for tabulated ones.
    template <class Emit>
    void interval_nodes(double a, double b, int subdiv, Emit&& emit) const {
        auto gl4 = [&](double lo, double hi) {
            const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
            for (std::size_t i = 0; i < 4; ++i) emit(c + r * detail::gl4_nodes[i], r * detail::gl4_weights[i]);
        };
        if (kind_ == Kind::analytic) {
            for (int i = 0; i < subdiv; ++i) gl4(a + (b - a) * i / subdiv, a + (b - a) * (i + 1) / subdiv);
            return;
        }
        double lo = a;
        while (lo < b) {
            double hi = b;
            if (lo >= times_(0) && lo < times_(times_.size() - 1)) hi = std::min(b, times_(cell(lo) + 1));
            else if (lo < times_(0)) hi = std::min(b, times_(0));
            if (hi <= lo) hi = b;
            gl4(lo, hi);
            lo = hi;
        }
    }

private:
    Eigen::Index cell(double t) const {
        const double* begin = times_.data();
        const double* it = std::upper_bound(begin, begin + times_.size(), t);
        return std::clamp<Eigen::Index>(it - begin - 1, 0, times_.size() - 2);
    }

    Kind kind_ = Kind::analytic;
    std::size_t q_ = 0;
    Function fn_;
    std::string name_;
    Vector times_;
    Matrix values_;
    Interpolation interp_ = Interpolation::linear;
};

// ---------------------------------------------------------------------------
// Observed path

/// How the covariate information was supplied.
enum class CovariateForm { full_trajectory, integrals_only };

/// Covariate-side data shared by a path and its copies: interval integrals,
/// left-endpoint values, and quadrature nodes for the weighted integrals.
struct PathDesign {
    double T = 1.0;
    std::size_t n = 0, q = 0;
    CovariateForm form = CovariateForm::integrals_only;
    std::optional<CovariateSpec> covariate;
    Matrix x_int;   // n x q, row j-1 holds the integral over (t_{j-1}, t_j]
    Matrix x_left;  // n x q, X at t_{j-1} (x_int / h when only integrals are known)
    // Quadrature nodes, interval j-1 owns [start[j-1], start[j]).
    std::vector<std::size_t> start;
    std::vector<double> tau, weight;  // tau = t_j - s
    Matrix x_nodes;                    // nodes x q
};

/// The default number of GL4 pieces per observation interval for analytic covariates.
inline constexpr int default_subdivision = 10;

class ObservedPath {
public:
    /// Path with the full covariate trajectory.
    static ObservedPath with_covariate(double T, Vector y, const CovariateSpec& cov, int subdiv = default_subdivision) {
        auto n = check_grid(T, y);
        auto d = std::make_shared<PathDesign>();
        d->T = T;
        d->n = n;
        d->q = cov.q();
        d->form = CovariateForm::full_trajectory;
        d->covariate = cov;
        if (cov.kind() == CovariateSpec::Kind::tabulated) {
            if (cov.times()(0) > 1e-12 * T || cov.times()(cov.times().size() - 1) < T * (1 - 1e-12))
                throw ValidationError("covariate", "tabulated grid must cover [0, T]");
            if (cov.times().size() - 1 < static_cast<Eigen::Index>(10 * n))
                throw ValidationError("covariate", "tabulated grid needs at least 10 n cells");
        }
        const double h = T / static_cast<double>(n);
        const auto q = static_cast<Eigen::Index>(cov.q());
        d->x_int = Matrix::Zero(static_cast<Eigen::Index>(n), q);
        d->x_left.resize(static_cast<Eigen::Index>(n), q);
        std::vector<double> xs;
        std::vector<double> buf(cov.q());
        d->start.push_back(0);
        for (std::size_t j = 1; j <= n; ++j) {
            const double a = (j - 1) * h, b = (j == n) ? T : j * h;
            const auto r = static_cast<Eigen::Index>(j - 1);
            cov.interval_nodes(a, b, subdiv, [&](double s, double w) {
                cov.value(s, buf.data());
                d->tau.push_back(b - s);
                d->weight.push_back(w);
                for (Eigen::Index k = 0; k < q; ++k) {
                    xs.push_back(buf[static_cast<std::size_t>(k)]);
                    d->x_int(r, k) += w * buf[static_cast<std::size_t>(k)];
                }
            });
            d->start.push_back(d->tau.size());
            cov.value(a, buf.data());
            for (Eigen::Index k = 0; k < q; ++k) d->x_left(r, k) = buf[static_cast<std::size_t>(k)];
        }
        d->x_nodes = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            xs.data(), static_cast<Eigen::Index>(d->tau.size()), q);
        return ObservedPath(std::move(y), std::move(d));
    }

    /// Path with only the interval integrals of the covariate (n x q).
    static ObservedPath with_integrals(double T, Vector y, Matrix x_int) {
        auto n = check_grid(T, y);
        if (static_cast<std::size_t>(x_int.rows()) != n || x_int.cols() < 1)
            throw ValidationError("x_int", "need n rows and at least one column");
        if (!x_int.allFinite()) throw ValidationError("x_int", "values must be finite");
        auto d = std::make_shared<PathDesign>();
        d->T = T;
        d->n = n;
        d->q = static_cast<std::size_t>(x_int.cols());
        d->form = CovariateForm::integrals_only;
        d->x_left = x_int / (T / static_cast<double>(n));
        d->x_int = std::move(x_int);
        return ObservedPath(std::move(y), std::move(d));
    }

    double T() const { return design_->T; }
    std::size_t n() const { return design_->n; }
    std::size_t q() const { return design_->q; }
    double h() const { return design_->T / static_cast<double>(design_->n); }
    const Vector& y() const { return y_; }
    const Matrix& x_int() const { return design_->x_int; }
    const Matrix& x_left() const { return design_->x_left; }
    CovariateForm form() const { return design_->form; }
    const std::optional<CovariateSpec>& covariate() const { return design_->covariate; }
    const PathDesign& design() const { return *design_; }

    /// Same design, different observations.
    ObservedPath with_y(Vector y) const {
        if (static_cast<std::size_t>(y.size()) != n() + 1) throw ValidationError("y", "length must be n + 1");
        if (!y.allFinite()) throw ValidationError("y", "values must be finite");
        return ObservedPath(std::move(y), design_);
    }

    /// Smallest eigenvalue of the Riemann-sum Gram matrix sum_j h X_{t_{j-1}} X_{t_{j-1}}^T.
    double gram_min_eigenvalue() const {
        const Matrix G = h() * (x_left().transpose() * x_left());
        return Eigen::SelfAdjointEigenSolver<Matrix>(G).eigenvalues()(0);
    }

    /// The observations on the clock t / T, with X^T_t = X_{tT}.
    ObservedPath rescaled() const {
        const double T = design_->T;
        auto d = std::make_shared<PathDesign>(*design_);
        d->T = 1.0;
        d->x_int /= T;
        if (d->covariate) d->covariate = d->covariate->rescaled(T);
        for (double& t : d->tau) t /= T;
        for (double& w : d->weight) w /= T;
        if (d->form == CovariateForm::integrals_only) d->x_left = d->x_int * static_cast<double>(d->n);
        return ObservedPath(y_, std::move(d));
    }

private:
    ObservedPath(Vector y, std::shared_ptr<const PathDesign> d) : y_(std::move(y)), design_(std::move(d)) {}

    static std::size_t check_grid(double T, const Vector& y) {
        if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("T", "must be positive and finite");
        if (y.size() < 5) throw ValidationError("n", "need n >= 4 observation intervals");
        if (!y.allFinite()) throw ValidationError("y", "values must be finite");
        return static_cast<std::size_t>(y.size() - 1);
    }

    Vector y_;
    std::shared_ptr<const PathDesign> design_;
};

inline ObservedPath rescale_path(const ObservedPath& path) { return path.rescaled(); }

// ---------------------------------------------------------------------------
// Weighted covariate integrals

/// Z_j(lambda) = int_j e^{-lambda (t_j - s)} X_s ds (= h zeta_j) and its first two
/// lambda-derivatives, as n x q matrices (derivatives only up to `order`).
struct ZetaMoments {
    Matrix Z, Z1, Z2;
};

inline ZetaMoments zeta_moments(const ObservedPath& path, double lambda, int order = 0) {
    const PathDesign& d = path.design();
    const auto n = static_cast<Eigen::Index>(d.n), q = static_cast<Eigen::Index>(d.q);
    ZetaMoments m;
    if (d.form == CovariateForm::integrals_only) {
        const double h = path.h(), x = lambda * h;
        const LogEta e = log_eta(x);
        const double et = std::exp(e.value);
        m.Z = et * d.x_int;
        if (order >= 1) m.Z1 = h * et * e.d1 * d.x_int;
        if (order >= 2) m.Z2 = h * h * et * (e.d2 + e.d1 * e.d1) * d.x_int;
        return m;
    }
    m.Z = Matrix::Zero(n, q);
    if (order >= 1) m.Z1 = Matrix::Zero(n, q);
    if (order >= 2) m.Z2 = Matrix::Zero(n, q);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (std::size_t i = d.start[static_cast<std::size_t>(j)]; i < d.start[static_cast<std::size_t>(j) + 1]; ++i) {
            const double tau = d.tau[i];
            const double e = d.weight[i] * std::exp(-lambda * tau);
            const auto row = d.x_nodes.row(static_cast<Eigen::Index>(i));
            m.Z.row(j) += e * row;
            if (order >= 1) m.Z1.row(j) -= (tau * e) * row;
            if (order >= 2) m.Z2.row(j) += (tau * tau * e) * row;
        }
    }
    return m;
}

/// zeta_j(lambda) = (1/h) int_{t_{j-1}}^{t_j} e^{-lambda (t_j - s)} X_s ds, 1 <= j <= n.
inline Vector zeta(const ObservedPath& path, std::size_t j, double lambda) {
    if (j < 1 || j > path.n()) throw DomainError("interval index out of range");
    const PathDesign& d = path.design();
    if (d.form == CovariateForm::integrals_only)
        return eta(lambda * path.h()) * d.x_int.row(static_cast<Eigen::Index>(j - 1)).transpose() / path.h();
    Vector z = Vector::Zero(static_cast<Eigen::Index>(d.q));
    for (std::size_t i = d.start[j - 1]; i < d.start[j]; ++i)
        z += d.weight[i] * std::exp(-lambda * d.tau[i]) * d.x_nodes.row(static_cast<Eigen::Index>(i)).transpose();
    return z / path.h();
}

inline Vector zeta(std::size_t j, double lambda, const CovariateSpec& cov, double T, std::size_t n,
                   int subdiv = default_subdivision) {
    if (j < 1 || j > n) throw DomainError("interval index out of range");
    const double h = T / static_cast<double>(n), b = j * h;
    Vector z = Vector::Zero(static_cast<Eigen::Index>(cov.q()));
    Vector x(static_cast<Eigen::Index>(cov.q()));
    cov.interval_nodes(b - h, b, subdiv, [&](double s, double w) {
        cov.value(s, x.data());
        z += w * std::exp(-lambda * (b - s)) * x;
    });
    return z / h;
}

// ---------------------------------------------------------------------------
// Residuals and simulation

/// eps_j(theta) = (Y_j - e^{-lambda h} Y_{j-1} - mu.Z_j) / (sigma h^{1/beta} eta(lambda beta h)^{1/beta}).
struct ResidualVector {
    Vector eps;
};

/// Scale of the one-step noise term, sigma h^{1/beta} eta(lambda beta h)^{1/beta}.
inline double noise_scale(const ModelParams& theta, double h) {
    const double b = theta.beta();
    return theta.sigma * std::exp((std::log(h) + log_eta(theta.lambda * b * h).value) / b);
}

inline ResidualVector residuals(const ModelParams& theta, const ObservedPath& path) {
    if (theta.q() != path.q()) throw DomainError("parameter and covariate dimensions differ");
    const double h = path.h(), a = std::exp(-theta.lambda * h);
    const Vector drift = zeta_moments(path, theta.lambda).Z * theta.mu;
    const double D = noise_scale(theta, h);
    const auto n = static_cast<Eigen::Index>(path.n());
    const Vector& y = path.y();
    ResidualVector r{(y.tail(n) - a * y.head(n) - drift) / D};
    if (!r.eps.allFinite()) throw DomainError("non-finite residuals: corrupt input");
    return r;
}

struct SimulationOptions {
    /// Drop the noise term entirely (the sigma -> 0 limit).
    bool deterministic = false;
    int subdivision = default_subdivision;
};

/// Sigma at or below this value requests the noiseless path.
inline constexpr double deterministic_sigma = 1e-300;

/// Exact-in-law simulation on the grid t_j = j T / n. When `noise` is non-null it
/// receives the standardized stable draws xi_j.
inline ObservedPath simulate_path(const ModelParams& theta, const CovariateSpec& cov, double y0, std::size_t n, double T,
                                  Engine& rng, SimulationOptions opts = {}, std::vector<double>* noise = nullptr) {
    if (n < 4) throw ValidationError("n", "need n >= 4");
    if (cov.q() != theta.q()) throw ValidationError("covariate", "dimension must match mu");
    if (!std::isfinite(y0)) throw ValidationError("y0", "must be finite");
    const bool deterministic = opts.deterministic || theta.sigma <= deterministic_sigma;
    ObservedPath skeleton = ObservedPath::with_covariate(T, Vector::Zero(static_cast<Eigen::Index>(n + 1)), cov,
                                                         opts.subdivision);
    const double h = skeleton.h(), a = std::exp(-theta.lambda * h);
    const Vector drift = zeta_moments(skeleton, theta.lambda).Z * theta.mu;
    const double D = noise_scale(theta, h);
    Vector y(static_cast<Eigen::Index>(n + 1));
    y(0) = y0;
    if (noise) noise->assign(n, 0.0);
    for (std::size_t j = 1; j <= n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        double step = a * y(jj - 1) + drift(jj - 1);
        if (!deterministic) {
            const double xi = sample(theta.stability(), rng);
            if (noise) (*noise)[j - 1] = xi;
            step += D * xi;
        }
        y(jj) = step;
    }
    return skeleton.with_y(std::move(y));
}

}  // namespace stableou
