#pragma once

// Standard symmetric beta-stable law with characteristic function exp(-|u|^beta):
// density and its partial derivatives in (y, beta), score functions, moment
// functionals, and Chambers-Mallows-Stuck sampling.
//
// Evaluation strategy: for |y| <= tail_switch the Fourier inversion integrals are
// computed by adaptive Gauss-Kronrod panels (graded toward u = 0, panel width
// bounded by a quarter period of cos(uy)); beyond tail_switch the convergent /
// asymptotic power series in |y|^-beta is used, with all derivative sums scaled
// by y^{beta+1} so scores never form 0/0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "stableou/detail/quadrature.hpp"
#include "stableou/errors.hpp"
#include "stableou/rng.hpp"

namespace stableou {

/// Stability index beta, strictly inside (0, 2).
class StabilityIndex {
public:
    explicit StabilityIndex(double beta) : beta_(beta) {
        if (!(beta > 0.0 && beta < 2.0))
            throw DomainError("stability index must lie in (0, 2), got " + std::to_string(beta));
    }
    double value() const noexcept { return beta_; }
    friend bool operator==(StabilityIndex, StabilityIndex) = default;

private:
    double beta_;
};

/// Density and the partial derivatives the likelihood needs.
struct DensityDerivatives {
    double pdf = 0.0;
    double d_y = 0.0;
    double d_yy = 0.0;
    double d_beta = 0.0;
    double d_y_beta = 0.0;
    double d_beta_beta = 0.0;
};

/// log phi and the score functions g = phi_y/phi, f = phi_beta/phi together with
/// their first partials. Note d_y f == d_beta g, so only one is stored.
struct ScorePoint {
    double log_pdf = 0.0;
    double g = 0.0;
    double f = 0.0;
    double dg_dy = 0.0;
    double dg_dbeta = 0.0;
    double df_dbeta = 0.0;

    double pdf() const { return std::exp(log_pdf); }
};

/// The four expectations entering the Fisher information, plus E{1 + eps g(eps)}
/// which must vanish (integration by parts) and is kept as a diagnostic.
struct StableExpectations {
    double Eg2 = 0.0;
    double Ef2 = 0.0;
    double Eefg = 0.0;
    double E1peg2 = 0.0;
    double E1peg = 0.0;
};

namespace detail {

inline constexpr double pi = std::numbers::pi;

/// Series phi(y) = sum_k a_k y^{-k beta - 1}, a_k = (-1)^{k+1} Gamma(k beta + 1) sin(k pi beta / 2) / (pi k!).
/// Convergent for beta < 1, asymptotic for beta >= 1 (truncated at the smallest term).
class TailSeries {
public:
    static constexpr int max_terms = 200;

    /// Sums scaled by y^{beta+1}: phi, y phi_y, y^2 phi_yy, phi_b, y phi_yb, phi_bb.
    struct Sums {
        double phi = 0, y = 0, yy = 0, b = 0, yb = 0, bb = 0;
        double rel_error = 0;
    };

    explicit TailSeries(double beta) : beta_(beta) {
        for (int k = 1; k <= max_terms; ++k) {
            const double kb = k * beta;
            const double sign = (k % 2 == 1) ? 1.0 : -1.0;
            log_c_.push_back(std::lgamma(kb + 1.0) - std::lgamma(k + 1.0) - std::log(pi));
            sin_.push_back(sign * std::sin(0.5 * k * pi * beta));
            cos_.push_back(sign * std::cos(0.5 * k * pi * beta));
            psi_.push_back(boost::math::digamma(kb + 1.0));
            psi1_.push_back(boost::math::trigamma(kb + 1.0));
        }
    }

    double beta() const { return beta_; }

    Sums sums(double y) const {
        const double L = std::log(y), log_rho = -beta_ * L, aL = std::abs(L);
        Sums s;
        double prev_env = 0.0;
        int k = 1;
        for (; k <= max_terms; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            const double kb = k * beta_;
            const double C = std::exp(log_c_[i] + (k - 1) * log_rho);
            const double grow = 1.0 + k * (std::abs(psi_[i]) + 2.0 + aL);
            const double env = C * grow * grow * (kb + 3.0) * (kb + 3.0);
            if (k > 2 && env > prev_env) {  // asymptotic regime: stop at the smallest term
                s.rel_error = prev_env / std::abs(s.phi);
                return s;
            }
            const double w = 0.5 * k * pi;
            const double a = C * sin_[i];
            const double da = C * (k * psi_[i] * sin_[i] + w * cos_[i]);
            const double d2a = C * ((k * k * (psi_[i] * psi_[i] + psi1_[i]) - w * w) * sin_[i] +
                                    2.0 * k * psi_[i] * w * cos_[i]);
            const double db = da - k * L * a;
            s.phi += a;
            s.y += -(kb + 1.0) * a;
            s.yy += (kb + 1.0) * (kb + 2.0) * a;
            s.b += db;
            s.yb += -(k * a + (kb + 1.0) * db);
            s.bb += d2a - 2.0 * k * L * da + k * k * L * L * a;
            prev_env = env;
            if (k > 2 && env < 1e-17 * std::abs(s.phi)) break;
        }
        s.rel_error = prev_env / std::abs(s.phi);
        return s;
    }

    ScorePoint scores(double y) const {
        const Sums s = sums(y);
        ScorePoint p;
        p.log_pdf = -(beta_ + 1.0) * std::log(y) + std::log(s.phi);
        p.g = s.y / (y * s.phi);
        p.f = s.b / s.phi;
        p.dg_dy = s.yy / (y * y * s.phi) - p.g * p.g;
        p.dg_dbeta = s.yb / (y * s.phi) - p.g * p.f;
        p.df_dbeta = s.bb / s.phi - p.f * p.f;
        return p;
    }

    DensityDerivatives derivatives(double y) const {
        const Sums s = sums(y);
        const double scale = std::exp(-(beta_ + 1.0) * std::log(y));
        return {scale * s.phi, scale * s.y / y, scale * s.yy / (y * y),
                scale * s.b,   scale * s.yb / y, scale * s.bb};
    }

    /// P(J > y) for y beyond the switch: sum_k a_k y^{-k beta} / (k beta).
    double upper_tail(double y) const {
        const double log_rho = -beta_ * std::log(y);
        double sum = 0.0, prev = 0.0;
        for (int k = 1; k <= max_terms; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            const double C = std::exp(log_c_[i] + k * log_rho) / (k * beta_);
            if (k > 2 && C > prev) break;
            sum += C * sin_[i];
            prev = C;
            if (k > 2 && C < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }

private:
    double beta_;
    std::vector<double> log_c_, sin_, cos_, psi_, psi1_;
};

/// Upper cutoff U for the inversion integrals: e^{-U^beta} times the largest
/// polynomial/log weight is below ~1e-17.
inline double inversion_cutoff(double beta) {
    double U = std::pow(39.0, 1.0 / beta);
    for (int it = 0; it < 6; ++it)
        U = std::pow(39.0 + (3.0 + 2.0 * beta) * std::log(std::max(U, 1.0)) +
                         2.0 * std::log(std::max(std::log(std::max(U, 1.0)), 1.0)),
                     1.0 / beta);
    return U;
}

/// Initial panel breaks on [0, U] for frequency y >= 0.
inline std::vector<double> inversion_breaks(double beta, double y) {
    const double U = inversion_cutoff(beta);
    const double quarter = y > 0.0 ? 0.5 * pi / y : std::numeric_limits<double>::infinity();
    const double u0 = std::min(0.5, quarter);
    std::vector<double> breaks{0.0};
    // geometric grading toward the u^beta log u singularity at the origin
    std::vector<double> graded;
    for (double u = u0; u > 1e-16; u /= 3.0) graded.push_back(u);
    breaks.insert(breaks.end(), graded.rbegin(), graded.rend());
    double u = u0;
    while (u < U) {
        const double smooth = 2.0 * std::pow(u, 1.0 - beta) / beta;
        u += std::min({quarter, 0.5 * u, smooth, 2.0});
        breaks.push_back(std::min(u, U));
    }
    return breaks;
}

/// Unnormalized integrand of the nine inversion moments at frequency y. Moments:
/// phi, phi_y, phi_yy, phi_yyy, phi_b, phi_yb, phi_yyb, phi_bb, phi_ybb (times pi).
struct InversionIntegrand {
    double beta, y;
    void operator()(double u, double* out) const {
        const double L = std::log(u);
        const double P = std::exp(beta * L);
        const double w = std::exp(-P);
        const double A = -P * L;
        const double B = P * L * L * (P - 1.0);
        const double c = std::cos(u * y), s = std::sin(u * y);
        const double uw = u * w, u2w = u * uw;
        out[0] = c * w;
        out[1] = -s * uw;
        out[2] = -c * u2w;
        out[3] = s * u * u2w;
        out[4] = c * A * w;
        out[5] = -s * A * uw;
        out[6] = -c * A * u2w;
        out[7] = c * B * w;
        out[8] = -s * B * uw;
    }
};

inline std::array<double, 9> inversion_moments(double beta, double y) {
    auto r = integrate_panels<9>(InversionIntegrand{beta, y}, inversion_breaks(beta, y), 1e-17, 1e-13);
    for (double& v : r) v /= pi;
    return r;
}

/// (phi, its y-derivative) pairs for log phi, g, f, dg_dy, dg_dbeta, df_dbeta built
/// from the nine inversion moments.
inline std::array<double, 12> scores_with_slopes(const std::array<double, 9>& m) {
    const double inv = 1.0 / m[0];
    const double g = m[1] * inv, f = m[4] * inv;
    const double dg = m[2] * inv - g * g;
    const double gb = m[5] * inv - g * f;
    const double fb = m[7] * inv - f * f;
    return {std::log(m[0]), g,
            g,  dg,
            f,  gb,
            dg, m[3] * inv - g * m[2] * inv - 2.0 * g * dg,
            gb, m[6] * inv - g * m[5] * inv - dg * f - g * gb,
            fb, m[8] * inv - g * m[7] * inv - 2.0 * f * gb};
}

inline ScorePoint reflect(ScorePoint p, bool negative) {
    if (negative) {
        p.g = -p.g;
        p.dg_dbeta = -p.dg_dbeta;
    }
    return p;
}

}  // namespace detail

/// Direct evaluator for a fixed beta: adaptive quadrature below the tail switch,
/// series above it. Immutable after construction.
class StableKernel {
public:
    explicit StableKernel(StabilityIndex beta) : beta_(beta.value()), tail_(beta.value()) {
        choose_tail_switch();
    }

    double beta() const { return beta_; }
    /// |y| beyond which the series representation is used.
    double tail_switch() const { return y_switch_; }
    const detail::TailSeries& tail() const { return tail_; }

    /// The nine inversion moments at y >= 0 by adaptive quadrature (no series).
    std::array<double, 9> quadrature_moments(double y) const { return detail::inversion_moments(beta_, y); }

    DensityDerivatives derivatives(double y) const {
        const double a = std::abs(y);
        DensityDerivatives d;
        if (a > y_switch_) {
            d = tail_.derivatives(a);
        } else {
            const auto m = quadrature_moments(a);
            d = {m[0], m[1], m[2], m[4], m[5], m[7]};
        }
        if (y < 0.0) {
            d.d_y = -d.d_y;
            d.d_y_beta = -d.d_y_beta;
        }
        return d;
    }

    double pdf(double y) const { return derivatives(y).pdf; }

    ScorePoint scores(double y) const {
        const double a = std::abs(y);
        if (a > y_switch_) return detail::reflect(tail_.scores(a), y < 0.0);
        const auto s = detail::scores_with_slopes(quadrature_moments(a));
        return detail::reflect({s[0], s[2], s[4], s[6], s[8], s[10]}, y < 0.0);
    }

    /// Distribution function.
    double cdf(double y) const {
        const double a = std::abs(y);
        double upper;
        if (a > y_switch_) {
            upper = tail_.upper_tail(a);
        } else if (a == 0.0) {
            upper = 0.5;
        } else {
            const double b = beta_;
            auto fn = [b, a](double u, double* out) { out[0] = std::sin(u * a) / u * std::exp(-std::pow(u, b)); };
            upper = 0.5 - detail::integrate_panels<1>(fn, detail::inversion_breaks(b, a), 1e-17, 1e-13)[0] / detail::pi;
        }
        return y < 0.0 ? upper : 1.0 - upper;
    }

private:
    void choose_tail_switch() {
        // Smallest candidate where the series is converged and agrees with quadrature.
        static constexpr double candidates[] = {1.5, 2, 2.5, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 18, 20,
                                                24, 28, 32, 36, 40, 45, 50, 55, 60};
        y_switch_ = 60.0;
        for (double yc : candidates) {
            if (tail_.sums(yc).rel_error > 1e-14) continue;
            const ScorePoint q = direct_scores(yc);
            const ScorePoint t = tail_.scores(yc);
            auto close = [](double u, double v) { return std::abs(u - v) <= 1e-10 * (1.0 + std::abs(u)); };
            if (close(q.log_pdf, t.log_pdf) && close(q.g, t.g) && close(q.f, t.f) && close(q.dg_dy, t.dg_dy) &&
                close(q.dg_dbeta, t.dg_dbeta) && close(q.df_dbeta, t.df_dbeta)) {
                y_switch_ = yc;
                return;
            }
        }
    }

    ScorePoint direct_scores(double y) const {
        const auto s = detail::scores_with_slopes(quadrature_moments(y));
        return {s[0], s[2], s[4], s[6], s[8], s[10]};
    }

    double beta_;
    detail::TailSeries tail_;
    double y_switch_ = 0.0;
};

/// Cubic Hermite table of log phi, g, f and their partials on [0, tail_switch],
/// with the series beyond. Interpolation error budget 1e-7. Immutable after
/// construction, shareable across threads.
class StableScoreTable {
public:
    explicit StableScoreTable(StabilityIndex beta) : StableScoreTable(StableKernel(beta)) {}

    explicit StableScoreTable(const StableKernel& kernel)
        : beta_(kernel.beta()), y_switch_(kernel.tail_switch()), tail_(kernel.tail()) {
        build_segments();
        fill();
    }

    double beta() const { return beta_; }
    double tail_switch() const { return y_switch_; }

    std::span<const double> grid() const { return grid_; }
    std::span<const double> phi() const { return phi_; }
    std::span<const double> dphi_dy() const { return dphi_dy_; }
    std::span<const double> dphi_dbeta() const { return dphi_dbeta_; }

    ScorePoint scores(double y) const {
        const double a = std::abs(y);
        if (a > y_switch_) return detail::reflect(tail_.scores(a), y < 0.0);
        std::size_t si = 0;
        while (si + 1 < segments_.size() && a > segments_[si].end) ++si;
        const Segment& seg = segments_[si];
        double pos = (a - seg.start) / seg.step;
        auto idx = static_cast<std::size_t>(std::max(0.0, std::floor(pos)));
        if (idx >= seg.count) idx = seg.count - 1;
        const double t = pos - static_cast<double>(idx);
        const auto& lo = nodes_[seg.first + idx];
        const auto& hi = nodes_[seg.first + idx + 1];
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1, h10 = (t3 - 2 * t2 + t) * seg.step;
        const double h01 = -2 * t3 + 3 * t2, h11 = (t3 - t2) * seg.step;
        std::array<double, 6> v;
        for (std::size_t k = 0; k < 6; ++k)
            v[k] = h00 * lo[2 * k] + h10 * lo[2 * k + 1] + h01 * hi[2 * k] + h11 * hi[2 * k + 1];
        return detail::reflect({v[0], v[1], v[2], v[3], v[4], v[5]}, y < 0.0);
    }

    double pdf(double y) const { return std::exp(scores(y).log_pdf); }

private:
    struct Segment {
        double start, end, step;
        std::size_t first, count;  // node index of start; number of intervals
    };

    void build_segments() {
        // the core of the density sharpens as beta decreases
        const double b = std::min(beta_, 1.0);
        const double cuts[] = {0.0, 0.5, 2.0, 6.0};
        const double steps[] = {0.005 * b * b * b, 0.005, 0.01, 0.025};
        std::size_t first = 0;
        for (std::size_t s = 0; s < 4 && cuts[s] < y_switch_; ++s) {
            const double end = (s + 1 < 4) ? std::min(cuts[s + 1], y_switch_) : y_switch_;
            const auto count = static_cast<std::size_t>(std::ceil((end - cuts[s]) / steps[s] - 1e-9));
            segments_.push_back({cuts[s], end, (end - cuts[s]) / count, first, count});
            first += count;
        }
        for (const Segment& seg : segments_)
            for (std::size_t i = 0; i < seg.count; ++i) grid_.push_back(seg.start + i * seg.step);
        grid_.push_back(y_switch_);
    }

    // Fixed GK21 rule from the panel plan at the largest abscissa: every smaller
    // |y| oscillates more slowly, so the same nodes serve the whole grid.
    void fill() {
        detail::Rule rule;
        const auto breaks = detail::inversion_breaks(beta_, y_switch_);
        for (std::size_t i = 1; i < breaks.size(); ++i) rule.append_gk21(breaks[i - 1], breaks[i]);

        const std::size_t N = grid_.size();
        std::vector<std::array<double, 9>> mom(N, std::array<double, 9>{});
        for (std::size_t j = 0; j < rule.size(); ++j) {
            const double u = rule.nodes[j], L = std::log(u), P = std::exp(beta_ * L);
            const double w = rule.weights[j] * std::exp(-P) / detail::pi;
            const double A = -P * L, B = P * L * L * (P - 1.0);
            const double uw = u * w, u2w = u * uw;
            const double cc[5] = {w, -u2w, A * w, -A * u2w, B * w};       // -> moments 0,2,4,6,7
            const double ss[4] = {-uw, u * u2w, -A * uw, -B * uw};         // -> moments 1,3,5,8
            for (const Segment& seg : segments_) {
                // rotate (cos, sin)(u y) along the uniform segment, reseeding every 64 steps
                const double cd = std::cos(u * seg.step), sd = std::sin(u * seg.step);
                double c = 0, s = 0;
                for (std::size_t i = 0; i <= seg.count; ++i) {
                    if (i % 64 == 0) {
                        const double arg = u * (seg.start + i * seg.step);
                        c = std::cos(arg);
                        s = std::sin(arg);
                    }
                    auto& m = mom[seg.first + i];
                    m[0] += cc[0] * c;
                    m[2] += cc[1] * c;
                    m[4] += cc[2] * c;
                    m[6] += cc[3] * c;
                    m[7] += cc[4] * c;
                    m[1] += ss[0] * s;
                    m[3] += ss[1] * s;
                    m[5] += ss[2] * s;
                    m[8] += ss[3] * s;
                    const double cn = c * cd - s * sd;
                    s = s * cd + c * sd;
                    c = cn;
                }
            }
        }
        // segment boundaries were accumulated once per segment; undo the duplicates
        for (std::size_t k = 1; k < segments_.size(); ++k)
            for (double& v : mom[segments_[k].first]) v *= 0.5;

        nodes_.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            nodes_[i] = detail::scores_with_slopes(mom[i]);
            phi_.push_back(mom[i][0]);
            dphi_dy_.push_back(mom[i][1]);
            dphi_dbeta_.push_back(mom[i][4]);
        }
    }

    double beta_;
    double y_switch_;
    detail::TailSeries tail_;
    std::vector<Segment> segments_;
    std::vector<double> grid_, phi_, dphi_dy_, dphi_dbeta_;
    std::vector<std::array<double, 12>> nodes_;
};

namespace detail {

/// Small per-owner cache of evaluators keyed by beta. Not thread-safe: give each
/// thread (or Monte Carlo replication) its own family object.
template <class Evaluator>
class EvaluatorCache {
public:
    explicit EvaluatorCache(std::size_t capacity = 8) : capacity_(capacity) {}

    std::shared_ptr<const Evaluator> at(double beta) const {
        for (auto it = entries_.begin(); it != entries_.end(); ++it) {
            if (it->first == beta) {
                auto hit = *it;
                entries_.erase(it);
                entries_.insert(entries_.begin(), hit);
                return hit.second;
            }
        }
        auto ev = std::make_shared<const Evaluator>(StabilityIndex(beta));
        entries_.insert(entries_.begin(), {beta, ev});
        if (entries_.size() > capacity_) entries_.pop_back();
        return ev;
    }

private:
    std::size_t capacity_;
    mutable std::vector<std::pair<double, std::shared_ptr<const Evaluator>>> entries_;
};

}  // namespace detail

/// Direct quadrature at every call; exact to ~1e-12, slow.
using ExactFamily = detail::EvaluatorCache<StableKernel>;
/// Tabulated evaluators; one table build per distinct beta, fast lookups after.
using TabulatedFamily = detail::EvaluatorCache<StableScoreTable>;

inline std::shared_ptr<const StableKernel> kernel_for(StabilityIndex beta) {
    thread_local ExactFamily family(16);
    return family.at(beta.value());
}

inline double pdf(double y, StabilityIndex beta) { return kernel_for(beta)->pdf(y); }
inline double pdf_dy(double y, StabilityIndex beta) { return kernel_for(beta)->derivatives(y).d_y; }
inline double pdf_dbeta(double y, StabilityIndex beta) { return kernel_for(beta)->derivatives(y).d_beta; }
inline double cdf(double y, StabilityIndex beta) { return kernel_for(beta)->cdf(y); }

/// f = phi_beta / phi and g = phi_y / phi.
inline std::pair<double, double> scores(double y, StabilityIndex beta) {
    const ScorePoint p = kernel_for(beta)->scores(y);
    return {p.f, p.g};
}

/// E g^2, E f^2, E eps f g, E (1 + eps g)^2 under phi_beta, for any evaluator with
/// `scores(y)` and `tail_switch()`.
template <class Evaluator>
StableExpectations expectations(const Evaluator& ev) {
    auto integrand = [&ev](double y, double* out) {
        const ScorePoint p = ev.scores(y);
        const double phi = p.pdf(), peg = 1.0 + y * p.g;
        out[0] = p.g * p.g * phi;
        out[1] = p.f * p.f * phi;
        out[2] = y * p.f * p.g * phi;
        out[3] = peg * peg * phi;
        out[4] = peg * phi;
    };
    const double ys = ev.tail_switch();
    std::vector<double> core{0.0};
    const auto panels = static_cast<int>(std::ceil(ys / 0.25));
    for (int i = 1; i <= panels; ++i) core.push_back(ys * i / panels);
    auto inner = detail::integrate_panels<5>(integrand, core, 1e-15, 1e-11);

    // tail on y = ys e^s
    const double beta = ev.beta();
    auto mapped = [&](double s, double* out) {
        const double y = ys * std::exp(s);
        integrand(y, out);
        for (int k = 0; k < 5; ++k) out[k] *= y;
    };
    std::vector<double> tail_breaks;
    const double smax = 45.0 / beta + 5.0;
    for (double s = 0.0; s < smax; s += 0.5) tail_breaks.push_back(s);
    tail_breaks.push_back(smax);
    auto outer = detail::integrate_panels<5>(mapped, tail_breaks, 1e-16, 1e-11);

    StableExpectations e;
    e.Eg2 = 2.0 * (inner[0] + outer[0]);
    e.Ef2 = 2.0 * (inner[1] + outer[1]);
    e.Eefg = 2.0 * (inner[2] + outer[2]);
    e.E1peg2 = 2.0 * (inner[3] + outer[3]);
    e.E1peg = 2.0 * (inner[4] + outer[4]);
    return e;
}

inline StableExpectations expectations(StabilityIndex beta) { return expectations(*kernel_for(beta)); }

/// Chambers-Mallows-Stuck draw with characteristic function exp(-|u|^beta).
inline double sample_from_uniforms(double beta, double U, double E) {
    if (beta == 1.0) return std::tan(U);
    return std::sin(beta * U) / std::pow(std::cos(U), 1.0 / beta) *
           std::pow(std::cos(U - beta * U) / E, (1.0 - beta) / beta);
}

inline double sample(StabilityIndex beta, Engine& rng) {
    const double U = detail::pi * (uniform_open(rng) - 0.5);
    const double E = standard_exponential(rng);
    return sample_from_uniforms(beta.value(), U, E);
}

/// m(r, beta) = E|J' - J''|^r for i.i.d. standard symmetric beta-stable J', J''.
inline double frac_abs_moment(double r, StabilityIndex beta) {
    const double b = beta.value();
    if (!(r > 0.0) || r >= b || r >= 2.0)
        throw DomainError("fractional moment order r must satisfy 0 < r < min(beta, 2)");
    return std::pow(2.0, r / b) * std::pow(2.0, r) * std::tgamma(0.5 * (r + 1.0)) * std::tgamma(1.0 - r / b) /
           (std::sqrt(detail::pi) * std::tgamma(1.0 - 0.5 * r));
}

}  // namespace stableou
