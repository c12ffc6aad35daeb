#pragma once

// Exact log-likelihood of the discretely observed path, its analytic gradient and
// Hessian in theta = (lambda, mu_1..mu_q, beta, sigma), the norming matrix, the
// normalized score / observed information, and the limiting Fisher information.

#include <cmath>
#include <cstddef>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "stableou/errors.hpp"
#include "stableou/model.hpp"
#include "stableou/stable_dist.hpp"

namespace stableou {

struct LikelihoodValue {
    double loglik = 0.0;
    Vector score;    // empty unless order >= 1
    Matrix hessian;  // empty unless order >= 2
};

namespace detail {

/// Partials of log D, D = sigma h^{1/beta} eta(lambda beta h)^{1/beta}. They do
/// not depend on j. Index layout: 0 = lambda, 1..q = mu, q+1 = beta, q+2 = sigma.
struct LogScale {
    double value;
    double l, b, s;           // first partials (lambda, beta, sigma)
    double ll, lb, bb, ss;    // nonzero second partials
};

inline LogScale log_scale(const ModelParams& theta, double h) {
    const double b = theta.beta(), lam = theta.lambda, sg = theta.sigma;
    const double x = lam * b * h, Lh = -std::log(h);
    const LogEta E = log_eta(x);
    LogScale r;
    r.value = std::log(sg) - Lh / b + E.value / b;
    r.l = h * E.d1;
    r.b = Lh / (b * b) + lam * h * E.d1 / b - E.value / (b * b);
    r.s = 1.0 / sg;
    r.ll = b * h * h * E.d2;
    r.lb = lam * h * h * E.d2;
    r.bb = -2.0 * Lh / (b * b * b) + lam * lam * h * h * E.d2 / b - 2.0 * lam * h * E.d1 / (b * b) +
           2.0 * E.value / (b * b * b);
    r.ss = -1.0 / (sg * sg);
    return r;
}

}  // namespace detail

/// Log-likelihood (order 0), plus score (order 1) and Hessian (order 2).
/// `Family` maps beta to an evaluator with `scores(y) -> ScorePoint`.
/// Non-finite residuals give loglik = -infinity and NaN derivatives.
template <class Family>
LikelihoodValue evaluate(const ModelParams& theta, const ObservedPath& path, Family& family, int order = 2) {
    if (theta.q() != path.q()) throw DomainError("parameter and covariate dimensions differ");
    const auto q = static_cast<Eigen::Index>(theta.q());
    const Eigen::Index p = q + 3, ib = q + 1, is = q + 2;
    const std::size_t n = path.n();
    const double h = path.h(), a = std::exp(-theta.lambda * h);
    const ZetaMoments zm = zeta_moments(path, theta.lambda, order);
    const detail::LogScale L = detail::log_scale(theta, h);
    const double D = std::exp(L.value);
    const auto ev = family.at(theta.beta());
    const Vector& y = path.y();
    const Vector& mu = theta.mu;

    Vector Lk = Vector::Zero(p);
    Lk(0) = L.l;
    Lk(ib) = L.b;
    Lk(is) = L.s;
    Matrix Lkl = Matrix::Zero(p, p);
    Lkl(0, 0) = L.ll;
    Lkl(0, ib) = Lkl(ib, 0) = L.lb;
    Lkl(ib, ib) = L.bb;
    Lkl(is, is) = L.ss;

    LikelihoodValue out;
    double sum_logphi = 0.0;
    Vector sum_g_ek;
    Matrix H;
    if (order >= 1) sum_g_ek = Vector::Zero(p);
    if (order >= 2) H = Matrix::Zero(p, p);
    double sum_f_scalar = 0.0, sum_fb = 0.0;
    Vector Nk(p), ek(p), sum_gb_ek = Vector::Zero(p);
    Matrix Nkl = Matrix::Zero(p, p);

    for (std::size_t j = 1; j <= n; ++j) {
        const auto r = static_cast<Eigen::Index>(j - 1);
        const double yprev = y(r);
        const double N = y(r + 1) - a * yprev - zm.Z.row(r).dot(mu);
        const double eps = N / D;
        if (!std::isfinite(eps)) {
            out.loglik = -std::numeric_limits<double>::infinity();
            if (order >= 1) out.score = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
            if (order >= 2) out.hessian = Matrix::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
            return out;
        }
        const ScorePoint sp = ev->scores(eps);
        sum_logphi += sp.log_pdf;
        if (order < 1) continue;

        Nk.setZero();
        Nk(0) = h * a * yprev - zm.Z1.row(r).dot(mu);
        Nk.segment(1, q) = -zm.Z.row(r).transpose();
        ek = (Nk - N * Lk) / D;
        sum_g_ek += sp.g * ek;
        sum_f_scalar += sp.f;
        if (order < 2) continue;

        Nkl(0, 0) = -h * h * a * yprev - zm.Z2.row(r).dot(mu);
        Nkl.block(0, 1, 1, q) = -zm.Z1.row(r);
        Nkl.block(1, 0, q, 1) = -zm.Z1.row(r).transpose();
        // eps_kl = [N_kl - N_k L_l - N_l L_k - N L_kl + N L_k L_l] / D
        Matrix ekl = (Nkl - Nk * Lk.transpose() - Lk * Nk.transpose() - N * Lkl + N * Lk * Lk.transpose()) / D;
        H.noalias() += sp.dg_dy * (ek * ek.transpose());
        H += sp.g * ekl;
        sum_gb_ek += sp.dg_dbeta * ek;
        sum_fb += sp.df_dbeta;
    }
    const double dn = static_cast<double>(n);
    out.loglik = -dn * L.value + sum_logphi;
    if (order >= 1) {
        out.score = -dn * Lk + sum_g_ek;
        out.score(ib) += sum_f_scalar;
    }
    if (order >= 2) {
        H -= dn * Lkl;
        H.row(ib) += sum_gb_ek.transpose();
        H.col(ib) += sum_gb_ek;
        H(ib, ib) += sum_fb;
        out.hessian = 0.5 * (H + H.transpose());
    }
    return out;
}

namespace detail {
inline TabulatedFamily& default_family() {
    thread_local TabulatedFamily family(8);
    return family;
}
}  // namespace detail

/// sum_j [ -log sigma + (1/beta) log(1/h) - (1/beta) log eta(lambda beta h) + log phi_beta(eps_j) ].
template <class Family>
double loglik(const ModelParams& theta, const ObservedPath& path, Family& family) {
    return evaluate(theta, path, family, 0).loglik;
}
inline double loglik(const ModelParams& theta, const ObservedPath& path) {
    return loglik(theta, path, detail::default_family());
}

template <class Family>
Vector score(const ModelParams& theta, const ObservedPath& path, Family& family) {
    return evaluate(theta, path, family, 1).score;
}
inline Vector score(const ModelParams& theta, const ObservedPath& path) {
    return score(theta, path, detail::default_family());
}

template <class Family>
Matrix hessian(const ModelParams& theta, const ObservedPath& path, Family& family) {
    return evaluate(theta, path, family, 2).hessian;
}
inline Matrix hessian(const ModelParams& theta, const ObservedPath& path) {
    return hessian(theta, path, detail::default_family());
}

// ---------------------------------------------------------------------------
// Norming

/// phi_n = diag(block_drift I_{1+q}, block_tail), with
/// block_drift = 1 / (sqrt(n) h^{1 - 1/beta}) and
/// block_tail = [[1, 0], [-sigma beta^-2 log(1/h), sigma]] / sqrt(n).
struct NormingMatrix {
    std::size_t n = 0;
    double T = 1.0, beta = 1.0, sigma = 1.0;
    double block_drift = 1.0;
    Eigen::Matrix2d block_tail = Eigen::Matrix2d::Identity();

    double h() const { return T / static_cast<double>(n); }

    /// s21 = beta^-2 log(1/h) phi11 + phi21 / sigma (scaled by sqrt(n)); zero for this choice.
    double s21() const {
        const double rn = std::sqrt(static_cast<double>(n));
        return std::log(1.0 / h()) / (beta * beta) * rn * block_tail(0, 0) + rn * block_tail(1, 0) / sigma;
    }
    /// s22 = beta^-2 log(1/h) phi12 + phi22 / sigma (scaled by sqrt(n)); one for this choice.
    double s22() const {
        const double rn = std::sqrt(static_cast<double>(n));
        return std::log(1.0 / h()) / (beta * beta) * rn * block_tail(0, 1) + rn * block_tail(1, 1) / sigma;
    }

    Matrix full(std::size_t q) const {
        const auto p = static_cast<Eigen::Index>(q + 3);
        Matrix m = Matrix::Zero(p, p);
        for (Eigen::Index i = 0; i <= static_cast<Eigen::Index>(q); ++i) m(i, i) = block_drift;
        m.bottomRightCorner(2, 2) = block_tail;
        return m;
    }
};

inline NormingMatrix norming_matrix(const ModelParams& theta, std::size_t n, double T) {
    if (n < 2) throw DomainError("norming matrix needs n >= 2");
    if (!(static_cast<double>(n) > T)) throw DomainError("norming matrix needs h = T/n < 1 (n > T)");
    NormingMatrix m;
    m.n = n;
    m.T = T;
    m.beta = theta.beta();
    m.sigma = theta.sigma;
    const double h = T / static_cast<double>(n), rn = std::sqrt(static_cast<double>(n));
    m.block_drift = 1.0 / (rn * std::pow(h, 1.0 - 1.0 / m.beta));
    m.block_tail << 1.0, 0.0, -m.sigma * std::log(1.0 / h) / (m.beta * m.beta), m.sigma;
    m.block_tail /= rn;
    return m;
}

struct NormalizedQuantities {
    Vector delta_n;  // phi_n^T score
    Matrix info_n;   // -phi_n^T H phi_n
};

template <class Family>
NormalizedQuantities normalized_quantities(const ModelParams& theta, const ObservedPath& path, Family& family) {
    const LikelihoodValue v = evaluate(theta, path, family, 2);
    const Matrix phi = norming_matrix(theta, path.n(), path.T()).full(theta.q());
    Matrix I = -phi.transpose() * v.hessian * phi;
    return {phi.transpose() * v.score, 0.5 * (I + I.transpose())};
}
inline NormalizedQuantities normalized_quantities(const ModelParams& theta, const ObservedPath& path) {
    return normalized_quantities(theta, path, detail::default_family());
}

// ---------------------------------------------------------------------------
// Fisher information

struct FisherInfo {
    Matrix drift_block;          // (1+q) x (1+q), for (lambda, mu)
    Eigen::Matrix2d tail_block;  // for (beta, sigma)

    Matrix full() const {
        const auto k = drift_block.rows();
        Matrix m = Matrix::Zero(k + 2, k + 2);
        m.topLeftCorner(k, k) = drift_block;
        m.bottomRightCorner(2, 2) = tail_block;
        return m;
    }

    double min_eigenvalue() const {
        return Eigen::SelfAdjointEigenSolver<Matrix>(full()).eigenvalues()(0);
    }
};

/// drift_block = (E g^2 / sigma^2) (1/n) sum_j [[Y^2, -Y X^T], [-Y X, X X^T]] at left endpoints;
/// tail_block = [[E f^2, -E eps f g], [-E eps f g, E (1 + eps g)^2]].
template <class Family>
FisherInfo fisher_info(const ModelParams& theta, const ObservedPath& path, Family& family) {
    const StableExpectations e = expectations(*family.at(theta.beta()));
    const auto q = static_cast<Eigen::Index>(path.q());
    const auto n = static_cast<Eigen::Index>(path.n());
    Matrix W(n, q + 1);
    W.col(0) = -path.y().head(n);
    W.rightCols(q) = path.x_left();
    FisherInfo fi;
    fi.drift_block = (e.Eg2 / (theta.sigma * theta.sigma)) * (W.transpose() * W) / static_cast<double>(n);
    fi.tail_block << e.Ef2, -e.Eefg, -e.Eefg, e.E1peg2;
    return fi;
}
inline FisherInfo fisher_info(const ModelParams& theta, const ObservedPath& path) {
    return fisher_info(theta, path, detail::default_family());
}

inline nlohmann::json diagnostics_json(const NormalizedQuantities& nq, const NormingMatrix& phi, std::size_t q) {
    auto mat = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    nlohmann::json delta = nlohmann::json::array();
    for (Eigen::Index i = 0; i < nq.delta_n.size(); ++i) delta.push_back(nq.delta_n(i));
    return {{"delta_n", delta}, {"info_n", mat(nq.info_n)}, {"phi_n", mat(phi.full(q))}};
}

}  // namespace stableou
