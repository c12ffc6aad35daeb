#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "stableou/likelihood.hpp"
#include "stableou/montecarlo.hpp"

using namespace stableou;

namespace {

ModelParams make(double lambda, std::vector<double> mu, double beta, double sigma) {
    return ModelParams(lambda, Eigen::Map<Vector>(mu.data(), static_cast<Eigen::Index>(mu.size())), StabilityIndex(beta),
                       sigma);
}

struct Draw {
    ModelParams theta;
    ObservedPath path;
};

// Random parameter (away from the truth) and a path simulated under a nearby truth.
Draw random_draw(Engine& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double beta = 0.9 + 0.95 * u(rng);
    const double T = 0.5 + 2.0 * u(rng);
    const ModelParams truth = make(-0.5 + 3.0 * u(rng), {-1.0 + 2.0 * u(rng), -1.0 + 2.0 * u(rng)}, beta, 0.4 + u(rng));
    const ObservedPath path = simulate_path(truth, CovariateSpec::harmonic(T), -1.0 + 2.0 * u(rng), n, T, rng);
    Vector v = truth.to_vector();
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += 0.05 * (2.0 * u(rng) - 1.0) * (1.0 + std::abs(v(k)));
    v(3) = std::clamp(v(3), 0.85, 1.9);
    return {ModelParams::from_vector(v), path};
}

Vector step_sizes(const Vector& v, double rel) {
    Vector h(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) h(k) = rel * std::max(1.0, std::abs(v(k)));
    return h;
}

}  // namespace

TEST(LogLikelihood, ZeroIncrementsUnderCauchy) {
    const ObservedPath p = ObservedPath::with_covariate(4.0, Vector::Constant(5, 0.7), CovariateSpec::constant(1));
    ExactFamily exact;
    const ModelParams t = make(0.0, {0.0}, 1.0, 1.0);
    EXPECT_NEAR(loglik(t, p, exact), 4.0 * std::log(1.0 / std::numbers::pi), 1e-13);
    EXPECT_NEAR(loglik(t, p), 4.0 * std::log(1.0 / std::numbers::pi), 1e-9);
}

TEST(LogLikelihood, EqualsSumOfResidualTerms) {
    Engine rng(3);
    const ModelParams t = make(0.7, {0.4, -0.1}, 1.3, 0.6);
    const ObservedPath p = simulate_path(t, CovariateSpec::harmonic(2.0), 0.2, 300, 2.0, rng);
    ExactFamily exact;
    const Vector eps = residuals(t, p).eps;
    const double D = noise_scale(t, p.h());
    double direct = 0.0;
    for (double e : eps) direct += std::log(pdf(e, t.stability())) - std::log(D);
    EXPECT_NEAR(loglik(t, p, exact), direct, 1e-10 * std::abs(direct));
}

TEST(Score, MatchesFiniteDifferences) {
    Engine rng(1234);
    ExactFamily exact(64);
    for (int draw = 0; draw < 20; ++draw) {
        const Draw d = random_draw(rng, 200);
        const Vector th = d.theta.to_vector();
        const Vector an = score(d.theta, d.path, exact);
        const Vector h = step_sizes(th, 1e-6);
        for (Eigen::Index k = 0; k < th.size(); ++k) {
            Vector tp = th, tm = th;
            tp(k) += h(k);
            tm(k) -= h(k);
            const double fd =
                (loglik(ModelParams::from_vector(tp), d.path, exact) - loglik(ModelParams::from_vector(tm), d.path, exact)) /
                (2 * h(k));
            EXPECT_NEAR(an(k), fd, 1e-4 * std::abs(fd)) << "draw " << draw << " component " << k;
        }
    }
}

TEST(Hessian, MatchesFiniteDifferencesAndIsSymmetric) {
    Engine rng(4321);
    ExactFamily exact(64);
    for (int draw = 0; draw < 20; ++draw) {
        const Draw d = random_draw(rng, 200);
        const Vector th = d.theta.to_vector();
        const Matrix H = hessian(d.theta, d.path, exact);
        EXPECT_EQ((H - H.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const Vector h = step_sizes(th, 1e-5);
        Matrix fd(th.size(), th.size());
        for (Eigen::Index k = 0; k < th.size(); ++k) {
            Vector tp = th, tm = th;
            tp(k) += h(k);
            tm(k) -= h(k);
            fd.col(k) =
                (score(ModelParams::from_vector(tp), d.path, exact) - score(ModelParams::from_vector(tm), d.path, exact)) /
                (2 * h(k));
        }
        for (Eigen::Index i = 0; i < th.size(); ++i)
            for (Eigen::Index k = 0; k < th.size(); ++k)
                EXPECT_NEAR(H(i, k), fd(i, k), 1e-3 * std::abs(fd(i, k))) << "draw " << draw << " (" << i << "," << k << ")";
    }
}

TEST(Score, MuComponentVanishesAtZeroResiduals) {
    // lambda = mu = 0 on a constant path: every residual is exactly zero, so g(eps) = 0
    const ObservedPath p = ObservedPath::with_covariate(1.0, Vector::Constant(101, 0.4), CovariateSpec::harmonic(1.0));
    const Vector s = score(make(0.0, {0.0, 0.0}, 1.5, 1.0), p);
    EXPECT_EQ(s(1), 0.0);
    EXPECT_EQ(s(2), 0.0);

    // noiseless path at the generating parameter: residuals vanish up to rounding
    const ModelParams t = make(1.2, {0.5, 0.3}, 1.5, 1.0);
    SimulationOptions det;
    det.deterministic = true;
    Engine rng(0);
    const Vector sd = score(t, simulate_path(t, CovariateSpec::harmonic(1.0), 0.3, 100, 1.0, rng, det));
    EXPECT_NEAR(sd(1), 0.0, 1e-12);
    EXPECT_NEAR(sd(2), 0.0, 1e-12);
}

TEST(Score, UnbiasedAtTruth) {
    const ModelParams t = make(1.0, {0.5, 0.3}, 1.5, 1.0);
    const auto cov = CovariateSpec::harmonic(1.0);
    const int R = 500;
    Matrix S(R, 5);
    for (int r = 0; r < R; ++r) {
        Engine rng(hash_seed({55, static_cast<std::uint64_t>(r)}));
        S.row(r) = score(t, simulate_path(t, cov, 0.0, 1000, 1.0, rng)).transpose();
    }
    for (Eigen::Index k = 0; k < 5; ++k) {
        const double mean = S.col(k).mean();
        const double se = std::sqrt((S.col(k).array() - mean).square().sum() / (R - 1) / R);
        EXPECT_NEAR(mean, 0.0, 4 * se) << k;
    }
}

TEST(LogLikelihood, TruthBeatsDistantPerturbation) {
    const ModelParams t = make(1.0, {0.5, 0.3}, 1.5, 1.0);
    const auto cov = CovariateSpec::harmonic(1.0);
    const std::size_t n = 5000;
    const Vector rates = preliminary_rates(t, n, 1.0);
    int wins = 0;
    for (std::uint64_t r = 0; r < 100; ++r) {
        Engine rng(hash_seed({66, r}));
        const ObservedPath p = simulate_path(t, cov, 0.0, n, 1.0, rng);
        Vector dir(5);
        for (Eigen::Index k = 0; k < 5; ++k) dir(k) = standard_normal(rng);
        dir.normalize();
        const Vector v = t.to_vector() + 5.0 * dir.cwiseQuotient(rates);
        if (loglik(t, p) > loglik(ModelParams::from_vector(v), p)) ++wins;
    }
    EXPECT_GE(wins, 95);
}

TEST(Rescaling, LogLikelihoodIdentity) {
    Engine rng(77);
    for (int draw = 0; draw < 20; ++draw) {
        const Draw d = random_draw(rng, 300);
        const double a = loglik(d.theta, d.path);
        const double b = loglik(rescale_params(d.theta, d.path.T()), rescale_path(d.path));
        EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a))) << draw;
    }
}

TEST(NormingMatrix, CanonicalValues) {
    const ModelParams c = make(1.0, {0.5}, 1.0, 1.0);
    EXPECT_NEAR(norming_matrix(c, 400, 1.0).block_drift, 1.0 / 20.0, 1e-16);

    const ModelParams t = make(1.0, {0.5}, 1.5, 2.0);
    const NormingMatrix m = norming_matrix(t, 100, 1.0);
    EXPECT_NEAR(m.block_drift, std::pow(100.0, -0.5) * std::pow(0.01, -1.0 / 3.0), 1e-14);
    EXPECT_NEAR(m.block_tail(0, 0), 0.1, 1e-16);
    EXPECT_NEAR(m.block_tail(0, 1), 0.0, 0.0);
    EXPECT_NEAR(m.block_tail(1, 0), -2.0 / (1.5 * 1.5) * std::log(100.0) / 10.0, 1e-15);
    EXPECT_NEAR(m.block_tail(1, 1), 0.2, 1e-16);
    for (std::size_t n : {10u, 100u, 12345u, 1000000u}) {
        const NormingMatrix k = norming_matrix(t, n, 3.0);
        EXPECT_NEAR(k.s21(), 0.0, 1e-12);
        EXPECT_NEAR(k.s22(), 1.0, 1e-12);
        EXPECT_NE(k.block_tail.determinant(), 0.0);
    }
    EXPECT_THROW(norming_matrix(t, 2, 3.0), DomainError);
}

TEST(FisherInfo, SyntheticZeroPath) {
    const ModelParams t = make(1.0, {0.5}, 1.5, 2.0);
    const ObservedPath p = ObservedPath::with_covariate(1.0, Vector::Zero(51), CovariateSpec::constant(1));
    const FisherInfo fi = fisher_info(t, p);
    const StableExpectations e = expectations(t.stability());
    EXPECT_NEAR(fi.drift_block(0, 0), 0.0, 0.0);
    EXPECT_NEAR(fi.drift_block(0, 1), 0.0, 0.0);
    EXPECT_NEAR(fi.drift_block(1, 1), e.Eg2 / 4.0, 1e-8);
    EXPECT_NEAR(fi.tail_block(0, 0), e.Ef2, 1e-8);
    EXPECT_NEAR(fi.tail_block(0, 1), -e.Eefg, 1e-8);
    EXPECT_NEAR(fi.tail_block(1, 0), -e.Eefg, 1e-8);
    EXPECT_NEAR(fi.tail_block(1, 1), e.E1peg2, 1e-8);
}

TEST(FisherInfo, PositiveDefiniteOnSimulatedPaths) {
    const ModelParams t = make(1.0, {0.5, 0.3}, 1.5, 1.0);
    const auto cov = CovariateSpec::harmonic(1.0);
    for (std::uint64_t r = 0; r < 50; ++r) {
        Engine rng(hash_seed({8, r}));
        EXPECT_GT(fisher_info(t, simulate_path(t, cov, 0.0, 1000, 1.0, rng)).min_eigenvalue(), 0.0) << r;
    }
}

TEST(NormalizedQuantities, ObservedInformationNearFisher) {
    // The (beta, beta) entry of I_n carries a zero-mean fluctuation of order
    // log(1/h)^2 / sqrt(n), so a single path at n = 1e4 sits near the 15% mark;
    // the median over paths is held to it, and the gap must shrink with n.
    const ModelParams t = make(1.0, {0.5, 0.3}, 1.5, 1.0);
    const auto cov = CovariateSpec::harmonic(1.0);
    auto median_gap = [&](std::size_t n) {
        std::vector<double> gaps;
        for (std::uint64_t r = 0; r < 40; ++r) {
            Engine rng(hash_seed({2718, n, r}));
            const ObservedPath p = simulate_path(t, cov, 0.0, n, 1.0, rng);
            const NormalizedQuantities nq = normalized_quantities(t, p);
            EXPECT_EQ((nq.info_n - nq.info_n.transpose()).cwiseAbs().maxCoeff(), 0.0);
            const Matrix I = fisher_info(t, p).full();
            gaps.push_back((nq.info_n - I).norm() / I.norm());
        }
        std::nth_element(gaps.begin(), gaps.begin() + 20, gaps.end());
        return gaps[20];
    };
    const double g1 = median_gap(10000), g4 = median_gap(40000);
    EXPECT_LT(g1, 0.15);
    EXPECT_LT(g4, g1);
}

TEST(NormalizedQuantities, StudentizedScoreIsGaussian) {
    // Studentized by the lower Cholesky root of the path Fisher information
    // I(theta), the limit of I_n; I_n itself is indefinite on a few percent of
    // paths at this n.
    const ModelParams t = make(1.0, {0.5, 0.3}, 1.5, 1.0);
    const auto cov = CovariateSpec::harmonic(1.0);
    const int R = 500;
    std::vector<std::vector<double>> z(5);
    for (int r = 0; r < R; ++r) {
        Engine rng(hash_seed({314, static_cast<std::uint64_t>(r)}));
        const ObservedPath p = simulate_path(t, cov, 0.0, 4000, 1.0, rng);
        const NormalizedQuantities nq = normalized_quantities(t, p);
        const Eigen::LLT<Matrix> chol(fisher_info(t, p).full());
        const Vector s = chol.matrixL().solve(nq.delta_n);
        for (int k = 0; k < 5; ++k) z[k].push_back(s(k));
    }
    for (int k = 0; k < 5; ++k) EXPECT_LT(ks_normal(z[k]), ks_critical_1pct(R)) << k;
}

TEST(NormalizedQuantities, CrossBlockVanishes) {
    const ModelParams t = make(1.0, {0.5, 0.3}, 1.5, 1.0);
    const auto cov = CovariateSpec::harmonic(1.0);
    auto mean_cross = [&](std::size_t n) {
        double s = 0.0;
        const int R = 100;
        for (int r = 0; r < R; ++r) {
            Engine rng(hash_seed({5, n, static_cast<std::uint64_t>(r)}));
            const Matrix I = normalized_quantities(t, simulate_path(t, cov, 0.0, n, 1.0, rng)).info_n;
            s += I.topRightCorner(3, 2).cwiseAbs().mean();
        }
        return s / R;
    };
    EXPECT_LT(mean_cross(8000), mean_cross(500));
}
