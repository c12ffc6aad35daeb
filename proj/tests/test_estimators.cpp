#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "stableou/estimators.hpp"

using namespace stableou;

namespace {

ModelParams make(double lambda, std::vector<double> mu, double beta, double sigma) {
    return ModelParams(lambda, Eigen::Map<Vector>(mu.data(), static_cast<Eigen::Index>(mu.size())), StabilityIndex(beta),
                       sigma);
}

ModelParams default_truth() { return make(1.0, {0.5, 0.3}, 1.5, 1.0); }

double lad_objective(const ObservedPath& p, double a, const Vector& mu) {
    const auto n = static_cast<Eigen::Index>(p.n());
    return (p.y().tail(n) - a * p.y().head(n) - p.x_int() * mu).cwiseAbs().sum();
}

double sd(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double rms(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

// y_j = a y_{j-1} + mu . x_int_j exactly.
ObservedPath zero_residual_path(double T, std::size_t n, double lambda, const Vector& mu) {
    const ObservedPath skel =
        ObservedPath::with_covariate(T, Vector::Zero(static_cast<Eigen::Index>(n + 1)), CovariateSpec::harmonic(T));
    const double a = std::exp(-lambda * skel.h());
    Vector y(static_cast<Eigen::Index>(n + 1));
    y(0) = 2.0;
    for (Eigen::Index j = 1; j <= static_cast<Eigen::Index>(n); ++j)
        y(j) = a * y(j - 1) + skel.x_int().row(j - 1).dot(mu);
    return skel.with_y(y);
}

}  // namespace

TEST(Lad, ZeroResidualDataIsRecovered) {
    const Vector mu = (Vector(2) << 0.5, -0.3).finished();
    const ObservedPath p = zero_residual_path(2.0, 500, 1.3, mu);
    const LadResult r = lad_fit(p);
    EXPECT_NEAR(r.lambda, 1.3, 1e-6);
    EXPECT_NEAR(r.mu(0), 0.5, 1e-6);
    EXPECT_NEAR(r.mu(1), -0.3, 1e-6);
    EXPECT_LT(r.objective, 1e-9);
    EXPECT_FALSE(r.projected);
}

TEST(Lad, ScaleEquivariance) {
    Engine rng(11);
    const ObservedPath p = simulate_path(default_truth(), CovariateSpec::harmonic(1.0), 0.0, 800, 1.0, rng);
    const LadResult r = lad_fit(p);
    for (double c : {0.01, 3.0, 250.0}) {
        const LadResult rc = lad_fit(p.with_y(c * p.y()));
        EXPECT_NEAR(rc.a, r.a, 1e-8);
        EXPECT_NEAR(rc.mu(0), c * r.mu(0), 1e-8 * c * (1.0 + std::abs(r.mu(0))));
        EXPECT_NEAR(rc.mu(1), c * r.mu(1), 1e-8 * c * (1.0 + std::abs(r.mu(1))));
    }
}

TEST(Lad, ObjectiveIsMinimal) {
    Engine rng(12);
    const ObservedPath p = simulate_path(default_truth(), CovariateSpec::harmonic(1.0), 0.3, 1000, 1.0, rng);
    const LadResult r = lad_fit(p);
    const double base = lad_objective(p, r.a, r.mu);
    EXPECT_NEAR(base, r.objective, 1e-9 * base);
    for (int k = 0; k < 3; ++k)
        for (double s : {-1e-4, 1e-4}) {
            double a = r.a;
            Vector mu = r.mu;
            if (k == 0) a += s;
            else mu(k - 1) += s;
            EXPECT_GE(lad_objective(p, a, mu), base - 1e-9 * base) << "coordinate " << k << " step " << s;
        }
}

TEST(Lad, DegenerateDesign) {
    const ObservedPath p = ObservedPath::with_integrals(1.0, Vector::LinSpaced(5, 0.0, 1.0), Matrix::Ones(4, 3));
    try {
        lad_fit(p);
        FAIL() << "expected EstimationError";
    } catch (const EstimationError& e) {
        EXPECT_EQ(e.reason(), FailureReason::lad_degenerate_design);
    }
}

TEST(Lad, RateNormalizedErrorDoesNotGrow) {
    const ModelParams t = default_truth();
    std::vector<double> rm;
    for (std::size_t n : {2000u, 4000u}) {
        Engine rng(1000 + n);
        const double rate = std::sqrt(double(n)) * std::pow(1.0 / double(n), 1.0 - 1.0 / t.beta());
        std::vector<double> e;
        for (int i = 0; i < 200; ++i) {
            const ObservedPath p = simulate_path(t, CovariateSpec::harmonic(1.0), 0.0, n, 1.0, rng);
            e.push_back(rate * (lad_fit(p).lambda - t.lambda));
        }
        rm.push_back(rms(e));
    }
    EXPECT_LT(rm[1] / rm[0], 1.6) << rm[0] << " " << rm[1];
}

TEST(PowerVariation, ArithmeticExample) {
    const ObservedPath p =
        ObservedPath::with_covariate(1.0, (Vector(5) << 0, 1, 0, 1, 0).finished(), CovariateSpec::constant(1));
    const PowerVariation pv = power_variation(p, 1.0);
    EXPECT_DOUBLE_EQ(pv.v1, 6.0);
    EXPECT_DOUBLE_EQ(pv.v2, 4.0);
}

TEST(PowerVariation, PolynomialPathsVanish) {
    const ObservedPath c = ObservedPath::with_covariate(1.0, Vector::Constant(50, 1.7), CovariateSpec::constant(1));
    const ObservedPath l = c.with_y(Vector::LinSpaced(50, -2.0, 5.0));
    for (double r : {0.3, 1.0, 1.5}) {
        EXPECT_EQ(power_variation(c, r).v1, 0.0);
        EXPECT_EQ(power_variation(c, r).v2, 0.0);
        // rounding in the differences only
        EXPECT_LT(power_variation(l, r).v1, 49.0 * std::pow(1e-14, r));
        EXPECT_LT(power_variation(l, r).v2, 49.0 * std::pow(1e-14, r));
    }
    EXPECT_THROW(power_variation(c, 0.0), DomainError);
    EXPECT_THROW(power_variation(c, 2.0), DomainError);
}

TEST(PvFit, SigmaEquivariance) {
    Engine rng(21);
    const ObservedPath p = simulate_path(default_truth(), CovariateSpec::harmonic(1.0), 0.0, 2000, 1.0, rng);
    const PvResult r = pv_fit(p, 0.7);
    for (double c : {1e-3, 0.5, 40.0}) {
        const PvResult rc = pv_fit(p.with_y(c * p.y()), 0.7);
        EXPECT_NEAR(rc.beta, r.beta, 1e-12);
        EXPECT_NEAR(rc.sigma, c * r.sigma, 1e-12 * c * r.sigma);
    }
}

TEST(PvFit, PureNoiseBetaIsCentered) {
    const ModelParams t = make(0.0, {0.0}, 1.5, 1.0);
    Engine rng(22);
    double sum = 0.0;
    for (int i = 0; i < 200; ++i) {
        const ObservedPath p = simulate_path(t, CovariateSpec::constant(1), 0.0, 10000, 1.0, rng);
        sum += pv_fit(p, 0.7).beta;
    }
    EXPECT_NEAR(sum / 200.0, 1.5, 0.03);
}

TEST(PvFit, RateNormalizedSpreadIsStable) {
    const ModelParams t = make(0.0, {0.0}, 1.5, 1.0);
    std::vector<double> sb, ss;
    for (std::size_t n : {5000u, 20000u}) {
        Engine rng(3000 + n);
        std::vector<double> b, s;
        for (int i = 0; i < 200; ++i) {
            const ObservedPath p = simulate_path(t, CovariateSpec::constant(1), 0.0, n, 1.0, rng);
            const PvResult r = pv_fit(p, 0.7);
            b.push_back(std::sqrt(double(n)) * (r.beta - 1.5));
            s.push_back(std::sqrt(double(n)) / std::log(double(n)) * (r.sigma - 1.0));
        }
        sb.push_back(sd(b));
        ss.push_back(sd(s));
    }
    EXPECT_LT(std::max(sb[0], sb[1]) / std::min(sb[0], sb[1]), 1.6) << sb[0] << " " << sb[1];
    EXPECT_LT(std::max(ss[0], ss[1]) / std::min(ss[0], ss[1]), 1.6) << ss[0] << " " << ss[1];
}

TEST(PvFit, ConstantPathIsOutOfRange) {
    Engine rng(23);
    SimulationOptions det;
    det.deterministic = true;
    const ObservedPath p = simulate_path(make(0.0, {0.0}, 1.5, 1.0), CovariateSpec::constant(1), 0.4, 200, 1.0, rng, det);
    try {
        pv_fit(p, 0.5);
        FAIL() << "expected EstimationError";
    } catch (const EstimationError& e) {
        EXPECT_EQ(e.reason(), FailureReason::pv_ratio_out_of_range);
    }
}

TEST(PvFit, OrderAboveBetaIsRejected) {
    const ModelParams t = make(0.5, {0.2}, 0.8, 1.0);
    Engine rng(24);
    const ObservedPath p = simulate_path(t, CovariateSpec::constant(1), 0.0, 4000, 1.0, rng);
    PreliminaryOptions o;
    o.fix_r = 1.0;
    try {
        initial_estimate(p, o);
        FAIL() << "expected EstimationError";
    } catch (const EstimationError& e) {
        EXPECT_EQ(e.reason(), FailureReason::r_outside_beta_window);
        EXPECT_STREQ(to_string(e.reason()), "r >= beta window");
    }
}

TEST(RWindow, EndpointsAreOrdered) {
    for (double b : {0.7, 0.9, 1.0, 1.2, 1.5, 1.8, 1.99}) {
        const auto [lo, hi] = r_window(b);
        EXPECT_LT(lo, hi) << b;
        EXPECT_GE(lo, 0.0);
        EXPECT_LT(hi, 1.0);
    }
    EXPECT_DOUBLE_EQ(r_window(0.8).first, 0.2 / 1.6);
    EXPECT_DOUBLE_EQ(r_window(1.5).second, 0.75);
}

TEST(InitialEstimate, FixedOrderSkipsPilot) {
    Engine rng(31);
    const ObservedPath p = simulate_path(default_truth(), CovariateSpec::harmonic(1.0), 0.0, 4000, 1.0, rng);
    PreliminaryOptions o;
    o.fix_r = 1.0;
    const PreliminaryEstimate e = initial_estimate(p, o);
    EXPECT_EQ(e.r_used, 1.0);
    EXPECT_EQ(e.beta_pilot, 0.0);
    const PreliminaryEstimate d = initial_estimate(p);
    EXPECT_GT(d.beta_pilot, 1.0);
    const auto [lo, hi] = r_window(d.beta_pilot);
    EXPECT_NEAR(d.r_used, 0.5 * (lo + hi), 1e-15);
}

TEST(InitialEstimate, WithinFewRateUnits) {
    const ModelParams t = default_truth();
    const std::size_t n = 4000;
    const double h = 1.0 / n;
    const double rd = std::sqrt(double(n)) * std::pow(h, 1.0 - 1.0 / t.beta());
    int ok = 0;
    Engine rng(32);
    for (int i = 0; i < 50; ++i) {
        const ObservedPath p = simulate_path(t, CovariateSpec::harmonic(1.0), 0.0, n, 1.0, rng);
        const ModelParams e = initial_estimate(p).theta0;
        const double z = std::max({rd * std::abs(e.lambda - t.lambda), rd * (e.mu - t.mu).cwiseAbs().maxCoeff(),
                                   std::sqrt(double(n)) * std::abs(e.beta() - t.beta()),
                                   std::sqrt(double(n)) / std::log(1.0 / h) * std::abs(e.sigma - t.sigma)});
        ok += z < 10.0;
    }
    EXPECT_GE(ok, 47);
}

TEST(InitialEstimate, NoiselessPathFailsInPowerVariation) {
    Engine rng(33);
    SimulationOptions det;
    det.deterministic = true;
    const ObservedPath p = simulate_path(make(0.0, {0.0}, 1.5, 1.0), CovariateSpec::constant(1), 1.0, 300, 1.0, rng, det);
    try {
        initial_estimate(p);
        FAIL() << "expected EstimationError";
    } catch (const EstimationError& e) {
        EXPECT_EQ(e.reason(), FailureReason::pv_ratio_out_of_range);
        EXPECT_EQ(e.stage(), "power_variation");
    }
}

TEST(OneStep, CriticalPointIsFixed) {
    Engine rng(41);
    const ObservedPath p = simulate_path(default_truth(), CovariateSpec::harmonic(1.0), 0.0, 2000, 1.0, rng);
    TabulatedFamily fam(8);
    const PreliminaryEstimate pre = initial_estimate(p);
    const ModelParams t1 = one_step(p, pre.theta0, fam, {}, StepInformation::fisher).theta1;
    const RefineResult mle = newton_refine(p, t1, 50, fam, {}, 1e-10);
    ASSERT_TRUE(mle.converged);
    const Vector se = studentize(p, mle.theta, fam).stderr_;
    for (StepInformation si : {StepInformation::observed, StepInformation::fisher}) {
        const Vector d = one_step(p, mle.theta, fam, {}, si).theta1.to_vector() - mle.theta.to_vector();
        EXPECT_LT(d.cwiseQuotient(se).cwiseAbs().maxCoeff(), 1e-6);
    }
    const RefineResult again = newton_refine(p, mle.theta, 5, fam);
    EXPECT_EQ(again.iterations, 0);
    EXPECT_TRUE(again.converged);
}

TEST(OneStep, ImprovesOnPreliminary) {
    const ModelParams t = default_truth();
    const std::size_t n = 4000;
    const NormingMatrix nm = norming_matrix(t, n, 1.0);
    const Matrix phi_inv = nm.full(t.q()).inverse();
    Engine rng(42);
    TabulatedFamily fam(8);
    std::vector<double> n0, n1;
    for (int i = 0; i < 60; ++i) {
        const ObservedPath p = simulate_path(t, CovariateSpec::harmonic(1.0), 0.0, n, 1.0, rng);
        const PreliminaryEstimate pre = initial_estimate(p);
        const ModelParams t1 = one_step(p, pre.theta0, fam).theta1;
        n0.push_back((phi_inv * (pre.theta0.to_vector() - t.to_vector())).norm());
        n1.push_back((phi_inv * (t1.to_vector() - t.to_vector())).norm());
    }
    std::nth_element(n0.begin(), n0.begin() + 30, n0.end());
    std::nth_element(n1.begin(), n1.begin() + 30, n1.end());
    EXPECT_LT(n1[30], n0[30]);
}

TEST(Refine, NormalizedScoreVanishes) {
    const ModelParams t = default_truth();
    Engine rng(43);
    EstimateOptions o;
    o.pipeline = Pipeline::refined;
    int ok = 0;
    const int reps = 40;
    for (int i = 0; i < reps; ++i) {
        const ObservedPath p = simulate_path(t, CovariateSpec::harmonic(1.0), 0.0, 2000, 1.0, rng);
        const EstimationResult r = estimate(p, o);
        ASSERT_TRUE(r.theta_mle.has_value());
        ok += r.refine_gradient_norm < 1e-6;
    }
    EXPECT_GE(ok, 38);
}

TEST(Studentize, IntervalsAreWellFormed) {
    Engine rng(44);
    const ObservedPath p = simulate_path(default_truth(), CovariateSpec::harmonic(1.0), 0.0, 3000, 1.0, rng);
    const EstimationResult r = estimate(p);
    ASSERT_TRUE(r.inference.has_value());
    const Studentized& s = *r.inference;
    const Vector th = r.estimate().to_vector();
    ASSERT_EQ(s.ci95.size(), static_cast<std::size_t>(th.size()));
    for (Eigen::Index k = 0; k < th.size(); ++k) {
        EXPECT_GT(s.stderr_(k), 0.0);
        EXPECT_LT(s.ci95[k].first, th(k));
        EXPECT_GT(s.ci95[k].second, th(k));
        EXPECT_NEAR(0.5 * (s.ci95[k].first + s.ci95[k].second), th(k), 1e-12 * (1.0 + std::abs(th(k))));
    }
    EXPECT_LT((s.covariance - s.covariance.transpose()).norm(), 1e-12 * s.covariance.norm());
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(s.covariance).eigenvalues()(0), 0.0);
}

TEST(Estimate, PipelineStagesArePopulated) {
    Engine rng(45);
    const ObservedPath p = simulate_path(default_truth(), CovariateSpec::harmonic(1.0), 0.0, 1500, 1.0, rng);
    EstimateOptions o;
    o.pipeline = Pipeline::preliminary;
    const EstimationResult a = estimate(p, o);
    EXPECT_FALSE(a.theta1 || a.theta_mle || a.inference);
    o.pipeline = Pipeline::one_step;
    const EstimationResult b = estimate(p, o);
    EXPECT_TRUE(b.theta1 && b.inference && !b.theta_mle);
    o.pipeline = Pipeline::refined;
    const EstimationResult c = estimate(p, o);
    EXPECT_TRUE(c.theta1 && c.inference && c.theta_mle);
    EXPECT_EQ(a.prelim.theta0.to_vector(), c.prelim.theta0.to_vector());
    EXPECT_STREQ(to_string(Pipeline::one_step), "one-step");
}

TEST(PvFit, OrderGuardSeparatesBetaBelowAndAboveOne) {
    Engine rng(25);
    int rejected_low = 0, accepted_high = 0;
    for (int i = 0; i < 20; ++i) {
        const ObservedPath lo = simulate_path(make(0.5, {0.2}, 0.8, 1.0), CovariateSpec::constant(1), 0.0, 4000, 1.0, rng);
        const ObservedPath hi = simulate_path(make(0.5, {0.2}, 1.5, 1.0), CovariateSpec::constant(1), 0.0, 4000, 1.0, rng);
        try {
            pv_fit(lo, 1.0);
        } catch (const EstimationError& e) {
            rejected_low += e.reason() == FailureReason::r_outside_beta_window;
        }
        try {
            pv_fit(hi, 1.0);
            ++accepted_high;
        } catch (const EstimationError&) {
        }
    }
    EXPECT_EQ(rejected_low, 20);
    EXPECT_EQ(accepted_high, 20);
}
