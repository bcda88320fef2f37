#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <l2frac/monotonicity.hpp>
#include <l2frac/solvers.hpp>

using namespace l2frac;

namespace {

// sigma_bar by bisection on g_L - g_R to full double precision; values
// frozen from a 30-digit evaluation of the same bisection.
struct SigmaBarOracle {
    double alpha;
    double theta;
    double value;
};

const SigmaBarOracle sigma_bar_table[] = {
    {0.1, 0.5, 0.018590361389869938}, {0.1, 0.75, 0.035179207860479427}, {0.1, 1.0, 0.040626552953371707},
    {0.3, 0.5, 0.040854930019107968}, {0.3, 0.75, 0.087918105222794443}, {0.3, 1.0, 0.10338357616671713},
    {0.5, 0.5, 0.048245042396223677}, {0.5, 0.75, 0.12884119539701944},  {0.5, 1.0, 0.15614177300236493},
    {0.7, 0.5, 0.041743706066360537}, {0.7, 0.75, 0.16488464631510278},  {0.7, 1.0, 0.20998637015168465},
    {0.9, 0.5, 0.01896990678372399},  {0.9, 0.75, 0.20206061032021418},  {0.9, 1.0, 0.28596925389507891},
};

double bisect_sigma_bar(double alpha, double theta)
{
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (sigma_bar_gL(mid, alpha) - sigma_bar_gR(mid, alpha, theta) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

/// Mesh with a prescribed, decreasing skew sequence in [0, smax].
TemporalMesh random_admissible_mesh(std::mt19937_64& rng, int M, double smax)
{
    std::uniform_real_distribution<double> u(0.0, smax);
    std::vector<double> sig;
    for (int j = 2; j <= M; ++j) {
        sig.push_back(u(rng));
    }
    std::sort(sig.begin(), sig.end(), std::greater<>());
    std::vector<double> nodes{0.0, 1.0};
    double tau = 1.0;
    for (const double s : sig) {
        tau *= (1.0 + s) / (1.0 - s);
        nodes.push_back(nodes.back() + tau);
    }
    const double T = nodes.back();
    for (double& t : nodes) {
        t /= T;
    }
    nodes.back() = 1.0;
    return TemporalMesh(nodes);
}

} // namespace

TEST(UniformConstants, ClosedForms)
{
    const UniformConstants a = uniform_constants(0.5);
    EXPECT_NEAR(a.B, 10.0 / 3.0, 1e-15);
    EXPECT_NEAR(a.A_prime, 8.0 / 3.0, 1e-15);
    EXPECT_NEAR(a.nu, 0.98958333333333333, 1e-15);
    const UniformConstants b = uniform_constants(0.3);
    EXPECT_NEAR(b.B, 1.9327731092436975, 1e-15);
    EXPECT_NEAR(b.A_prime, 1.0084033613445378, 1e-15);
    EXPECT_NEAR(b.nu, 0.98541666666666667, 1e-15);
    for (const double alpha : {0.05, 0.3, 0.6, 0.95}) {
        const UniformConstants c = uniform_constants(alpha);
        EXPECT_NEAR(c.B / c.A_prime, (alpha + 2.0) / (4.0 * alpha), 1e-14);
        EXPECT_GT(c.nu, 47.0 / 48.0);
        EXPECT_LT(c.nu, 1.0);
    }
    EXPECT_THROW(uniform_constants(0.0), std::invalid_argument);
    EXPECT_THROW(uniform_constants(1.0), std::invalid_argument);
}

TEST(Eta, ValuesAndShape)
{
    EXPECT_NEAR(eta(0.0, 0.5), 1.25, 1e-15);
    EXPECT_NEAR(eta(0.2, 0.5), 1.12, 1e-14);
    EXPECT_LT(eta(1.0 - 1e-9, 0.5), 1e-8);
    double prev = eta(0.0, 0.4);
    for (int i = 1; i < 100; ++i) {
        const double v = eta(i / 100.0, 0.4);
        EXPECT_LT(v, prev);
        EXPECT_GT(v, 0.0);
        prev = v;
    }
    EXPECT_THROW(eta(-0.1, 0.5), std::invalid_argument);
    EXPECT_THROW(eta(1.0, 0.5), std::invalid_argument);
}

TEST(BetaSchedule, UniformValue)
{
    const TemporalMesh mesh = build_graded({1.0, 16, 1.0, MeshVariant::uniform, 1});
    const auto beta = beta_schedule(mesh, 0.5, 1.0);
    for (int j = 1; j <= 16; ++j) {
        EXPECT_NEAR(beta[static_cast<std::size_t>(j)], 0.39583333333333333, 1e-14);
    }
}

TEST(BetaSchedule, SkewValueAndMonotonicity)
{
    // tau_2/tau_1 = 1.5 gives sigma_2 = 0.2
    const TemporalMesh mesh({0.0, 1.0, 2.5, 4.0});
    const auto beta = beta_schedule(mesh, 0.5, 1.0);
    EXPECT_NEAR(beta[2], 0.44177827380952381, 1e-14);
    EXPECT_EQ(beta[1], beta[2]);

    const TemporalMesh graded = build_graded({1.0, 50, 3.0, MeshVariant::graded, 1});
    const auto b = beta_schedule(graded, 0.4, 0.75);
    for (int j = 2; j < 50; ++j) {
        EXPECT_GE(b[static_cast<std::size_t>(j)], b[static_cast<std::size_t>(j) + 1]);
        EXPECT_GT(b[static_cast<std::size_t>(j) + 1], 0.0);
    }
}

TEST(BetaSchedule, PrefixReset)
{
    const TemporalMesh mesh = build_graded({1.0, 20, 2.0, MeshVariant::graded, 1});
    const auto b = beta_schedule(mesh, 0.5, 1.0, 4);
    for (int j = 1; j <= 4; ++j) {
        EXPECT_EQ(b[static_cast<std::size_t>(j)], b[5]);
    }
    EXPECT_THROW(beta_schedule(mesh, 0.5, 0.4), std::invalid_argument);
    EXPECT_THROW(beta_schedule(mesh, 0.5, 1.0, 20), std::invalid_argument);
}

TEST(SigmaBar, StartsFromStrictInequality)
{
    EXPECT_GT(sigma_bar_gL(0.0, 0.5), sigma_bar_gR(0.0, 0.5, 1.0));
    EXPECT_NEAR(sigma_bar_gL(0.0, 0.5), 2.125, 1e-15);
}

TEST(SigmaBar, MatchesFrozenBisection)
{
    for (const auto& o : sigma_bar_table) {
        const SigmaBarResult s = sigma_bar(o.alpha, o.theta);
        EXPECT_NEAR(s.value, o.value, 1e-12) << o.alpha << ", " << o.theta;
        EXPECT_NEAR(bisect_sigma_bar(o.alpha, o.theta), o.value, 1e-14);
        EXPECT_LE(s.residual, 1e-12);
        ASSERT_GE(s.iterates.size(), 2u);
        EXPECT_EQ(s.iterates.front(), 0.0);
        for (std::size_t q = 1; q < s.iterates.size(); ++q) {
            EXPECT_GE(s.iterates[q], s.iterates[q - 1]);
            EXPECT_GT(s.iterates[q], 0.0);
            EXPECT_LT(s.iterates[q], 1.0);
        }
    }
}

TEST(SigmaBar, RejectsBadInput)
{
    EXPECT_THROW(sigma_bar(0.5, 0.49), std::invalid_argument);
    EXPECT_THROW(sigma_bar(1.2, 1.0), std::invalid_argument);
}

TEST(ComputeK, Thresholds)
{
    // rho_bar = 2 <=> sigma_bar = 1/3
    EXPECT_EQ(compute_K(2.0, 1.0 / 3.0), 2);
    EXPECT_EQ(compute_K(1.0, 0.01), 1);
    // rho_bar = 3 = 2^2 - 1 <=> sigma_bar = 1/2
    EXPECT_EQ(compute_K(2.0, 0.5), 1);
    EXPECT_EQ(compute_K(2.0, 0.6), 1);
    const double sb = sigma_bar(0.5, 1.0).value;
    for (const double r : {2.0, 3.0, 5.0, 9.0}) {
        const int K = compute_K(r, sb);
        const double rho_bar = 2.0 / (1.0 - sb) - 1.0;
        auto ratio = [r](int k) { return (std::pow(1.0 + 1.0 / k, r) - 1.0) / (1.0 - std::pow(1.0 - 1.0 / k, r)); };
        EXPECT_LE(ratio(K), rho_bar);
        if (K > 1) {
            EXPECT_GT(ratio(K - 1), rho_bar);
        }
    }
    EXPECT_THROW(compute_K(0.5, 0.1), std::invalid_argument);
    EXPECT_THROW(compute_K(2.0, 0.0), std::invalid_argument);
}

TEST(SigmaStar, ParabolicThreshold)
{
    const ParabolicThreshold p = sigma_star(0.5, 0.5);
    EXPECT_NEAR(p.rho_bar_star, 81.0, 1e-12);
    EXPECT_NEAR(p.sigma_star, std::min(p.sigma_bar, 1.0 - 2.0 / 82.0), 1e-15);
    for (const double alpha : {0.2, 0.7}) {
        EXPECT_NEAR(sigma_star(alpha, 0.5).rho_bar_star, std::pow(3.0, 2.0 / alpha), 1e-9);
    }
    EXPECT_LT(sigma_star(0.5, 0.999999).sigma_star, 1e-5);
    EXPECT_THROW(sigma_star(0.5, 1.0), std::invalid_argument);
}

TEST(Certify, UniformMeshesPass)
{
    for (int i = 1; i <= 9; ++i) {
        const double alpha = 0.1 * i;
        const TemporalMesh mesh = build_graded({1.0, 64, 1.0, MeshVariant::uniform, 1});
        const MonotoneCertificate c = certify(mesh, alpha, 1.0);
        EXPECT_TRUE(c.passed()) << "alpha " << alpha;
        EXPECT_TRUE(c.inverse_checked);
        EXPECT_GE(c.inverse_min_entry, -1e-12);
    }
}

TEST(Certify, L1StartOnGradedMeshPasses)
{
    const double alpha = 0.5;
    const int K = compute_K(2.0, sigma_bar(alpha, 1.0).value);
    const TemporalMesh mesh = build_graded({1.0, 64, 2.0, MeshVariant::graded, 1});
    const MonotoneCertificate c = certify(mesh, alpha, 1.0, OperatorVariant::l1_start(K));
    EXPECT_TRUE(c.passed());
    EXPECT_EQ(c.K, K);
    // the standard operator on the same mesh breaks sigma admissibility
    const MonotoneCertificate s = certify(mesh, alpha, 1.0);
    EXPECT_FALSE(s.passed());
    ASSERT_TRUE(s.first_failure.has_value());
    EXPECT_EQ(s.first_failure->condition, "sigma_admissible");
}

TEST(Certify, RatioBoundOnCertifiedMeshes)
{
    for (const double theta : {0.5, 0.75, 1.0}) {
        const double alpha = 0.4;
        const int K = compute_K(3.0, sigma_bar(alpha, theta).value);
        const TemporalMesh mesh = build_graded({1.0, 96, 3.0, MeshVariant::modified_graded, K});
        const MonotoneCertificate c = certify(mesh, alpha, theta);
        ASSERT_TRUE(c.passed()) << theta;
        for (const auto& k : c.checks) {
            if (k.m >= 3) {
                ASSERT_TRUE(k.ratio_applies);
                EXPECT_LE(k.ratio, theta / (2.0 - theta) * (1.0 + 1e-12));
            }
        }
    }
}

TEST(Certify, ReportsSkewIncrease)
{
    const TemporalMesh mesh({0.0, 0.1, 0.2, 0.3, 0.45, 0.6, 0.75, 1.0});
    const MonotoneCertificate c = certify(mesh, 0.5, 1.0);
    EXPECT_FALSE(c.passed());
    ASSERT_TRUE(c.first_failure.has_value());
    EXPECT_EQ(c.first_failure->condition, "sigma_admissible");
    EXPECT_EQ(c.first_failure->m, 4);
}

TEST(Factorize, ZeroBetaIsTrivial)
{
    const TemporalMesh mesh = build_graded({1.0, 10, 2.0, MeshVariant::graded, 1});
    const OperatorMatrix op = build_operator(mesh, 0.5);
    const FactorPair f = factorize(op, std::vector<double>(11, 0.0));
    const DenseMatrix H = augmented_matrix(op);
    for (std::size_t i = 0; i <= 10; ++i) {
        for (std::size_t j = 0; j <= 10; ++j) {
            EXPECT_EQ(f.A2(i, j), i == j ? 1.0 : 0.0);
            EXPECT_NEAR(f.A1(i, j), H(i, j), 1e-15 * std::abs(H(i, i)));
        }
    }
}

TEST(Factorize, ProductReproducesOperatorOnRandomMeshes)
{
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> steps(4, 64);
    std::uniform_real_distribution<double> ua(0.1, 0.9);
    for (int trial = 0; trial < 20; ++trial) {
        const double alpha = ua(rng);
        const double theta = 1.0;
        const double sb = sigma_bar(alpha, theta).value;
        const TemporalMesh mesh = random_admissible_mesh(rng, steps(rng), sb);
        const MonotoneCertificate cert = certify(mesh, alpha, theta);
        ASSERT_TRUE(cert.passed()) << "trial " << trial;
        const OperatorMatrix op = build_operator(mesh, alpha);
        const FactorPair f = factorize(op, cert.betas);
        const DenseMatrix H = augmented_matrix(op);
        const DenseMatrix P = multiply_lower(f.A1, f.A2);
        DenseMatrix diff(H.size());
        for (std::size_t i = 0; i < H.size(); ++i) {
            for (std::size_t j = 0; j < H.size(); ++j) {
                diff(i, j) = P(i, j) - H(i, j);
            }
        }
        EXPECT_LE(norm_inf(diff) / norm_inf(H), 1e-12);
        EXPECT_TRUE(has_m_matrix_sign_pattern(f.A1));
        EXPECT_TRUE(has_m_matrix_sign_pattern(f.A2));
        // kappa rows: positive diagonal, zero row sums
        for (int m = 1; m <= op.steps(); ++m) {
            double sum = 0.0;
            for (int j = 0; j <= m; ++j) {
                sum += f.kappa(m, j);
            }
            EXPECT_GT(f.kappa(m, m), 0.0);
            EXPECT_LE(std::abs(sum), 1e-12 * f.kappa(m, m));
        }
    }
}

TEST(Factorize, UniformMeshSignPattern)
{
    const TemporalMesh mesh = build_graded({1.0, 64, 1.0, MeshVariant::uniform, 1});
    const MonotoneCertificate cert = certify(mesh, 0.5, 1.0);
    const FactorPair f = factorize(build_operator(mesh, 0.5), cert.betas);
    EXPECT_TRUE(has_m_matrix_sign_pattern(f.A1));
    EXPECT_TRUE(has_m_matrix_sign_pattern(f.A2));
}

TEST(Factorize, RejectsBadBetas)
{
    const TemporalMesh mesh = build_graded({1.0, 4, 2.0, MeshVariant::graded, 1});
    const OperatorMatrix op = build_operator(mesh, 0.5);
    EXPECT_THROW(factorize(op, {0.0, 0.5, 1.0, 0.2, 0.2}), std::invalid_argument);
    EXPECT_THROW(factorize(op, {0.0, 0.5, -0.1, 0.2, 0.2}), std::invalid_argument);
    EXPECT_THROW(factorize(op, {0.0, 0.5}), std::invalid_argument);
}

TEST(Factorize, KappaZeroStaysNegative)
{
    const double alpha = 0.5;
    const int K = compute_K(4.0, sigma_bar(alpha, 1.0).value);
    for (const int M : {32, 64, 128}) {
        const TemporalMesh mesh = build_graded({1.0, M, 4.0, MeshVariant::modified_graded, K});
        const MonotoneCertificate cert = certify(mesh, alpha, 1.0, OperatorVariant::standard(), {false, 512, 1e-12});
        const FactorPair f = factorize(build_operator(mesh, alpha), cert.betas);
        double lo = 1e300;
        for (int m = 3; m <= M; ++m) {
            EXPECT_LT(f.kappa(m, 0), 0.0);
            lo = std::min(lo, std::pow(mesh.t(m), alpha) * -f.kappa(m, 0));
        }
        EXPECT_GT(lo, 0.0);
        RecordProperty("min_scaled_kappa0_M" + std::to_string(M), std::to_string(lo));
    }
}

TEST(InverseCheck, Identity)
{
    const InverseCheck c = verify_inverse_nonneg(DenseMatrix::identity(5));
    EXPECT_TRUE(c.nonnegative);
    EXPECT_EQ(c.min_entry, 0.0);
}

TEST(InverseCheck, ModifiedMeshesNonNegative)
{
    for (const double alpha : {0.3, 0.5, 0.7}) {
        const double sb = sigma_bar(alpha, 1.0).value;
        for (const double r : {2.0, 3.0, 5.0}) {
            const TemporalMesh mesh = build_graded({1.0, 128, r, MeshVariant::modified_graded, compute_K(r, sb)});
            const InverseCheck c = verify_inverse_nonneg(build_operator(mesh, alpha));
            EXPECT_TRUE(c.nonnegative) << alpha << " " << r;
            EXPECT_GE(c.min_entry, -1e-12);
        }
    }
}

TEST(InverseCheck, ClassicalL1IsNonNegative)
{
    const TemporalMesh mesh = build_graded({1.0, 48, 3.0, MeshVariant::graded, 1});
    const OperatorMatrix op = build_operator(mesh, 0.6, OperatorVariant::l1_start(48));
    EXPECT_TRUE(verify_inverse_nonneg(op).nonnegative);
}

TEST(InverseCheck, FactorPairAgrees)
{
    const TemporalMesh mesh = build_graded({1.0, 40, 1.0, MeshVariant::uniform, 1});
    const OperatorMatrix op = build_operator(mesh, 0.5);
    const MonotoneCertificate cert = certify(mesh, 0.5, 1.0);
    const InverseCheck a = verify_inverse_nonneg(op);
    const InverseCheck b = verify_inverse_nonneg(factorize(op, cert.betas));
    EXPECT_NEAR(a.min_entry, b.min_entry, 1e-12);
}

TEST(InverseCheck, CapAndSingularity)
{
    const TemporalMesh mesh = build_graded({1.0, 600, 1.0, MeshVariant::uniform, 1});
    EXPECT_THROW(verify_inverse_nonneg(build_operator(mesh, 0.5)), std::invalid_argument);
    DenseMatrix s = DenseMatrix::identity(3);
    s(1, 1) = 0.0;
    EXPECT_THROW(verify_inverse_nonneg(s), std::invalid_argument);
}

TEST(ComparisonPrinciple, NonNegativeDataGiveNonNegativeSolutions)
{
    const double alpha = 0.5;
    const int K = compute_K(3.0, sigma_bar(alpha, 1.0).value);
    const TemporalMesh mesh = build_graded({1.0, 128, 3.0, MeshVariant::modified_graded, K});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> f(129);
        for (double& v : f) {
            v = u(rng) < 0.3 ? 0.0 : u(rng);
        }
        ScalarProblem p{alpha, 1.0, [&](double t) { return f[static_cast<std::size_t>(
                                                        std::lower_bound(mesh.nodes().begin(), mesh.nodes().end(), t) -
                                                        mesh.nodes().begin())]; },
                        0.0, {}};
        const SolveResult res = solve_scalar(p, mesh);
        for (const double v : res.U) {
            EXPECT_GE(v, -1e-12);
        }
    }
}

TEST(EnergyCondition, UniformAndThresholdMeshes)
{
    const TemporalMesh uni = build_graded({1.0, 32, 1.0, MeshVariant::uniform, 1});
    const auto cu = certify(uni, 0.5, 0.5);
    for (const auto& e : check_energy_condition(uni, 0.5, 0.5, cu.betas)) {
        EXPECT_TRUE(e.sufficient_pass);
        EXPECT_TRUE(e.exact_pass);
        EXPECT_NEAR(e.step_ratio, 1.0, 1e-12);
    }

    const double alpha = 0.5;
    const double theta = 0.5;
    const int K = compute_K(3.0, sigma_star(alpha, theta).sigma_star);
    const TemporalMesh mesh = build_graded({1.0, 64, 3.0, MeshVariant::modified_graded, K});
    EXPECT_LE(mesh.rho(2), 81.0);
    const auto cert = certify(mesh, alpha, theta);
    ASSERT_TRUE(cert.passed());
    for (const auto& e : check_energy_condition(mesh, alpha, theta, cert.betas)) {
        EXPECT_TRUE(e.sufficient_pass) << e.m;
        // the sufficient form implies the exact one
        EXPECT_TRUE(e.exact_pass) << e.m;
    }
}
