#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include <l2frac/temporal_mesh.hpp>

using namespace l2frac;

TEST(BuildGraded, QuadraticGradingNodes)
{
    const TemporalMesh mesh = build_graded({1.0, 4, 2.0, MeshVariant::graded, 1});
    const std::vector<double> expected{0.0, 1.0 / 16, 0.25, 9.0 / 16, 1.0};
    ASSERT_EQ(mesh.steps(), 4);
    for (int j = 0; j <= 4; ++j) {
        EXPECT_DOUBLE_EQ(mesh.t(j), expected[static_cast<std::size_t>(j)]);
    }
}

TEST(BuildGraded, ExponentOneIsUniform)
{
    const TemporalMesh g = build_graded({1.0, 4, 1.0, MeshVariant::graded, 1});
    const TemporalMesh u = build_graded({1.0, 4, 3.0, MeshVariant::uniform, 1});
    for (int j = 0; j <= 4; ++j) {
        EXPECT_DOUBLE_EQ(g.t(j), 0.25 * j);
        EXPECT_DOUBLE_EQ(u.t(j), 0.25 * j);
    }
}

TEST(BuildGraded, ModifiedWithShiftOneMatchesGraded)
{
    const TemporalMesh g = build_graded({1.0, 4, 2.0, MeshVariant::graded, 1});
    const TemporalMesh m = build_graded({1.0, 4, 2.0, MeshVariant::modified_graded, 1});
    for (int j = 0; j <= 4; ++j) {
        EXPECT_DOUBLE_EQ(g.t(j), m.t(j));
    }
}

TEST(BuildGraded, ModifiedMeshFormula)
{
    const int M = 10;
    const int K = 3;
    const double r = 2.5;
    const TemporalMesh mesh = build_graded({2.0, M, r, MeshVariant::modified_graded, K});
    const double top = modified_graded_scale(M, r, K);
    for (int j = 0; j <= M; ++j) {
        const double hat = std::pow((j + K - 1.0) / M, r) - std::pow((K - 1.0) / M, r);
        EXPECT_NEAR(mesh.t(j), 2.0 * hat / top, 1e-15);
    }
    // its step ratios are those of the standard graded mesh shifted by K - 1
    const TemporalMesh g = build_graded({1.0, M + K, r, MeshVariant::graded, 1});
    EXPECT_NEAR(mesh.rho(2), g.rho(K + 1), 1e-12);
}

TEST(BuildGraded, LastNodeIsExactlyT)
{
    const TemporalMesh mesh = build_graded({3.7, 1000, 4.3, MeshVariant::graded, 1});
    EXPECT_EQ(mesh.final_time(), 3.7);
}

TEST(BuildGraded, RejectsInvalidSpecs)
{
    EXPECT_THROW(build_graded({1.0, 1, 2.0, MeshVariant::graded, 1}), std::invalid_argument);
    EXPECT_THROW(build_graded({1.0, 8, 0.5, MeshVariant::graded, 1}), std::invalid_argument);
    EXPECT_THROW(build_graded({0.0, 8, 2.0, MeshVariant::graded, 1}), std::invalid_argument);
    EXPECT_THROW(build_graded({1.0, 8, 2.0, MeshVariant::modified_graded, 0}), std::invalid_argument);
}

TEST(TemporalMesh, RejectsBadNodes)
{
    EXPECT_THROW(TemporalMesh({0.0}), std::invalid_argument);
    EXPECT_THROW(TemporalMesh({0.1, 0.5, 1.0}), std::invalid_argument);
    EXPECT_THROW(TemporalMesh({0.0, 0.5, 0.5, 1.0}), std::invalid_argument);
    EXPECT_THROW(TemporalMesh({0.0, 0.5, std::numeric_limits<double>::infinity()}), std::invalid_argument);
}

TEST(MeshQuantities, HandValues)
{
    const TemporalMesh mesh = build_graded({1.0, 4, 2.0, MeshVariant::graded, 1});
    const MeshQuantities q = mesh_quantities(mesh);
    EXPECT_DOUBLE_EQ(q.tau[1], 1.0 / 16);
    EXPECT_DOUBLE_EQ(q.tau[2], 3.0 / 16);
    EXPECT_DOUBLE_EQ(q.sigma[2], 0.5);
    EXPECT_DOUBLE_EQ(q.rho[2], 3.0);
    EXPECT_DOUBLE_EQ(q.sigma[3], 0.25);
    EXPECT_DOUBLE_EQ(q.tilde_tau[1], 1.0 / 16);
    EXPECT_DOUBLE_EQ(q.tilde_tau[2], 0.125);
    EXPECT_TRUE(std::isnan(q.rho[1]));
    EXPECT_TRUE(std::isnan(q.sigma[1]));
}

TEST(MeshQuantities, UniformMeshHasNoSkew)
{
    const TemporalMesh mesh = build_graded({2.0, 16, 1.0, MeshVariant::uniform, 1});
    for (int j = 2; j <= 16; ++j) {
        EXPECT_NEAR(mesh.sigma(j), 0.0, 1e-14);
        EXPECT_NEAR(mesh.rho(j), 1.0, 1e-13);
    }
}

TEST(MeshQuantities, SkewAndRatioAreConsistent)
{
    const TemporalMesh mesh({0.0, 0.1, 0.15, 0.4, 1.0, 1.1});
    for (int j = 2; j <= mesh.steps(); ++j) {
        EXPECT_NEAR(mesh.sigma(j), 1.0 - 2.0 / (1.0 + mesh.rho(j)), 1e-14);
        EXPECT_GT(mesh.sigma(j), -1.0);
        EXPECT_LT(mesh.sigma(j), 1.0);
    }
}

TEST(Regularity, GradedMeshesAreSigmaMonotone)
{
    for (const double r : {1.0, 1.5, 2.0, 3.0, 5.0, 9.0}) {
        const TemporalMesh mesh = build_graded({1.0, 256, r, MeshVariant::graded, 1});
        const RegularityReport rep = check_mesh_regularity(mesh, r);
        EXPECT_TRUE(rep.sigma_monotone_nonnegative) << "r = " << r;
        EXPECT_TRUE(rep.rho_monotone_at_least_one) << "r = " << r;
        EXPECT_NEAR(rep.tau1_scaled.min, 1.0, 1e-12);
        EXPECT_NEAR(rep.node_similarity.min, 1.0, 1e-12);
        EXPECT_NEAR(rep.node_similarity.max, 1.0, 1e-12);
        // tau_j j / t_j lies in [1, r] for t_j = (j/M)^r
        EXPECT_GE(rep.step_similarity.min, 1.0 - 1e-12);
        EXPECT_LE(rep.step_similarity.max, r + 1e-12);
    }
}

TEST(Regularity, UniformStepSimilarityIsOne)
{
    const TemporalMesh mesh = build_graded({1.0, 32, 1.0, MeshVariant::uniform, 1});
    const RegularityReport rep = check_mesh_regularity(mesh, 1.0);
    EXPECT_NEAR(rep.step_similarity.min, 1.0, 1e-12);
    EXPECT_NEAR(rep.step_similarity.max, 1.0, 1e-12);
}

TEST(Regularity, DetectsSkewIncrease)
{
    const TemporalMesh mesh({0.0, 0.1, 0.15, 0.4, 1.0});
    const RegularityReport rep = check_mesh_regularity(mesh, 1.0);
    EXPECT_FALSE(rep.sigma_monotone_nonnegative);
    EXPECT_EQ(rep.first_sigma_violation, 2);
}

TEST(MeshFile, RoundTripWithHeader)
{
    std::istringstream in("# T=1 M=4\n0\n0.0625\n0.25\n# comment\n0.5625\n1\n");
    const TemporalMesh mesh = parse_mesh(in);
    EXPECT_EQ(mesh.steps(), 4);
    EXPECT_DOUBLE_EQ(mesh.sigma(2), 0.5);
}

TEST(MeshFile, RejectsInconsistentHeader)
{
    std::istringstream wrong_m("# T=1 M=5\n0\n0.5\n1\n");
    EXPECT_THROW(parse_mesh(wrong_m), std::invalid_argument);
    std::istringstream wrong_t("# T=2 M=2\n0\n0.5\n1\n");
    EXPECT_THROW(parse_mesh(wrong_t), std::invalid_argument);
}

TEST(MeshFile, RejectsNonMonotoneAndGarbage)
{
    std::istringstream bad("0\n0.5\n0.4\n1\n");
    EXPECT_THROW(parse_mesh(bad), std::invalid_argument);
    std::istringstream garbage("0\nabc\n1\n");
    EXPECT_THROW(parse_mesh(garbage), std::invalid_argument);
    std::istringstream too_short("0\n1\n");
    EXPECT_THROW(parse_mesh(too_short), std::invalid_argument);
    EXPECT_THROW(read_mesh_file("/nonexistent/mesh.txt"), std::invalid_argument);
}
