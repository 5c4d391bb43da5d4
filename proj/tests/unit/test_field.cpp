#include "rgs/field.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace rgs;

TEST(Field, RotationMatrixIsOrthonormal) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const Vec4 q = ref::random_quaternion(rng) * 3.7;  // not unit on purpose
        const Mat3 r = rotation_matrix(q);
        EXPECT_NEAR((r * r.transpose() - Mat3::Identity()).norm(), 0.0, 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    }
}

TEST(Field, RotationAboutZ) {
    const double h = std::numbers::pi / 8.0;  // 45 degrees
    const Mat3 r = rotation_matrix(Vec4(std::cos(h), 0, 0, std::sin(h)));
    EXPECT_NEAR((r * Vec3::UnitX() - Vec3(1, 1, 0).normalized()).norm(), 0.0, 1e-12);
}

TEST(Field, PrecisionInvertsCovariance) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const GaussianPrimitive p = ref::random_primitive(rng);
        EXPECT_NEAR((precision_of(p) * covariance_of(p) - Mat3::Identity()).norm(), 0.0, 1e-10);
    }
}

TEST(Field, DegenerateScaleThrows) {
    GaussianPrimitive p;
    p.scales = Vec3(1, 0, 1);
    EXPECT_THROW(precision_of(p, 4), NumericalError);
    p.scales = Vec3(1, NAN, 1);
    EXPECT_THROW(precision_of(p), NumericalError);
}

TEST(Field, EvaluateMatchesClosedForm) {
    std::mt19937_64 rng(3);
    GaussianSet s = ref::random_set(rng, 5);
    std::uniform_real_distribution<double> u(-6, 6);
    for (int i = 0; i < 200; ++i) {
        const Vec3 x(u(rng), u(rng), u(rng));
        double expected = 0.0;
        for (const auto& p : s.primitives) expected += ref::gaussian_value(p, x);
        EXPECT_NEAR(evaluate_field({s}, x, kNoCutoff), expected, 1e-12);
    }
}

TEST(Field, OneSigmaFallsToExpMinusHalf) {
    GaussianSet s;
    GaussianPrimitive p;
    p.scales = Vec3(2, 3, 4);
    p.density = 0.5;
    s.primitives.push_back(p);
    EXPECT_DOUBLE_EQ(evaluate_field({s}, Vec3::Zero()), 0.5);
    EXPECT_NEAR(evaluate_field({s}, Vec3(0, 3, 0)), 0.5 * std::exp(-0.5), 1e-15);
    // Beyond the cutoff the field vanishes.
    EXPECT_EQ(evaluate_field({s}, Vec3(0, 0, 12.01), 3.0), 0.0);
    EXPECT_GT(evaluate_field({s}, Vec3(0, 0, 11.99), 3.0), 0.0);
}

TEST(Field, VoxelizeMatchesPointEvaluation) {
    std::mt19937_64 rng(4);
    GaussianSet a = ref::random_set(rng, 6);
    GaussianSet b = ref::random_set(rng, 3);
    b.tag = ComponentTag::detail;
    const GridSpec grid = GridSpec::centered({12, 10, 9}, Vec3(1.1, 0.9, 1.3));
    const VoxelVolume v = voxelize({a, b}, grid);
    for (std::size_t k = 0; k < 9; ++k)
        for (std::size_t j = 0; j < 10; ++j)
            for (std::size_t i = 0; i < 12; ++i)
                EXPECT_NEAR(v.at(i, j, k), evaluate_field({a, b}, grid.voxel_center(i, j, k)), 1e-12);
}

TEST(Field, SupportHalfExtentAxisAligned) {
    GaussianPrimitive p;
    p.scales = Vec3(1, 2, 3);
    EXPECT_NEAR((support_half_extent(covariance_of(p), 3.0) - Vec3(3, 6, 9)).norm(), 0.0, 1e-12);
}

TEST(Field, SupportHalfExtentBoundsEllipsoid) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        const GaussianPrimitive p = ref::random_primitive(rng);
        const Vec3 h = support_half_extent(covariance_of(p), 3.0);
        const Mat3 r = rotation_matrix(p.rotation);
        double reach[3] = {0, 0, 0};
        for (int s = 0; s < 4000; ++s) {
            Vec3 z(n(rng), n(rng), n(rng));
            z = 3.0 * z.normalized();
            const Vec3 x = r * z.cwiseProduct(p.scales);
            for (int a = 0; a < 3; ++a) reach[a] = std::max(reach[a], std::abs(x[a]));
        }
        for (int a = 0; a < 3; ++a) {
            EXPECT_LE(reach[a], h[a] + 1e-12);
            EXPECT_GT(reach[a], 0.97 * h[a]);
        }
    }
}

TEST(Field, GridCenteredAndBounds) {
    const GridSpec g = GridSpec::centered({4, 6, 8}, Vec3(1, 2, 0.5));
    EXPECT_NEAR((g.voxel_center(0, 0, 0) + g.voxel_center(3, 5, 7)).norm(), 0.0, 1e-12);
    const Box3 b = g.bounds();
    EXPECT_NEAR((b.extent() - Vec3(4, 12, 4)).norm(), 0.0, 1e-12);
    GridSpec bad = g;
    bad.spacing[1] = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = g;
    bad.dims[2] = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Field, ComponentTagNames) {
    EXPECT_EQ(to_string(ComponentTag::base), "base");
    EXPECT_EQ(component_tag_from_string("detail"), ComponentTag::detail);
    EXPECT_THROW(component_tag_from_string("other"), std::invalid_argument);
}
