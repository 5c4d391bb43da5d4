#include "rgs/projector.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace rgs;

namespace {

const Box3 kBox{Vec3::Constant(-30), Vec3::Constant(30)};

// Random ray passing within `max_dist` (in Mahalanobis units) of the primitive.
Ray ray_near(const GaussianPrimitive& p, std::mt19937_64& rng, double max_dist) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec3 d(n(rng), n(rng), n(rng));
    d.normalize();
    Vec3 off(n(rng), n(rng), n(rng));
    off = off - off.dot(d) * d;
    off = off.normalized() * u(rng) * max_dist * p.scales.minCoeff();
    Ray r;
    r.direction = d;
    r.origin = p.center + off - 200.0 * d;
    r.t_far = 400.0;
    return r;
}

double weighted_sum(const ProjectionStack& s, const std::vector<Image2D>& w) {
    double total = 0.0;
    for (std::size_t v = 0; v < s.views.size(); ++v)
        for (std::size_t q = 0; q < w[v].size(); ++q) total += s.views[v].data[q] * w[v].data[q];
    return total;
}

}  // namespace

TEST(Projector, ClosedFormMatchesQuadrature) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
        GaussianSet s;
        s.primitives.push_back(ref::random_primitive(rng));
        const Ray r = ray_near(s.primitives[0], rng, 2.5);
        const double expected = ref::quadrature_line_integral(s.primitives[0], r.origin, r.direction);
        EXPECT_LT(ref::rel_err(project_ray(s, r, kNoCutoff), expected), 1e-6);
    }
}

TEST(Projector, UnitDensityKernelScalesWithDensity) {
    std::mt19937_64 rng(12);
    GaussianPrimitive p = ref::random_primitive(rng);
    const Ray r = ray_near(p, rng, 1.0);
    const double k = primitive_line_integral(p, r);
    GaussianSet s;
    s.primitives = {p};
    EXPECT_NEAR(project_ray(s, r, kNoCutoff), p.density * k, 1e-12 * k);
}

TEST(Projector, IsotropicThroughCenter) {
    GaussianSet s;
    GaussianPrimitive p;
    p.scales = Vec3::Constant(2.0);
    p.density = 0.3;
    s.primitives = {p};
    Ray r;
    r.origin = Vec3(-100, 0, 0);
    r.direction = Vec3::UnitX();
    // ∫ exp(-t²/2s²) dt = s √(2π)
    EXPECT_NEAR(project_ray(s, r), 0.3 * 2.0 * std::sqrt(2.0 * std::numbers::pi), 1e-12);
}

TEST(Projector, CutoffSkipsDistantPrimitives) {
    GaussianSet s;
    GaussianPrimitive p;
    p.density = 1.0;
    p.center = Vec3(0, 3.5, 0);
    s.primitives = {p};
    Ray r;
    r.origin = Vec3(-50, 0, 0);
    r.direction = Vec3::UnitX();
    EXPECT_EQ(project_ray(s, r, 3.0), 0.0);
    EXPECT_GT(project_ray(s, r, 4.0), 0.0);
}

TEST(Projector, RenderMatchesPerRayProjection) {
    std::mt19937_64 rng(13);
    const ConeBeamGeometry g = ref::small_geometry(5, 24, 32, 1.0);
    const GaussianSet s = ref::random_set(rng, 12, 6.0);
    const Projector proj(g);
    const ProjectionStack out = proj.render(s);
    for (std::size_t view = 0; view < g.views(); ++view)
        for (std::size_t v = 0; v < g.detector_rows; ++v)
            for (std::size_t u = 0; u < g.detector_cols; ++u) {
                const double expected = project_ray(s, ray_for_pixel(g, view, u, v, kBox));
                EXPECT_NEAR(out.views[view](v, u), expected, 1e-9 * std::max(1.0, expected));
            }
}

TEST(Projector, RenderIsLinearInDensity) {
    std::mt19937_64 rng(14);
    const ConeBeamGeometry g = ref::small_geometry(3);
    GaussianSet a = ref::random_set(rng, 4);
    GaussianSet b = a;
    for (auto& p : b.primitives) p.density *= 2.5;
    const Projector proj(g);
    const ProjectionStack ra = proj.render(a);
    const ProjectionStack rb = proj.render(b);
    for (std::size_t v = 0; v < g.views(); ++v)
        for (std::size_t q = 0; q < ra.views[v].size(); ++q)
            EXPECT_NEAR(rb.views[v].data[q], 2.5 * ra.views[v].data[q], 1e-12);
}

TEST(Projector, RenderSumIsElementwise) {
    std::mt19937_64 rng(15);
    const ConeBeamGeometry g = ref::small_geometry(2);
    GaussianSet base = ref::random_set(rng, 3);
    GaussianSet detail = ref::random_set(rng, 3);
    detail.tag = ComponentTag::detail;
    const RenderSum s = render_sum(base, detail, g, 1);
    for (std::size_t q = 0; q < s.total.size(); ++q)
        EXPECT_DOUBLE_EQ(s.total.data[q], s.base.data[q] + s.detail.data[q]);
    EXPECT_EQ(s.base, render_view(base, g, 1));
}

TEST(Projector, EmptySetRendersZero) {
    const ConeBeamGeometry g = ref::small_geometry(2);
    const ProjectionStack out = Projector(g).render(GaussianSet{});
    for (const auto& img : out.views)
        for (double x : img.data) EXPECT_EQ(x, 0.0);
}

TEST(Projector, DegeneratePrimitiveThrows) {
    const ConeBeamGeometry g = ref::small_geometry(1);
    GaussianSet s;
    GaussianPrimitive p;
    p.scales = Vec3(1, -1, 1);
    p.density = 1;
    s.primitives = {p};
    EXPECT_THROW(Projector(g).render(s), NumericalError);
}

TEST(Projector, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(16);
    const ConeBeamGeometry g = ref::small_geometry(3, 8, 8, 3.0);
    // A wide cutoff keeps the loss smooth under perturbation.
    const Projector proj(g, 8.0);
    const GaussianSet s = ref::random_set(rng, 4, 3.0);
    std::uniform_real_distribution<double> uw(-1.0, 1.0);
    std::vector<Image2D> w(g.views(), Image2D(g.detector_rows, g.detector_cols));
    for (auto& img : w)
        for (double& x : img.data) x = uw(rng);

    const ParameterGradients grad = proj.backward(s, w);
    auto loss = [&](const GaussianSet& t) { return weighted_sum(proj.render(t), w); };
    auto check = [&](double analytic, auto&& perturb, double h) {
        GaussianSet plus = s, minus = s;
        perturb(plus, h);
        perturb(minus, -h);
        const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
        EXPECT_LE(std::abs(fd - analytic), 1e-5 * std::max(std::abs(fd), 1e-2)) << analytic << " vs " << fd;
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            check(grad.center[i][a], [&](GaussianSet& t, double h) { t.primitives[i].center[a] += h; }, 1e-5);
            check(grad.scales[i][a], [&](GaussianSet& t, double h) { t.primitives[i].scales[a] += h; }, 1e-5);
        }
        for (int a = 0; a < 4; ++a)
            check(grad.rotation[i][a], [&](GaussianSet& t, double h) { t.primitives[i].rotation[a] += h; },
                  1e-6);
        check(grad.density[i], [&](GaussianSet& t, double h) { t.primitives[i].density += h; }, 1e-6);
    }
}

TEST(Projector, BackwardOfSinglePixelIsKernel) {
    std::mt19937_64 rng(17);
    const ConeBeamGeometry g = ref::small_geometry(1, 8, 8, 3.0);
    const GaussianSet s = ref::random_set(rng, 2, 2.0);
    Image2D w(8, 8);
    w(3, 5) = 1.0;
    const ParameterGradients grad = backward(s, g, 0, w);
    const Ray r = ray_for_pixel(g, 0, 5, 3, kBox);
    for (std::size_t i = 0; i < s.size(); ++i)
        EXPECT_NEAR(grad.density[i], primitive_line_integral(s.primitives[i], r, kDefaultCutoff), 1e-12);
}

TEST(Projector, HitsCountViewsTouched) {
    const ConeBeamGeometry g = ref::small_geometry(4, 8, 8, 3.0);
    GaussianSet s;
    GaussianPrimitive inside;
    inside.density = 1;
    GaussianPrimitive outside = inside;
    outside.center = Vec3(0, 0, 200);
    s.primitives = {inside, outside};
    std::vector<Image2D> w(4, Image2D(8, 8, 1.0));
    const ParameterGradients grad = Projector(g).backward(s, w);
    EXPECT_EQ(grad.hits[0], 4u);
    EXPECT_EQ(grad.hits[1], 0u);
    EXPECT_EQ(grad.density[1], 0.0);
    EXPECT_TRUE(grad.all_finite());
}

TEST(Projector, StackValidation) {
    const ConeBeamGeometry g = ref::small_geometry(2, 4, 4);
    ProjectionStack s = ProjectionStack::zeros(g);
    s.validate();
    s.views[1](0, 0) = -1.0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.views[1](0, 0) = NAN;
    EXPECT_THROW(s.validate_shape(), std::invalid_argument);
    s.views.pop_back();
    EXPECT_THROW(s.validate_shape(), std::invalid_argument);
}
