#pragma once

#include "rgs/field.hpp"
#include "rgs/geometry.hpp"
#include "rgs/types.hpp"

#include <cstdint>
#include <vector>

namespace rgs {

namespace detail {
struct KernelCoeffs;
}

/// One line-integral image per view (attenuation x mm).
struct ProjectionStack {
    ConeBeamGeometry geometry;
    std::vector<Image2D> views;

    static ProjectionStack zeros(const ConeBeamGeometry& geom);

    std::size_t view_count() const { return views.size(); }
    std::size_t pixel_count() const;

    /// Shapes match the geometry and every value is finite.
    void validate_shape() const;
    /// validate_shape() plus the non-negativity invariant.
    void validate() const;

    bool operator==(const ProjectionStack&) const = default;
};

/// Per-primitive partial derivatives of a scalar loss.
struct ParameterGradients {
    std::vector<Vec3> center;
    std::vector<Vec3> scales;
    std::vector<Vec4> rotation;  ///< projected onto the tangent space of the unit quaternion
    std::vector<double> density;
    std::vector<std::uint32_t> hits;  ///< views in which the primitive touched at least one ray

    ParameterGradients() = default;
    explicit ParameterGradients(std::size_t n) { resize(n); }

    void resize(std::size_t n);
    std::size_t size() const { return density.size(); }
    bool all_finite() const;
};

/// Closed-form line integral of the set along the full (unclipped) line of `ray`.
/// Primitives whose perpendicular Mahalanobis distance to the line exceeds
/// `cutoff` are skipped. Throws NumericalError for degenerate primitives.
double project_ray(const GaussianSet& set, const Ray& ray, double cutoff = kDefaultCutoff);

/// Per-ray response of one unit-density primitive, i.e. the detector kernel K_n.
double primitive_line_integral(const GaussianPrimitive& p, const Ray& ray,
                               double cutoff = kNoCutoff);

/// Differentiable renderer bound to one acquisition geometry. Caches the
/// per-view source positions and unit pixel directions.
class Projector {
public:
    explicit Projector(ConeBeamGeometry geom, double cutoff = kDefaultCutoff);

    const ConeBeamGeometry& geometry() const { return geom_; }
    double cutoff() const { return cutoff_; }

    Image2D render_view(const GaussianSet& set, std::size_t view) const;
    ProjectionStack render(const GaussianSet& set) const;

    /// Gradients of sum_q residual[q] * P̂(q) for one view.
    ParameterGradients backward_view(const GaussianSet& set, std::size_t view,
                                     const Image2D& residual) const;

    /// Gradients summed over all views; residuals[v] is dL/dP̂ for view v.
    ParameterGradients backward(const GaussianSet& set, const std::vector<Image2D>& residuals) const;

private:
    struct Prepared;
    struct PixelRect;

    std::vector<Prepared> prepare(const GaussianSet& set) const;
    PixelRect footprint(const Prepared& p, std::size_t view) const;
    detail::KernelCoeffs coeffs(const Prepared& p, const Vec3& source) const;
    /// Calls fn(v, u0, u1) for every detector row crossing the cutoff cone of `p`.
    template <typename Fn>
    void for_each_span(const Prepared& p, std::size_t view, Fn&& fn) const;
    void render_into(const std::vector<Prepared>& prims, std::size_t view, Image2D& out) const;
    void backward_primitive(const Prepared& p, const GaussianPrimitive& prim,
                            const std::vector<std::size_t>& views,
                            const std::vector<const Image2D*>& residuals, ParameterGradients& g,
                            std::size_t index) const;
    ParameterGradients backward_impl(const GaussianSet& set, const std::vector<std::size_t>& views,
                                     const std::vector<const Image2D*>& residuals) const;

    ConeBeamGeometry geom_;
    double cutoff_;
    std::vector<ViewFrame> frames_;
    // Unit directions per view, structure-of-arrays, pixel index v * cols + u.
    std::vector<std::vector<double>> dir_x_, dir_y_, dir_z_;
};

Image2D render_view(const GaussianSet& set, const ConeBeamGeometry& geom, std::size_t view_index,
                    double cutoff = kDefaultCutoff);

struct RenderSum {
    Image2D base;
    Image2D detail;
    Image2D total;
};

/// Component-wise renders and their element-wise sum.
RenderSum render_sum(const GaussianSet& base, const GaussianSet& detail,
                     const ConeBeamGeometry& geom, std::size_t view_index,
                     double cutoff = kDefaultCutoff);

ParameterGradients backward(const GaussianSet& set, const ConeBeamGeometry& geom,
                            std::size_t view_index, const Image2D& residual,
                            double cutoff = kDefaultCutoff);

}  // namespace rgs
