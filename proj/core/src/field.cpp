#include "rgs/field.hpp"

#include "rgs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rgs {

std::string_view to_string(ComponentTag tag) {
    return tag == ComponentTag::base ? "base" : "detail";
}

ComponentTag component_tag_from_string(std::string_view name) {
    if (name == "base") return ComponentTag::base;
    if (name == "detail") return ComponentTag::detail;
    throw std::invalid_argument("unknown component tag '" + std::string(name) + "'");
}

Mat3 rotation_matrix(const Vec4& q_raw) {
    const Vec4 q = q_raw.normalized();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 covariance_of(const GaussianPrimitive& p) {
    const Mat3 r = rotation_matrix(p.rotation);
    const Mat3 rs = r * p.scales.asDiagonal();
    return rs * rs.transpose();
}

Mat3 precision_of(const GaussianPrimitive& p, std::size_t index) {
    if (!p.scales.allFinite() || (p.scales.array() <= 0.0).any() || !p.rotation.allFinite() ||
        p.rotation.norm() == 0.0 || !p.center.allFinite())
        throw NumericalError("degenerate covariance for primitive " + std::to_string(index));
    const Mat3 r = rotation_matrix(p.rotation);
    const Vec3 inv_sq = p.scales.array().square().inverse();
    return r * inv_sq.asDiagonal() * r.transpose();
}

Box3 GridSpec::bounds() const {
    Box3 b;
    const Vec3 n(static_cast<double>(dims[0]), static_cast<double>(dims[1]),
                 static_cast<double>(dims[2]));
    b.lo = origin - 0.5 * spacing;
    b.hi = origin + (n.array() - 0.5).matrix().cwiseProduct(spacing);
    return b;
}

void GridSpec::validate() const {
    for (std::size_t a = 0; a < 3; ++a)
        if (dims[a] < 1) throw std::invalid_argument("grid: every dimension must be >= 1");
    if (!spacing.allFinite() || (spacing.array() <= 0.0).any())
        throw std::invalid_argument("grid: spacing must be positive");
    if (!origin.allFinite()) throw std::invalid_argument("grid: origin must be finite");
}

GridSpec GridSpec::centered(std::array<std::size_t, 3> dims, Vec3 spacing) {
    GridSpec g;
    g.dims = dims;
    g.spacing = spacing;
    for (int a = 0; a < 3; ++a)
        g.origin[a] = -0.5 * static_cast<double>(dims[a] - 1) * spacing[a];
    return g;
}

double VoxelVolume::max_value() const {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

double VoxelVolume::min_value() const {
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

Vec3 support_half_extent(const Mat3& covariance, double cutoff) {
    return cutoff * covariance.diagonal().cwiseSqrt();
}

double evaluate_field(const SetRefs& sets, const Vec3& x, double cutoff) {
    if (!x.allFinite()) throw std::invalid_argument("evaluate_field: non-finite coordinate");
    if (!(cutoff > 0.0)) throw std::invalid_argument("evaluate_field: cutoff must be positive");
    const double cut2 = cutoff * cutoff;
    double sum = 0.0;
    for (const GaussianSet& set : sets) {
        for (std::size_t n = 0; n < set.size(); ++n) {
            const GaussianPrimitive& p = set.primitives[n];
            const Vec3 d = x - p.center;
            const double m2 = d.dot(precision_of(p, n) * d);
            if (m2 <= cut2) sum += p.density * std::exp(-0.5 * m2);
        }
    }
    return sum;
}

VoxelVolume voxelize(const SetRefs& sets, const GridSpec& grid, double cutoff) {
    grid.validate();
    if (!(cutoff > 0.0)) throw std::invalid_argument("voxelize: cutoff must be positive");
    VoxelVolume out(grid);
    const double cut2 = cutoff * cutoff;

    struct Prepared {
        Mat3 precision;
        Vec3 center;
        double density;
        std::array<std::size_t, 3> lo, hi;  // inclusive voxel range
        bool empty;
    };
    std::vector<Prepared> prims;
    for (const GaussianSet& set : sets) {
        for (std::size_t n = 0; n < set.size(); ++n) {
            const GaussianPrimitive& p = set.primitives[n];
            Prepared q{precision_of(p, n), p.center, p.density, {}, {}, false};
            const Vec3 half = std::isfinite(cutoff)
                                  ? support_half_extent(covariance_of(p), cutoff)
                                  : Vec3::Constant(std::numeric_limits<double>::infinity());
            for (int a = 0; a < 3; ++a) {
                const double lo = std::ceil((p.center[a] - half[a] - grid.origin[a]) / grid.spacing[a]);
                const double hi = std::floor((p.center[a] + half[a] - grid.origin[a]) / grid.spacing[a]);
                const double top = static_cast<double>(grid.dims[a] - 1);
                if (hi < 0.0 || lo > top) {
                    q.empty = true;
                    break;
                }
                q.lo[a] = static_cast<std::size_t>(std::max(lo, 0.0));
                q.hi[a] = static_cast<std::size_t>(std::min(hi, top));
            }
            if (!q.empty && p.density != 0.0) prims.push_back(q);
        }
    }

    // Slabs along z are independent; primitives are applied in a fixed order per voxel.
    parallel_for(grid.dims[2], [&](std::size_t k) {
        for (const Prepared& p : prims) {
            if (k < p.lo[2] || k > p.hi[2]) continue;
            for (std::size_t j = p.lo[1]; j <= p.hi[1]; ++j) {
                for (std::size_t i = p.lo[0]; i <= p.hi[0]; ++i) {
                    const Vec3 d = grid.voxel_center(i, j, k) - p.center;
                    const double m2 = d.dot(p.precision * d);
                    if (m2 <= cut2) out.values[grid.index(i, j, k)] += p.density * std::exp(-0.5 * m2);
                }
            }
        }
    });
    return out;
}

}  // namespace rgs
