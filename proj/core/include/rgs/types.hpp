#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgs {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Raised when a computation produces a non-finite or degenerate value that
/// the caller cannot recover from (degenerate covariance, diverging loss).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major 2D grid; rows index detector v, cols index detector u.
struct Image2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Image2D() = default;
    Image2D(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t v, std::size_t u) { return data[v * cols + u]; }
    double operator()(std::size_t v, std::size_t u) const { return data[v * cols + u]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image2D& o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const Image2D&) const = default;
};

/// Axis-aligned box in world millimetres.
struct Box3 {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();

    Vec3 center() const { return 0.5 * (lo + hi); }
    Vec3 extent() const { return hi - lo; }
    bool contains(const Vec3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }

    bool operator==(const Box3&) const = default;
};

}  // namespace rgs
