#pragma once

#include "rgs/field.hpp"
#include "rgs/geometry.hpp"
#include "rgs/phantom.hpp"
#include "rgs/projector.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace rgs {

/// Unreadable or malformed input file. The message names the file and the
/// offending field or byte offset.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Output could not be written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary files are one JSON header line followed by a little-endian payload.

/// float32 payload, x-fastest.
void write_volume(const std::filesystem::path& path, const VoxelVolume& volume);
VoxelVolume read_volume(const std::filesystem::path& path);

/// float64 payload, view-major then row-major. The geometry goes to the JSON
/// sidecar `<path>.geom.json`.
void write_projections(const std::filesystem::path& path, const ProjectionStack& stack);
ProjectionStack read_projections(const std::filesystem::path& path);
std::filesystem::path geometry_sidecar(const std::filesystem::path& projections);

void write_geometry(const std::filesystem::path& path, const ConeBeamGeometry& geom);
ConeBeamGeometry read_geometry(const std::filesystem::path& path);

/// 11 float64 per primitive: center xyz, scales xyz, quaternion wxyz, density.
void write_gaussians(const std::filesystem::path& path, const GaussianSet& set);
GaussianSet read_gaussians(const std::filesystem::path& path);

/// JSON: {"bbox": {"lo": [..], "hi": [..]}, "ellipsoids": [{"center", "semi_axes",
/// "rotation", "delta"}, ...]}. Rotation defaults to identity.
void write_phantom(const std::filesystem::path& path, const AnalyticPhantom& phantom);
AnalyticPhantom read_phantom(const std::filesystem::path& path);
AnalyticPhantom parse_phantom(const std::string& text, const std::string& source = "phantom");

/// 8-bit binary PGM, linearly mapped from [lo, hi].
void write_pgm(const std::filesystem::path& path, const Image2D& image, double lo, double hi);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace rgs
