#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

namespace xsplat {

/// Axis-aligned voxel grid of attenuation densities. `origin` is the world
/// position (mm) of the center of voxel (0,0,0); storage is x-fastest, then
/// y, then z.
struct Volume {
    Eigen::Vector3i dims = Eigen::Vector3i::Zero();
    Eigen::Vector3d spacing = Eigen::Vector3d::Ones();  // mm per voxel
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();   // mm, center of voxel (0,0,0)
    std::vector<double> values;

    std::size_t index(int x, int y, int z) const {
        return (std::size_t(z) * dims.y() + y) * dims.x() + x;
    }
    double& at(int x, int y, int z) { return values[index(x, y, z)]; }
    double at(int x, int y, int z) const { return values[index(x, y, z)]; }

    Eigen::Vector3d voxel_center(int x, int y, int z) const {
        return origin + Eigen::Vector3d(x * spacing.x(), y * spacing.y(), z * spacing.z());
    }
    /// Bounding box of the voxel cells (half a voxel beyond the outermost centers).
    Eigen::AlignedBox3d bounds() const {
        return {origin - 0.5 * spacing,
                origin + ((dims.cast<double>() - Eigen::Vector3d::Ones()) +
                          Eigen::Vector3d(0.5, 0.5, 0.5))
                                 .cwiseProduct(spacing)};
    }
};

/// Trilinear interpolation of voxel values; 0 outside the grid support.
double sample_volume(const Volume& v, const Eigen::Vector3d& world_mm);

// Raw float32 little-endian values in x-fastest order plus a JSON sidecar
// {dims, spacing_mm, origin_mm, order}. `base` names the pair base.raw /
// base.json.
void write_volume(const std::filesystem::path& base, const Volume& v);
Volume read_volume(const std::filesystem::path& base);

}  // namespace xsplat
