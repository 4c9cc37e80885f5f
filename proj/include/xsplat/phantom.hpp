#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "xsplat/volume.hpp"

namespace xsplat {

struct PhantomSpec {
    enum class Kind { nested_ellipsoids, spine };
    Kind kind = Kind::spine;
    Eigen::Vector3i dims = Eigen::Vector3i(64, 64, 64);
    Eigen::Vector3d spacing_mm = Eigen::Vector3d(3.125, 3.125, 3.125);
    int supersample = 4;  // sub-samples per voxel axis for antialiasing
    std::uint64_t seed = 0;
};

PhantomSpec::Kind phantom_kind_from_string(const std::string& s);

/// Analytic primitives of the spine phantom, in relative coordinates of the
/// volume bounding box ([-1,1]^3). Dense cylinders are pairwise disjoint and
/// lie inside the soft-tissue ellipsoid, so volumes add.
struct SpineCylinder {
    Eigen::Vector3d center;
    int axis;            // 0=x, 1=y, 2=z
    double radius;
    double half_length;
};
struct SpineGeometry {
    Eigen::Vector3d soft_semi_axes;
    double soft_density;
    double bone_density;
    std::vector<SpineCylinder> dense;
};
SpineGeometry spine_geometry();

/// Deterministic voxel phantom. Values lie in [0, 1] with zero background.
/// Voxels are antialiased by supersampling, so a value above the midpoint of
/// two overlapping densities means the voxel is majority-covered.
Volume generate_phantom(const PhantomSpec& spec);

}  // namespace xsplat
