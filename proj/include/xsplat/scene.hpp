#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace xsplat {

/// One learnable density kernel. The covariance is parameterized by per-axis
/// log standard deviations plus a versor, so any unconstrained parameter
/// vector yields a symmetric positive definite matrix; density positivity
/// comes from a softplus on raw_density.
struct GaussianKernel {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();    // scene units
    Eigen::Vector3d log_scales = Eigen::Vector3d::Zero();  // log sigma per axis
    Eigen::Vector4d rotation = Eigen::Vector4d(1, 0, 0, 0);  // versor (w, x, y, z)
    double raw_density = 0.0;
};

/// Similarity transform from scene (normalized) units to world mm:
/// world = center + scale * scene.
struct SimilarityTransform {
    double scale = 1.0;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();

    Eigen::Vector3d to_world(const Eigen::Vector3d& scene_pt) const {
        return center + scale * scene_pt;
    }
    Eigen::Vector3d to_scene(const Eigen::Vector3d& world_pt) const {
        return (world_pt - center) / scale;
    }
};

struct BBox {
    Eigen::Vector3d lo = Eigen::Vector3d(-1, -1, -1);
    Eigen::Vector3d hi = Eigen::Vector3d(1, 1, 1);
};

struct SplatScene {
    std::vector<GaussianKernel> kernels;
    BBox bbox;
    SimilarityTransform world_transform;  // scene units -> world mm
};

double softplus(double x);
double softplus_inverse(double y);
/// d softplus / dx, i.e. the logistic sigmoid.
double softplus_grad(double x);

inline double kernel_density_amplitude(const GaussianKernel& k) {
    return softplus(k.raw_density);
}

/// Rotation matrix of a (not necessarily unit) quaternion; normalizes first.
Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q);

/// Sigma = R diag(exp(2 log_scales)) R^T, symmetric positive definite.
Eigen::Matrix3d kernel_covariance(const GaussianKernel& k);

/// Uniform positions in bbox, densities uniform in density_range (applied
/// through the activation inverse), isotropic covariance at scale_init,
/// identity rotations. Deterministic for a fixed seed.
SplatScene init_random(const BBox& bbox, int n,
                       std::pair<double, double> density_range,
                       double scale_init, std::uint64_t seed);

/// Reference mixture evaluation without any truncation:
/// sum_j rho_j exp(-1/2 (x-p_j)^T Sigma_j^-1 (x-p_j)).
double scene_density(const SplatScene& s, const Eigen::Vector3d& x);

/// Precomputed per-kernel inverses for repeated untruncated evaluation.
class DensityEvaluator {
public:
    explicit DensityEvaluator(const SplatScene& s);
    double operator()(const Eigen::Vector3d& x) const;

private:
    struct Entry {
        Eigen::Vector3d p;
        Eigen::Matrix3d Q;  // Sigma^-1
        double rho;
    };
    std::vector<Entry> entries_;
};

// Scene checkpoint JSON: {version, world_transform, bbox, kernels:[...]}.
void save_scene(const std::filesystem::path& file, const SplatScene& s);
SplatScene load_scene(const std::filesystem::path& file);

}  // namespace xsplat
