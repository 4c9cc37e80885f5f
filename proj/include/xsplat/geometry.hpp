#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "xsplat/errors.hpp"

namespace xsplat {

/// Pinhole intrinsics of one cone-beam shot. Focal lengths and principal
/// point in pixels, continuous pixel coordinates.
struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    Eigen::Matrix3d matrix() const {
        Eigen::Matrix3d k;
        k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
        return k;
    }
};

/// Extrinsics with the convention x_cam = R * (x_world - origin); the camera
/// looks along +z of the camera frame.
struct Pose {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
};

struct Camera {
    Intrinsics intr;
    Pose pose;
};

/// 3x4 projection matrix, defined up to scale. Canonical form: the first
/// three entries of the third row have unit norm and the left 3x3 block has
/// positive determinant.
struct CameraMatrix {
    Eigen::Matrix<double, 3, 4> P = Eigen::Matrix<double, 3, 4>::Zero();
};

struct Ray {
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
};

/// Index-aligned 3D/2D fiducial matches used for projection calibration.
struct FiducialCorrespondences {
    std::vector<Eigen::Vector3d> points3d;  // world mm
    std::vector<Eigen::Vector2d> points2d;  // pixels
};

CameraMatrix compose_projection(const Intrinsics& K, const Pose& pose);

/// RQ-style factorization P ~ K R [I | -X_o] with K upper triangular,
/// positive diagonal, K(2,2) = 1 and det(R) = +1. Throws
/// DegenerateProjection when the left 3x3 block is singular.
std::pair<Intrinsics, Pose> decompose_projection(const CameraMatrix& P,
                                                 int width = 0, int height = 0);

/// Projects a world point; throws BehindSource when the camera-space depth
/// is not positive.
Eigen::Vector2d project_point(const Intrinsics& K, const Pose& pose,
                              const Eigen::Vector3d& world);

/// Homogeneous projection through a raw camera matrix.
Eigen::Vector2d project_point(const CameraMatrix& P, const Eigen::Vector3d& world);

Ray pixel_ray(const Intrinsics& K, const Pose& pose, const Eigen::Vector2d& pixel);

/// Jacobian of the camera-space -> ray-space map
///   (x, y, z) -> (fx x/z + cx, fy y/z + cy, ||(x,y,z)||)
/// linearized at `camera_point`. The third coordinate is Euclidean distance
/// from the source, so integrating along the viewing ray is a plain
/// marginalization of the transformed Gaussian.
Eigen::Matrix3d ray_space_jacobian(const Eigen::Vector3d& camera_point,
                                   const Intrinsics& K);

/// DLT estimate of a projection matrix from >= 6 correspondences, with
/// Hartley normalization of both point sets. Throws InsufficientPoints or
/// DegenerateConfiguration (rank deficiency beyond the expected one).
CameraMatrix dlt_estimate(const FiducialCorrespondences& corrs);

struct RansacResult {
    CameraMatrix P;
    std::vector<bool> inliers;
    double rmse_px = 0.0;  // over inliers only
};

/// RANSAC over 6-point minimal samples, consensus refit on all inliers.
/// Deterministic for a fixed seed. Throws CalibrationFailed when no model
/// reaches 6 inliers.
RansacResult ransac_calibrate(const FiducialCorrespondences& corrs,
                              int iterations, double inlier_threshold_px,
                              std::uint64_t seed);

struct TrajectorySpec {
    enum class Mode { circular, arbitrary };
    Mode mode = Mode::circular;
    int n_views = 1;
    double radius_mm = 600.0;               // source distance from center
    Eigen::Vector3d center_mm = Eigen::Vector3d::Zero();
    Intrinsics intr;
    double transverse_limit_deg = 102.0;    // arbitrary mode only
    double sagittal_limit_deg = 25.0;
    std::uint64_t seed = 0;
};

/// Circular mode: evenly spaced transverse angles on a full orbit, zero
/// sagittal tilt. Arbitrary mode: seeded uniform transverse angle within
/// +/-transverse_limit and sagittal tilt within +/-sagittal_limit. All poses
/// look at the center.
std::vector<Camera> generate_trajectory(const TrajectorySpec& spec);

// Pose JSON file: array of {K, R, X_o, width, height} records.
void save_poses(const std::filesystem::path& file, const std::vector<Camera>& cams);
std::vector<Camera> load_poses(const std::filesystem::path& file);

// Correspondence JSON file: {points3d: [[x,y,z],...], points2d: [[u,v],...]}.
void save_correspondences(const std::filesystem::path& file,
                          const FiducialCorrespondences& corrs);
FiducialCorrespondences load_correspondences(const std::filesystem::path& file);

}  // namespace xsplat
