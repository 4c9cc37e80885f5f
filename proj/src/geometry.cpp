#include "xsplat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "xsplat/rng.hpp"

namespace xsplat {

using json = nlohmann::ordered_json;

CameraMatrix compose_projection(const Intrinsics& K, const Pose& pose) {
    Eigen::Matrix<double, 3, 4> ext;
    ext.leftCols<3>() = Eigen::Matrix3d::Identity();
    ext.col(3) = -pose.origin;
    CameraMatrix out;
    out.P = K.matrix() * pose.R * ext;
    // With K(2,2)=1 the third row of KR equals a rotation row, so the
    // canonical scale is already 1; normalize anyway to absorb rounding.
    out.P /= out.P.block<1, 3>(2, 0).norm();
    return out;
}

std::pair<Intrinsics, Pose> decompose_projection(const CameraMatrix& cam,
                                                 int width, int height) {
    Eigen::Matrix<double, 3, 4> P = cam.P;
    Eigen::Matrix3d M = P.leftCols<3>();
    double det = M.determinant();
    double scale_ref = M.cwiseAbs().maxCoeff();
    if (scale_ref <= 0.0 || std::abs(det) < 1e-12 * scale_ref * scale_ref * scale_ref)
        throw DegenerateProjection("decompose_projection: singular left 3x3 block");
    if (det < 0) {
        P = -P;
        M = -M;
    }

    // RQ decomposition by Givens rotations: zero M(2,1), M(2,0), M(1,0),
    // keeping the touched diagonal entry non-negative at each step.
    Eigen::Matrix3d K = M;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    auto norm2 = [](double a, double b) {
        double r = std::hypot(a, b);
        return r > 0.0 ? r : 1.0;
    };

    {  // rotation about x: K(2,1) -> 0
        const double r = norm2(K(2, 1), K(2, 2));
        const double c = K(2, 2) / r, s = -K(2, 1) / r;
        Eigen::Matrix3d Q;
        Q << 1, 0, 0, 0, c, -s, 0, s, c;
        K = K * Q;
        R = Q.transpose() * R;
    }
    {  // rotation about y: K(2,0) -> 0
        const double r = norm2(K(2, 0), K(2, 2));
        const double c = K(2, 2) / r, s = K(2, 0) / r;
        Eigen::Matrix3d Q;
        Q << c, 0, s, 0, 1, 0, -s, 0, c;
        K = K * Q;
        R = Q.transpose() * R;
    }
    {  // rotation about z: K(1,0) -> 0
        const double r = norm2(K(1, 0), K(1, 1));
        const double c = K(1, 1) / r, s = -K(1, 0) / r;
        Eigen::Matrix3d Q;
        Q << c, -s, 0, s, c, 0, 0, 0, 1;
        K = K * Q;
        R = Q.transpose() * R;
    }

    Eigen::Vector3d signs(K(0, 0) < 0 ? -1.0 : 1.0, K(1, 1) < 0 ? -1.0 : 1.0,
                          K(2, 2) < 0 ? -1.0 : 1.0);
    K = K * signs.asDiagonal();
    R = signs.asDiagonal() * R;

    Eigen::Vector3d origin = -M.inverse() * P.col(3);

    if (std::abs(K(2, 2)) < 1e-300)
        throw DegenerateProjection("decompose_projection: vanishing K(2,2)");
    K /= K(2, 2);

    Intrinsics intr;
    intr.fx = K(0, 0);
    intr.fy = K(1, 1);
    intr.cx = K(0, 2);
    intr.cy = K(1, 2);
    intr.width = width;
    intr.height = height;
    Pose pose;
    pose.R = R;
    pose.origin = origin;
    return {intr, pose};
}

Eigen::Vector2d project_point(const Intrinsics& K, const Pose& pose,
                              const Eigen::Vector3d& world) {
    Eigen::Vector3d c = pose.R * (world - pose.origin);
    if (c.z() <= 0.0) throw BehindSource("project_point: non-positive depth");
    return {K.fx * c.x() / c.z() + K.cx, K.fy * c.y() / c.z() + K.cy};
}

Eigen::Vector2d project_point(const CameraMatrix& P, const Eigen::Vector3d& world) {
    Eigen::Vector4d X(world.x(), world.y(), world.z(), 1.0);
    Eigen::Vector3d h = P.P * X;
    return {h.x() / h.z(), h.y() / h.z()};
}

Ray pixel_ray(const Intrinsics& K, const Pose& pose, const Eigen::Vector2d& pixel) {
    Eigen::Vector3d dir_cam((pixel.x() - K.cx) / K.fx, (pixel.y() - K.cy) / K.fy, 1.0);
    Ray ray;
    ray.origin = pose.origin;
    ray.direction = (pose.R.transpose() * dir_cam).normalized();
    return ray;
}

Eigen::Matrix3d ray_space_jacobian(const Eigen::Vector3d& p, const Intrinsics& K) {
    const double x = p.x(), y = p.y(), z = p.z();
    if (z <= 0.0) throw BehindSource("ray_space_jacobian: non-positive depth");
    const double l = p.norm();
    Eigen::Matrix3d J;
    J << K.fx / z, 0, -K.fx * x / (z * z),
         0, K.fy / z, -K.fy * y / (z * z),
         x / l, y / l, z / l;
    return J;
}

namespace {

struct Normalization2d {
    Eigen::Matrix3d T;
};
struct Normalization3d {
    Eigen::Matrix4d T;
};

Normalization2d normalize_points(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= double(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= double(pts.size());
    double s = mean_dist > 1e-300 ? std::sqrt(2.0) / mean_dist : 1.0;
    Normalization2d n;
    n.T << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
    return n;
}

Normalization3d normalize_points(const std::vector<Eigen::Vector3d>& pts) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= double(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= double(pts.size());
    double s = mean_dist > 1e-300 ? std::sqrt(3.0) / mean_dist : 1.0;
    Normalization3d n;
    n.T.setIdentity();
    n.T.topLeftCorner<3, 3>() *= s;
    n.T.topRightCorner<3, 1>() = -s * centroid;
    return n;
}

}  // namespace

CameraMatrix dlt_estimate(const FiducialCorrespondences& corrs) {
    const std::size_t n = corrs.points3d.size();
    if (n != corrs.points2d.size())
        throw InvalidSpec("dlt_estimate: point list length mismatch");
    if (n < 6) throw InsufficientPoints("dlt_estimate: need at least 6 correspondences");

    const auto n2 = normalize_points(corrs.points2d);
    const auto n3 = normalize_points(corrs.points3d);

    Eigen::MatrixXd A(2 * n, 12);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Vector4d X = n3.T * corrs.points3d[i].homogeneous();
        Eigen::Vector3d x = n2.T * corrs.points2d[i].homogeneous();
        const double u = x.x() / x.z(), v = x.y() / x.z();
        A.row(2 * i) << -X.transpose(), Eigen::RowVector4d::Zero(), u * X.transpose();
        A.row(2 * i + 1) << Eigen::RowVector4d::Zero(), -X.transpose(), v * X.transpose();
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    // A healthy configuration has exactly one (near-)zero singular value; a
    // second one means the points do not pin the projection down (coplanar
    // or otherwise degenerate geometry).
    if (sv(10) <= 1e-8 * sv(0))
        throw DegenerateConfiguration("dlt_estimate: rank-deficient design matrix");

    Eigen::Matrix<double, 12, 1> h = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> Pn;
    Pn.row(0) = h.segment<4>(0).transpose();
    Pn.row(1) = h.segment<4>(4).transpose();
    Pn.row(2) = h.segment<4>(8).transpose();

    Eigen::Matrix<double, 3, 4> P = n2.T.inverse() * Pn * n3.T;

    // Fix the projective sign so depths come out positive for the data.
    int positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = P.row(2) * corrs.points3d[i].homogeneous();
        if (w > 0) ++positive;
    }
    if (2 * positive < static_cast<int>(n)) P = -P;

    double row_norm = P.block<1, 3>(2, 0).norm();
    if (row_norm < 1e-300)
        throw DegenerateConfiguration("dlt_estimate: vanishing third row");
    CameraMatrix out;
    out.P = P / row_norm;
    return out;
}

namespace {

double reprojection_error(const CameraMatrix& P, const Eigen::Vector3d& X,
                          const Eigen::Vector2d& x) {
    Eigen::Vector3d h = P.P * X.homogeneous();
    if (std::abs(h.z()) < 1e-300) return std::numeric_limits<double>::infinity();
    return (h.hnormalized() - x).norm();
}

}  // namespace

RansacResult ransac_calibrate(const FiducialCorrespondences& corrs,
                              int iterations, double inlier_threshold_px,
                              std::uint64_t seed) {
    const int n = static_cast<int>(corrs.points3d.size());
    if (n != static_cast<int>(corrs.points2d.size()))
        throw InvalidSpec("ransac_calibrate: point list length mismatch");
    if (n < 6)
        throw CalibrationFailed("ransac_calibrate: need at least 6 correspondences");

    Rng rng(seed);
    std::vector<int> indices(n);
    std::vector<bool> best_mask;
    int best_count = 0;
    double best_rmse = std::numeric_limits<double>::infinity();

    for (int it = 0; it < iterations; ++it) {
        // partial Fisher-Yates: first 6 entries form the minimal sample
        for (int i = 0; i < n; ++i) indices[i] = i;
        for (int i = 0; i < 6; ++i)
            std::swap(indices[i], indices[i + rng.uniform_int(n - i)]);

        FiducialCorrespondences sample;
        for (int i = 0; i < 6; ++i) {
            sample.points3d.push_back(corrs.points3d[indices[i]]);
            sample.points2d.push_back(corrs.points2d[indices[i]]);
        }

        CameraMatrix P;
        try {
            P = dlt_estimate(sample);
        } catch (const DegenerateConfiguration&) {
            continue;
        }

        std::vector<bool> mask(n, false);
        int count = 0;
        double sq_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            double e = reprojection_error(P, corrs.points3d[i], corrs.points2d[i]);
            if (e < inlier_threshold_px) {
                mask[i] = true;
                ++count;
                sq_sum += e * e;
            }
        }
        double rmse = count > 0 ? std::sqrt(sq_sum / count) : std::numeric_limits<double>::infinity();
        if (count > best_count || (count == best_count && rmse < best_rmse)) {
            best_count = count;
            best_rmse = rmse;
            best_mask = mask;
        }
    }

    if (best_count < 6)
        throw CalibrationFailed("ransac_calibrate: no model reached 6 inliers");

    FiducialCorrespondences consensus;
    for (int i = 0; i < n; ++i) {
        if (best_mask[i]) {
            consensus.points3d.push_back(corrs.points3d[i]);
            consensus.points2d.push_back(corrs.points2d[i]);
        }
    }
    RansacResult res;
    res.P = dlt_estimate(consensus);
    res.inliers = best_mask;
    double sq_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!best_mask[i]) continue;
        double e = reprojection_error(res.P, corrs.points3d[i], corrs.points2d[i]);
        sq_sum += e * e;
    }
    res.rmse_px = std::sqrt(sq_sum / best_count);
    return res;
}

namespace {

Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
    Eigen::Vector3d z = (target - eye).normalized();
    Eigen::Vector3d up = std::abs(z.z()) > 0.999 ? Eigen::Vector3d::UnitY()
                                                 : Eigen::Vector3d::UnitZ();
    Eigen::Vector3d x = up.cross(z).normalized();
    Eigen::Vector3d y = z.cross(x);
    Pose pose;
    pose.R.row(0) = x;
    pose.R.row(1) = y;
    pose.R.row(2) = z;
    pose.origin = eye;
    return pose;
}

}  // namespace

std::vector<Camera> generate_trajectory(const TrajectorySpec& spec) {
    if (spec.n_views < 1) throw InvalidSpec("generate_trajectory: n_views < 1");
    if (spec.radius_mm <= 0.0) throw InvalidSpec("generate_trajectory: radius <= 0");

    Rng rng(spec.seed);
    std::vector<Camera> cams;
    cams.reserve(spec.n_views);
    const double deg = M_PI / 180.0;
    for (int i = 0; i < spec.n_views; ++i) {
        double theta, phi;
        if (spec.mode == TrajectorySpec::Mode::circular) {
            theta = 2.0 * M_PI * double(i) / double(spec.n_views);
            phi = 0.0;
        } else {
            theta = rng.uniform(-spec.transverse_limit_deg, spec.transverse_limit_deg) * deg;
            phi = rng.uniform(-spec.sagittal_limit_deg, spec.sagittal_limit_deg) * deg;
        }
        Eigen::Vector3d eye =
            spec.center_mm + spec.radius_mm * Eigen::Vector3d(std::cos(phi) * std::cos(theta),
                                                              std::cos(phi) * std::sin(theta),
                                                              std::sin(phi));
        Camera cam;
        cam.intr = spec.intr;
        cam.pose = look_at(eye, spec.center_mm);
        cams.push_back(cam);
    }
    return cams;
}

namespace {

json matrix3_to_json(const Eigen::Matrix3d& m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
    return rows;
}

Eigen::Matrix3d matrix3_from_json(const json& j) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

}  // namespace

void save_poses(const std::filesystem::path& file, const std::vector<Camera>& cams) {
    json arr = json::array();
    for (const auto& cam : cams) {
        json rec;
        rec["K"] = matrix3_to_json(cam.intr.matrix());
        rec["R"] = matrix3_to_json(cam.pose.R);
        rec["X_o"] = {cam.pose.origin.x(), cam.pose.origin.y(), cam.pose.origin.z()};
        rec["width"] = cam.intr.width;
        rec["height"] = cam.intr.height;
        arr.push_back(std::move(rec));
    }
    std::ofstream out(file);
    if (!out) throw IoError("save_poses: cannot open " + file.string());
    out << arr.dump(2) << "\n";
}

std::vector<Camera> load_poses(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("load_poses: cannot open " + file.string());
    json arr = json::parse(in);
    std::vector<Camera> cams;
    for (const auto& rec : arr) {
        Camera cam;
        Eigen::Matrix3d K = matrix3_from_json(rec.at("K"));
        cam.intr.fx = K(0, 0);
        cam.intr.fy = K(1, 1);
        cam.intr.cx = K(0, 2);
        cam.intr.cy = K(1, 2);
        cam.intr.width = rec.at("width").get<int>();
        cam.intr.height = rec.at("height").get<int>();
        cam.pose.R = matrix3_from_json(rec.at("R"));
        const auto& o = rec.at("X_o");
        cam.pose.origin = Eigen::Vector3d(o.at(0).get<double>(), o.at(1).get<double>(),
                                          o.at(2).get<double>());
        cams.push_back(cam);
    }
    return cams;
}

void save_correspondences(const std::filesystem::path& file,
                          const FiducialCorrespondences& corrs) {
    json j;
    j["points3d"] = json::array();
    for (const auto& p : corrs.points3d) j["points3d"].push_back({p.x(), p.y(), p.z()});
    j["points2d"] = json::array();
    for (const auto& p : corrs.points2d) j["points2d"].push_back({p.x(), p.y()});
    std::ofstream out(file);
    if (!out) throw IoError("save_correspondences: cannot open " + file.string());
    out << j.dump(2) << "\n";
}

FiducialCorrespondences load_correspondences(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("load_correspondences: cannot open " + file.string());
    json j = json::parse(in);
    FiducialCorrespondences corrs;
    for (const auto& p : j.at("points3d"))
        corrs.points3d.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(),
                                    p.at(2).get<double>());
    for (const auto& p : j.at("points2d"))
        corrs.points2d.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return corrs;
}

}  // namespace xsplat
