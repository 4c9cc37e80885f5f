#include "xsplat/scene.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "xsplat/errors.hpp"
#include "xsplat/rng.hpp"

namespace xsplat {

using json = nlohmann::ordered_json;

double softplus(double x) {
    // log(1 + e^x), stable on both tails
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
    // x with softplus(x) = y, y > 0
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

double softplus_grad(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
    const Eigen::Vector4d n = q / q.norm();
    const double w = n[0], x = n[1], y = n[2], z = n[3];
    Eigen::Matrix3d R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Eigen::Matrix3d kernel_covariance(const GaussianKernel& k) {
    const Eigen::Matrix3d R = quat_to_rotation(k.rotation);
    const Eigen::Vector3d var = (2.0 * k.log_scales).array().exp();
    return R * var.asDiagonal() * R.transpose();
}

SplatScene init_random(const BBox& bbox, int n,
                       std::pair<double, double> density_range,
                       double scale_init, std::uint64_t seed) {
    if (n < 1) throw InvalidSpec("init_random: kernel count must be >= 1");
    if (scale_init <= 0.0) throw InvalidSpec("init_random: scale_init must be > 0");
    if (density_range.first <= 0.0 || density_range.second < density_range.first)
        throw InvalidSpec("init_random: bad density range");

    Rng rng(seed);
    SplatScene s;
    s.bbox = bbox;
    s.kernels.resize(n);
    const double log_scale = std::log(scale_init);
    for (auto& k : s.kernels) {
        for (int a = 0; a < 3; ++a) k.position[a] = rng.uniform(bbox.lo[a], bbox.hi[a]);
        k.log_scales.setConstant(log_scale);
        k.rotation = Eigen::Vector4d(1, 0, 0, 0);
        k.raw_density = softplus_inverse(rng.uniform(density_range.first, density_range.second));
    }
    return s;
}

double scene_density(const SplatScene& s, const Eigen::Vector3d& x) {
    double acc = 0.0;
    for (const auto& k : s.kernels) {
        const Eigen::Vector3d d = x - k.position;
        const Eigen::Matrix3d Q = kernel_covariance(k).inverse();
        acc += kernel_density_amplitude(k) * std::exp(-0.5 * d.dot(Q * d));
    }
    return acc;
}

DensityEvaluator::DensityEvaluator(const SplatScene& s) {
    entries_.reserve(s.kernels.size());
    for (const auto& k : s.kernels)
        entries_.push_back({k.position, kernel_covariance(k).inverse(),
                            kernel_density_amplitude(k)});
}

double DensityEvaluator::operator()(const Eigen::Vector3d& x) const {
    double acc = 0.0;
    for (const auto& e : entries_) {
        const Eigen::Vector3d d = x - e.p;
        acc += e.rho * std::exp(-0.5 * d.dot(e.Q * d));
    }
    return acc;
}

void save_scene(const std::filesystem::path& file, const SplatScene& s) {
    json j;
    j["version"] = 1;
    j["world_transform"] = {
        {"scale", s.world_transform.scale},
        {"center", {s.world_transform.center.x(), s.world_transform.center.y(),
                    s.world_transform.center.z()}}};
    j["bbox"] = {{"lo", {s.bbox.lo.x(), s.bbox.lo.y(), s.bbox.lo.z()}},
                 {"hi", {s.bbox.hi.x(), s.bbox.hi.y(), s.bbox.hi.z()}}};
    json arr = json::array();
    for (const auto& k : s.kernels) {
        json rec;
        rec["p"] = {k.position.x(), k.position.y(), k.position.z()};
        rec["log_scales"] = {k.log_scales.x(), k.log_scales.y(), k.log_scales.z()};
        rec["rotation"] = {k.rotation[0], k.rotation[1], k.rotation[2], k.rotation[3]};
        rec["raw_density"] = k.raw_density;
        arr.push_back(std::move(rec));
    }
    j["kernels"] = std::move(arr);
    std::ofstream out(file);
    if (!out) throw IoError("save_scene: cannot open " + file.string());
    out << j.dump() << "\n";
}

SplatScene load_scene(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("load_scene: cannot open " + file.string());
    json j = json::parse(in);
    if (!j.contains("version")) throw IoError("load_scene: missing version field");
    SplatScene s;
    s.world_transform.scale = j.at("world_transform").at("scale").get<double>();
    for (int i = 0; i < 3; ++i)
        s.world_transform.center[i] =
            j.at("world_transform").at("center").at(i).get<double>();
    if (j.contains("bbox")) {
        for (int i = 0; i < 3; ++i) {
            s.bbox.lo[i] = j.at("bbox").at("lo").at(i).get<double>();
            s.bbox.hi[i] = j.at("bbox").at("hi").at(i).get<double>();
        }
    }
    for (const auto& rec : j.at("kernels")) {
        GaussianKernel k;
        for (int i = 0; i < 3; ++i) {
            k.position[i] = rec.at("p").at(i).get<double>();
            k.log_scales[i] = rec.at("log_scales").at(i).get<double>();
        }
        for (int i = 0; i < 4; ++i) k.rotation[i] = rec.at("rotation").at(i).get<double>();
        k.raw_density = rec.at("raw_density").get<double>();
        s.kernels.push_back(k);
    }
    return s;
}

}  // namespace xsplat
