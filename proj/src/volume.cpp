#include "xsplat/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "xsplat/errors.hpp"

namespace xsplat {

using json = nlohmann::ordered_json;

double sample_volume(const Volume& v, const Eigen::Vector3d& world_mm) {
    // continuous voxel coordinates, integer values at voxel centers
    const double gx = (world_mm.x() - v.origin.x()) / v.spacing.x();
    const double gy = (world_mm.y() - v.origin.y()) / v.spacing.y();
    const double gz = (world_mm.z() - v.origin.z()) / v.spacing.z();

    const int x0 = static_cast<int>(std::floor(gx));
    const int y0 = static_cast<int>(std::floor(gy));
    const int z0 = static_cast<int>(std::floor(gz));
    const double fx = gx - x0, fy = gy - y0, fz = gz - z0;

    double acc = 0.0;
    for (int dz = 0; dz <= 1; ++dz) {
        const int z = z0 + dz;
        if (z < 0 || z >= v.dims.z()) continue;
        const double wz = dz ? fz : 1.0 - fz;
        for (int dy = 0; dy <= 1; ++dy) {
            const int y = y0 + dy;
            if (y < 0 || y >= v.dims.y()) continue;
            const double wy = dy ? fy : 1.0 - fy;
            for (int dx = 0; dx <= 1; ++dx) {
                const int x = x0 + dx;
                if (x < 0 || x >= v.dims.x()) continue;
                const double wx = dx ? fx : 1.0 - fx;
                acc += wx * wy * wz * v.at(x, y, z);
            }
        }
    }
    return acc;
}

void write_volume(const std::filesystem::path& base, const Volume& v) {
    std::filesystem::path raw = base;
    raw += ".raw";
    std::filesystem::path meta = base;
    meta += ".json";

    std::ofstream out(raw, std::ios::binary);
    if (!out) throw IoError("write_volume: cannot open " + raw.string());
    std::vector<float> buf(v.values.size());
    std::transform(v.values.begin(), v.values.end(), buf.begin(),
                   [](double d) { return static_cast<float>(d); });
    out.write(reinterpret_cast<const char*>(buf.data()),
              std::streamsize(buf.size() * sizeof(float)));
    if (!out) throw IoError("write_volume: write failed for " + raw.string());

    json j;
    j["dims"] = {v.dims.x(), v.dims.y(), v.dims.z()};
    j["spacing_mm"] = {v.spacing.x(), v.spacing.y(), v.spacing.z()};
    j["origin_mm"] = {v.origin.x(), v.origin.y(), v.origin.z()};
    j["order"] = "x-fastest";
    std::ofstream mout(meta);
    if (!mout) throw IoError("write_volume: cannot open " + meta.string());
    mout << j.dump(2) << "\n";
}

Volume read_volume(const std::filesystem::path& base) {
    std::filesystem::path raw = base;
    raw += ".raw";
    std::filesystem::path meta = base;
    meta += ".json";

    std::ifstream min(meta);
    if (!min) throw IoError("read_volume: cannot open " + meta.string());
    json j = json::parse(min);
    Volume v;
    v.dims = Eigen::Vector3i(j.at("dims").at(0), j.at("dims").at(1), j.at("dims").at(2));
    for (int i = 0; i < 3; ++i) {
        v.spacing[i] = j.at("spacing_mm").at(i).get<double>();
        v.origin[i] = j.at("origin_mm").at(i).get<double>();
    }
    if (j.value("order", "x-fastest") != std::string("x-fastest"))
        throw IoError("read_volume: unsupported memory order in " + meta.string());

    const std::size_t n = std::size_t(v.dims.x()) * v.dims.y() * v.dims.z();
    std::ifstream in(raw, std::ios::binary);
    if (!in) throw IoError("read_volume: cannot open " + raw.string());
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n * sizeof(float)));
    if (!in) throw IoError("read_volume: truncated data in " + raw.string());
    v.values.assign(buf.begin(), buf.end());
    return v;
}

}  // namespace xsplat
