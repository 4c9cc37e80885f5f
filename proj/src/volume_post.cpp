#include "xsplat/volume_post.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "xsplat/errors.hpp"
#include "xsplat/parallel.hpp"

namespace xsplat {

using json = nlohmann::ordered_json;

Volume voxelize(const SplatScene& s, const VoxelGrid& grid,
                const VoxelizeOptions& opts) {
    if (grid.dims.minCoeff() < 1) throw InvalidSpec("voxelize: grid dims must be >= 1");
    if (grid.spacing_mm.minCoeff() <= 0.0)
        throw InvalidSpec("voxelize: spacing must be positive");

    Volume v;
    v.dims = grid.dims;
    v.spacing = grid.spacing_mm;
    v.origin = grid.origin_mm;
    v.values.assign(std::size_t(grid.dims.x()) * grid.dims.y() * grid.dims.z(), 0.0);

    struct Prep {
        Eigen::Vector3d p_world;
        Eigen::Matrix3d Q;  // world-units inverse covariance
        double rho;
        int lo[3], hi[3];   // inclusive voxel box, empty when lo > hi
    };
    const double sw = s.world_transform.scale;
    std::vector<Prep> prep(s.kernels.size());
    for (std::size_t i = 0; i < s.kernels.size(); ++i) {
        const auto& k = s.kernels[i];
        Prep& pr = prep[i];
        pr.p_world = s.world_transform.to_world(k.position);
        const Eigen::Matrix3d cov = (sw * sw) * kernel_covariance(k);
        pr.Q = cov.inverse();
        pr.rho = kernel_density_amplitude(k);
        for (int a = 0; a < 3; ++a) {
            const double r = opts.truncation_sigma * std::sqrt(cov(a, a));
            const double c = (pr.p_world[a] - grid.origin_mm[a]) / grid.spacing_mm[a];
            pr.lo[a] = std::max(0, int(std::ceil(c - r / grid.spacing_mm[a])));
            pr.hi[a] = std::min(grid.dims[a] - 1, int(std::floor(c + r / grid.spacing_mm[a])));
        }
    }

    // z-slabs own disjoint voxels; kernels visit each slab in index order
    parallel_for(grid.dims.z(), [&](std::int64_t zb, std::int64_t ze) {
        for (const auto& pr : prep) {
            const int z0 = std::max<int>(pr.lo[2], int(zb));
            const int z1 = std::min<int>(pr.hi[2], int(ze) - 1);
            if (z0 > z1 || pr.lo[0] > pr.hi[0] || pr.lo[1] > pr.hi[1]) continue;
            for (int z = z0; z <= z1; ++z)
                for (int y = pr.lo[1]; y <= pr.hi[1]; ++y)
                    for (int x = pr.lo[0]; x <= pr.hi[0]; ++x) {
                        const Eigen::Vector3d d = v.voxel_center(x, y, z) - pr.p_world;
                        v.at(x, y, z) += pr.rho * std::exp(-0.5 * d.dot(pr.Q * d));
                    }
        }
    });
    return v;
}

Volume threshold_and_crop(const Volume& v, double percentile,
                          const std::optional<CropBox>& crop) {
    if (percentile < 0.0 || percentile > 100.0)
        throw InvalidSpec("threshold_and_crop: percentile outside [0, 100]");

    std::vector<double> sorted = v.values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const std::size_t rank =
        std::max<std::size_t>(1, std::size_t(std::ceil(percentile / 100.0 * double(n))));
    const double tau = sorted[rank - 1];

    Volume out = v;
    for (auto& val : out.values)
        if (val <= tau) val = 0.0;

    if (!crop) return out;
    const CropBox& box = *crop;
    for (int a = 0; a < 3; ++a)
        if (box.lo[a] < 0 || box.hi[a] > v.dims[a] || box.lo[a] >= box.hi[a])
            throw InvalidCrop("threshold_and_crop: crop box outside the volume");

    Volume cropped;
    cropped.dims = box.hi - box.lo;
    cropped.spacing = v.spacing;
    cropped.origin = v.origin + box.lo.cast<double>().cwiseProduct(v.spacing);
    cropped.values.resize(std::size_t(cropped.dims.x()) * cropped.dims.y() * cropped.dims.z());
    for (int z = 0; z < cropped.dims.z(); ++z)
        for (int y = 0; y < cropped.dims.y(); ++y)
            for (int x = 0; x < cropped.dims.x(); ++x)
                cropped.at(x, y, z) = out.at(x + box.lo.x(), y + box.lo.y(), z + box.lo.z());
    return cropped;
}

SliceAxis slice_axis_from_string(const std::string& s) {
    if (s == "axial") return SliceAxis::axial;
    if (s == "coronal") return SliceAxis::coronal;
    if (s == "sagittal") return SliceAxis::sagittal;
    throw InvalidSpec("unknown slice axis: " + s);
}

std::vector<SliceImage> export_slices(const Volume& v, SliceAxis axis,
                                      double window_lo, double window_hi) {
    if (window_hi <= window_lo) {
        window_lo = 0.0;
        std::vector<double> sorted = v.values;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t rank = std::max<std::size_t>(
            1, std::size_t(std::ceil(0.995 * double(sorted.size()))));
        window_hi = sorted[rank - 1];
    }
    const double span = window_hi - window_lo;

    auto value_at = [&](int i, int j, int slice) {
        switch (axis) {
            case SliceAxis::axial: return v.at(i, j, slice);      // z slices, xy plane
            case SliceAxis::coronal: return v.at(i, slice, j);    // y slices, xz plane
            default: return v.at(slice, i, j);                    // x slices, yz plane
        }
    };
    int n_slices, w, h;
    switch (axis) {
        case SliceAxis::axial: n_slices = v.dims.z(); w = v.dims.x(); h = v.dims.y(); break;
        case SliceAxis::coronal: n_slices = v.dims.y(); w = v.dims.x(); h = v.dims.z(); break;
        default: n_slices = v.dims.x(); w = v.dims.y(); h = v.dims.z(); break;
    }

    std::vector<SliceImage> out(n_slices);
    for (int s = 0; s < n_slices; ++s) {
        SliceImage& img = out[s];
        img.width = w;
        img.height = h;
        img.pixels.resize(std::size_t(w) * h);
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) {
                double t = span > 0.0 ? (value_at(i, j, s) - window_lo) / span : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                img.pixels[std::size_t(j) * w + i] =
                    static_cast<std::uint16_t>(std::lround(t * 65535.0));
            }
    }
    return out;
}

namespace {

void write_png16(const std::filesystem::path& file, const SliceImage& img) {
    FILE* fp = std::fopen(file.string().c_str(), "wb");
    if (!fp) throw IoError("write_png16: cannot open " + file.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError("write_png16: libpng failure for " + file.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);  // buffers are host little-endian
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, reinterpret_cast<png_const_bytep>(
                               &img.pixels[std::size_t(y) * img.width]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

const char* axis_name(SliceAxis axis) {
    switch (axis) {
        case SliceAxis::axial: return "axial";
        case SliceAxis::coronal: return "coronal";
        default: return "sagittal";
    }
}

}  // namespace

void save_slices_png(const std::filesystem::path& dir, SliceAxis axis,
                     const std::vector<SliceImage>& slices) {
    std::filesystem::create_directories(dir);
    char name[64];
    for (std::size_t i = 0; i < slices.size(); ++i) {
        std::snprintf(name, sizeof(name), "%s_%04zu.png", axis_name(axis), i);
        write_png16(dir / name, slices[i]);
    }
}

double psnr(const ProjectionImage& a, const ProjectionImage& b, double data_range) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeMismatch("psnr: image sizes differ");
    if (data_range <= 0.0) throw InvalidSpec("psnr: data_range must be positive");
    double se = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        se += d * d;
    }
    const double mse = se / double(a.pixels.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const ProjectionImage& a, const ProjectionImage& b, const SsimConfig& cfg) {
    return ssim_mean(a, b, cfg);
}

EvaluationReport evaluate(const SplatScene& s,
                          const std::vector<ProjectionImage>& testset,
                          const RenderOptions& opts) {
    if (testset.empty()) throw InvalidSpec("evaluate: empty test set");

    EvaluationReport rep;
    rep.n_views = int(testset.size());
    rep.data_range_policy = "max over test-set targets";
    double range = 0.0;
    for (const auto& t : testset) range = std::max(range, t.max_value());
    rep.data_range = range > 0.0 ? range : 1.0;

    SsimConfig scfg;
    scfg.data_range = rep.data_range;
    for (const auto& target : testset) {
        const ProjectionImage rendered = render(s, target.camera, opts);
        rep.per_view_psnr.push_back(psnr(rendered, target, rep.data_range));
        rep.per_view_ssim.push_back(ssim_mean(rendered, target, scfg));
    }

    auto mean_std = [](const std::vector<double>& xs, double& mean, double& stdev) {
        mean = 0.0;
        for (double x : xs) mean += x;
        mean /= double(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        stdev = std::sqrt(var / double(xs.size()));
    };
    mean_std(rep.per_view_psnr, rep.psnr_mean, rep.psnr_std);
    mean_std(rep.per_view_ssim, rep.ssim_mean, rep.ssim_std);
    return rep;
}

namespace {

json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
}

}  // namespace

void save_report_json(const std::filesystem::path& file, const EvaluationReport& r) {
    json j;
    j["n_views"] = r.n_views;
    j["data_range_policy"] = r.data_range_policy;
    j["data_range"] = r.data_range;
    j["psnr_mean"] = finite_or_string(r.psnr_mean);
    j["psnr_std"] = finite_or_string(r.psnr_std);
    j["ssim_mean"] = r.ssim_mean;
    j["ssim_std"] = r.ssim_std;
    json views = json::array();
    for (int i = 0; i < r.n_views; ++i)
        views.push_back({{"view", i},
                         {"psnr", finite_or_string(r.per_view_psnr[i])},
                         {"ssim", r.per_view_ssim[i]}});
    j["per_view"] = std::move(views);
    std::ofstream out(file);
    if (!out) throw IoError("save_report_json: cannot open " + file.string());
    out << j.dump(2) << "\n";
}

void save_report_csv(const std::filesystem::path& file, const EvaluationReport& r) {
    std::ofstream out(file);
    if (!out) throw IoError("save_report_csv: cannot open " + file.string());
    out << "view,psnr,ssim\n";
    char buf[128];
    for (int i = 0; i < r.n_views; ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", i, r.per_view_psnr[i],
                      r.per_view_ssim[i]);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.9g,%.9g\n", r.psnr_mean, r.ssim_mean);
    out << buf;
    std::snprintf(buf, sizeof(buf), "std,%.9g,%.9g\n", r.psnr_std, r.ssim_std);
    out << buf;
}

}  // namespace xsplat
