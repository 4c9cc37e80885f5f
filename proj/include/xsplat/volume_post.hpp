#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xsplat/projector.hpp"
#include "xsplat/scene.hpp"
#include "xsplat/ssim.hpp"
#include "xsplat/volume.hpp"

namespace xsplat {

/// Target grid for voxelization, in world mm. origin is the center of voxel
/// (0,0,0), like Volume.
struct VoxelGrid {
    Eigen::Vector3i dims = Eigen::Vector3i(64, 64, 64);
    Eigen::Vector3d spacing_mm = Eigen::Vector3d::Ones();
    Eigen::Vector3d origin_mm = Eigen::Vector3d::Zero();
};

struct VoxelizeOptions {
    // Support cut per kernel, in sigmas. 4.5 keeps the truncated sum within
    // 1e-3 of the exact mixture on dense random scenes.
    double truncation_sigma = 4.5;
};

/// Evaluates the kernel mixture at every voxel center, gathering each
/// kernel's contribution over its truncated support box.
Volume voxelize(const SplatScene& s, const VoxelGrid& grid,
                const VoxelizeOptions& opts = {});

struct CropBox {
    Eigen::Vector3i lo = Eigen::Vector3i::Zero();  // inclusive
    Eigen::Vector3i hi = Eigen::Vector3i::Zero();  // exclusive
};

/// Nearest-rank percentile threshold (values <= tau become 0), then an
/// optional crop with the origin metadata adjusted.
Volume threshold_and_crop(const Volume& v, double percentile,
                          const std::optional<CropBox>& crop = std::nullopt);

enum class SliceAxis { axial, coronal, sagittal };
SliceAxis slice_axis_from_string(const std::string& s);

struct SliceImage {
    int width = 0, height = 0;
    std::vector<std::uint16_t> pixels;
};

/// One 16-bit grayscale image per index along the axis, linearly mapped
/// from [window_lo, window_hi] to [0, 65535]. window_hi <= window_lo selects
/// the default window [0, 99.5th percentile].
std::vector<SliceImage> export_slices(const Volume& v, SliceAxis axis,
                                      double window_lo = 0.0, double window_hi = 0.0);

void save_slices_png(const std::filesystem::path& dir, SliceAxis axis,
                     const std::vector<SliceImage>& slices);

/// 10 log10(range^2 / MSE); +infinity when the images are identical.
double psnr(const ProjectionImage& a, const ProjectionImage& b, double data_range);

/// Mean local SSIM (valid windows); see SsimConfig for the constants.
double ssim(const ProjectionImage& a, const ProjectionImage& b,
            const SsimConfig& cfg);

struct EvaluationReport {
    std::vector<double> per_view_psnr;
    std::vector<double> per_view_ssim;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;
    int n_views = 0;
    std::string data_range_policy;
    double data_range = 0.0;
};

/// Renders every held-out view and scores it against its target. The PSNR /
/// SSIM data range is the max pixel value over the test targets (recorded in
/// the report).
EvaluationReport evaluate(const SplatScene& s,
                          const std::vector<ProjectionImage>& testset,
                          const RenderOptions& opts = {});

void save_report_json(const std::filesystem::path& file, const EvaluationReport& r);
void save_report_csv(const std::filesystem::path& file, const EvaluationReport& r);

}  // namespace xsplat
