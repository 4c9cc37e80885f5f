#pragma once

#include <nlohmann/json.hpp>

#include "xsplat/optimizer.hpp"
#include "xsplat/volume_post.hpp"

namespace xsplat {

/// A set of posed projection images plus a free-form provenance record
/// (phantom spec, trajectory, preprocessing applied, scene bounds, ...).
struct Dataset {
    std::vector<ProjectionImage> views;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

// Directory layout: meta.json, poses.json, images/NNN.pfm.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

/// Crops a size x size window centered on the rounded principal point; the
/// sub-pixel residual is folded into the new principal point, focal lengths
/// are unchanged. Throws CropOutOfBounds when the window does not fit.
ProjectionImage crop_principal(const ProjectionImage& image, int size);

/// Monotone histogram matching of the image onto the reference distribution
/// (4096 bins over the joint range, piecewise-linear CDF inversion). Rank
/// order of pixels is preserved. Throws InvalidReference for a constant
/// reference.
ProjectionImage standardize_intensity(const ProjectionImage& image,
                                      const ProjectionImage& reference);

/// Similarity transform mapping the world bbox onto [-1,1]^3 (uniform scale
/// 2 / max extent, centered), plus the dataset with poses re-expressed in
/// normalized units. Intrinsics are unchanged.
std::pair<Dataset, SimilarityTransform> normalize_scene_bounds(const Dataset& ds,
                                                               const BBox& world_bbox_mm);

struct SplitIndices {
    std::vector<int> train;  // shuffled; prefixes give nested subsets
    std::vector<int> test;
};

/// Seeded random sample without replacement.
SplitIndices split_dataset(int n_views, int n_train, int n_test, std::uint64_t seed);

struct SceneInit {
    int n_kernels = 50000;
    std::pair<double, double> density_range = {0.005, 0.015};
    double scale_init = 0.02;
    std::uint64_t seed = 0;
};

struct SweepPoint {
    int n_views = 0;
    double psnr_mean = 0, psnr_std = 0;
    double ssim_mean = 0, ssim_std = 0;
    int n_kernels_final = 0;
};

struct SweepReport {
    std::vector<SweepPoint> points;
};

/// Trains one scene per view count on nested prefixes of `train_views`,
/// always evaluating against the same `test_views`. Counts above the train
/// pool size throw InvalidSpec.
SweepReport run_sweep(const std::vector<ProjectionImage>& train_views,
                      const std::vector<ProjectionImage>& test_views,
                      const SimilarityTransform& world_transform,
                      const SceneInit& init, const TrainConfig& cfg,
                      const LossWeights& weights, const std::vector<int>& counts);

void save_sweep_json(const std::filesystem::path& file, const SweepReport& r);
void save_sweep_csv(const std::filesystem::path& file, const SweepReport& r);

/// Training setup parsed from a JSON config file; every TrainConfig,
/// LossWeights and SceneInit field is an optional key.
struct TrainSetup {
    TrainConfig config;
    LossWeights weights;
    SceneInit init;
};
TrainSetup load_train_setup(const std::filesystem::path& file);
TrainSetup parse_train_setup(const nlohmann::json& j);

}  // namespace xsplat
