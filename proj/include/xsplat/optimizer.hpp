#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

#include "xsplat/gradients.hpp"
#include "xsplat/rng.hpp"

namespace xsplat {

struct TrainConfig {
    int iterations = 5000;

    // per-group Adam learning rates; the position rate decays exponentially
    // to lr_position * position_lr_final over the run
    double lr_position = 2e-4;
    double position_lr_final = 0.1;
    double lr_scales = 5e-3;
    double lr_rotation = 1e-3;
    double lr_density = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    // adaptive density control
    double densify_grad_threshold = 1e-3;
    int densify_interval = 100;
    double split_scale_threshold = 0.02;  // clone below, split at or above
    double prune_density_threshold = 5e-4;
    int densify_start = 500;
    int densify_stop = -1;  // -1: iterations / 2
    int max_kernels = 150000;

    // TV sampling grid (scene units), randomly placed inside the bbox
    Eigen::Vector3i tv_grid_dims = Eigen::Vector3i(32, 32, 32);
    double tv_grid_spacing = 0.03125;

    int eval_interval = 500;       // held-out metric cadence; 0 disables
    int checkpoint_interval = 0;   // 0: no periodic checkpoints
    std::uint64_t seed = 0;
    RenderOptions render;
};

/// Per-kernel positional gradient statistics accumulated between density
/// control events.
struct GradStats {
    std::vector<double> grad_norm_sum;
    std::vector<int> observations;

    void reset(std::size_t n) {
        grad_norm_sum.assign(n, 0.0);
        observations.assign(n, 0);
    }
};

struct DensifyResult {
    SplatScene scene;
    // For every kernel of the new scene: index of the source kernel in the
    // old scene, and whether it is a fresh child (clone copy / split child)
    // rather than a carried-over original.
    std::vector<int> source;
    std::vector<char> fresh;
    int n_cloned = 0, n_split = 0, n_pruned = 0;
};

/// Clones small / splits large high-gradient kernels (split children get
/// scales / 1.6 and positions sampled from the parent), prunes kernels whose
/// density fell below the threshold. Children are clamped to the scene bbox
/// expanded by one parent standard deviation per axis.
DensifyResult densify_and_prune(const SplatScene& s, const GradStats& stats,
                                const TrainConfig& cfg, Rng& rng);

struct HistoryRow {
    int iter = 0;
    double loss_total = 0, loss_l1 = 0, loss_dssim = 0, loss_tv = 0;
    int n_kernels = 0;
    std::optional<double> psnr_holdout;
    std::optional<double> ssim_holdout;
};

struct TrainResult {
    SplatScene scene;
    std::vector<HistoryRow> history;
};

/// Raised when the loss turns non-finite; carries the last finite scene.
struct TrainingDiverged : Error {
    SplatScene last_finite;
    int iteration;
    TrainingDiverged(const std::string& msg, SplatScene scene, int iter)
        : Error(msg), last_finite(std::move(scene)), iteration(iter) {}
};

/// Stochastic training: one seeded-shuffled view per iteration, analytic
/// gradients, per-group Adam, versor renormalization after every step, and
/// periodic density control inside [densify_start, densify_stop].
/// Deterministic for fixed inputs and seed.
TrainResult train(SplatScene scene, const std::vector<ProjectionImage>& trainset,
                  const TrainConfig& cfg, const LossWeights& weights,
                  const std::vector<ProjectionImage>* holdout = nullptr,
                  const std::function<void(int, const SplatScene&)>& checkpoint_sink = {});

void write_history_csv(const std::filesystem::path& file,
                       const std::vector<HistoryRow>& history);

}  // namespace xsplat
