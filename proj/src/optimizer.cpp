#include "xsplat/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "xsplat/volume_post.hpp"

namespace xsplat {

DensifyResult densify_and_prune(const SplatScene& s, const GradStats& stats,
                                const TrainConfig& cfg, Rng& rng) {
    const std::size_t n = s.kernels.size();
    DensifyResult res;
    res.scene.bbox = s.bbox;
    res.scene.world_transform = s.world_transform;
    res.scene.kernels.reserve(n);

    int added = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const GaussianKernel& k = s.kernels[i];
        if (kernel_density_amplitude(k) < cfg.prune_density_threshold) {
            ++res.n_pruned;
            continue;
        }

        double mean_grad = 0.0;
        if (i < stats.observations.size() && stats.observations[i] > 0)
            mean_grad = stats.grad_norm_sum[i] / stats.observations[i];

        const bool budget_ok = int(n) + added + 1 < cfg.max_kernels;
        if (mean_grad > cfg.densify_grad_threshold && budget_ok) {
            const Eigen::Vector3d sigmas = k.log_scales.array().exp();
            if (sigmas.maxCoeff() < cfg.split_scale_threshold) {
                // clone: two copies at the same position. Densities are
                // halved so the additively rendered field is unchanged by
                // the event (accumulation is a plain sum, not compositing).
                GaussianKernel half = k;
                half.raw_density =
                    softplus_inverse(0.5 * kernel_density_amplitude(k));
                res.scene.kernels.push_back(half);
                res.source.push_back(int(i));
                res.fresh.push_back(0);
                res.scene.kernels.push_back(half);
                res.source.push_back(int(i));
                res.fresh.push_back(1);
                ++res.n_cloned;
                ++added;
            } else {
                // split: two children with scales / 1.6, positions drawn from
                // the parent footprint, clamped near the bbox
                const Eigen::Matrix3d A =
                    quat_to_rotation(k.rotation) * sigmas.asDiagonal();
                const Eigen::Matrix3d Sigma = A * A.transpose();
                for (int c = 0; c < 2; ++c) {
                    GaussianKernel child = k;
                    child.log_scales.array() -= std::log(1.6);
                    const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
                    child.position = k.position + A * z;
                    for (int a = 0; a < 3; ++a) {
                        const double sd = std::sqrt(Sigma(a, a));
                        child.position[a] = std::clamp(child.position[a],
                                                       s.bbox.lo[a] - sd,
                                                       s.bbox.hi[a] + sd);
                    }
                    res.scene.kernels.push_back(child);
                    res.source.push_back(int(i));
                    res.fresh.push_back(1);
                }
                ++res.n_split;
                ++added;
            }
        } else {
            res.scene.kernels.push_back(k);
            res.source.push_back(int(i));
            res.fresh.push_back(0);
        }
    }
    return res;
}

namespace {

struct AdamState {
    KernelGradients m, v;

    void reset(std::size_t n) {
        m.resize_zero(n);
        v.resize_zero(n);
    }
};

inline void adam_scalar(double& param, double& m, double& v, double g, double lr,
                        double b1, double b2, double eps, double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

}  // namespace

TrainResult train(SplatScene scene, const std::vector<ProjectionImage>& trainset,
                  const TrainConfig& cfg, const LossWeights& weights,
                  const std::vector<ProjectionImage>* holdout,
                  const std::function<void(int, const SplatScene&)>& checkpoint_sink) {
    if (trainset.empty()) throw InvalidSpec("train: empty training set");
    if (scene.kernels.empty()) throw InvalidSpec("train: empty scene");
    if (cfg.iterations < 1) throw InvalidSpec("train: iterations must be >= 1");

    const int densify_stop =
        cfg.densify_stop < 0 ? cfg.iterations / 2 : cfg.densify_stop;

    Rng rng(cfg.seed);
    AdamState adam;
    adam.reset(scene.kernels.size());
    GradStats stats;
    stats.reset(scene.kernels.size());

    std::vector<int> order;
    std::size_t order_pos = 0;
    auto next_view = [&]() -> const ProjectionImage& {
        if (order_pos >= order.size()) {
            order.resize(trainset.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
            for (std::size_t i = 0; i + 1 < order.size(); ++i)
                std::swap(order[i], order[i + int(rng.uniform_int(int(order.size() - i)))]);
            order_pos = 0;
        }
        return trainset[order[order_pos++]];
    };

    TrainResult out;
    out.history.reserve(cfg.iterations);
    SplatScene last_finite = scene;

    for (int it = 0; it < cfg.iterations; ++it) {
        const ProjectionImage& target = next_view();

        TvGridSpec tvspec;
        const TvGridSpec* tvptr = nullptr;
        if (weights.lambda_tv > 0.0) {
            tvspec.dims = cfg.tv_grid_dims;
            tvspec.spacing = cfg.tv_grid_spacing;
            for (int a = 0; a < 3; ++a) {
                const double span = (tvspec.dims[a] - 1) * tvspec.spacing;
                const double slack = (scene.bbox.hi[a] - scene.bbox.lo[a]) - span;
                tvspec.origin[a] = slack > 0.0
                                       ? rng.uniform(scene.bbox.lo[a], scene.bbox.lo[a] + slack)
                                       : scene.bbox.lo[a] + 0.5 * slack;
            }
            tvptr = &tvspec;
        }

        GradientResult gres = compute_gradients(scene, target, weights, tvptr, cfg.render);
        if (!std::isfinite(gres.loss.total))
            throw TrainingDiverged("train: non-finite loss at iteration " + std::to_string(it),
                                   std::move(last_finite), it);
        last_finite.kernels = scene.kernels;

        const std::size_t n = scene.kernels.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (gres.culled[i]) continue;
            stats.grad_norm_sum[i] += gres.grads.position[i].norm();
            stats.observations[i] += 1;
        }

        HistoryRow row;
        row.iter = it;
        row.loss_total = gres.loss.total;
        row.loss_l1 = gres.loss.l1;
        row.loss_dssim = gres.loss.dssim;
        row.loss_tv = gres.loss.tv;
        row.n_kernels = int(n);

        // Adam step, position rate decayed exponentially over the run
        const double progress =
            cfg.iterations > 1 ? double(it) / double(cfg.iterations - 1) : 1.0;
        const double lr_pos = cfg.lr_position * std::pow(cfg.position_lr_final, progress);
        const int t = it + 1;
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
        for (std::size_t i = 0; i < n; ++i) {
            GaussianKernel& k = scene.kernels[i];
            for (int a = 0; a < 3; ++a) {
                adam_scalar(k.position[a], adam.m.position[i][a], adam.v.position[i][a],
                            gres.grads.position[i][a], lr_pos, cfg.adam_beta1,
                            cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
                adam_scalar(k.log_scales[a], adam.m.log_scales[i][a],
                            adam.v.log_scales[i][a], gres.grads.log_scales[i][a],
                            cfg.lr_scales, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
                            bc1, bc2);
            }
            for (int a = 0; a < 4; ++a)
                adam_scalar(k.rotation[a], adam.m.rotation[i][a], adam.v.rotation[i][a],
                            gres.grads.rotation[i][a], cfg.lr_rotation, cfg.adam_beta1,
                            cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
            adam_scalar(k.raw_density, adam.m.raw_density[i], adam.v.raw_density[i],
                        gres.grads.raw_density[i], cfg.lr_density, cfg.adam_beta1,
                        cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
            k.rotation /= k.rotation.norm();
        }

        if (t >= cfg.densify_start && t <= densify_stop &&
            t % cfg.densify_interval == 0) {
            DensifyResult dres = densify_and_prune(scene, stats, cfg, rng);
            AdamState next;
            next.reset(dres.scene.kernels.size());
            for (std::size_t j = 0; j < dres.scene.kernels.size(); ++j) {
                if (dres.fresh[j]) continue;  // fresh kernels start from zero moments
                const int src = dres.source[j];
                next.m.position[j] = adam.m.position[src];
                next.v.position[j] = adam.v.position[src];
                next.m.log_scales[j] = adam.m.log_scales[src];
                next.v.log_scales[j] = adam.v.log_scales[src];
                next.m.rotation[j] = adam.m.rotation[src];
                next.v.rotation[j] = adam.v.rotation[src];
                next.m.raw_density[j] = adam.m.raw_density[src];
                next.v.raw_density[j] = adam.v.raw_density[src];
            }
            scene = std::move(dres.scene);
            adam = std::move(next);
            stats.reset(scene.kernels.size());
        }

        if (holdout && !holdout->empty() && cfg.eval_interval > 0 &&
            (t % cfg.eval_interval == 0 || t == cfg.iterations)) {
            EvaluationReport rep = evaluate(scene, *holdout, cfg.render);
            row.psnr_holdout = rep.psnr_mean;
            row.ssim_holdout = rep.ssim_mean;
        }
        out.history.push_back(row);

        if (checkpoint_sink && cfg.checkpoint_interval > 0 &&
            t % cfg.checkpoint_interval == 0)
            checkpoint_sink(t, scene);
    }

    out.scene = std::move(scene);
    return out;
}

void write_history_csv(const std::filesystem::path& file,
                       const std::vector<HistoryRow>& history) {
    std::ofstream out(file);
    if (!out) throw IoError("write_history_csv: cannot open " + file.string());
    out << "iter,loss_total,loss_l1,loss_dssim,loss_tv,n_kernels,psnr_holdout,ssim_holdout\n";
    char buf[256];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%d", r.iter,
                      r.loss_total, r.loss_l1, r.loss_dssim, r.loss_tv, r.n_kernels);
        out << buf;
        if (r.psnr_holdout) {
            std::snprintf(buf, sizeof(buf), ",%.9g,%.9g", *r.psnr_holdout,
                          *r.ssim_holdout);
            out << buf;
        } else {
            out << ",,";
        }
        out << "\n";
    }
}

}  // namespace xsplat
