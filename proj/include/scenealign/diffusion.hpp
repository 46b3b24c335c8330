#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scenealign/codec.hpp"
#include "scenealign/denoiser.hpp"
#include "scenealign/rng.hpp"
#include "scenealign/schedule.hpp"
#include "scenealign/tensor.hpp"

namespace scenealign {

struct LatentState {
    Tensor z;
    int t = 0;
};

Tensor gaussian_like(const Tensor& ref, Rng& rng);

// Closed-form forward corruption z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) eps.
Tensor forward_sample(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& ns);

// One reverse step t -> t-1 with sigma_t^2 = beta_t and sigma_1 = 0.
LatentState denoise_step(const LatentState& state, const Denoiser& net,
                         std::span<const float> cond, const NoiseSchedule& ns, Rng& rng);

// One-step clean-latent prediction from (z_t, predicted noise). t = 0 returns
// the latent unchanged.
Tensor predict_x0(const LatentState& state, const Denoiser& net, std::span<const float> cond,
                  const NoiseSchedule& ns);

// Per-sample Eq.-style residual term: weight * mean((eps - eps_hat)^2).
// When with_grads is set, gradients scaled by grad_scale are accumulated into
// the network (grad_scale carries the 1/batch factor).
double residual_loss(Denoiser& net, const Tensor& z_t, int t, std::span<const float> cond,
                     const Tensor& eps_target, double weight, bool with_grads,
                     double grad_scale = 1.0);

struct TrainItem {
    const Tensor* z0 = nullptr;
    const std::vector<float>* cond = nullptr;
};

// The (t, eps) draw used for batch item `index` under `draw_seed`. Exposed so
// oracle stubs in tests can reproduce the exact noise target.
struct LossDraw {
    int t = 0;
    Tensor eps;
};
LossDraw training_loss_draw(const Tensor& z0, const NoiseSchedule& ns, uint64_t draw_seed,
                            size_t index);

// Simplified VLB loss over a batch: draws t ~ U[1, T] and eps per item,
// returns mean over items of mean((eps - eps_hat)^2). Deterministic given
// draw_seed. Gradients are accumulated (not zeroed) when with_grads is set.
double training_loss(Denoiser& net, const std::vector<TrainItem>& batch, const NoiseSchedule& ns,
                     uint64_t draw_seed, bool with_grads);

// Full reverse chain from z_T ~ N(0, I).
Tensor sample_latent(const Denoiser& net, int canvas, std::span<const float> cond,
                     const NoiseSchedule& ns, uint64_t seed);
Image sample_image(const CondUNet& net, const Codec& codec, std::span<const float> cond,
                   const NoiseSchedule& ns, uint64_t seed);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<std::vector<float>> m, v;

    void init(Denoiser& net);
    void apply(Denoiser& net);
};

void sgd_step(Denoiser& net, double lr);

struct PretrainConfig {
    int steps = 2000;
    int batch_size = 16;
    double lr = 2e-3;
    uint64_t seed = 1;
    int checkpoint_every = 500;  // 0 disables periodic checkpoints
    std::string checkpoint_dir;
    int log_every = 100;
};

struct PretrainResult {
    std::vector<double> losses;          // per optimizer step
    std::vector<std::string> checkpoints;
    long long steps_done = 0;
};

// Adam loop over the paired dataset. Aborts with TrainingDiverged on NaN.
PretrainResult pretrain(CondUNet& net, const std::vector<TrainItem>& dataset,
                        const NoiseSchedule& ns, const PretrainConfig& cfg,
                        const std::function<void(int, double)>& on_step = {});

}  // namespace scenealign
