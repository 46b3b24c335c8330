#include "scenealign/diffusion.hpp"

#include <cmath>
#include <filesystem>

#include "scenealign/error.hpp"

namespace scenealign {

Tensor gaussian_like(const Tensor& ref, Rng& rng) {
    Tensor out(ref.shape);
    for (auto& v : out.data) v = rng.normal_f();
    return out;
}

Tensor forward_sample(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& ns) {
    if (t < 0 || t > ns.T) throw RangeError("forward_sample: t outside [0, T]");
    if (!z0.same_shape(eps)) throw RangeError("forward_sample: eps shape mismatch");
    const double a = ns.sqrt_ab(t);
    const double b = ns.sqrt_one_minus_ab(t);
    Tensor out(z0.shape);
    for (size_t i = 0; i < z0.size(); ++i)
        out.data[i] = static_cast<float>(a * z0.data[i] + b * eps.data[i]);
    return out;
}

LatentState denoise_step(const LatentState& state, const Denoiser& net,
                         std::span<const float> cond, const NoiseSchedule& ns, Rng& rng) {
    const int t = state.t;
    if (t < 1 || t > ns.T) throw RangeError("denoise_step: t outside [1, T]");
    Tensor eps_hat = net.predict_noise(state.z, t, cond);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(ns.alpha[t]);
    // beta_t = 0 only arises in degenerate test schedules; it makes the step an identity
    const double coef = ns.beta[t] == 0.0 ? 0.0 : ns.beta[t] / ns.sqrt_one_minus_ab(t);
    const double sigma = t > 1 ? std::sqrt(ns.beta[t]) : 0.0;

    LatentState next;
    next.t = t - 1;
    next.z = Tensor(state.z.shape);
    for (size_t i = 0; i < state.z.size(); ++i) {
        double mu = (state.z.data[i] - coef * eps_hat.data[i]) * inv_sqrt_alpha;
        if (sigma > 0.0) mu += sigma * rng.normal();
        next.z.data[i] = static_cast<float>(mu);
    }
    return next;
}

Tensor predict_x0(const LatentState& state, const Denoiser& net, std::span<const float> cond,
                  const NoiseSchedule& ns) {
    const int t = state.t;
    if (t < 0 || t > ns.T) throw RangeError("predict_x0: t outside [0, T]");
    if (t == 0) return state.z;  // already clean
    Tensor eps_hat = net.predict_noise(state.z, t, cond);
    const double a = ns.sqrt_ab(t);
    const double b = ns.sqrt_one_minus_ab(t);
    Tensor out(state.z.shape);
    for (size_t i = 0; i < state.z.size(); ++i)
        out.data[i] = static_cast<float>((state.z.data[i] - b * eps_hat.data[i]) / a);
    return out;
}

double residual_loss(Denoiser& net, const Tensor& z_t, int t, std::span<const float> cond,
                     const Tensor& eps_target, double weight, bool with_grads, double grad_scale) {
    Tensor eps_hat = with_grads ? net.forward_train(z_t, t, cond)
                                : net.predict_noise(z_t, t, cond);
    const size_t n = eps_hat.size();
    double sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double r = static_cast<double>(eps_hat.data[i]) - eps_target.data[i];
        sq += r * r;
    }
    const double loss = weight * sq / static_cast<double>(n);
    if (with_grads) {
        Tensor dout(eps_hat.shape);
        const double c = weight * grad_scale * 2.0 / static_cast<double>(n);
        for (size_t i = 0; i < n; ++i)
            dout.data[i] =
                static_cast<float>(c * (static_cast<double>(eps_hat.data[i]) - eps_target.data[i]));
        net.backward(dout);
    }
    return loss;
}

LossDraw training_loss_draw(const Tensor& z0, const NoiseSchedule& ns, uint64_t draw_seed,
                            size_t index) {
    Rng rng(Rng::mix(draw_seed, 0xba7c4ULL + index));
    LossDraw draw;
    draw.t = 1 + rng.bounded_int(ns.T);
    draw.eps = gaussian_like(z0, rng);
    return draw;
}

double training_loss(Denoiser& net, const std::vector<TrainItem>& batch, const NoiseSchedule& ns,
                     uint64_t draw_seed, bool with_grads) {
    if (batch.empty()) throw EmptyInputError("training_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        LossDraw draw = training_loss_draw(*batch[i].z0, ns, draw_seed, i);
        Tensor z_t = forward_sample(*batch[i].z0, draw.t, draw.eps, ns);
        total += residual_loss(net, z_t, draw.t, *batch[i].cond, draw.eps, 1.0, with_grads, inv_b);
    }
    return total * inv_b;
}

Tensor sample_latent(const Denoiser& net, int canvas, std::span<const float> cond,
                     const NoiseSchedule& ns, uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x5a3f1eULL));
    LatentState state;
    state.t = ns.T;
    state.z = Tensor({3, canvas, canvas});
    for (auto& v : state.z.data) v = rng.normal_f();
    while (state.t > 0) state = denoise_step(state, net, cond, ns, rng);
    return state.z;
}

Image sample_image(const CondUNet& net, const Codec& codec, std::span<const float> cond,
                   const NoiseSchedule& ns, uint64_t seed) {
    return codec.decode(sample_latent(net, net.config().canvas, cond, ns, seed));
}

void AdamState::init(Denoiser& net) {
    m.clear();
    v.clear();
    step = 0;
    for (Param* p : net.params()) {
        m.emplace_back(p->value.size(), 0.0f);
        v.emplace_back(p->value.size(), 0.0f);
    }
}

void AdamState::apply(Denoiser& net) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    auto params = net.params();
    for (size_t pi = 0; pi < params.size(); ++pi) {
        float* w = params[pi]->value.ptr();
        const float* g = params[pi]->grad.ptr();
        float* mm = m[pi].data();
        float* vv = v[pi].data();
        const size_t n = params[pi]->value.size();
        for (size_t i = 0; i < n; ++i) {
            mm[i] = static_cast<float>(beta1 * mm[i] + (1.0 - beta1) * g[i]);
            vv[i] = static_cast<float>(beta2 * vv[i] + (1.0 - beta2) * g[i] * g[i]);
            const double mhat = mm[i] / bc1;
            const double vhat = vv[i] / bc2;
            w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

void sgd_step(Denoiser& net, double lr) {
    for (Param* p : net.params()) {
        float* w = p->value.ptr();
        const float* g = p->grad.ptr();
        for (size_t i = 0; i < p->value.size(); ++i)
            w[i] -= static_cast<float>(lr * g[i]);
    }
}

PretrainResult pretrain(CondUNet& net, const std::vector<TrainItem>& dataset,
                        const NoiseSchedule& ns, const PretrainConfig& cfg,
                        const std::function<void(int, double)>& on_step) {
    if (dataset.empty()) throw EmptyInputError("pretrain: empty dataset");
    PretrainResult result;
    AdamState adam;
    adam.lr = cfg.lr;
    adam.init(net);
    Rng order_rng(Rng::mix(cfg.seed, 0x0d3fULL));

    std::vector<size_t> perm(dataset.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    size_t cursor = perm.size();

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<TrainItem> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= perm.size()) {
                for (size_t i = perm.size(); i > 1; --i)
                    std::swap(perm[i - 1], perm[order_rng.bounded(i)]);
                cursor = 0;
            }
            batch.push_back(dataset[perm[cursor++]]);
        }
        net.zero_grads();
        double loss =
            training_loss(net, batch, ns, Rng::mix(cfg.seed, 0x77a1ULL + step), true);
        if (!std::isfinite(loss))
            throw TrainingDiverged("pretrain: non-finite loss at step " + std::to_string(step));
        adam.apply(net);
        result.losses.push_back(loss);
        result.steps_done = step + 1;
        if (on_step) on_step(step, loss);
        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
            (step + 1) % cfg.checkpoint_every == 0) {
            std::string path =
                cfg.checkpoint_dir + "/pretrain_step" + std::to_string(step + 1) + ".ckpt";
            save_checkpoint(path, net, ns, step + 1);
            result.checkpoints.push_back(path);
        }
    }
    return result;
}

}  // namespace scenealign
