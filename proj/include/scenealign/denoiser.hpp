#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scenealign/schedule.hpp"
#include "scenealign/tensor.hpp"

namespace scenealign {

struct Param {
    std::string name;
    std::vector<int> shape;
    Tensor value;
    Tensor grad;
};

// Conditional noise predictor eps_theta(z_t, t, cond). predict_noise is the
// inference path; forward_train/backward carry one in-flight activation cache
// (single writer, not thread safe).
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Tensor predict_noise(const Tensor& z, int t, std::span<const float> cond) const = 0;

    virtual Tensor forward_train(const Tensor& z, int t, std::span<const float> cond) {
        return predict_noise(z, t, cond);
    }
    virtual void backward(const Tensor& /*dloss_dout*/) {}
    virtual std::vector<Param*> params() { return {}; }

    void zero_grads() {
        for (Param* p : params()) p->grad.fill(0.0f);
    }
    size_t param_count() {
        size_t n = 0;
        for (Param* p : params()) n += p->value.size();
        return n;
    }
};

struct UNetConfig {
    int canvas = 32;        // must be divisible by 4
    int cond_dim = 0;
    int base_width = 24;
    int temb_dim = 64;
    int mlp_hidden = 192;
    uint64_t init_seed = 42;

    bool operator==(const UNetConfig&) const = default;
};

// Small conditional U-Net: three resolutions, FiLM modulation from a
// (conditioning, timestep-embedding) MLP at every stage, zero-initialized
// output head.
class CondUNet final : public Denoiser {
public:
    explicit CondUNet(const UNetConfig& cfg);
    ~CondUNet() override;

    CondUNet(const CondUNet&) = delete;
    CondUNet& operator=(const CondUNet&) = delete;

    const UNetConfig& config() const { return cfg_; }

    Tensor predict_noise(const Tensor& z, int t, std::span<const float> cond) const override;
    Tensor forward_train(const Tensor& z, int t, std::span<const float> cond) override;
    void backward(const Tensor& dloss_dout) override;
    std::vector<Param*> params() override;

    std::unique_ptr<CondUNet> clone() const;

private:
    struct Impl;
    UNetConfig cfg_;
    std::unique_ptr<Impl> impl_;
};

// Checkpoint container: magic, JSON metadata header (schedule, net shape,
// version, content hash), then named float32 arrays, little-endian.
struct Checkpoint {
    UNetConfig net_config;
    NoiseSchedule schedule;
    std::unique_ptr<CondUNet> net;
    long long trained_steps = 0;
    std::string content_hash;
};

void save_checkpoint(const std::string& path, CondUNet& net, const NoiseSchedule& schedule,
                     long long trained_steps);
Checkpoint load_checkpoint(const std::string& path);

uint64_t fnv1a_hash(const void* data, size_t n, uint64_t seed = 1469598103934665603ULL);
std::string hash_hex(uint64_t h);

}  // namespace scenealign
