#include "scenealign/denoiser.hpp"

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "scenealign/error.hpp"
#include "scenealign/rng.hpp"

namespace scenealign {

uint64_t fnv1a_hash(const void* data, size_t n, uint64_t seed) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

namespace {

using MatCM = Eigen::MatrixXf;  // column-major
using MapRM = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMapRM =
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MapVec = Eigen::Map<Eigen::VectorXf>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXf>;

inline float silu(float x) { return x / (1.0f + std::exp(-x)); }
inline float silu_grad(float x) {
    float s = 1.0f / (1.0f + std::exp(-x));
    return s * (1.0f + x * (1.0f - s));
}

int conv_out_extent(int n, int stride) { return (n + 2 - 3) / stride + 1; }

// 3x3 kernel, pad 1. col is (C*9) x (Ho*Wo), one output pixel per column.
void im2col(const float* in, int C, int H, int W, int stride, MatCM& col) {
    const int Ho = conv_out_extent(H, stride);
    const int Wo = conv_out_extent(W, stride);
    col.resize(C * 9, Ho * Wo);
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            float* dst = col.data() + static_cast<size_t>(oy * Wo + ox) * (C * 9);
            for (int c = 0; c < C; ++c) {
                const float* plane = in + static_cast<size_t>(c) * H * W;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * stride - 1 + ky;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ox * stride - 1 + kx;
                        dst[(c * 3 + ky) * 3 + kx] =
                            (iy >= 0 && iy < H && ix >= 0 && ix < W) ? plane[iy * W + ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const MatCM& dcol, int C, int H, int W, int stride, float* din) {
    const int Ho = conv_out_extent(H, stride);
    const int Wo = conv_out_extent(W, stride);
    std::memset(din, 0, sizeof(float) * C * H * W);
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            const float* src = dcol.data() + static_cast<size_t>(oy * Wo + ox) * (C * 9);
            for (int c = 0; c < C; ++c) {
                float* plane = din + static_cast<size_t>(c) * H * W;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * stride - 1 + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ox * stride - 1 + kx;
                        if (ix < 0 || ix >= W) continue;
                        plane[iy * W + ix] += src[(c * 3 + ky) * 3 + kx];
                    }
                }
            }
        }
    }
}

void upsample2(const Tensor& in, Tensor& out) {
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
    out = Tensor({C, H * 2, W * 2});
    for (int c = 0; c < C; ++c) {
        const float* sp = in.ptr() + static_cast<size_t>(c) * H * W;
        float* dp = out.ptr() + static_cast<size_t>(c) * 4 * H * W;
        for (int y = 0; y < 2 * H; ++y)
            for (int x = 0; x < 2 * W; ++x) dp[y * 2 * W + x] = sp[(y / 2) * W + (x / 2)];
    }
}

void upsample2_backward(const Tensor& dout, Tensor& din, int C, int H, int W) {
    din = Tensor({C, H, W});
    for (int c = 0; c < C; ++c) {
        const float* dp = dout.ptr() + static_cast<size_t>(c) * 4 * H * W;
        float* sp = din.ptr() + static_cast<size_t>(c) * H * W;
        for (int y = 0; y < 2 * H; ++y)
            for (int x = 0; x < 2 * W; ++x) sp[(y / 2) * W + (x / 2)] += dp[y * 2 * W + x];
    }
}

struct ConvSpec {
    int cin, cout, stride;
    bool film;  // FiLM + SiLU after the conv
};

}  // namespace

// ---------------------------------------------------------------------------

struct CondUNet::Impl {
    UNetConfig cfg;
    std::vector<ConvSpec> specs;
    std::vector<Param> conv_w, conv_b;
    Param mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    int film_total = 0;
    std::vector<int> film_off;  // per-stage offset into the film vector

    // one in-flight training cache
    struct Cache {
        std::vector<float> x0;        // [cond; temb]
        std::vector<float> h_pre, h;  // MLP hidden
        std::vector<float> film;
        std::vector<MatCM> col;   // per conv
        std::vector<Tensor> pre;  // conv output before FiLM
        std::vector<Tensor> mod;  // after FiLM, before SiLU
        std::vector<Tensor> act;  // stage outputs
    };
    Cache cache;

    explicit Impl(const UNetConfig& c) : cfg(c) {
        const int W = cfg.base_width;
        specs = {
            {3, W, 1, true},          // stem
            {W, 2 * W, 2, true},      // down 1
            {2 * W, 4 * W, 2, true},  // down 2
            {4 * W, 4 * W, 1, true},  // mid
            {6 * W, 2 * W, 1, true},  // up 1 (cat skip act1)
            {3 * W, W, 1, true},      // up 0 (cat skip act0)
            {W, 3, 1, false},         // out head
        };
        Rng rng(cfg.init_seed);
        for (size_t i = 0; i < specs.size(); ++i) {
            const auto& s = specs[i];
            Param w, b;
            w.name = "conv" + std::to_string(i) + ".w";
            w.shape = {s.cout, s.cin * 9};
            w.value = Tensor(w.shape);
            w.grad = Tensor(w.shape);
            const bool zero_init = i + 1 == specs.size();
            const float std = zero_init ? 0.0f : std::sqrt(2.0f / (s.cin * 9));
            for (auto& v : w.value.data) v = std * rng.normal_f();
            b.name = "conv" + std::to_string(i) + ".b";
            b.shape = {s.cout};
            b.value = Tensor(b.shape);
            b.grad = Tensor(b.shape);
            conv_w.push_back(std::move(w));
            conv_b.push_back(std::move(b));
            if (s.film) {
                film_off.push_back(film_total);
                film_total += 2 * s.cout;
            } else {
                film_off.push_back(-1);
            }
        }
        const int in_dim = cfg.cond_dim + cfg.temb_dim;
        auto make_linear = [&](Param& p, const std::string& name, int rows, int cols, float std) {
            p.name = name;
            p.shape = {rows, cols};
            p.value = Tensor(p.shape);
            p.grad = Tensor(p.shape);
            for (auto& v : p.value.data) v = std * rng.normal_f();
        };
        make_linear(mlp_w1, "mlp.w1", cfg.mlp_hidden, in_dim, std::sqrt(2.0f / in_dim));
        make_linear(mlp_b1, "mlp.b1", cfg.mlp_hidden, 1, 0.0f);
        make_linear(mlp_w2, "mlp.w2", film_total, cfg.mlp_hidden, 0.0f);  // identity FiLM at init
        make_linear(mlp_b2, "mlp.b2", film_total, 1, 0.0f);
    }

    void time_embedding(int t, float* out) const {
        const int half = cfg.temb_dim / 2;
        for (int k = 0; k < half; ++k) {
            double w = std::exp(-std::log(10000.0) * k / half);
            out[k] = static_cast<float>(std::sin(t * w));
            out[half + k] = static_cast<float>(std::cos(t * w));
        }
    }

    Tensor forward(const Tensor& z, int t, std::span<const float> cond, bool train,
                   Cache& cc) const {
        if (static_cast<int>(cond.size()) != cfg.cond_dim)
            throw RangeError("denoiser: conditioning dimension mismatch");
        if (z.shape != std::vector<int>{3, cfg.canvas, cfg.canvas})
            throw RangeError("denoiser: latent shape mismatch");

        cc.x0.assign(cfg.cond_dim + cfg.temb_dim, 0.0f);
        std::copy(cond.begin(), cond.end(), cc.x0.begin());
        time_embedding(t, cc.x0.data() + cfg.cond_dim);

        const int hidden = cfg.mlp_hidden;
        cc.h_pre.assign(hidden, 0.0f);
        ConstMapRM w1(mlp_w1.value.ptr(), hidden, cfg.cond_dim + cfg.temb_dim);
        MapVec(cc.h_pre.data(), hidden).noalias() =
            w1 * ConstMapVec(cc.x0.data(), cc.x0.size()) + ConstMapVec(mlp_b1.value.ptr(), hidden);
        cc.h.resize(hidden);
        for (int i = 0; i < hidden; ++i) cc.h[i] = silu(cc.h_pre[i]);
        cc.film.assign(film_total, 0.0f);
        ConstMapRM w2(mlp_w2.value.ptr(), film_total, hidden);
        MapVec(cc.film.data(), film_total).noalias() =
            w2 * ConstMapVec(cc.h.data(), hidden) + ConstMapVec(mlp_b2.value.ptr(), film_total);

        const size_t n_stage = specs.size();
        cc.col.assign(n_stage, MatCM());
        cc.pre.assign(n_stage, Tensor());
        cc.mod.assign(n_stage, Tensor());
        cc.act.assign(n_stage, Tensor());

        auto run_conv = [&](size_t i, const Tensor& in) {
            const auto& s = specs[i];
            const int H = in.shape[1], W = in.shape[2];
            const int Ho = conv_out_extent(H, s.stride), Wo = conv_out_extent(W, s.stride);
            im2col(in.ptr(), s.cin, H, W, s.stride, cc.col[i]);
            cc.pre[i] = Tensor({s.cout, Ho, Wo});
            MapRM out(cc.pre[i].ptr(), s.cout, Ho * Wo);
            ConstMapRM w(conv_w[i].value.ptr(), s.cout, s.cin * 9);
            out.noalias() = w * cc.col[i];
            out.colwise() += ConstMapVec(conv_b[i].value.ptr(), s.cout);
            if (!s.film) {
                cc.act[i] = cc.pre[i];
                return;
            }
            const float* f = cc.film.data() + film_off[i];
            cc.mod[i] = Tensor({s.cout, Ho, Wo});
            cc.act[i] = Tensor({s.cout, Ho, Wo});
            const size_t plane = static_cast<size_t>(Ho) * Wo;
            for (int c = 0; c < s.cout; ++c) {
                const float scale = 1.0f + f[c];
                const float shift = f[s.cout + c];
                const float* pp = cc.pre[i].ptr() + c * plane;
                float* mp = cc.mod[i].ptr() + c * plane;
                float* ap = cc.act[i].ptr() + c * plane;
                for (size_t k = 0; k < plane; ++k) {
                    mp[k] = pp[k] * scale + shift;
                    ap[k] = silu(mp[k]);
                }
            }
        };

        run_conv(0, z);          // act0: (W, S, S)
        run_conv(1, cc.act[0]);  // act1: (2W, S/2, S/2)
        run_conv(2, cc.act[1]);  // act2: (4W, S/4, S/4)
        run_conv(3, cc.act[2]);  // act3: (4W, S/4, S/4)

        Tensor u1;
        upsample2(cc.act[3], u1);
        Tensor c1({specs[4].cin, u1.shape[1], u1.shape[2]});
        std::memcpy(c1.ptr(), u1.ptr(), sizeof(float) * u1.size());
        std::memcpy(c1.ptr() + u1.size(), cc.act[1].ptr(), sizeof(float) * cc.act[1].size());
        run_conv(4, c1);  // act4: (2W, S/2, S/2)

        Tensor u0;
        upsample2(cc.act[4], u0);
        Tensor c0({specs[5].cin, u0.shape[1], u0.shape[2]});
        std::memcpy(c0.ptr(), u0.ptr(), sizeof(float) * u0.size());
        std::memcpy(c0.ptr() + u0.size(), cc.act[0].ptr(), sizeof(float) * cc.act[0].size());
        run_conv(5, c0);  // act5: (W, S, S)

        run_conv(6, cc.act[5]);  // act6: (3, S, S)

        Tensor out = cc.act[6];
        if (!train) cc = Cache{};
        return out;
    }

    void backward(const Tensor& dout) {
        Cache& cc = cache;
        if (cc.act.empty()) throw RangeError("denoiser: backward without forward_train");
        std::vector<float> dfilm(film_total, 0.0f);

        auto back_conv = [&](size_t i, const Tensor& dact, int Hin, int Win, Tensor& din) {
            const auto& s = specs[i];
            const int Ho = cc.pre[i].shape[1], Wo = cc.pre[i].shape[2];
            const size_t plane = static_cast<size_t>(Ho) * Wo;
            Tensor dpre({s.cout, Ho, Wo});
            if (s.film) {
                const float* f = cc.film.data() + film_off[i];
                float* dfp = dfilm.data() + film_off[i];
                for (int c = 0; c < s.cout; ++c) {
                    const float scale = 1.0f + f[c];
                    const float* mp = cc.mod[i].ptr() + c * plane;
                    const float* pp = cc.pre[i].ptr() + c * plane;
                    const float* da = dact.ptr() + c * plane;
                    float* dp = dpre.ptr() + c * plane;
                    double dscale = 0.0, dshift = 0.0;
                    for (size_t k = 0; k < plane; ++k) {
                        const float dmod = da[k] * silu_grad(mp[k]);
                        dp[k] = dmod * scale;
                        dscale += static_cast<double>(dmod) * pp[k];
                        dshift += dmod;
                    }
                    dfp[c] += static_cast<float>(dscale);
                    dfp[s.cout + c] += static_cast<float>(dshift);
                }
            } else {
                std::memcpy(dpre.ptr(), dact.ptr(), sizeof(float) * dact.size());
            }
            MapRM gw(conv_w[i].grad.ptr(), s.cout, s.cin * 9);
            ConstMapRM dpre_m(dpre.ptr(), s.cout, Ho * Wo);
            gw.noalias() += dpre_m * cc.col[i].transpose();
            MapVec gb(conv_b[i].grad.ptr(), s.cout);
            gb.noalias() += dpre_m.rowwise().sum();
            ConstMapRM w(conv_w[i].value.ptr(), s.cout, s.cin * 9);
            MatCM dcol = w.transpose() * dpre_m;
            din = Tensor({s.cin, Hin, Win});
            col2im(dcol, s.cin, Hin, Win, s.stride, din.ptr());
        };

        const int S = cfg.canvas;
        const int W = cfg.base_width;

        Tensor d_act5;
        back_conv(6, dout, S, S, d_act5);

        Tensor d_c0;
        back_conv(5, d_act5, S, S, d_c0);
        Tensor d_u0({2 * W, S, S});
        std::memcpy(d_u0.ptr(), d_c0.ptr(), sizeof(float) * d_u0.size());
        Tensor d_act0_skip({W, S, S});
        std::memcpy(d_act0_skip.ptr(), d_c0.ptr() + d_u0.size(),
                    sizeof(float) * d_act0_skip.size());
        Tensor d_act4;
        upsample2_backward(d_u0, d_act4, 2 * W, S / 2, S / 2);

        Tensor d_c1;
        back_conv(4, d_act4, S / 2, S / 2, d_c1);
        Tensor d_u1({4 * W, S / 2, S / 2});
        std::memcpy(d_u1.ptr(), d_c1.ptr(), sizeof(float) * d_u1.size());
        Tensor d_act1_skip({2 * W, S / 2, S / 2});
        std::memcpy(d_act1_skip.ptr(), d_c1.ptr() + d_u1.size(),
                    sizeof(float) * d_act1_skip.size());
        Tensor d_act3;
        upsample2_backward(d_u1, d_act3, 4 * W, S / 4, S / 4);

        Tensor d_act2;
        back_conv(3, d_act3, S / 4, S / 4, d_act2);
        Tensor d_act1;
        back_conv(2, d_act2, S / 2, S / 2, d_act1);
        for (size_t k = 0; k < d_act1.size(); ++k) d_act1.data[k] += d_act1_skip.data[k];
        Tensor d_act0;
        back_conv(1, d_act1, S, S, d_act0);
        for (size_t k = 0; k < d_act0.size(); ++k) d_act0.data[k] += d_act0_skip.data[k];
        Tensor d_z;
        back_conv(0, d_act0, S, S, d_z);

        const int hidden = cfg.mlp_hidden;
        MapRM gw2(mlp_w2.grad.ptr(), film_total, hidden);
        gw2.noalias() +=
            ConstMapVec(dfilm.data(), film_total) * ConstMapVec(cc.h.data(), hidden).transpose();
        MapVec(mlp_b2.grad.ptr(), film_total) += ConstMapVec(dfilm.data(), film_total);
        Eigen::VectorXf dh = ConstMapRM(mlp_w2.value.ptr(), film_total, hidden).transpose() *
                             ConstMapVec(dfilm.data(), film_total);
        for (int i = 0; i < hidden; ++i) dh[i] *= silu_grad(cc.h_pre[i]);
        const int in_dim = cfg.cond_dim + cfg.temb_dim;
        MapRM gw1(mlp_w1.grad.ptr(), hidden, in_dim);
        gw1.noalias() += dh * ConstMapVec(cc.x0.data(), in_dim).transpose();
        MapVec(mlp_b1.grad.ptr(), hidden) += dh;
    }
};

CondUNet::CondUNet(const UNetConfig& cfg) : cfg_(cfg) {
    if (cfg.canvas % 4 != 0) throw RangeError("denoiser: canvas must be divisible by 4");
    if (cfg.cond_dim <= 0) throw RangeError("denoiser: cond_dim must be positive");
    if (cfg.temb_dim % 2 != 0) throw RangeError("denoiser: temb_dim must be even");
    impl_ = std::make_unique<Impl>(cfg);
}

CondUNet::~CondUNet() = default;

Tensor CondUNet::predict_noise(const Tensor& z, int t, std::span<const float> cond) const {
    Impl::Cache scratch;
    return impl_->forward(z, t, cond, false, scratch);
}

Tensor CondUNet::forward_train(const Tensor& z, int t, std::span<const float> cond) {
    return impl_->forward(z, t, cond, true, impl_->cache);
}

void CondUNet::backward(const Tensor& dloss_dout) { impl_->backward(dloss_dout); }

std::vector<Param*> CondUNet::params() {
    std::vector<Param*> out;
    for (size_t i = 0; i < impl_->conv_w.size(); ++i) {
        out.push_back(&impl_->conv_w[i]);
        out.push_back(&impl_->conv_b[i]);
    }
    out.push_back(&impl_->mlp_w1);
    out.push_back(&impl_->mlp_b1);
    out.push_back(&impl_->mlp_w2);
    out.push_back(&impl_->mlp_b2);
    return out;
}

std::unique_ptr<CondUNet> CondUNet::clone() const {
    auto copy = std::make_unique<CondUNet>(cfg_);
    auto self = const_cast<CondUNet*>(this)->params();
    auto dst = copy->params();
    for (size_t i = 0; i < self.size(); ++i) dst[i]->value = self[i]->value;
    return copy;
}

// --- checkpoint io ----------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'S', 'A', 'L', 'N', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::string& path, CondUNet& net, const NoiseSchedule& schedule,
                     long long trained_steps) {
    if constexpr (std::endian::native != std::endian::little)
        throw IoError("checkpoint: little-endian host required");

    nlohmann::ordered_json meta;
    meta["version"] = 1;
    meta["kind"] = "scenealign-checkpoint";
    meta["schedule"]["T"] = schedule.T;
    meta["schedule"]["beta"] = std::vector<double>(schedule.beta.begin() + 1, schedule.beta.end());
    const auto& cfg = net.config();
    meta["net"] = {{"canvas", cfg.canvas},         {"cond_dim", cfg.cond_dim},
                   {"base_width", cfg.base_width}, {"temb_dim", cfg.temb_dim},
                   {"mlp_hidden", cfg.mlp_hidden}, {"init_seed", cfg.init_seed}};
    meta["trained_steps"] = trained_steps;

    uint64_t h = 1469598103934665603ULL;
    auto tensors = nlohmann::ordered_json::array();
    for (Param* p : net.params()) {
        tensors.push_back({{"name", p->name}, {"shape", p->shape}});
        h = fnv1a_hash(p->value.ptr(), p->value.size() * sizeof(float), h);
    }
    meta["tensors"] = tensors;
    meta["content_hash"] = hash_hex(h);

    std::string header = meta.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot open for write: " + path);
    f.write(kMagic, 8);
    uint32_t len = static_cast<uint32_t>(header.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (Param* p : net.params())
        f.write(reinterpret_cast<const char*>(p->value.ptr()),
                static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!f) throw IoError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError(path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) throw IoError("checkpoint: bad magic in " + path);
    uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string header(len, '\0');
    f.read(header.data(), len);
    if (!f) throw IoError("checkpoint: truncated header in " + path);

    nlohmann::json meta = nlohmann::json::parse(header);
    Checkpoint ck;
    ck.net_config.canvas = meta["net"]["canvas"];
    ck.net_config.cond_dim = meta["net"]["cond_dim"];
    ck.net_config.base_width = meta["net"]["base_width"];
    ck.net_config.temb_dim = meta["net"]["temb_dim"];
    ck.net_config.mlp_hidden = meta["net"]["mlp_hidden"];
    ck.net_config.init_seed = meta["net"]["init_seed"];
    ck.trained_steps = meta["trained_steps"];
    ck.schedule = make_schedule_from_betas(meta["schedule"]["beta"].get<std::vector<double>>());
    if (ck.schedule.T != meta["schedule"]["T"].get<int>())
        throw IoError("checkpoint: schedule length mismatch");
    ck.content_hash = meta["content_hash"];

    ck.net = std::make_unique<CondUNet>(ck.net_config);
    auto params = ck.net->params();
    const auto& tensors = meta["tensors"];
    if (tensors.size() != params.size()) throw IoError("checkpoint: tensor count mismatch");

    uint64_t h = 1469598103934665603ULL;
    for (size_t i = 0; i < params.size(); ++i) {
        if (tensors[i]["name"] != params[i]->name ||
            tensors[i]["shape"].get<std::vector<int>>() != params[i]->shape)
            throw IoError("checkpoint: tensor layout mismatch at " + params[i]->name);
        f.read(reinterpret_cast<char*>(params[i]->value.ptr()),
               static_cast<std::streamsize>(params[i]->value.size() * sizeof(float)));
        h = fnv1a_hash(params[i]->value.ptr(), params[i]->value.size() * sizeof(float), h);
    }
    if (!f) throw IoError("checkpoint: truncated tensor data in " + path);
    if (hash_hex(h) != ck.content_hash) throw IoError("checkpoint: content hash mismatch");
    return ck;
}

}  // namespace scenealign
