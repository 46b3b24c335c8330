#pragma once

#include <cmath>

#include "scenealign/image.hpp"
#include "scenealign/tensor.hpp"

namespace scenealign {

// Latent codec. The desk-scale default is the identity codec: pixel-space
// diffusion with the image mapped to [-1, 1] floats.
class Codec {
public:
    virtual ~Codec() = default;
    virtual Tensor encode(const Image& img) const = 0;
    virtual Image decode(const Tensor& z) const = 0;
};

class IdentityCodec final : public Codec {
public:
    Tensor encode(const Image& img) const override {
        Tensor z({3, img.height, img.width});
        const size_t plane = static_cast<size_t>(img.width) * img.height;
        for (size_t i = 0; i < plane; ++i) {
            for (int c = 0; c < 3; ++c)
                z.data[c * plane + i] = (2.0f * img.pixels[3 * i + c] - 255.0f) / 255.0f;
        }
        return z;
    }

    Image decode(const Tensor& z) const override {
        const int h = z.shape[1], w = z.shape[2];
        Image img(w, h);
        const size_t plane = static_cast<size_t>(w) * h;
        for (size_t i = 0; i < plane; ++i) {
            for (int c = 0; c < 3; ++c) {
                float v = (z.data[c * plane + i] * 255.0f + 255.0f) * 0.5f;
                img.pixels[3 * i + c] =
                    static_cast<uint8_t>(std::lround(std::fmin(255.0f, std::fmax(0.0f, v))));
            }
        }
        return img;
    }
};

}  // namespace scenealign
