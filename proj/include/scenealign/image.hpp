#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scenealign {

// 8-bit RGB image, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // size = width * height * 3

    Image() = default;
    Image(int w, int h, uint8_t r = 0, uint8_t g = 0, uint8_t b = 0) : width(w), height(h) {
        pixels.resize(static_cast<size_t>(w) * h * 3);
        for (int i = 0; i < w * h; ++i) {
            pixels[3 * i + 0] = r;
            pixels[3 * i + 1] = g;
            pixels[3 * i + 2] = b;
        }
    }

    uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const uint8_t* at(int x, int y) const {
        return pixels.data() + 3 * (static_cast<size_t>(y) * width + x);
    }

    bool operator==(const Image& o) const {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

// Boolean mask aligned with an image.
struct Bitmap {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;  // 0 or 1, size = width * height

    Bitmap() = default;
    Bitmap(int w, int h, bool value = false)
        : width(w), height(h), bits(static_cast<size_t>(w) * h, value ? 1 : 0) {}

    bool test(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v = true) {
        bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0;
    }
    size_t count() const {
        size_t n = 0;
        for (uint8_t b : bits) n += b;
        return n;
    }
    bool any() const {
        for (uint8_t b : bits)
            if (b) return true;
        return false;
    }

    bool operator==(const Bitmap& o) const {
        return width == o.width && height == o.height && bits == o.bits;
    }
};

Bitmap dilate(const Bitmap& mask, int radius);

// Minimal PNG codec (8-bit RGB and grayscale, non-interlaced) on top of zlib.
std::vector<uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_png_gray(const Bitmap& mask);
Bitmap decode_png_gray(const std::vector<uint8_t>& bytes);

void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Horizontal concatenation with a 2px divider, for before/after panels.
Image hconcat(const std::vector<Image>& images);

}  // namespace scenealign
