#include "scenealign/image.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "scenealign/error.hpp"

namespace scenealign {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32(out, static_cast<uint32_t>(data.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, crc);
}

const uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::vector<uint8_t> encode_png_raw(const uint8_t* data, int w, int h, int channels) {
    // Filter 0 on every row; compression level fixed for reproducible bytes.
    const int bpp = channels;
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(h) * (w * bpp + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), data + static_cast<size_t>(y) * w * bpp,
                   data + static_cast<size_t>(y + 1) * w * bpp);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("png: deflate failed");
    comp.resize(comp_len);

    std::vector<uint8_t> out(kSignature, kSignature + 8);
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(w));
    put_u32(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(channels == 3 ? 2 : 0);               // color type: RGB or gray
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);                                   // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", comp);
    put_chunk(out, "IEND", {});
    return out;
}

struct DecodedPng {
    int w = 0, h = 0, channels = 0;
    std::vector<uint8_t> data;
};

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

DecodedPng decode_png_raw(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw IoError("png: bad signature");
    size_t pos = 8;
    DecodedPng png;
    std::vector<uint8_t> idat;
    bool seen_ihdr = false;
    while (pos + 12 <= bytes.size()) {
        uint32_t len = get_u32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw IoError("png: truncated chunk");
        std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
        const uint8_t* data = bytes.data() + pos + 8;
        if (type == "IHDR") {
            if (len != 13) throw IoError("png: bad IHDR");
            png.w = static_cast<int>(get_u32(data));
            png.h = static_cast<int>(get_u32(data + 4));
            int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8 || interlace != 0 || (color != 2 && color != 0))
                throw IoError("png: unsupported format (need 8-bit RGB/gray, no interlace)");
            png.channels = (color == 2) ? 3 : 1;
            seen_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || png.w <= 0 || png.h <= 0) throw IoError("png: missing IHDR");

    const int bpp = png.channels;
    const size_t stride = static_cast<size_t>(png.w) * bpp;
    std::vector<uint8_t> raw(static_cast<size_t>(png.h) * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw IoError("png: inflate failed");

    png.data.assign(static_cast<size_t>(png.h) * stride, 0);
    std::vector<uint8_t> prev(stride, 0);
    for (int y = 0; y < png.h; ++y) {
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1);
        uint8_t filter = src[0];
        uint8_t* dst = png.data.data() + static_cast<size_t>(y) * stride;
        for (size_t x = 0; x < stride; ++x) {
            int a = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
            int b = prev[x];
            int c = x >= static_cast<size_t>(bpp) ? prev[x - bpp] : 0;
            int v = src[x + 1];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw IoError("png: bad filter");
            }
            dst[x] = static_cast<uint8_t>(v);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return png;
}

}  // namespace

std::vector<uint8_t> encode_png(const Image& img) {
    return encode_png_raw(img.pixels.data(), img.width, img.height, 3);
}

Image decode_png(const std::vector<uint8_t>& bytes) {
    DecodedPng png = decode_png_raw(bytes);
    Image img(png.w, png.h);
    if (png.channels == 3) {
        img.pixels = std::move(png.data);
    } else {
        for (size_t i = 0; i < png.data.size(); ++i) {
            img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = png.data[i];
        }
    }
    return img;
}

std::vector<uint8_t> encode_png_gray(const Bitmap& mask) {
    std::vector<uint8_t> gray(mask.bits.size());
    for (size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
    return encode_png_raw(gray.data(), mask.width, mask.height, 1);
}

Bitmap decode_png_gray(const std::vector<uint8_t>& bytes) {
    DecodedPng png = decode_png_raw(bytes);
    Bitmap mask(png.w, png.h);
    const int step = png.channels;
    for (int i = 0; i < png.w * png.h; ++i) mask.bits[i] = png.data[i * step] >= 128 ? 1 : 0;
    return mask;
}

void write_png(const std::string& path, const Image& img) {
    auto bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

Image read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

Bitmap dilate(const Bitmap& mask, int radius) {
    Bitmap out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.test(x, y)) continue;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < mask.width && ny < mask.height) out.set(nx, ny);
                }
            }
        }
    }
    return out;
}

Image hconcat(const std::vector<Image>& images) {
    if (images.empty()) return {};
    int h = images[0].height;
    int w = 0;
    for (const auto& im : images) w += im.width;
    const int gap = 2;
    w += gap * static_cast<int>(images.size() - 1);
    Image out(w, h, 40, 40, 40);
    int x0 = 0;
    for (const auto& im : images) {
        for (int y = 0; y < im.height && y < h; ++y)
            std::memcpy(out.at(x0, y), im.at(0, y), static_cast<size_t>(im.width) * 3);
        x0 += im.width + gap;
    }
    return out;
}

}  // namespace scenealign
