#pragma once

#include <cassert>
#include <cstddef>
#include <numeric>
#include <vector>

namespace scenealign {

// Dense float32 tensor, row-major, shape up to rank 3 in practice (C,H,W).
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel(shape), 0.0f);
    }

    static size_t numel(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }

    size_t size() const { return data.size(); }
    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool operator==(const Tensor& o) const { return shape == o.shape && data == o.data; }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }
};

}  // namespace scenealign
