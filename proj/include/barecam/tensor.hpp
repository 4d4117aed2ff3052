#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "barecam/errors.hpp"

namespace barecam::nn {

template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), T(0));
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace barecam::nn
