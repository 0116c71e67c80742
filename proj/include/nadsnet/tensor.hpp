#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nadsnet/errors.hpp"

namespace nadsnet {

// Dense rank-3 float map, row-major with channels last:
// data[(y * width + x) * channels + c].
struct Tensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const float& at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Tensor& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }

    std::string shape_str() const {
        return std::to_string(height) + "x" + std::to_string(width) + "x" +
               std::to_string(channels);
    }
};

// Convolution kernel bank, kh x kw x cin x cout. The innermost (contiguous)
// axis is cout so the per-pixel accumulation loop runs over adjacent floats.
struct ConvWeights {
    int kh = 0;
    int kw = 0;
    int cin = 0;
    int cout = 0;
    std::vector<float> data;

    ConvWeights() = default;
    ConvWeights(int kh_, int kw_, int cin_, int cout_, float fill = 0.0f)
        : kh(kh_), kw(kw_), cin(cin_), cout(cout_),
          data(static_cast<std::size_t>(kh_) * kw_ * cin_ * cout_, fill) {}

    float& at(int ky, int kx, int ci, int co) {
        return data[((static_cast<std::size_t>(ky) * kw + kx) * cin + ci) * cout + co];
    }
    float at(int ky, int kx, int ci, int co) const {
        return data[((static_cast<std::size_t>(ky) * kw + kx) * cin + ci) * cout + co];
    }

    std::size_t size() const { return data.size(); }
};

}  // namespace nadsnet
