#include "nadsnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nadsnet {

namespace {

// Begin-side padding for `same`; total = (out-1)*stride + kernel - in.
int same_pad_begin(int in, int kernel, int stride) {
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + kernel - in, 0);
    return total / 2;
}

}  // namespace

int conv_output_extent(int in, int kernel, int stride, Padding padding) {
    if (padding == Padding::same) return (in + stride - 1) / stride;
    return (in - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const ConvWeights& weights,
              std::span<const float> bias, int stride, Padding padding) {
    if (input.channels != weights.cin) {
        throw ShapeError("conv2d: input channels " + std::to_string(input.channels) +
                         " != kernel in-channels " + std::to_string(weights.cin));
    }
    if (!bias.empty() && static_cast<int>(bias.size()) != weights.cout) {
        throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) +
                         " != out-channels " + std::to_string(weights.cout));
    }
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");

    const int out_h = conv_output_extent(input.height, weights.kh, stride, padding);
    const int out_w = conv_output_extent(input.width, weights.kw, stride, padding);
    if (out_h <= 0 || out_w <= 0) {
        throw ShapeError("conv2d: kernel " + std::to_string(weights.kh) + "x" +
                         std::to_string(weights.kw) + " does not fit input " +
                         input.shape_str());
    }
    const int pad_y = padding == Padding::same ? same_pad_begin(input.height, weights.kh, stride) : 0;
    const int pad_x = padding == Padding::same ? same_pad_begin(input.width, weights.kw, stride) : 0;

    const int cin = weights.cin;
    const int cout = weights.cout;
    Tensor out(out_h, out_w, cout);

    std::vector<float> acc(cout);
    const float* in_data = input.data.data();
    const float* w_data = weights.data.data();

    for (int oy = 0; oy < out_h; ++oy) {
        const int iy0 = oy * stride - pad_y;
        for (int ox = 0; ox < out_w; ++ox) {
            const int ix0 = ox * stride - pad_x;
            if (bias.empty()) {
                std::fill(acc.begin(), acc.end(), 0.0f);
            } else {
                std::copy(bias.begin(), bias.end(), acc.begin());
            }
            for (int ky = 0; ky < weights.kh; ++ky) {
                const int iy = iy0 + ky;
                if (iy < 0 || iy >= input.height) continue;
                for (int kx = 0; kx < weights.kw; ++kx) {
                    const int ix = ix0 + kx;
                    if (ix < 0 || ix >= input.width) continue;
                    const float* in_px =
                        in_data + (static_cast<std::size_t>(iy) * input.width + ix) * cin;
                    const float* w_tap =
                        w_data + (static_cast<std::size_t>(ky) * weights.kw + kx) *
                                     static_cast<std::size_t>(cin) * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const float v = in_px[ci];
                        const float* w_row = w_tap + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) acc[co] += v * w_row[co];
                    }
                }
            }
            float* out_px = out.data.data() +
                            (static_cast<std::size_t>(oy) * out_w + ox) * cout;
            std::copy(acc.begin(), acc.end(), out_px);
        }
    }
    return out;
}

Tensor batchnorm_infer(const Tensor& input, std::span<const float> scale,
                       std::span<const float> shift, std::span<const float> running_mean,
                       std::span<const float> running_var, float eps) {
    const int c = input.channels;
    const auto check = [c](std::span<const float> v, const char* what) {
        if (static_cast<int>(v.size()) != c) {
            throw ShapeError(std::string("batchnorm_infer: ") + what + " length " +
                             std::to_string(v.size()) + " != channels " + std::to_string(c));
        }
    };
    check(scale, "scale");
    check(shift, "shift");
    check(running_mean, "running_mean");
    check(running_var, "running_var");

    // Fold everything into one multiply-add per element.
    std::vector<float> mul(c), off(c);
    for (int i = 0; i < c; ++i) {
        if (running_var[i] < 0.0f) {
            throw ShapeError("batchnorm_infer: negative running_var at channel " +
                             std::to_string(i));
        }
        mul[i] = scale[i] / std::sqrt(running_var[i] + eps);
        off[i] = shift[i] - running_mean[i] * mul[i];
    }

    Tensor out(input.height, input.width, c);
    const std::size_t pixels = static_cast<std::size_t>(input.height) * input.width;
    for (std::size_t p = 0; p < pixels; ++p) {
        const float* src = input.data.data() + p * c;
        float* dst = out.data.data() + p * c;
        for (int i = 0; i < c; ++i) dst[i] = src[i] * mul[i] + off[i];
    }
    return out;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor sigmoid(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
    return out;
}

Tensor tanh_map(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data) v = std::tanh(v);
    return out;
}

Tensor max_pool(const Tensor& input, int kernel, int stride, Padding padding) {
    if (kernel < 1 || stride < 1) throw ShapeError("max_pool: kernel and stride must be >= 1");
    const int out_h = conv_output_extent(input.height, kernel, stride, padding);
    const int out_w = conv_output_extent(input.width, kernel, stride, padding);
    if (out_h <= 0 || out_w <= 0) {
        throw ShapeError("max_pool: window " + std::to_string(kernel) +
                         " does not fit input " + input.shape_str());
    }
    const int pad_y = padding == Padding::same ? same_pad_begin(input.height, kernel, stride) : 0;
    const int pad_x = padding == Padding::same ? same_pad_begin(input.width, kernel, stride) : 0;
    const int c = input.channels;

    Tensor out(out_h, out_w, c, -std::numeric_limits<float>::infinity());
    for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = std::max(oy * stride - pad_y, 0);
        const int y1 = std::min(oy * stride - pad_y + kernel, input.height);
        for (int ox = 0; ox < out_w; ++ox) {
            const int x0 = std::max(ox * stride - pad_x, 0);
            const int x1 = std::min(ox * stride - pad_x + kernel, input.width);
            float* dst = out.data.data() + (static_cast<std::size_t>(oy) * out_w + ox) * c;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const float* src =
                        input.data.data() + (static_cast<std::size_t>(y) * input.width + x) * c;
                    for (int i = 0; i < c; ++i) dst[i] = std::max(dst[i], src[i]);
                }
            }
        }
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: empty input list");
    const int h = parts[0]->height;
    const int w = parts[0]->width;
    int total_c = 0;
    for (const Tensor* t : parts) {
        if (t->height != h || t->width != w) {
            throw ShapeError("concat_channels: spatial mismatch " + parts[0]->shape_str() +
                             " vs " + t->shape_str());
        }
        total_c += t->channels;
    }
    Tensor out(h, w, total_c);
    const std::size_t pixels = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < pixels; ++p) {
        float* dst = out.data.data() + p * total_c;
        for (const Tensor* t : parts) {
            const float* src = t->data.data() + p * t->channels;
            dst = std::copy(src, src + t->channels, dst);
        }
    }
    return out;
}

Tensor bilinear_upsample(const Tensor& input, int factor) {
    if (factor < 1) throw ShapeError("bilinear_upsample: factor must be >= 1");
    if (factor == 1) return input;
    const int out_h = input.height * factor;
    const int out_w = input.width * factor;
    const int c = input.channels;
    Tensor out(out_h, out_w, c);

    for (int oy = 0; oy < out_h; ++oy) {
        const float sy =
            std::clamp((oy + 0.5f) / factor - 0.5f, 0.0f, static_cast<float>(input.height - 1));
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, input.height - 1);
        const float fy = sy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            const float sx =
                std::clamp((ox + 0.5f) / factor - 0.5f, 0.0f, static_cast<float>(input.width - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, input.width - 1);
            const float fx = sx - x0;

            const float w00 = (1.0f - fy) * (1.0f - fx);
            const float w01 = (1.0f - fy) * fx;
            const float w10 = fy * (1.0f - fx);
            const float w11 = fy * fx;
            const float* p00 = &input.at(y0, x0, 0);
            const float* p01 = &input.at(y0, x1, 0);
            const float* p10 = &input.at(y1, x0, 0);
            const float* p11 = &input.at(y1, x1, 0);
            float* dst = &out.at(oy, ox, 0);
            for (int i = 0; i < c; ++i) {
                dst[i] = w00 * p00[i] + w01 * p01[i] + w10 * p10[i] + w11 * p11[i];
            }
        }
    }
    return out;
}

Tensor nearest_upsample(const Tensor& input, int factor) {
    if (factor < 1) throw ShapeError("nearest_upsample: factor must be >= 1");
    if (factor == 1) return input;
    const int c = input.channels;
    Tensor out(input.height * factor, input.width * factor, c);
    for (int oy = 0; oy < out.height; ++oy) {
        const int iy = oy / factor;
        for (int ox = 0; ox < out.width; ++ox) {
            const int ix = ox / factor;
            const float* src = &input.at(iy, ix, 0);
            float* dst = &out.at(oy, ox, 0);
            std::copy(src, src + c, dst);
        }
    }
    return out;
}

}  // namespace nadsnet
