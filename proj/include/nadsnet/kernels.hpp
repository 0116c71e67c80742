#pragma once

#include <span>
#include <vector>

#include "nadsnet/tensor.hpp"

namespace nadsnet {

enum class Padding { same, valid };

// Spatial extent of a conv/pool output for one axis.
int conv_output_extent(int in, int kernel, int stride, Padding padding);

// Plain dense convolution over a channels-last map. `same` padding follows
// the ceil(in/stride) convention with the extra pixel on the bottom/right.
Tensor conv2d(const Tensor& input, const ConvWeights& weights,
              std::span<const float> bias, int stride, Padding padding);

// Inference-mode affine normalization: scale*(x-mean)/sqrt(var+eps)+shift.
Tensor batchnorm_infer(const Tensor& input, std::span<const float> scale,
                       std::span<const float> shift, std::span<const float> running_mean,
                       std::span<const float> running_var, float eps);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);
Tensor tanh_map(const Tensor& input);

// Window max; padded positions (same mode) never contribute.
Tensor max_pool(const Tensor& input, int kernel, int stride,
                Padding padding = Padding::valid);

Tensor add(const Tensor& a, const Tensor& b);

Tensor concat_channels(const std::vector<const Tensor*>& parts);

// align-corners=false: output pixel i samples input at (i+0.5)/factor - 0.5,
// clamped to the border.
Tensor bilinear_upsample(const Tensor& input, int factor);
Tensor nearest_upsample(const Tensor& input, int factor);

}  // namespace nadsnet
