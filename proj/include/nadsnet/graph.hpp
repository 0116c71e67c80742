#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nadsnet/kernels.hpp"
#include "nadsnet/tensor.hpp"
#include "nadsnet/topology.hpp"

namespace nadsnet {

enum class ArchVariant { nads_net, six_stage_baseline };

struct ArchitectureConfig {
    ArchVariant variant = ArchVariant::nads_net;
    int input_size = 384;        // must be divisible by 32
    double channel_scale = 1.0;  // in (0, 1]; head output channels never scale
    SkeletonTopology topology = SkeletonTopology::upper_body9();
    int stage_count = 6;             // six_stage_baseline only
    bool bilinear_upsampling = true; // nearest otherwise

    int heat_stride() const { return variant == ArchVariant::nads_net ? 4 : 8; }
    int heat_size() const { return input_size / heat_stride(); }
    int keypoint_channels() const { return topology.joint_count() + 1; }
    int paf_channels() const { return 2 * topology.limb_count(); }

    void validate() const;
    // max(1, round(nominal * channel_scale))
    int scaled(int nominal_channels) const;
};

enum class OpKind {
    input,
    conv,
    batchnorm,
    relu,
    sigmoid,
    tanh_act,
    max_pool,
    add,
    concat,
    upsample
};

const char* op_kind_name(OpKind op);

struct LayerSpec {
    std::string name;
    OpKind op = OpKind::input;
    std::vector<int> inputs;  // indices of earlier layers only
    int kernel = 0;
    int stride = 1;
    Padding padding = Padding::same;
    int in_channels = 0;
    int out_channels = 0;
    int factor = 1;  // upsample
};

struct Layer {
    LayerSpec spec;
    ConvWeights weights;       // conv only
    std::vector<float> bias;   // conv only
    std::vector<float> bn_scale, bn_shift, bn_mean, bn_var;  // batchnorm only

    std::int64_t parameter_count() const;
};

// Executable layer list. Weights are immutable after build_graph returns and
// may be shared across threads; forward never mutates the graph.
struct Graph {
    ArchitectureConfig config;
    std::vector<Layer> layers;
    int keypoint_output = -1;
    int paf_output = -1;
    int seatbelt_output = -1;  // -1 for the baseline (no seat-belt head)
};

struct HeadOutputs {
    Tensor keypoint_maps;  // S x S x (J+1), sigmoid
    Tensor paf_maps;       // S x S x 2L, tanh
    Tensor seatbelt_map;   // S x S x 1, sigmoid; all-zero for the baseline
};

enum class WeightInit { he_normal, zeros };

Graph build_graph(const ArchitectureConfig& config, std::uint64_t seed,
                  WeightInit init = WeightInit::he_normal);

HeadOutputs forward(const Graph& graph, const Tensor& input);

struct ParameterCount {
    struct Entry {
        std::string name;
        std::string op;
        std::int64_t params = 0;
    };
    std::vector<Entry> per_layer;
    std::int64_t total = 0;
};

ParameterCount count_parameters(const Graph& graph);

// Plain-text layer table: name, op, kernel, stride, in->out channels, params.
std::string format_graph_table(const Graph& graph);

}  // namespace nadsnet
