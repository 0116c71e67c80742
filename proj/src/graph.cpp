#include "nadsnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>

namespace nadsnet {

void ArchitectureConfig::validate() const {
    if (input_size <= 0 || input_size % 32 != 0) {
        throw ConfigError("config: input_size " + std::to_string(input_size) +
                          " must be a positive multiple of 32");
    }
    if (!(channel_scale > 0.0) || channel_scale > 1.0) {
        throw ConfigError("config: channel_scale must be in (0, 1]");
    }
    if (variant == ArchVariant::six_stage_baseline && stage_count < 1) {
        throw ConfigError("config: stage_count must be >= 1");
    }
    topology.validate();
}

int ArchitectureConfig::scaled(int nominal_channels) const {
    const int s = static_cast<int>(std::lround(nominal_channels * channel_scale));
    return std::max(s, 1);
}

const char* op_kind_name(OpKind op) {
    switch (op) {
        case OpKind::input: return "input";
        case OpKind::conv: return "conv";
        case OpKind::batchnorm: return "batchnorm";
        case OpKind::relu: return "relu";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::tanh_act: return "tanh";
        case OpKind::max_pool: return "max_pool";
        case OpKind::add: return "add";
        case OpKind::concat: return "concat";
        case OpKind::upsample: return "upsample";
    }
    return "?";
}

std::int64_t Layer::parameter_count() const {
    if (spec.op == OpKind::conv) {
        return static_cast<std::int64_t>(weights.size()) + static_cast<std::int64_t>(bias.size());
    }
    if (spec.op == OpKind::batchnorm) {
        // Trainable affine only; running statistics are not counted.
        return static_cast<std::int64_t>(bn_scale.size() + bn_shift.size());
    }
    return 0;
}

namespace {

class GraphBuilder {
public:
    explicit GraphBuilder(const ArchitectureConfig& config) { graph_.config = config; }

    int input(int channels) {
        LayerSpec s;
        s.name = "input";
        s.op = OpKind::input;
        s.out_channels = channels;
        return push(s);
    }

    int conv(const std::string& name, int from, int kernel, int stride, int out_channels,
             Padding padding = Padding::same) {
        LayerSpec s;
        s.name = name;
        s.op = OpKind::conv;
        s.inputs = {from};
        s.kernel = kernel;
        s.stride = stride;
        s.padding = padding;
        s.in_channels = out_of(from);
        s.out_channels = out_channels;
        return push(s);
    }

    int batchnorm(const std::string& name, int from) {
        LayerSpec s;
        s.name = name;
        s.op = OpKind::batchnorm;
        s.inputs = {from};
        s.in_channels = s.out_channels = out_of(from);
        return push(s);
    }

    int activation(const std::string& name, OpKind kind, int from) {
        LayerSpec s;
        s.name = name;
        s.op = kind;
        s.inputs = {from};
        s.in_channels = s.out_channels = out_of(from);
        return push(s);
    }

    int max_pool(const std::string& name, int from, int kernel, int stride, Padding padding) {
        LayerSpec s;
        s.name = name;
        s.op = OpKind::max_pool;
        s.inputs = {from};
        s.kernel = kernel;
        s.stride = stride;
        s.padding = padding;
        s.in_channels = s.out_channels = out_of(from);
        return push(s);
    }

    int add(const std::string& name, int a, int b) {
        LayerSpec s;
        s.name = name;
        s.op = OpKind::add;
        s.inputs = {a, b};
        s.in_channels = s.out_channels = out_of(a);
        return push(s);
    }

    int concat(const std::string& name, const std::vector<int>& from) {
        LayerSpec s;
        s.name = name;
        s.op = OpKind::concat;
        s.inputs = from;
        int total = 0;
        for (int i : from) total += out_of(i);
        s.in_channels = s.out_channels = total;
        return push(s);
    }

    int upsample(const std::string& name, int from, int factor) {
        LayerSpec s;
        s.name = name;
        s.op = OpKind::upsample;
        s.inputs = {from};
        s.factor = factor;
        s.in_channels = s.out_channels = out_of(from);
        return push(s);
    }

    // conv + batchnorm + relu, the ResNet building unit
    int cbr(const std::string& name, int from, int kernel, int stride, int out_channels) {
        int idx = conv(name, from, kernel, stride, out_channels);
        idx = batchnorm(name + "_bn", idx);
        return activation(name + "_relu", OpKind::relu, idx);
    }

    int out_of(int idx) const { return graph_.layers[idx].spec.out_channels; }

    Graph take() { return std::move(graph_); }

private:
    int push(const LayerSpec& s) {
        Layer layer;
        layer.spec = s;
        graph_.layers.push_back(std::move(layer));
        return static_cast<int>(graph_.layers.size()) - 1;
    }

    Graph graph_;
};

// ResNet-50 bottleneck: 1x1 reduce, 3x3 (carries the stride), 1x1 expand,
// projection shortcut on the first block of a stage.
int bottleneck(GraphBuilder& b, const std::string& name, int from, int mid, int out, int stride) {
    int x = b.cbr(name + "_conv1", from, 1, 1, mid);
    x = b.cbr(name + "_conv2", x, 3, stride, mid);
    x = b.conv(name + "_conv3", x, 1, 1, out);
    x = b.batchnorm(name + "_conv3_bn", x);

    int shortcut = from;
    if (b.out_of(from) != out || stride != 1) {
        shortcut = b.conv(name + "_proj", from, 1, stride, out);
        shortcut = b.batchnorm(name + "_proj_bn", shortcut);
    }
    x = b.add(name + "_add", x, shortcut);
    return b.activation(name + "_relu", OpKind::relu, x);
}

int resnet_stage(GraphBuilder& b, const std::string& name, int from, int mid, int out, int blocks,
                 int stride) {
    int x = bottleneck(b, name + "_block1", from, mid, out, stride);
    for (int i = 2; i <= blocks; ++i) {
        x = bottleneck(b, name + "_block" + std::to_string(i), x, mid, out, 1);
    }
    return x;
}

// Detection head: two 3x3 convs and a 1x1 conv, then the output activation.
int head(GraphBuilder& b, const ArchitectureConfig& cfg, const std::string& name, int from,
         int out_channels, OpKind act) {
    int x = b.conv(name + "_conv1", from, 3, 1, cfg.scaled(512));
    x = b.activation(name + "_conv1_relu", OpKind::relu, x);
    x = b.conv(name + "_conv2", x, 3, 1, cfg.scaled(256));
    x = b.activation(name + "_conv2_relu", OpKind::relu, x);
    x = b.conv(name + "_out", x, 1, 1, out_channels);
    return b.activation(name + "_" + op_kind_name(act), act, x);
}

Graph build_six_stage(const ArchitectureConfig& cfg);

}  // namespace

Graph build_graph(const ArchitectureConfig& config, std::uint64_t seed, WeightInit init) {
    config.validate();
    Graph graph;
    if (config.variant == ArchVariant::nads_net) {
        GraphBuilder b(config);
        const int in = b.input(3);

        // ResNet-50 backbone: C2..C5 at strides 4/8/16/32.
        int x = b.cbr("conv1", in, 7, 2, config.scaled(64));
        x = b.max_pool("pool1", x, 3, 2, Padding::same);
        const int c2 = resnet_stage(b, "stage2", x, config.scaled(64), config.scaled(256), 3, 1);
        const int c3 = resnet_stage(b, "stage3", c2, config.scaled(128), config.scaled(512), 4, 2);
        const int c4 = resnet_stage(b, "stage4", c3, config.scaled(256), config.scaled(1024), 6, 2);
        const int c5 = resnet_stage(b, "stage5", c4, config.scaled(512), config.scaled(2048), 3, 2);

        // Pyramid fusion: 1x1 lateral compression to 256, two more 3x3 convs
        // ending at 128 channels, upsample every level to stride 4 and
        // concatenate (4 levels x 128 channels = the 512-channel fused map).
        const int levels[4] = {c2, c3, c4, c5};
        const int factors[4] = {1, 2, 4, 8};
        const char* tags[4] = {"c2", "c3", "c4", "c5"};
        std::vector<int> fused;
        for (int i = 0; i < 4; ++i) {
            const std::string tag = tags[i];
            int p = b.conv("lateral_" + tag, levels[i], 1, 1, config.scaled(256));
            p = b.activation("lateral_" + tag + "_relu", OpKind::relu, p);
            p = b.conv("smooth1_" + tag, p, 3, 1, config.scaled(256));
            p = b.activation("smooth1_" + tag + "_relu", OpKind::relu, p);
            p = b.conv("smooth2_" + tag, p, 3, 1, config.scaled(128));
            p = b.activation("smooth2_" + tag + "_relu", OpKind::relu, p);
            if (factors[i] > 1) p = b.upsample("upsample_" + tag, p, factors[i]);
            fused.push_back(p);
        }
        const int fusion = b.concat("fusion", fused);

        const int kp = head(b, config, "keypoint_head", fusion, config.keypoint_channels(),
                            OpKind::sigmoid);
        const int paf = head(b, config, "paf_head", fusion, config.paf_channels(), OpKind::tanh_act);
        const int belt = head(b, config, "seatbelt_head", fusion, 1, OpKind::sigmoid);

        graph = b.take();
        graph.keypoint_output = kp;
        graph.paf_output = paf;
        graph.seatbelt_output = belt;
    } else {
        graph = build_six_stage(config);
    }

    // Deterministic He-style initialization: one generator consumed in layer
    // order, normal(0, sqrt(2 / fan_in)) for conv kernels, zero biases,
    // identity batchnorm with (0, 1) running statistics.
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> unit(0.0f, 1.0f);
    for (Layer& layer : graph.layers) {
        if (layer.spec.op == OpKind::conv) {
            layer.weights = ConvWeights(layer.spec.kernel, layer.spec.kernel,
                                        layer.spec.in_channels, layer.spec.out_channels);
            layer.bias.assign(layer.spec.out_channels, 0.0f);
            if (init == WeightInit::he_normal) {
                const float fan_in = static_cast<float>(layer.spec.kernel) * layer.spec.kernel *
                                     layer.spec.in_channels;
                const float stddev = std::sqrt(2.0f / fan_in);
                for (float& w : layer.weights.data) w = stddev * unit(rng);
            }
        } else if (layer.spec.op == OpKind::batchnorm) {
            layer.bn_scale.assign(layer.spec.out_channels, 1.0f);
            layer.bn_shift.assign(layer.spec.out_channels, 0.0f);
            layer.bn_mean.assign(layer.spec.out_channels, 0.0f);
            layer.bn_var.assign(layer.spec.out_channels, 1.0f);
        }
    }
    return graph;
}

namespace {

// Six-stage two-branch refinement network on a VGG-19 front end (first ten
// conv layers), the architecture NADS-Net is compared against. Stage 1 uses
// three 3x3 convs and two 1x1s per branch; later stages five 7x7 convs and
// two 1x1s, consuming concat(features, previous keypoint maps, previous PAFs).
Graph build_six_stage(const ArchitectureConfig& cfg) {
    GraphBuilder b(cfg);
    const int in = b.input(3);

    auto vgg_conv = [&](const std::string& name, int from, int out) {
        int idx = b.conv(name, from, 3, 1, cfg.scaled(out));
        return b.activation(name + "_relu", OpKind::relu, idx);
    };

    int x = vgg_conv("conv1_1", in, 64);
    x = vgg_conv("conv1_2", x, 64);
    x = b.max_pool("pool1", x, 2, 2, Padding::valid);
    x = vgg_conv("conv2_1", x, 128);
    x = vgg_conv("conv2_2", x, 128);
    x = b.max_pool("pool2", x, 2, 2, Padding::valid);
    x = vgg_conv("conv3_1", x, 256);
    x = vgg_conv("conv3_2", x, 256);
    x = vgg_conv("conv3_3", x, 256);
    x = vgg_conv("conv3_4", x, 256);
    x = b.max_pool("pool3", x, 2, 2, Padding::valid);
    x = vgg_conv("conv4_1", x, 512);
    x = vgg_conv("conv4_2", x, 512);
    x = vgg_conv("conv4_3_cpm", x, 256);
    const int features = vgg_conv("conv4_4_cpm", x, 128);

    const int kp_out = cfg.keypoint_channels();
    const int paf_out = cfg.paf_channels();

    auto stage1_branch = [&](const std::string& name, int out) {
        int y = features;
        for (int i = 1; i <= 3; ++i) {
            y = b.conv(name + "_conv" + std::to_string(i), y, 3, 1, cfg.scaled(128));
            y = b.activation(name + "_conv" + std::to_string(i) + "_relu", OpKind::relu, y);
        }
        y = b.conv(name + "_conv4", y, 1, 1, cfg.scaled(512));
        y = b.activation(name + "_conv4_relu", OpKind::relu, y);
        return b.conv(name + "_out", y, 1, 1, out);
    };
    auto refine_branch = [&](const std::string& name, int from, int out) {
        int y = from;
        for (int i = 1; i <= 5; ++i) {
            y = b.conv(name + "_conv" + std::to_string(i), y, 7, 1, cfg.scaled(128));
            y = b.activation(name + "_conv" + std::to_string(i) + "_relu", OpKind::relu, y);
        }
        y = b.conv(name + "_conv6", y, 1, 1, cfg.scaled(128));
        y = b.activation(name + "_conv6_relu", OpKind::relu, y);
        return b.conv(name + "_out", y, 1, 1, out);
    };

    int kp = stage1_branch("stage1_keypoint", kp_out);
    int paf = stage1_branch("stage1_paf", paf_out);
    for (int t = 2; t <= cfg.stage_count; ++t) {
        const std::string stage = "stage" + std::to_string(t);
        const int joined = b.concat(stage + "_concat", {features, kp, paf});
        kp = refine_branch(stage + "_keypoint", joined, kp_out);
        paf = refine_branch(stage + "_paf", joined, paf_out);
    }

    const int kp_act = b.activation("keypoint_sigmoid", OpKind::sigmoid, kp);
    const int paf_act = b.activation("paf_tanh", OpKind::tanh_act, paf);

    Graph g = b.take();
    g.keypoint_output = kp_act;
    g.paf_output = paf_act;
    g.seatbelt_output = -1;
    return g;
}

}  // namespace

HeadOutputs forward(const Graph& graph, const Tensor& input) {
    const ArchitectureConfig& cfg = graph.config;
    if (input.height != cfg.input_size || input.width != cfg.input_size || input.channels != 3) {
        throw ShapeError("forward: expected input " + std::to_string(cfg.input_size) + "x" +
                         std::to_string(cfg.input_size) + "x3, got " + input.shape_str());
    }

    const int n = static_cast<int>(graph.layers.size());
    // Free each activation after its last consumer so the peak footprint
    // stays a few maps rather than the whole graph.
    std::vector<int> last_use(n, -1);
    for (int i = 0; i < n; ++i) {
        for (int src : graph.layers[i].spec.inputs) last_use[src] = i;
    }
    for (int out : {graph.keypoint_output, graph.paf_output, graph.seatbelt_output}) {
        if (out >= 0) last_use[out] = n;
    }

    std::vector<std::optional<Tensor>> acts(n);
    for (int i = 0; i < n; ++i) {
        const Layer& layer = graph.layers[i];
        const LayerSpec& s = layer.spec;
        auto arg = [&](int slot) -> const Tensor& { return *acts[s.inputs[slot]]; };
        try {
            switch (s.op) {
                case OpKind::input:
                    acts[i] = input;
                    break;
                case OpKind::conv:
                    acts[i] = conv2d(arg(0), layer.weights, layer.bias, s.stride, s.padding);
                    break;
                case OpKind::batchnorm:
                    acts[i] = batchnorm_infer(arg(0), layer.bn_scale, layer.bn_shift,
                                              layer.bn_mean, layer.bn_var, 1e-5f);
                    break;
                case OpKind::relu:
                    acts[i] = relu(arg(0));
                    break;
                case OpKind::sigmoid:
                    acts[i] = sigmoid(arg(0));
                    break;
                case OpKind::tanh_act:
                    acts[i] = tanh_map(arg(0));
                    break;
                case OpKind::max_pool:
                    acts[i] = max_pool(arg(0), s.kernel, s.stride, s.padding);
                    break;
                case OpKind::add:
                    acts[i] = add(arg(0), arg(1));
                    break;
                case OpKind::concat: {
                    std::vector<const Tensor*> parts;
                    parts.reserve(s.inputs.size());
                    for (int src : s.inputs) parts.push_back(&*acts[src]);
                    acts[i] = concat_channels(parts);
                    break;
                }
                case OpKind::upsample:
                    acts[i] = cfg.bilinear_upsampling ? bilinear_upsample(arg(0), s.factor)
                                                      : nearest_upsample(arg(0), s.factor);
                    break;
            }
        } catch (const ShapeError& e) {
            throw ShapeError("layer '" + s.name + "': " + e.what());
        }
        for (int src : s.inputs) {
            if (last_use[src] == i) acts[src].reset();
        }
    }

    HeadOutputs out;
    out.keypoint_maps = std::move(*acts[graph.keypoint_output]);
    out.paf_maps = std::move(*acts[graph.paf_output]);
    if (graph.seatbelt_output >= 0) {
        out.seatbelt_map = std::move(*acts[graph.seatbelt_output]);
    } else {
        // Baseline has no seat-belt head; emit an empty (all-zero) mask of the
        // matching resolution so HeadOutputs keeps a uniform shape.
        out.seatbelt_map = Tensor(out.keypoint_maps.height, out.keypoint_maps.width, 1);
    }
    return out;
}

ParameterCount count_parameters(const Graph& graph) {
    ParameterCount counts;
    for (const Layer& layer : graph.layers) {
        const std::int64_t p = layer.parameter_count();
        counts.per_layer.push_back({layer.spec.name, op_kind_name(layer.spec.op), p});
        counts.total += p;
    }
    return counts;
}

std::string format_graph_table(const Graph& graph) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-28s %-10s %6s %6s %14s %12s\n", "layer", "op", "kernel",
                  "stride", "channels", "params");
    os << line;
    for (const Layer& layer : graph.layers) {
        const LayerSpec& s = layer.spec;
        std::string kernel = s.op == OpKind::conv || s.op == OpKind::max_pool
                                 ? std::to_string(s.kernel)
                                 : (s.op == OpKind::upsample ? "x" + std::to_string(s.factor) : "-");
        std::string stride =
            s.op == OpKind::conv || s.op == OpKind::max_pool ? std::to_string(s.stride) : "-";
        const std::string channels =
            std::to_string(s.in_channels) + "->" + std::to_string(s.out_channels);
        std::snprintf(line, sizeof(line), "%-28s %-10s %6s %6s %14s %12lld\n", s.name.c_str(),
                      op_kind_name(s.op), kernel.c_str(), stride.c_str(), channels.c_str(),
                      static_cast<long long>(layer.parameter_count()));
        os << line;
    }
    const auto counts = count_parameters(graph);
    std::snprintf(line, sizeof(line), "%-28s %-10s %6s %6s %14s %12lld\n", "total", "", "", "", "",
                  static_cast<long long>(counts.total));
    os << line;
    return os.str();
}

}  // namespace nadsnet
