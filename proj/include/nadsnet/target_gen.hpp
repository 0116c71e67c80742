#pragma once

#include "nadsnet/annotation.hpp"
#include "nadsnet/tensor.hpp"
#include "nadsnet/topology.hpp"

namespace nadsnet {

// Rendering parameters at heatmap scale. Annotation coordinates are divided
// by `stride`; frames are expected to be annotated at network input
// resolution, so a 384x384 frame renders 96x96 maps.
struct TargetConfig {
    double sigma = 2.0;        // Gaussian spread, heatmap pixels
    double limb_width = 1.5;   // PAF half-width, heatmap pixels
    int stride = 4;
    double belt_raster_width = 0.0;  // 0 = derive from polyline width / stride

    void validate() const {
        if (!(sigma > 0.0)) throw ConfigError("target config: sigma must be > 0");
        if (!(limb_width > 0.0)) throw ConfigError("target config: limb_width must be > 0");
        if (stride < 1) throw ConfigError("target config: stride must be >= 1");
    }
};

// Channel j: max over persons of exp(-d^2 / 2 sigma^2) around each visible
// joint; channel J is the background, 1 - max over joint channels.
Tensor render_keypoint_heatmaps(const FrameAnnotation& frame, const SkeletonTopology& topology,
                                const TargetConfig& cfg);

// Channels (2l, 2l+1): unit vector from limb parent to child on pixels within
// limb_width of the segment; overlapping persons average their unit vectors.
Tensor render_paf(const FrameAnnotation& frame, const SkeletonTopology& topology,
                  const TargetConfig& cfg);

// Binary mask: 1 where within half the rastered belt width of any polyline.
Tensor render_seatbelt_mask(const FrameAnnotation& frame, const TargetConfig& cfg);

}  // namespace nadsnet
