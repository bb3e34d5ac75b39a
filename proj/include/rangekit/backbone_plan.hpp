#pragma once

#include <string>
#include <vector>

#include "rangekit/types.hpp"

namespace rangekit {

enum class LayerKind : uint8_t {
  Input,
  Conv,
  DilatedConv,
  Pool,
  BilinearUpsample,
  Concat,
  Add,
  Dropout,
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int kernel = 1;
  int dilation = 1;
  int stride = 1;
  int padding = 0;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<int> inputs;  // producer node indices
};

// Directed acyclic layer graph in topological order; the last node is the
// plan output.
struct NetworkPlan {
  std::vector<LayerSpec> nodes;

  int find(const std::string& name) const;  // -1 if absent
  int output_node() const { return static_cast<int>(nodes.size()) - 1; }
};

// Channel widths per block. Only the 64-wide output is fixed; the interior
// widths stay configurable.
struct BackboneConfig {
  std::vector<int> encoder_widths = {32, 64, 128, 128, 128, 128};
  std::vector<int> decoder_widths = {128, 128, 64, 64};
};

// Encoder-decoder plan: six dilated downsample blocks (the first two without
// pooling) and four dilated upsample blocks with skip concats. Each dilated
// residual block runs three 3x3 convolutions at dilations {1,2,3}, concats,
// fuses with a 1x1 and adds the (projected) input.
NetworkPlan build_rangercnn_backbone(int input_channels,
                                     const BackboneConfig& cfg = {});

struct NodeShape {
  std::string name;
  int h = 0;
  int w = 0;
  int c = 0;
};

using ShapeTrace = std::vector<NodeShape>;

// Per-node output shapes for an (h, w) input. Throws InvariantError naming
// the first node whose input is not divisible by its stride.
ShapeTrace propagate_shapes(const NetworkPlan& plan, int h, int w);

// Product of all pooling strides along the encoder spine.
int total_downsample_factor(const NetworkPlan& plan);

struct ReceptiveField {
  double rf_h = 1.0;
  double rf_w = 1.0;
};

// Receptive field of a node via the standard (rf, jump) recurrence; concat
// and add take the maximum over their inputs.
ReceptiveField receptive_field(const NetworkPlan& plan, int node);
ReceptiveField receptive_field(const NetworkPlan& plan,
                               const std::string& node_name);

// One node per line: name, kind, params, inputs.
std::string plan_to_text(const NetworkPlan& plan);

// Dense convolution weights, laid out (out_ch, in_ch, kh, kw).
struct ConvKernel {
  int out_channels = 0;
  int in_channels = 0;
  int kh = 0;
  int kw = 0;
  std::vector<float> weights;

  ConvKernel() = default;
  ConvKernel(int oc, int ic, int kh_, int kw_, float fill = 0.0f)
      : out_channels(oc), in_channels(ic), kh(kh_), kw(kw_),
        weights(static_cast<std::size_t>(oc) * ic * kh_ * kw_, fill) {}

  float& at(int oc, int ic, int ky, int kx) {
    return weights[((static_cast<std::size_t>(oc) * in_channels + ic) * kh + ky) * kw + kx];
  }
  float at(int oc, int ic, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(oc) * in_channels + ic) * kh + ky) * kw + kx];
  }
};

// Direct-summation cross-correlation with zero padding; the reference kernel
// for receptive-field and dilation checks. Throws InvariantError on channel
// mismatch or empty output.
Tensor3f conv2d_naive(const Tensor3f& input, const ConvKernel& kernel,
                      int dilation, int stride, int padding);

}  // namespace rangekit
