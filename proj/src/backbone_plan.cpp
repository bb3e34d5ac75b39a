#include "rangekit/backbone_plan.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rangekit {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::Conv: return "conv";
    case LayerKind::DilatedConv: return "dilated_conv";
    case LayerKind::Pool: return "pool";
    case LayerKind::BilinearUpsample: return "bilinear_upsample";
    case LayerKind::Concat: return "concat";
    case LayerKind::Add: return "add";
    case LayerKind::Dropout: return "dropout";
  }
  return "?";
}

int NetworkPlan::find(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

class PlanBuilder {
 public:
  int add(LayerSpec spec) {
    plan_.nodes.push_back(std::move(spec));
    return static_cast<int>(plan_.nodes.size()) - 1;
  }

  int conv(const std::string& name, int in, int k, int dilation, int out_ch) {
    const LayerSpec& src = plan_.nodes[in];
    LayerSpec s;
    s.name = name;
    s.kind = dilation > 1 ? LayerKind::DilatedConv : LayerKind::Conv;
    s.kernel = k;
    s.dilation = dilation;
    s.stride = 1;
    s.padding = dilation * (k - 1) / 2;  // same-size output
    s.in_channels = src.out_channels;
    s.out_channels = out_ch;
    s.inputs = {in};
    return add(std::move(s));
  }

  // Three parallel 3x3 convolutions at dilations {1,2,3}, concat, 1x1 fuse,
  // residual add. A 1x1 projection carries the shortcut when widths differ.
  int drb(const std::string& prefix, int in, int out_ch) {
    const int d1 = conv(prefix + "/d1", in, 3, 1, out_ch);
    const int d2 = conv(prefix + "/d2", in, 3, 2, out_ch);
    const int d3 = conv(prefix + "/d3", in, 3, 3, out_ch);

    LayerSpec cat;
    cat.name = prefix + "/concat";
    cat.kind = LayerKind::Concat;
    cat.in_channels = 3 * out_ch;
    cat.out_channels = 3 * out_ch;
    cat.inputs = {d1, d2, d3};
    const int cat_id = add(std::move(cat));

    const int fuse = conv(prefix + "/fuse1x1", cat_id, 1, 1, out_ch);

    int shortcut = in;
    if (plan_.nodes[in].out_channels != out_ch) {
      shortcut = conv(prefix + "/proj1x1", in, 1, 1, out_ch);
    }

    LayerSpec addn;
    addn.name = prefix + "/add";
    addn.kind = LayerKind::Add;
    addn.in_channels = out_ch;
    addn.out_channels = out_ch;
    addn.inputs = {fuse, shortcut};
    return add(std::move(addn));
  }

  int pool(const std::string& name, int in) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::Pool;
    s.kernel = 2;
    s.stride = 2;
    s.in_channels = plan_.nodes[in].out_channels;
    s.out_channels = s.in_channels;
    s.inputs = {in};
    return add(std::move(s));
  }

  int dropout(const std::string& name, int in) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::Dropout;
    s.in_channels = plan_.nodes[in].out_channels;
    s.out_channels = s.in_channels;
    s.inputs = {in};
    return add(std::move(s));
  }

  int upsample(const std::string& name, int in) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::BilinearUpsample;
    s.kernel = 2;
    s.stride = 2;  // scale factor
    s.in_channels = plan_.nodes[in].out_channels;
    s.out_channels = s.in_channels;
    s.inputs = {in};
    return add(std::move(s));
  }

  int concat2(const std::string& name, int a, int b) {
    LayerSpec s;
    s.name = name;
    s.kind = LayerKind::Concat;
    s.in_channels = plan_.nodes[a].out_channels + plan_.nodes[b].out_channels;
    s.out_channels = s.in_channels;
    s.inputs = {a, b};
    return add(std::move(s));
  }

  NetworkPlan take() { return std::move(plan_); }
  NetworkPlan plan_;
};

}  // namespace

NetworkPlan build_rangercnn_backbone(int input_channels,
                                     const BackboneConfig& cfg) {
  if (input_channels != 5 && input_channels != 6)
    throw InvariantError("build_rangercnn_backbone: input_channels must be 5 or 6");
  if (cfg.encoder_widths.size() != 6 || cfg.decoder_widths.size() != 4)
    throw InvariantError("build_rangercnn_backbone: expected 6 encoder and 4 decoder widths");

  PlanBuilder b;
  LayerSpec input;
  input.name = "input";
  input.kind = LayerKind::Input;
  input.in_channels = input_channels;
  input.out_channels = input_channels;
  int cur = b.add(std::move(input));

  // Dilated downsample blocks; the first two keep full resolution.
  std::vector<int> encoder_out(6);
  for (int i = 0; i < 6; ++i) {
    const std::string prefix = "enc" + std::to_string(i + 1);
    cur = b.conv(prefix + "/in1x1", cur, 1, 1, cfg.encoder_widths[i]);
    cur = b.drb(prefix + "/drb", cur, cfg.encoder_widths[i]);
    cur = b.dropout(prefix + "/dropout", cur);
    if (i >= 2) cur = b.pool(prefix + "/pool", cur);
    encoder_out[i] = cur;
  }

  // Dilated upsample blocks with skip concats from the encoder stage of the
  // matching resolution.
  const int skips[4] = {encoder_out[4], encoder_out[3], encoder_out[2],
                        encoder_out[1]};
  for (int j = 0; j < 4; ++j) {
    const std::string prefix = "dec" + std::to_string(j + 1);
    cur = b.upsample(prefix + "/up", cur);
    cur = b.concat2(prefix + "/concat", cur, skips[j]);
    cur = b.drb(prefix + "/drb", cur, cfg.decoder_widths[j]);
  }
  return b.take();
}

ShapeTrace propagate_shapes(const NetworkPlan& plan, int h, int w) {
  ShapeTrace trace(plan.nodes.size());
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const LayerSpec& n = plan.nodes[i];
    NodeShape& shape = trace[i];
    shape.name = n.name;
    switch (n.kind) {
      case LayerKind::Input:
        shape.h = h;
        shape.w = w;
        shape.c = n.out_channels;
        break;
      case LayerKind::Conv:
      case LayerKind::DilatedConv: {
        const NodeShape& in = trace[n.inputs[0]];
        const int keff = n.dilation * (n.kernel - 1) + 1;
        shape.h = (in.h + 2 * n.padding - keff) / n.stride + 1;
        shape.w = (in.w + 2 * n.padding - keff) / n.stride + 1;
        shape.c = n.out_channels;
        if (in.c != n.in_channels)
          throw InvariantError("propagate_shapes: channel mismatch at " + n.name);
        break;
      }
      case LayerKind::Pool: {
        const NodeShape& in = trace[n.inputs[0]];
        if (in.h % n.stride != 0 || in.w % n.stride != 0) {
          const int f = total_downsample_factor(plan);
          throw InvariantError(
              "propagate_shapes: " + n.name + " input " + std::to_string(in.h) +
              "x" + std::to_string(in.w) + " not divisible by stride " +
              std::to_string(n.stride) + "; pad the plan input to a multiple of " +
              std::to_string(f));
        }
        shape.h = in.h / n.stride;
        shape.w = in.w / n.stride;
        shape.c = in.c;
        break;
      }
      case LayerKind::BilinearUpsample: {
        const NodeShape& in = trace[n.inputs[0]];
        shape.h = in.h * n.stride;
        shape.w = in.w * n.stride;
        shape.c = in.c;
        break;
      }
      case LayerKind::Concat: {
        const NodeShape& first = trace[n.inputs[0]];
        shape.h = first.h;
        shape.w = first.w;
        shape.c = 0;
        for (int src : n.inputs) {
          const NodeShape& in = trace[src];
          if (in.h != shape.h || in.w != shape.w)
            throw InvariantError("propagate_shapes: concat input sizes differ at " + n.name);
          shape.c += in.c;
        }
        break;
      }
      case LayerKind::Add: {
        const NodeShape& first = trace[n.inputs[0]];
        shape = {n.name, first.h, first.w, first.c};
        for (int src : n.inputs) {
          const NodeShape& in = trace[src];
          if (in.h != shape.h || in.w != shape.w || in.c != shape.c)
            throw InvariantError("propagate_shapes: add input shapes differ at " + n.name);
        }
        break;
      }
      case LayerKind::Dropout: {
        const NodeShape& in = trace[n.inputs[0]];
        shape = {n.name, in.h, in.w, in.c};
        break;
      }
    }
  }
  return trace;
}

int total_downsample_factor(const NetworkPlan& plan) {
  int factor = 1;
  for (const LayerSpec& n : plan.nodes) {
    if (n.kind == LayerKind::Pool) factor *= n.stride;
  }
  return factor;
}

ReceptiveField receptive_field(const NetworkPlan& plan, int node) {
  if (node < 0 || node >= static_cast<int>(plan.nodes.size()))
    throw InvariantError("receptive_field: no such node");
  // (rf, jump) per node; jump is the input-pixel distance between adjacent
  // output pixels and may drop below 1 after upsampling.
  std::vector<double> rf(plan.nodes.size(), 1.0);
  std::vector<double> jump(plan.nodes.size(), 1.0);
  for (std::size_t i = 0; i <= static_cast<std::size_t>(node); ++i) {
    const LayerSpec& n = plan.nodes[i];
    switch (n.kind) {
      case LayerKind::Input:
        break;
      case LayerKind::Conv:
      case LayerKind::DilatedConv: {
        const int keff = n.dilation * (n.kernel - 1) + 1;
        rf[i] = rf[n.inputs[0]] + (keff - 1) * jump[n.inputs[0]];
        jump[i] = jump[n.inputs[0]] * n.stride;
        break;
      }
      case LayerKind::Pool: {
        rf[i] = rf[n.inputs[0]] + (n.kernel - 1) * jump[n.inputs[0]];
        jump[i] = jump[n.inputs[0]] * n.stride;
        break;
      }
      case LayerKind::BilinearUpsample: {
        rf[i] = rf[n.inputs[0]] + (n.kernel - 1) * jump[n.inputs[0]];
        jump[i] = jump[n.inputs[0]] / n.stride;
        break;
      }
      case LayerKind::Concat:
      case LayerKind::Add: {
        double best = 0.0;
        for (int src : n.inputs) best = std::max(best, rf[src]);
        rf[i] = best;
        jump[i] = jump[n.inputs[0]];
        break;
      }
      case LayerKind::Dropout: {
        rf[i] = rf[n.inputs[0]];
        jump[i] = jump[n.inputs[0]];
        break;
      }
    }
  }
  return {rf[node], rf[node]};
}

ReceptiveField receptive_field(const NetworkPlan& plan,
                               const std::string& node_name) {
  const int idx = plan.find(node_name);
  if (idx < 0) throw InvariantError("receptive_field: no node named " + node_name);
  return receptive_field(plan, idx);
}

std::string plan_to_text(const NetworkPlan& plan) {
  std::ostringstream os;
  for (const LayerSpec& n : plan.nodes) {
    os << n.name << " " << layer_kind_name(n.kind) << " k=" << n.kernel
       << " d=" << n.dilation << " s=" << n.stride << " p=" << n.padding
       << " cin=" << n.in_channels << " cout=" << n.out_channels << " in=[";
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (i) os << ",";
      os << plan.nodes[n.inputs[i]].name;
    }
    os << "]\n";
  }
  return os.str();
}

Tensor3f conv2d_naive(const Tensor3f& input, const ConvKernel& kernel,
                      int dilation, int stride, int padding) {
  if (dilation < 1 || stride < 1 || padding < 0)
    throw InvariantError("conv2d_naive: bad dilation/stride/padding");
  if (kernel.in_channels != input.channels())
    throw InvariantError("conv2d_naive: kernel expects " +
                         std::to_string(kernel.in_channels) + " channels, input has " +
                         std::to_string(input.channels()));
  const int keff_h = dilation * (kernel.kh - 1) + 1;
  const int keff_w = dilation * (kernel.kw - 1) + 1;
  const int oh = (input.height() + 2 * padding - keff_h) / stride + 1;
  const int ow = (input.width() + 2 * padding - keff_w) / stride + 1;
  if (oh <= 0 || ow <= 0)
    throw InvariantError("conv2d_naive: kernel footprint exceeds padded input");

  Tensor3f out(oh, ow, kernel.out_channels);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int oc = 0; oc < kernel.out_channels; ++oc) {
        double acc = 0.0;
        for (int ic = 0; ic < kernel.in_channels; ++ic) {
          for (int ky = 0; ky < kernel.kh; ++ky) {
            const int iy = oy * stride - padding + ky * dilation;
            if (iy < 0 || iy >= input.height()) continue;
            for (int kx = 0; kx < kernel.kw; ++kx) {
              const int ix = ox * stride - padding + kx * dilation;
              if (ix < 0 || ix >= input.width()) continue;
              acc += static_cast<double>(input.at(iy, ix, ic)) *
                     kernel.at(oc, ic, ky, kx);
            }
          }
        }
        out.at(oy, ox, oc) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

}  // namespace rangekit
