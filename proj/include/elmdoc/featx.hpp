#pragma once

// Forward-only convolutional feature extractor: image preprocessing followed
// by a fixed stack of conv / ReLU / LRN / max-pool layers whose final
// activations, flattened channel-major, are the ELM input vector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "elmdoc/error.hpp"
#include "elmdoc/image.hpp"
#include "elmdoc/linalg.hpp"
#include "elmdoc/random.hpp"

namespace elmdoc {

struct Shape3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t volume() const noexcept { return channels * height * width; }
  std::string str() const {
    return "(" + std::to_string(channels) + ", " + std::to_string(height) + ", " + std::to_string(width) + ")";
  }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Channel-major, then row-major, 32-bit activations.
struct Tensor3 {
  Shape3 shape;
  std::vector<float> data;

  Tensor3() = default;
  explicit Tensor3(Shape3 s, float fill = 0.0f) : shape(s), data(s.volume(), fill) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data[(c * shape.height + y) * shape.width + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data[(c * shape.height + y) * shape.width + x];
  }
  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

struct ConvLayer {
  std::uint32_t in_channels = 0;
  std::uint32_t out_channels = 0;
  std::uint32_t kernel = 1;
  std::uint32_t stride = 1;
  std::uint32_t pad = 0;
  std::uint32_t groups = 1;
  std::vector<float> weights;  // [out][in / groups][kernel][kernel]
  std::vector<float> bias;     // [out]

  std::size_t weight_count() const noexcept {
    return groups == 0 ? 0 : std::size_t{out_channels} * (in_channels / groups) * kernel * kernel;
  }
  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct ReluLayer {
  friend bool operator==(const ReluLayer&, const ReluLayer&) = default;
};

struct MaxPoolLayer {
  std::uint32_t kernel = 3;
  std::uint32_t stride = 2;
  friend bool operator==(const MaxPoolLayer&, const MaxPoolLayer&) = default;
};

struct LrnLayer {
  std::uint32_t local_size = 5;
  float alpha = 1e-4f;
  float beta = 0.75f;
  float k = 1.0f;
  friend bool operator==(const LrnLayer&, const LrnLayer&) = default;
};

using LayerSpec = std::variant<ConvLayer, ReluLayer, MaxPoolLayer, LrnLayer>;

enum class ResizeMode : std::uint8_t {
  squash,     // stretch to the input size, whole page kept
  letterbox,  // keep aspect ratio, pad with white
};

struct NetSpec {
  Shape3 input{3, 227, 227};
  std::vector<LayerSpec> layers;
  std::optional<Tensor3> mean_image;
  std::vector<float> mean_channel = std::vector<float>(3, 0.0f);

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

inline const char* layer_name(const LayerSpec& layer) {
  constexpr const char* names[] = {"conv", "relu", "maxpool", "lrn"};
  return names[layer.index()];
}

// ---------------------------------------------------------------------------
// shape rules

inline std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// Ceil-mode pooling with windows clipped at the border; a window always
/// starts inside the input.
inline std::size_t pool_output_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
  if (in <= kernel) return 1;
  std::size_t out = (in - kernel + stride - 1) / stride + 1;
  if ((out - 1) * stride >= in) --out;
  return out;
}

namespace detail {
[[noreturn]] inline void layer_error(std::size_t index, const LayerSpec& layer, const std::string& msg) {
  throw DimensionError("layer " + std::to_string(index) + " (" + layer_name(layer) + "): " + msg);
}
}  // namespace detail

/// Output shape of one layer; throws DimensionError naming the layer index.
inline Shape3 layer_output_shape(const LayerSpec& layer, const Shape3& in, std::size_t index = 0) {
  if (const auto* c = std::get_if<ConvLayer>(&layer)) {
    if (c->groups == 0 || c->kernel == 0 || c->stride == 0)
      detail::layer_error(index, layer, "kernel, stride and groups must be >= 1");
    if (c->in_channels != in.channels) {
      detail::layer_error(index, layer,
                          "declares " + std::to_string(c->in_channels) + " input channels but receives " + in.str());
    }
    if (c->in_channels % c->groups != 0 || c->out_channels % c->groups != 0)
      detail::layer_error(index, layer, "channel counts not divisible by groups=" + std::to_string(c->groups));
    if (c->out_channels == 0) detail::layer_error(index, layer, "zero output channels");
    if (in.height + 2 * c->pad < c->kernel || in.width + 2 * c->pad < c->kernel)
      detail::layer_error(index, layer, "kernel " + std::to_string(c->kernel) + " larger than padded input " + in.str());
    if (c->weights.size() != c->weight_count() || c->bias.size() != c->out_channels)
      detail::layer_error(index, layer, "weight or bias block has the wrong length");
    return {c->out_channels, conv_output_extent(in.height, c->kernel, c->stride, c->pad),
            conv_output_extent(in.width, c->kernel, c->stride, c->pad)};
  }
  if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
    if (p->kernel == 0 || p->stride == 0) detail::layer_error(index, layer, "kernel and stride must be >= 1");
    return {in.channels, pool_output_extent(in.height, p->kernel, p->stride),
            pool_output_extent(in.width, p->kernel, p->stride)};
  }
  if (const auto* l = std::get_if<LrnLayer>(&layer)) {
    if (l->local_size % 2 == 0) detail::layer_error(index, layer, "local size must be odd");
  }
  return in;
}

/// Validates the whole chain and returns the final activation shape.
inline Shape3 output_shape(const NetSpec& net) {
  if (net.input.volume() == 0) throw DimensionError("network input shape " + net.input.str() + " is empty");
  if (net.mean_channel.size() != net.input.channels) {
    throw DimensionError("mean has " + std::to_string(net.mean_channel.size()) + " channel values for " +
                         std::to_string(net.input.channels) + " input channels");
  }
  if (net.mean_image && net.mean_image->shape != net.input) {
    throw DimensionError("mean image shape " + net.mean_image->shape.str() + " does not match input " +
                         net.input.str());
  }
  Shape3 s = net.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) s = layer_output_shape(net.layers[i], s, i);
  return s;
}

inline std::size_t feature_dim(const NetSpec& net) { return output_shape(net).volume(); }

// ---------------------------------------------------------------------------
// layers

/// Zero-padded grouped cross-correlation plus bias, lowered to im2col + GEMM
/// per group.
inline Tensor3 conv_forward(const Tensor3& input, const ConvLayer& layer, std::size_t index = 0) {
  const Shape3 out_shape = layer_output_shape(layer, input.shape, index);
  Tensor3 out(out_shape);
  const std::size_t k = layer.kernel;
  const std::size_t in_g = layer.in_channels / layer.groups;
  const std::size_t out_g = layer.out_channels / layer.groups;
  const std::size_t patch = in_g * k * k;
  const std::size_t positions = out_shape.height * out_shape.width;
  const long pad = layer.pad;
  const long H = static_cast<long>(input.shape.height);
  const long W = static_cast<long>(input.shape.width);

  std::vector<float> cols(positions * patch);
  std::vector<float> result(out_g * positions);
  for (std::size_t g = 0; g < layer.groups; ++g) {
    for (std::size_t oy = 0; oy < out_shape.height; ++oy) {
      for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
        float* dst = cols.data() + (oy * out_shape.width + ox) * patch;
        const long y0 = static_cast<long>(oy * layer.stride) - pad;
        const long x0 = static_cast<long>(ox * layer.stride) - pad;
        for (std::size_t c = 0; c < in_g; ++c) {
          const std::size_t ch = g * in_g + c;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long y = y0 + static_cast<long>(ky);
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long x = x0 + static_cast<long>(kx);
              *dst++ = (y >= 0 && y < H && x >= 0 && x < W) ? input.at(ch, y, x) : 0.0f;
            }
          }
        }
      }
    }
    const float* wg = layer.weights.data() + g * out_g * patch;
    detail::gemm_nt(wg, cols.data(), result.data(), out_g, positions, patch);
    for (std::size_t o = 0; o < out_g; ++o) {
      const std::size_t oc = g * out_g + o;
      const float b = layer.bias[oc];
      float* dst = out.data.data() + oc * positions;
      const float* src = result.data() + o * positions;
      for (std::size_t p = 0; p < positions; ++p) dst[p] = src[p] + b;
    }
  }
  return out;
}

inline Tensor3 relu_forward(Tensor3 t) {
  for (auto& v : t.data) v = v > 0.0f ? v : 0.0f;
  return t;
}

inline Tensor3 maxpool_forward(const Tensor3& input, const MaxPoolLayer& layer, std::size_t index = 0) {
  const Shape3 s = layer_output_shape(layer, input.shape, index);
  Tensor3 out(s);
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t oy = 0; oy < s.height; ++oy)
      for (std::size_t ox = 0; ox < s.width; ++ox) {
        const std::size_t y0 = oy * layer.stride;
        const std::size_t x0 = ox * layer.stride;
        const std::size_t y1 = std::min<std::size_t>(y0 + layer.kernel, input.shape.height);
        const std::size_t x1 = std::min<std::size_t>(x0 + layer.kernel, input.shape.width);
        float m = input.at(c, y0, x0);
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) m = std::max(m, input.at(c, y, x));
        out.at(c, oy, ox) = m;
      }
  return out;
}

/// Cross-channel local response normalization:
/// out = in / (k + alpha/size * sum of squares over the channel window)^beta.
inline Tensor3 lrn_forward(const Tensor3& input, const LrnLayer& layer, std::size_t index = 0) {
  layer_output_shape(layer, input.shape, index);
  const Shape3 s = input.shape;
  const std::size_t plane = s.height * s.width;
  const std::size_t half = layer.local_size / 2;
  const float scale = layer.alpha / static_cast<float>(layer.local_size);
  Tensor3 out(s);
  std::vector<float> sq(input.data.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = input.data[i] * input.data[i];
  std::vector<float> window(plane);
  for (std::size_t c = 0; c < s.channels; ++c) {
    const std::size_t lo = c >= half ? c - half : 0;
    const std::size_t hi = std::min(s.channels - 1, c + half);
    std::fill(window.begin(), window.end(), 0.0f);
    for (std::size_t cc = lo; cc <= hi; ++cc)
      for (std::size_t p = 0; p < plane; ++p) window[p] += sq[cc * plane + p];
    for (std::size_t p = 0; p < plane; ++p) {
      out.data[c * plane + p] = input.data[c * plane + p] / std::pow(layer.k + scale * window[p], layer.beta);
    }
  }
  return out;
}

inline Tensor3 layer_forward(const Tensor3& input, const LayerSpec& layer, std::size_t index) {
  return std::visit(
      [&](const auto& l) -> Tensor3 {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, ConvLayer>) return conv_forward(input, l, index);
        else if constexpr (std::is_same_v<L, ReluLayer>) return relu_forward(input);
        else if constexpr (std::is_same_v<L, MaxPoolLayer>) return maxpool_forward(input, l, index);
        else return lrn_forward(input, l, index);
      },
      layer);
}

inline Tensor3 forward(Tensor3 x, const NetSpec& net) {
  if (x.shape != net.input) throw DimensionError("network input is " + x.shape.str() + ", expected " + net.input.str());
  for (std::size_t i = 0; i < net.layers.size(); ++i) x = layer_forward(x, net.layers[i], i);
  return x;
}

// ---------------------------------------------------------------------------
// preprocessing

/// Bilinear resample of one 8-bit plane (interleaved source, channel ch)
/// with half-pixel centers and edge clamping.
inline void resize_bilinear(const Image& img, std::size_t ch, float* dst, std::size_t out_h, std::size_t out_w) {
  const double sy_scale = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx_scale = static_cast<double>(img.width) / static_cast<double>(out_w);
  auto src = [&](std::size_t y, std::size_t x) -> double {
    return img.pixels[(y * img.width + x) * img.channels + ch];
  };
  std::vector<std::size_t> x0s(out_w), x1s(out_w);
  std::vector<double> fxs(out_w);
  for (std::size_t x = 0; x < out_w; ++x) {
    const double sx = std::clamp((static_cast<double>(x) + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(img.width - 1));
    x0s[x] = static_cast<std::size_t>(sx);
    x1s[x] = std::min(x0s[x] + 1, img.width - 1);
    fxs[x] = sx - static_cast<double>(x0s[x]);
  }
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = std::clamp((static_cast<double>(y) + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(img.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = fxs[x];
      const double top = (1.0 - fx) * src(y0, x0s[x]) + fx * src(y0, x1s[x]);
      const double bot = (1.0 - fx) * src(y1, x0s[x]) + fx * src(y1, x1s[x]);
      dst[y * out_w + x] = static_cast<float>((1.0 - fy) * top + fy * bot);
    }
  }
}

namespace detail {
// Centers the image on a white canvas with the target aspect ratio.
inline Image letterbox(const Image& img, std::size_t out_h, std::size_t out_w) {
  const double target = static_cast<double>(out_w) / static_cast<double>(out_h);
  const double aspect = static_cast<double>(img.width) / static_cast<double>(img.height);
  std::size_t w = img.width, h = img.height;
  if (aspect > target) h = static_cast<std::size_t>(std::lround(img.width / target));
  else w = static_cast<std::size_t>(std::lround(img.height * target));
  Image canvas(std::max(w, img.width), std::max(h, img.height), img.channels, 255);
  const std::size_t oy = (canvas.height - img.height) / 2;
  const std::size_t ox = (canvas.width - img.width) / 2;
  for (std::size_t y = 0; y < img.height; ++y)
    std::copy_n(img.pixels.begin() + y * img.width * img.channels, img.width * img.channels,
                canvas.pixels.begin() + ((y + oy) * canvas.width + ox) * img.channels);
  return canvas;
}
}  // namespace detail

/// Resize to the network input, replicate gray to all channels (or average
/// RGB for a 1-channel network), then subtract the mean.
inline Tensor3 preprocess(const Image& image, const NetSpec& net, ResizeMode mode = ResizeMode::squash) {
  if (image.width == 0 || image.height == 0) throw ValueError("preprocess: image has zero size");
  if (image.channels != 1 && image.channels != 3)
    throw ValueError("preprocess: unsupported channel count " + std::to_string(image.channels));
  const Image boxed = mode == ResizeMode::letterbox ? detail::letterbox(image, net.input.height, net.input.width) : Image{};
  const Image& src = mode == ResizeMode::letterbox ? boxed : image;

  const std::size_t H = net.input.height;
  const std::size_t W = net.input.width;
  const std::size_t plane = H * W;
  Tensor3 t(net.input);
  std::vector<float> resized(src.channels * plane);
  for (std::size_t c = 0; c < src.channels; ++c) resize_bilinear(src, c, resized.data() + c * plane, H, W);

  for (std::size_t c = 0; c < net.input.channels; ++c) {
    float* dst = t.data.data() + c * plane;
    if (src.channels == 1) {
      std::copy_n(resized.data(), plane, dst);
    } else if (net.input.channels == 1) {
      for (std::size_t p = 0; p < plane; ++p)
        dst[p] = (resized[p] + resized[plane + p] + resized[2 * plane + p]) / 3.0f;
    } else {
      std::copy_n(resized.data() + (c % src.channels) * plane, plane, dst);
    }
    if (net.mean_image) {
      const float* mean = net.mean_image->data.data() + c * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] -= mean[p];
    } else {
      const float mean = net.mean_channel[c];
      for (std::size_t p = 0; p < plane; ++p) dst[p] -= mean;
    }
  }
  return t;
}

/// Feature vector of one image: preprocess, run all layers, flatten.
inline std::vector<float> extract(const Image& image, const NetSpec& net, ResizeMode mode = ResizeMode::squash) {
  return forward(preprocess(image, net, mode), net).data;
}

// ---------------------------------------------------------------------------
// stock networks

/// Conv layer with weights uniform on ±sqrt(3 / fan_in) and zero bias.
inline ConvLayer random_conv(std::uint32_t in, std::uint32_t out, std::uint32_t kernel, std::uint32_t stride,
                             std::uint32_t pad, std::uint32_t groups, std::uint64_t seed) {
  ConvLayer c{in, out, kernel, stride, pad, groups, {}, std::vector<float>(out, 0.0f)};
  c.weights.resize(c.weight_count());
  const double bound = std::sqrt(3.0 / static_cast<double>((in / groups) * kernel * kernel));
  const CounterStream rng(seed);
  for (std::size_t i = 0; i < c.weights.size(); ++i) c.weights[i] = static_cast<float>(rng.uniform(i, -bound, bound));
  return c;
}

/// The AlexNet convolutional stack (fully-connected layers removed) with
/// random weights: (3, 227, 227) -> (256, 6, 6). Real pretrained weights are
/// loaded from an EFW1 file with the same layer layout.
inline NetSpec alexnet_stub(std::uint64_t seed) {
  NetSpec net;
  net.input = {3, 227, 227};
  auto conv = [&](std::uint64_t n, std::uint32_t in, std::uint32_t out, std::uint32_t k, std::uint32_t s,
                  std::uint32_t p, std::uint32_t g) { return random_conv(in, out, k, s, p, g, hash_words({seed, n})); };
  net.layers = {
      conv(1, 3, 96, 11, 4, 0, 1),    ReluLayer{}, LrnLayer{}, MaxPoolLayer{3, 2},
      conv(2, 96, 256, 5, 1, 2, 2),   ReluLayer{}, LrnLayer{}, MaxPoolLayer{3, 2},
      conv(3, 256, 384, 3, 1, 1, 1),  ReluLayer{},
      conv(4, 384, 384, 3, 1, 1, 2),  ReluLayer{},
      conv(5, 384, 256, 3, 1, 1, 2),  ReluLayer{}, MaxPoolLayer{3, 2},
  };
  return net;
}

/// A single 1x1 identity convolution on the given input shape; the feature
/// vector is the preprocessed image itself.
inline NetSpec identity_stub(Shape3 input) {
  NetSpec net;
  net.input = input;
  net.mean_channel.assign(input.channels, 0.0f);
  const auto c = static_cast<std::uint32_t>(input.channels);
  ConvLayer conv{c, c, 1, 1, 0, 1, std::vector<float>(std::size_t{c} * c, 0.0f), std::vector<float>(c, 0.0f)};
  for (std::uint32_t i = 0; i < c; ++i) conv.weights[i * c + i] = 1.0f;
  net.layers.push_back(std::move(conv));
  return net;
}

}  // namespace elmdoc
