#pragma once

// EFW1 network files; see docs/formats.md for the byte layout.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "elmdoc/binary_io.hpp"
#include "elmdoc/featx.hpp"

namespace elmdoc {

inline constexpr std::string_view kNetMagic = "EFW1";
inline constexpr std::uint32_t kNetVersion = 1;
inline constexpr std::uint32_t kNetFlagMeanImage = 1u << 0;

enum class LayerTag : std::uint8_t { conv = 0, relu = 1, maxpool = 2, lrn = 3 };

inline std::string serialize_netspec(const NetSpec& net) {
  output_shape(net);
  io::ByteWriter w;
  w.put_magic(kNetMagic);
  w.put(kNetVersion);
  w.put(static_cast<std::uint32_t>(net.layers.size()));
  w.put(net.mean_image ? kNetFlagMeanImage : 0u);
  w.put(static_cast<std::uint32_t>(net.input.channels));
  w.put(static_cast<std::uint32_t>(net.input.height));
  w.put(static_cast<std::uint32_t>(net.input.width));
  w.put_all(std::span<const float>(net.mean_channel));
  for (const auto& layer : net.layers) {
    w.put(static_cast<std::uint8_t>(layer.index()));
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      for (std::uint32_t v : {c->in_channels, c->out_channels, c->kernel, c->stride, c->pad, c->groups}) w.put(v);
      w.put_all(std::span<const float>(c->weights));
      w.put_all(std::span<const float>(c->bias));
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
      w.put(p->kernel);
      w.put(p->stride);
    } else if (const auto* l = std::get_if<LrnLayer>(&layer)) {
      w.put(l->local_size);
      w.put(l->alpha);
      w.put(l->beta);
      w.put(l->k);
    }
  }
  if (net.mean_image) w.put_all(std::span<const float>(net.mean_image->data));
  return w.bytes();
}

inline NetSpec deserialize_netspec(std::string_view bytes, std::string what = "netspec") {
  io::ByteReader r(bytes, std::move(what));
  r.expect_magic(kNetMagic);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kNetVersion)
    throw FormatError(FormatError::Kind::bad_version, r.what() + ": unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("layer count");
  const auto flags = r.get<std::uint32_t>("flags");
  if (flags & ~kNetFlagMeanImage)
    throw FormatError(FormatError::Kind::invalid, r.what() + ": unknown header flags " + std::to_string(flags));
  NetSpec net;
  net.input.channels = r.get<std::uint32_t>("input channels");
  net.input.height = r.get<std::uint32_t>("input height");
  net.input.width = r.get<std::uint32_t>("input width");
  net.mean_channel = r.get_all<float>(net.input.channels, "channel mean");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto tag = r.get<std::uint8_t>("layer tag");
    switch (static_cast<LayerTag>(tag)) {
      case LayerTag::conv: {
        ConvLayer c;
        c.in_channels = r.get<std::uint32_t>("conv in channels");
        c.out_channels = r.get<std::uint32_t>("conv out channels");
        c.kernel = r.get<std::uint32_t>("conv kernel");
        c.stride = r.get<std::uint32_t>("conv stride");
        c.pad = r.get<std::uint32_t>("conv pad");
        c.groups = r.get<std::uint32_t>("conv groups");
        if (c.groups == 0) {
          throw FormatError(FormatError::Kind::shape, r.what() + ": layer " + std::to_string(i) + " (conv): groups is 0");
        }
        c.weights = r.get_all<float>(c.weight_count(), "conv weights");
        c.bias = r.get_all<float>(c.out_channels, "conv bias");
        net.layers.emplace_back(std::move(c));
        break;
      }
      case LayerTag::relu:
        net.layers.emplace_back(ReluLayer{});
        break;
      case LayerTag::maxpool: {
        MaxPoolLayer p;
        p.kernel = r.get<std::uint32_t>("pool kernel");
        p.stride = r.get<std::uint32_t>("pool stride");
        net.layers.emplace_back(p);
        break;
      }
      case LayerTag::lrn: {
        LrnLayer l;
        l.local_size = r.get<std::uint32_t>("lrn size");
        l.alpha = r.get<float>("lrn alpha");
        l.beta = r.get<float>("lrn beta");
        l.k = r.get<float>("lrn k");
        net.layers.emplace_back(l);
        break;
      }
      default:
        throw FormatError(FormatError::Kind::invalid,
                          r.what() + ": layer " + std::to_string(i) + " has unknown kind tag " + std::to_string(tag));
    }
  }
  if (flags & kNetFlagMeanImage) {
    Tensor3 mean(net.input);
    mean.data = r.get_all<float>(net.input.volume(), "mean image");
    net.mean_image = std::move(mean);
  }
  r.expect_end();
  try {
    output_shape(net);
  } catch (const DimensionError& e) {
    throw FormatError(FormatError::Kind::shape, r.what() + ": " + e.what());
  }
  return net;
}

inline void save_netspec(const std::filesystem::path& path, const NetSpec& net) {
  io::write_file(path, serialize_netspec(net));
}

inline NetSpec load_netspec(const std::filesystem::path& path) {
  return deserialize_netspec(io::read_file(path), path.string());
}

}  // namespace elmdoc
