#pragma once

// ELM1 model files. Layout (little-endian):
//
//   "ELM1" u32 version u64 seed u32 N u32 d u32 m u8 activation f64 C
//   f64 W[N*d] f64 b[N] f64 B[N*m] f64 mean[d] f64 std[d]
//   m x (u32 length, UTF-8 bytes)   class names

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "elmdoc/binary_io.hpp"
#include "elmdoc/elm.hpp"

namespace elmdoc {

inline constexpr std::string_view kModelMagic = "ELM1";
inline constexpr std::uint32_t kModelVersion = 1;

inline std::string serialize_model(const ElmModel& model) {
  io::ByteWriter w;
  w.put_magic(kModelMagic);
  w.put(kModelVersion);
  w.put(static_cast<std::uint64_t>(model.hidden.seed));
  w.put(static_cast<std::uint32_t>(model.hidden.hidden()));
  w.put(static_cast<std::uint32_t>(model.input_dim()));
  w.put(static_cast<std::uint32_t>(model.num_classes()));
  w.put(static_cast<std::uint8_t>(model.hidden.activation));
  w.put(model.C);
  w.put_all(model.hidden.weights.values());
  w.put_all(std::span<const double>(model.hidden.bias));
  w.put_all(model.output.values());
  w.put_all(std::span<const double>(model.standardizer.mean));
  w.put_all(std::span<const double>(model.standardizer.stddev));
  for (const auto& name : model.class_names) w.put_string(name);
  return w.bytes();
}

inline ElmModel deserialize_model(std::string_view bytes, std::string what = "model") {
  io::ByteReader r(bytes, std::move(what));
  r.expect_magic(kModelMagic);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kModelVersion) {
    throw FormatError(FormatError::Kind::bad_version,
                      r.what() + ": unsupported version " + std::to_string(version));
  }
  ElmModel m;
  m.hidden.seed = r.get<std::uint64_t>("seed");
  const std::size_t n_hidden = r.get<std::uint32_t>("N");
  const std::size_t d = r.get<std::uint32_t>("d");
  const std::size_t classes = r.get<std::uint32_t>("m");
  const auto tag = r.get<std::uint8_t>("activation");
  if (tag > 1) throw FormatError(FormatError::Kind::invalid, r.what() + ": unknown activation tag " + std::to_string(tag));
  m.hidden.activation = static_cast<Activation>(tag);
  m.C = r.get<double>("C");
  if (!(m.C > 0.0) || !std::isfinite(m.C)) throw FormatError(FormatError::Kind::invalid, r.what() + ": C must be > 0");
  if (n_hidden == 0 || d == 0 || classes == 0) {
    throw FormatError(FormatError::Kind::shape, r.what() + ": zero-sized dimension (N, d, m)");
  }
  try {
    m.hidden.weights = DenseMatrix(n_hidden, d, r.get_all<double>(n_hidden * d, "W"));
    m.hidden.bias = r.get_all<double>(n_hidden, "b");
    m.output = DenseMatrix(n_hidden, classes, r.get_all<double>(n_hidden * classes, "B"));
  } catch (const ValueError& e) {
    throw FormatError(FormatError::Kind::invalid, r.what() + ": " + e.what());
  }
  m.standardizer.mean = r.get_all<double>(d, "feature mean");
  m.standardizer.stddev = r.get_all<double>(d, "feature std");
  for (double s : m.standardizer.stddev)
    if (!(s > 0.0) || !std::isfinite(s)) throw FormatError(FormatError::Kind::invalid, r.what() + ": feature std must be > 0");
  m.class_names.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c) m.class_names.push_back(r.get_string("class name"));
  r.expect_end();
  return m;
}

inline void save_model(const std::filesystem::path& path, const ElmModel& model) {
  io::write_file(path, serialize_model(model));
}

inline ElmModel load_model(const std::filesystem::path& path) {
  return deserialize_model(io::read_file(path), path.string());
}

}  // namespace elmdoc
