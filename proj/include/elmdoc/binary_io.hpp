#pragma once

// Little-endian byte buffers shared by the ELM1, EFW1 and FMX1 formats.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "elmdoc/error.hpp"

namespace elmdoc::io {

namespace detail {
template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}
}  // namespace detail

class ByteWriter {
 public:
  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    v = detail::to_le(v);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }

  template <class T>
  void put_all(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
      buf_.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
    } else {
      for (T v : values) put(v);
    }
  }

  void put_magic(std::string_view magic) { buf_.append(magic); }

  /// u32 byte length followed by the raw UTF-8 bytes.
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }

  const std::string& bytes() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get(const char* field) {
    need(sizeof(T), field);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return detail::to_le(v);
  }

  template <class T>
  std::vector<T> get_all(std::size_t count, const char* field) {
    if (count > remaining() / sizeof(T)) fail_truncated(field);
    std::vector<T> out(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    if constexpr (std::endian::native == std::endian::big)
      for (auto& v : out) v = detail::to_le(v);
    return out;
  }

  void expect_magic(std::string_view magic) {
    if (bytes_.size() < magic.size() || bytes_.substr(0, magic.size()) != magic) {
      throw FormatError(FormatError::Kind::bad_magic, what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ = magic.size();
  }

  std::string get_string(const char* field) {
    const auto len = get<std::uint32_t>(field);
    need(len, field);
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void expect_end() const {
    if (remaining() != 0) {
      throw FormatError(FormatError::Kind::invalid,
                        what_ + ": " + std::to_string(remaining()) + " unexpected trailing bytes");
    }
  }

  const std::string& what() const noexcept { return what_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (remaining() < n) fail_truncated(field);
  }
  [[noreturn]] void fail_truncated(const char* field) const {
    throw FormatError(FormatError::Kind::truncated,
                      what_ + ": truncated while reading " + field + " at byte " + std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + path.string());
}

}  // namespace elmdoc::io
