#pragma once

// Labeled corpora on disk, the seeded per-class train/test partition grid,
// and FMX1 feature files.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "elmdoc/binary_io.hpp"
#include "elmdoc/elm.hpp"
#include "elmdoc/error.hpp"
#include "elmdoc/random.hpp"

namespace elmdoc {

// ---------------------------------------------------------------------------
// corpus

struct CorpusItem {
  std::filesystem::path path;
  std::uint32_t label = 0;
  friend bool operator==(const CorpusItem&, const CorpusItem&) = default;
};

struct Corpus {
  std::vector<CorpusItem> items;
  std::vector<std::string> class_names;
  std::vector<std::string> warnings;  // skipped files, not part of equality

  std::vector<std::uint32_t> labels() const {
    std::vector<std::uint32_t> y;
    y.reserve(items.size());
    for (const auto& it : items) y.push_back(it.label);
    return y;
  }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.items == b.items && a.class_names == b.class_names;
  }
};

inline bool is_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

/// root/<class>/<image files>. Classes are indexed in lexicographic order
/// and items are sorted by path within each class.
inline Corpus scan_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw ValueError("corpus root " + root.string() + " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().front() != '.') class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ValueError("corpus root " + root.string() + " has no class subdirectories");

  Corpus corpus;
  for (const auto& dir : class_dirs) {
    const auto label = static_cast<std::uint32_t>(corpus.class_names.size());
    corpus.class_names.push_back(dir.filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto& p = entry.path();
      if (p.filename().string().front() == '.' || entry.is_directory()) continue;
      if (!is_image_extension(p)) {
        corpus.warnings.push_back(p.string() + ": not an image file, skipped");
        continue;
      }
      if (!std::ifstream(p, std::ios::binary)) {
        corpus.warnings.push_back(p.string() + ": unreadable, skipped");
        continue;
      }
      files.push_back(p);
    }
    if (files.empty()) throw ValueError("class \"" + corpus.class_names.back() + "\" (" + dir.string() + ") is empty");
    std::sort(files.begin(), files.end());
    for (auto& f : files) corpus.items.push_back({std::move(f), label});
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// partitions

struct PartitionCell {
  std::size_t size = 0;  // training items per class
  std::size_t rep = 0;
  std::vector<std::uint32_t> train;  // ascending
  std::vector<std::uint32_t> test;   // ascending, everything not in train
  friend bool operator==(const PartitionCell&, const PartitionCell&) = default;
};

struct PartitionPlan {
  std::vector<std::size_t> sizes;
  std::size_t repetitions = 0;
  std::uint64_t seed = 0;
  std::vector<PartitionCell> cells;  // size-major, then rep

  const PartitionCell& cell(std::size_t size, std::size_t rep) const {
    for (const auto& c : cells)
      if (c.size == size && c.rep == rep) return c;
    throw ValueError("no partition cell (size=" + std::to_string(size) + ", rep=" + std::to_string(rep) + ")");
  }
  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

inline std::vector<std::size_t> default_partition_sizes() { return {10, 20, 30, 40, 50, 60, 70, 80, 90, 100}; }

/// Sampling without replacement per class: a Fisher-Yates shuffle of the
/// class's items driven by a counter stream keyed on
/// (seed, size, rep, class); the first `size` items train, the rest test.
inline PartitionPlan make_partitions(std::span<const std::uint32_t> labels, std::span<const std::string> class_names,
                                     std::span<const std::size_t> sizes, std::size_t repetitions,
                                     std::uint64_t seed) {
  if (sizes.empty()) throw ValueError("make_partitions: no partition sizes given");
  if (repetitions == 0) throw ValueError("make_partitions: repetitions must be >= 1");
  const std::size_t m = class_names.size();
  std::vector<std::vector<std::uint32_t>> by_class(m);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= m) throw ValueError("make_partitions: label " + std::to_string(labels[i]) + " out of range");
    by_class[labels[i]].push_back(static_cast<std::uint32_t>(i));
  }
  for (std::size_t size : sizes) {
    if (size == 0) throw ValueError("make_partitions: partition size must be >= 1");
    for (std::size_t c = 0; c < m; ++c) {
      if (by_class[c].size() < size) {
        throw ValueError("class \"" + class_names[c] + "\" has " + std::to_string(by_class[c].size()) +
                         " items, fewer than the requested " + std::to_string(size) + " per class");
      }
    }
  }

  PartitionPlan plan;
  plan.sizes.assign(sizes.begin(), sizes.end());
  plan.repetitions = repetitions;
  plan.seed = seed;
  std::vector<char> in_train(labels.size());
  for (std::size_t size : sizes) {
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      PartitionCell cell{size, rep, {}, {}};
      std::fill(in_train.begin(), in_train.end(), 0);
      for (std::size_t c = 0; c < m; ++c) {
        std::vector<std::uint32_t> order = by_class[c];
        const CounterStream rng(hash_words({seed, size, rep, c}));
        for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng.below(i, i + 1)]);
        for (std::size_t k = 0; k < size; ++k) in_train[order[k]] = 1;
      }
      for (std::size_t i = 0; i < labels.size(); ++i)
        (in_train[i] ? cell.train : cell.test).push_back(static_cast<std::uint32_t>(i));
      plan.cells.push_back(std::move(cell));
    }
  }
  return plan;
}

inline PartitionPlan make_partitions(const Corpus& corpus, std::span<const std::size_t> sizes, std::size_t reps,
                                     std::uint64_t seed) {
  const auto y = corpus.labels();
  return make_partitions(y, corpus.class_names, sizes, reps, seed);
}

inline PartitionPlan make_partitions(const LabeledFeatureSet& set, std::span<const std::size_t> sizes,
                                     std::size_t reps, std::uint64_t seed) {
  if (!set.labeled()) throw ValueError("make_partitions: feature set has no labels");
  return make_partitions(set.y, set.class_names, sizes, reps, seed);
}

// ---------------------------------------------------------------------------
// FMX1 feature files
//
//   "FMX1" u32 version u32 n u32 d u32 m
//   m x (u32 length, UTF-8 bytes)   class names
//   u32 y[n]                         only when m > 0
//   f32 X[n*d]                       row-major

inline constexpr std::string_view kFeatureMagic = "FMX1";
inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::string serialize_features(const LabeledFeatureSet& set) {
  set.validate();
  io::ByteWriter w;
  w.put_magic(kFeatureMagic);
  w.put(kFeatureVersion);
  w.put(static_cast<std::uint32_t>(set.size()));
  w.put(static_cast<std::uint32_t>(set.dim()));
  w.put(static_cast<std::uint32_t>(set.num_classes()));
  for (const auto& name : set.class_names) w.put_string(name);
  if (set.labeled()) w.put_all(std::span<const std::uint32_t>(set.y));
  w.put_all(set.X.values());
  return w.bytes();
}

inline LabeledFeatureSet deserialize_features(std::string_view bytes, std::string what = "features") {
  io::ByteReader r(bytes, std::move(what));
  r.expect_magic(kFeatureMagic);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kFeatureVersion)
    throw FormatError(FormatError::Kind::bad_version, r.what() + ": unsupported version " + std::to_string(version));
  const std::size_t n = r.get<std::uint32_t>("n");
  const std::size_t d = r.get<std::uint32_t>("d");
  const std::size_t m = r.get<std::uint32_t>("m");
  LabeledFeatureSet set;
  for (std::size_t c = 0; c < m; ++c) set.class_names.push_back(r.get_string("class name"));
  if (m > 0) set.y = r.get_all<std::uint32_t>(n, "labels");
  try {
    set.X = FloatMatrix(n, d, r.get_all<float>(n * d, "feature rows"));
  } catch (const ValueError& e) {
    throw FormatError(FormatError::Kind::invalid, r.what() + ": " + e.what());
  }
  r.expect_end();
  try {
    set.validate();
  } catch (const Error& e) {
    throw FormatError(FormatError::Kind::shape, r.what() + ": " + e.what());
  }
  return set;
}

inline void write_features(const std::filesystem::path& path, const LabeledFeatureSet& set) {
  io::write_file(path, serialize_features(set));
}

inline LabeledFeatureSet read_features(const std::filesystem::path& path) {
  return deserialize_features(io::read_file(path), path.string());
}

/// CSV with a header row. A column named "label" holds class names (classes
/// indexed in lexicographic order); every other column is a numeric feature.
/// Without a label column the set is unlabeled.
inline LabeledFeatureSet parse_features_csv(std::string_view text, const std::string& what = "csv") {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  auto split = [&](std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        out.push_back(trim(line.substr(start, i - start)));
        start = i + 1;
      }
    }
    return out;
  };

  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty()) throw FormatError(FormatError::Kind::invalid, what + ": empty CSV, expected a header row");

  const auto header = split(lines[0]);
  std::ptrdiff_t label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string h(header[c]);
    std::transform(h.begin(), h.end(), h.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (h == "label") label_col = static_cast<std::ptrdiff_t>(c);
  }
  const std::size_t d = header.size() - (label_col >= 0 ? 1 : 0);
  const std::size_t n = lines.size() - 1;
  std::vector<float> data;
  data.reserve(n * d);
  std::vector<std::string> labels;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split(lines[r]);
    if (fields.size() != header.size()) {
      throw FormatError(FormatError::Kind::shape, what + ": line " + std::to_string(r + 1) + " has " +
                                                      std::to_string(fields.size()) + " fields, header has " +
                                                      std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == label_col) {
        labels.emplace_back(fields[c]);
        continue;
      }
      float v = 0;
      const auto* first = fields[c].data();
      const auto* last = first + fields[c].size();
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc{} || res.ptr != last) {
        throw FormatError(FormatError::Kind::invalid, what + ": line " + std::to_string(r + 1) + ": \"" +
                                                          std::string(fields[c]) + "\" is not a number");
      }
      data.push_back(v);
    }
  }
  LabeledFeatureSet set;
  try {
    set.X = FloatMatrix(n, d, std::move(data));
  } catch (const ValueError& e) {
    throw FormatError(FormatError::Kind::invalid, what + ": " + e.what());
  }
  if (label_col >= 0) {
    const std::set<std::string> names(labels.begin(), labels.end());
    set.class_names.assign(names.begin(), names.end());
    for (const auto& l : labels) {
      set.y.push_back(static_cast<std::uint32_t>(
          std::lower_bound(set.class_names.begin(), set.class_names.end(), l) - set.class_names.begin()));
    }
  }
  return set;
}

inline LabeledFeatureSet import_features_csv(const std::filesystem::path& path) {
  return parse_features_csv(io::read_file(path), path.string());
}

/// FMX1 or CSV, chosen by the file's leading bytes.
inline LabeledFeatureSet load_features(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.compare(0, kFeatureMagic.size(), kFeatureMagic) == 0) return deserialize_features(bytes, path.string());
  if (path.extension() == ".csv") return parse_features_csv(bytes, path.string());
  return deserialize_features(bytes, path.string());
}

}  // namespace elmdoc
