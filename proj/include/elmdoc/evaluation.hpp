#pragma once

// Accuracy, confusion matrices and the partition-grid experiment: for every
// (size, rep) cell train a number of ELMs with distinct seeds, score them on
// the held-out items and aggregate mean / median / stddev per size.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elmdoc/dataset.hpp"
#include "elmdoc/elm.hpp"
#include "elmdoc/error.hpp"
#include "elmdoc/random.hpp"

namespace elmdoc {

inline double accuracy(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> truth) {
  if (pred.size() != truth.size()) {
    throw DimensionError("accuracy: " + std::to_string(pred.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw ValueError("accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t m) : classes(m), counts(m * m, 0) {}

  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * classes + pred]; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }

  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < classes; ++i) t += at(i, i);
    return t;
  }
  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.classes != classes) throw DimensionError("confusion matrices of different class counts");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    return *this;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> truth,
                                 std::size_t m) {
  if (pred.size() != truth.size()) {
    throw DimensionError("confusion: " + std::to_string(pred.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  ConfusionMatrix cm(m);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= m || truth[i] >= m) {
      throw ValueError("confusion: class index out of range at sample " + std::to_string(i) + " (m=" +
                       std::to_string(m) + ")");
    }
    ++cm.at(truth[i], pred[i]);
  }
  return cm;
}

/// One integer row per line, space separated.
inline std::string render_confusion(const ConfusionMatrix& cm) {
  std::ostringstream os;
  for (std::size_t i = 0; i < cm.classes; ++i) {
    for (std::size_t j = 0; j < cm.classes; ++j) os << (j ? " " : "") << cm.at(i, j);
    os << "\n";
  }
  return os.str();
}

using Seconds = std::chrono::duration<double>;

/// One partition cell. With k ELM repeats the confusion matrix is summed over
/// the repeats, so it totals k * n_test and accuracy = trace / total is the
/// mean of repeat_accuracies.
struct CellResult {
  std::size_t size = 0;
  std::size_t rep = 0;
  double accuracy = 0;
  std::vector<double> repeat_accuracies;
  ConfusionMatrix confusion;
  Seconds train_wall{0};
  Seconds predict_wall{0};
  std::size_t n_train = 0;
  std::size_t n_test = 0;

  friend bool operator==(const CellResult&, const CellResult&) = default;
};

struct SizeAggregate {
  std::size_t size = 0;
  std::size_t reps = 0;
  double mean = 0;
  double median = 0;
  double stddev = 0;  // sample standard deviation, 0 for a single rep

  friend bool operator==(const SizeAggregate&, const SizeAggregate&) = default;
};

struct GridReport {
  std::vector<std::string> class_names;
  std::size_t elm_repeats = 1;
  std::vector<CellResult> cells;
  std::vector<SizeAggregate> aggregates;
  Seconds total_train{0};
  Seconds total_predict{0};

  friend bool operator==(const GridReport&, const GridReport&) = default;
};

inline SizeAggregate aggregate(std::size_t size, std::vector<double> values) {
  if (values.empty()) throw ValueError("aggregate: no values for size " + std::to_string(size));
  SizeAggregate a;
  a.size = size;
  a.reps = values.size();
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  a.median = values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

/// Seed of ELM repeat `repeat` in cell (size, rep).
inline std::uint64_t cell_seed(std::uint64_t base, std::size_t size, std::size_t rep, std::size_t repeat) {
  return base ^ hash_words({size, rep, repeat});
}

inline GridReport run_grid(const LabeledFeatureSet& features, const PartitionPlan& plan, const ElmConfig& config,
                           std::size_t elm_repeats) {
  if (elm_repeats == 0) throw ValueError("run_grid: elm repeats must be >= 1");
  if (!features.labeled()) throw ValueError("run_grid: feature set has no labels");
  config.validate();
  using clock = std::chrono::steady_clock;

  GridReport report;
  report.class_names = features.class_names;
  report.elm_repeats = elm_repeats;
  const std::size_t m = features.num_classes();
  for (const auto& cell : plan.cells) {
    try {
      if (cell.test.empty()) throw ValueError("no test items left");
      const LabeledFeatureSet train_set = features.subset(cell.train);
      const LabeledFeatureSet test_set = features.subset(cell.test);
      CellResult res;
      res.size = cell.size;
      res.rep = cell.rep;
      res.n_train = train_set.size();
      res.n_test = test_set.size();
      res.confusion = ConfusionMatrix(m);
      for (std::size_t r = 0; r < elm_repeats; ++r) {
        ElmConfig cfg = config;
        cfg.seed = cell_seed(config.seed, cell.size, cell.rep, r);
        const auto t0 = clock::now();
        const ElmModel model = train(train_set, cfg);
        const auto t1 = clock::now();
        const auto pred = predict(model, test_set.X);
        const auto t2 = clock::now();
        res.train_wall += Seconds(t1 - t0);
        res.predict_wall += Seconds(t2 - t1);
        res.repeat_accuracies.push_back(accuracy(pred, test_set.y));
        res.confusion += confusion(pred, test_set.y, m);
      }
      res.accuracy = static_cast<double>(res.confusion.trace()) / static_cast<double>(res.confusion.total());
      report.total_train += res.train_wall;
      report.total_predict += res.predict_wall;
      report.cells.push_back(std::move(res));
    } catch (const std::exception& e) {
      throw Error("cell (size=" + std::to_string(cell.size) + ", rep=" + std::to_string(cell.rep) + "): " + e.what());
    }
  }
  for (std::size_t size : plan.sizes) {
    std::vector<double> values;
    for (const auto& c : report.cells)
      if (c.size == size) values.push_back(c.accuracy);
    report.aggregates.push_back(aggregate(size, std::move(values)));
  }
  return report;
}

// ---------------------------------------------------------------------------
// reports

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ValueError("unknown report format \"" + std::string(s) + "\" (expected csv or json)");
}

namespace detail {
inline std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
}  // namespace detail

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < cm.classes; ++i) {
    auto row = nlohmann::json::array();
    for (std::size_t j = 0; j < cm.classes; ++j) row.push_back(cm.at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const GridReport& report) {
  nlohmann::json j;
  j["classes"] = report.class_names;
  j["elm_repeats"] = report.elm_repeats;
  j["total_train_seconds"] = report.total_train.count();
  j["total_predict_seconds"] = report.total_predict.count();
  auto cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"size", c.size},
                     {"rep", c.rep},
                     {"accuracy", c.accuracy},
                     {"repeat_accuracies", c.repeat_accuracies},
                     {"n_train", c.n_train},
                     {"n_test", c.n_test},
                     {"train_seconds", c.train_wall.count()},
                     {"predict_seconds", c.predict_wall.count()},
                     {"confusion", to_json(c.confusion)}});
  }
  j["cells"] = std::move(cells);
  auto aggs = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back({{"size", a.size}, {"reps", a.reps}, {"mean", a.mean}, {"median", a.median}, {"stddev", a.stddev}});
  }
  j["aggregates"] = std::move(aggs);
  return j;
}

inline GridReport report_from_json(const nlohmann::json& j) {
  try {
    GridReport r;
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    r.elm_repeats = j.at("elm_repeats").get<std::size_t>();
    r.total_train = Seconds(j.at("total_train_seconds").get<double>());
    r.total_predict = Seconds(j.at("total_predict_seconds").get<double>());
    for (const auto& c : j.at("cells")) {
      CellResult cell;
      cell.size = c.at("size").get<std::size_t>();
      cell.rep = c.at("rep").get<std::size_t>();
      cell.accuracy = c.at("accuracy").get<double>();
      cell.repeat_accuracies = c.at("repeat_accuracies").get<std::vector<double>>();
      cell.n_train = c.at("n_train").get<std::size_t>();
      cell.n_test = c.at("n_test").get<std::size_t>();
      cell.train_wall = Seconds(c.at("train_seconds").get<double>());
      cell.predict_wall = Seconds(c.at("predict_seconds").get<double>());
      const auto& rows = c.at("confusion");
      cell.confusion = ConfusionMatrix(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw ValueError("confusion matrix is not square");
        for (std::size_t k = 0; k < rows.size(); ++k) cell.confusion.at(i, k) = rows[i][k].get<std::uint64_t>();
      }
      r.cells.push_back(std::move(cell));
    }
    for (const auto& a : j.at("aggregates")) {
      r.aggregates.push_back({a.at("size").get<std::size_t>(), a.at("reps").get<std::size_t>(),
                              a.at("mean").get<double>(), a.at("median").get<double>(),
                              a.at("stddev").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::invalid, std::string("report json: ") + e.what());
  }
}

inline constexpr std::string_view kReportCsvHeader =
    "kind,size,rep,accuracy,mean,median,stddev,n_train,n_test,train_ms,predict_ms,train_ms_per_image";

/// CSV: a header, one "cell" row per cell, then one "aggregate" row per size.
/// JSON: the full nested report including confusion matrices.
inline std::string emit_report(const GridReport& report, ReportFormat format) {
  using detail::num;
  if (format == ReportFormat::json) return to_json(report).dump(2) + "\n";
  std::ostringstream os;
  os << kReportCsvHeader << "\n";
  for (const auto& c : report.cells) {
    const double train_ms = c.train_wall.count() * 1e3;
    os << "cell," << c.size << "," << c.rep << "," << num(c.accuracy) << ",,,," << c.n_train << "," << c.n_test << ","
       << num(train_ms) << "," << num(c.predict_wall.count() * 1e3) << ","
       << num(c.n_train ? train_ms / static_cast<double>(c.n_train * report.elm_repeats) : 0.0) << "\n";
  }
  for (const auto& a : report.aggregates) {
    os << "aggregate," << a.size << ",,," << num(a.mean) << "," << num(a.median) << "," << num(a.stddev)
       << ",,,,,\n";
  }
  return os.str();
}

}  // namespace elmdoc
