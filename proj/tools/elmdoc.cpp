// elmdoc: extract CNN features from a document corpus, train and apply ELM
// classifiers, run the partition-grid evaluation and time training.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include "elmdoc/elmdoc.hpp"

namespace fs = std::filesystem;
using namespace elmdoc;
using clock_type = std::chrono::steady_clock;

namespace {

struct GridConfig {
  std::vector<std::size_t> sizes = default_partition_sizes();
  std::size_t reps = 10;
  std::size_t elm_repeats = 10;
  std::uint64_t seed = 0;
};

struct Paths {
  std::string netspec, corpus, features, model, output;
};

struct Options {
  std::string config_file;
  ElmConfig elm;
  std::string activation = "sigmoid";
  bool no_normalize = false;
  GridConfig grid;
  Paths paths;
  unsigned threads = 0;
  std::string format = "csv";
  std::string resize = "squash";
  std::string synthetic;
  std::string net_kind = "alexnet";
  std::string input_shape = "3,227,227";
};

double ms(clock_type::duration d) { return std::chrono::duration<double, std::milli>(d).count(); }

void log(const std::string& msg) { std::cerr << msg << std::endl; }

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

bool given(const CLI::App& app, const char* flag) {
  const CLI::Option* opt = app.get_option_no_throw(flag);
  return opt != nullptr && opt->count() > 0;
}

template <class T>
void take(const nlohmann::json& obj, const char* key, const CLI::App& app, const char* flag, T& dst) {
  if (!obj.contains(key) || given(app, flag)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValueError(std::string("config key \"") + key + "\": " + e.what());
  }
}

// Config file values fill in whatever the command line left unset.
void apply_config_file(Options& o, const CLI::App& app) {
  if (o.config_file.empty()) return;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(o.config_file));
  } catch (const nlohmann::json::exception& e) {
    throw ValueError(o.config_file + ": " + e.what());
  }
  if (!j.is_object()) throw ValueError(o.config_file + ": top level must be a JSON object");
  const auto section = [&](const char* name) { return j.contains(name) ? j.at(name) : nlohmann::json::object(); };
  const auto elm = section("elm"), grid = section("grid"), paths = section("paths");
  take(elm, "hidden", app, "--hidden", o.elm.hidden);
  take(elm, "C", app, "--reg", o.elm.C);
  take(elm, "activation", app, "--activation", o.activation);
  take(elm, "seed", app, "--seed", o.elm.seed);
  if (elm.contains("normalize") && !given(app, "--no-normalize")) o.no_normalize = !elm.at("normalize").get<bool>();
  take(grid, "sizes", app, "--sizes", o.grid.sizes);
  take(grid, "reps", app, "--reps", o.grid.reps);
  take(grid, "elm_repeats", app, "--elm-repeats", o.grid.elm_repeats);
  take(grid, "partition_seed", app, "--partition-seed", o.grid.seed);
  take(paths, "netspec", app, "--netspec", o.paths.netspec);
  take(paths, "corpus", app, "--corpus", o.paths.corpus);
  take(paths, "features", app, "--features", o.paths.features);
  take(paths, "model", app, "--model", o.paths.model);
  take(paths, "output", app, "--output", o.paths.output);
  take(j, "threads", app, "--threads", o.threads);
}

void finalize(Options& o, const CLI::App& app) {
  apply_config_file(o, app);
  o.elm.activation = parse_activation(o.activation);
  o.elm.normalize = !o.no_normalize;
  o.elm.validate();
  if (o.grid.reps == 0) throw ValueError("--reps must be >= 1");
  if (o.grid.elm_repeats == 0) throw ValueError("--elm-repeats must be >= 1");
  if (o.threads > 0) set_num_threads(o.threads);
}

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValueError(std::string(flag) + " is required");
  return value;
}

void add_elm_flags(CLI::App* sub, Options& o) {
  sub->add_option("--hidden", o.elm.hidden, "Hidden nodes N")->check(CLI::PositiveNumber);
  sub->add_option("--reg", o.elm.C, "Regularization C (> 0)");
  sub->add_option("--activation", o.activation, "Hidden activation")->check(CLI::IsMember({"sigmoid", "relu"}));
  sub->add_flag("--no-normalize", o.no_normalize, "Skip feature standardization");
  sub->add_option("--seed", o.elm.seed, "Seed for the random hidden layer");
}

void add_grid_flags(CLI::App* sub, Options& o) {
  sub->add_option("--sizes", o.grid.sizes, "Training items per class, one grid row each")->delimiter(',');
  sub->add_option("--reps", o.grid.reps, "Random partitions per size");
  sub->add_option("--elm-repeats", o.grid.elm_repeats, "ELM restarts per partition");
  sub->add_option("--partition-seed", o.grid.seed, "Seed for the train/test partitions");
}

void add_common_flags(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_file, "JSON config file; flags given on the command line win");
  sub->add_option("--threads", o.threads, "Worker threads (0 = ELMDOC_THREADS or hardware count)");
}

// ---------------------------------------------------------------------------

int cmd_extract(Options& o, const CLI::App& app) {
  finalize(o, app);
  const auto& corpus_dir = require(o.paths.corpus, "--corpus");
  const auto& net_path = require(o.paths.netspec, "--netspec");
  const auto& out = require(o.paths.output, "--output");
  const ResizeMode mode = o.resize == "letterbox" ? ResizeMode::letterbox : ResizeMode::squash;

  const NetSpec net = load_netspec(net_path);
  const std::size_t d = feature_dim(net);
  const Corpus corpus = scan_corpus(corpus_dir);
  for (const auto& w : corpus.warnings) log("warning: " + w);
  log("extract: " + std::to_string(corpus.items.size()) + " images in " + std::to_string(corpus.class_names.size()) +
      " classes, " + std::to_string(d) + " features each, " + std::to_string(num_threads()) + " threads");

  const std::size_t n = corpus.items.size();
  std::vector<float> rows(n * d);
  std::vector<char> ok(n, 0);
  std::vector<std::string> failures(n);
  std::mutex progress_mu;
  std::size_t done = 0;
  const auto t0 = clock_type::now();
  parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        const auto f = extract(load_image(corpus.items[i].path), net, mode);
        std::copy(f.begin(), f.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * d));
        ok[i] = 1;
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
      std::lock_guard lock(progress_mu);
      if (++done % 100 == 0) log("  " + std::to_string(done) + "/" + std::to_string(n));
    }
  });
  const double elapsed = ms(clock_type::now() - t0);

  LabeledFeatureSet set;
  set.class_names = corpus.class_names;
  std::vector<float> kept;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) {
      log("warning: skipped " + failures[i]);
      ++skipped;
      continue;
    }
    kept.insert(kept.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * d),
                rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    set.y.push_back(corpus.items[i].label);
  }
  if (set.y.empty()) throw Error("extract: no image in " + corpus_dir + " could be decoded");
  set.X = FloatMatrix(set.y.size(), d, std::move(kept));
  write_features(out, set);
  log("extract: wrote " + std::to_string(set.size()) + " rows to " + out + ", skipped " + std::to_string(skipped) +
      ", " + fmt(elapsed / 1e3) + " s (" + fmt(static_cast<double>(n) / (elapsed / 1e3)) + " images/s)");
  return 0;
}

int cmd_train(Options& o, const CLI::App& app) {
  finalize(o, app);
  const auto& feat = require(o.paths.features, "--features");
  const auto& out = require(o.paths.output, "--output");
  const auto data = load_features(feat);
  if (!data.labeled()) throw ValueError(feat + ": training needs labeled features");
  const auto t0 = clock_type::now();
  const ElmModel model = train(data, o.elm);
  const double t = ms(clock_type::now() - t0);
  save_model(out, model);
  log("train: n=" + std::to_string(data.size()) + " d=" + std::to_string(data.dim()) +
      " N=" + std::to_string(o.elm.hidden) + " C=" + detail::num(o.elm.C) + " in " + fmt(t) + " ms (" +
      fmt(t / static_cast<double>(data.size()), 4) + " ms/image), model written to " + out);
  return 0;
}

int cmd_predict(Options& o, const CLI::App& app) {
  finalize(o, app);
  const auto& model_path = require(o.paths.model, "--model");
  const auto& feat = require(o.paths.features, "--features");
  const ElmModel model = load_model(model_path);
  const auto data = load_features(feat);
  if (data.dim() != model.hidden.input_dim()) {
    throw DimensionError(feat + " has " + std::to_string(data.dim()) + " features per row but model " + model_path +
                         " expects " + std::to_string(model.hidden.input_dim()));
  }
  const DenseMatrix scores = predict_scores(model, data.X);
  const auto pred = argmax_rows(scores);

  std::ostringstream csv;
  csv << "index,class,score\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& name = pred[i] < model.class_names.size() ? model.class_names[pred[i]] : std::to_string(pred[i]);
    csv << i << "," << name << "," << detail::num(scores(i, pred[i])) << "\n";
  }
  if (o.paths.output.empty() || o.paths.output == "-") {
    std::cout << csv.str();
  } else {
    io::write_file(o.paths.output, csv.str());
  }
  if (data.labeled()) {
    // feature files index classes by their own name list; map through names
    std::vector<std::uint32_t> truth;
    for (auto label : data.y) {
      const auto& name = data.class_names[label];
      const auto it = std::find(model.class_names.begin(), model.class_names.end(), name);
      if (it == model.class_names.end()) throw ValueError(feat + ": class \"" + name + "\" unknown to " + model_path);
      truth.push_back(static_cast<std::uint32_t>(it - model.class_names.begin()));
    }
    std::cerr << "accuracy " << detail::num(accuracy(pred, truth)) << " (" << pred.size() << " samples)" << std::endl;
  }
  return 0;
}

int cmd_evaluate(Options& o, const CLI::App& app) {
  finalize(o, app);
  const auto& feat = require(o.paths.features, "--features");
  const auto data = load_features(feat);
  const auto plan = make_partitions(data, o.grid.sizes, o.grid.reps, o.grid.seed);
  log("evaluate: " + std::to_string(plan.cells.size()) + " cells x " + std::to_string(o.grid.elm_repeats) +
      " ELM repeats, n=" + std::to_string(data.size()) + " d=" + std::to_string(data.dim()));
  const GridReport report = run_grid(data, plan, o.elm, o.grid.elm_repeats);
  for (const auto& a : report.aggregates) {
    log("  size " + std::to_string(a.size) + ": mean " + fmt(a.mean * 100) + "% median " + fmt(a.median * 100) +
        "% sd " + fmt(a.stddev * 100));
  }
  const auto format = parse_report_format(o.format);
  if (!o.paths.output.empty()) {
    const std::string prefix = o.paths.output;
    io::write_file(prefix + ".csv", emit_report(report, ReportFormat::csv));
    io::write_file(prefix + ".json", emit_report(report, ReportFormat::json));
    // exemplary confusion matrix: the largest size, summed over its reps
    const std::size_t largest = *std::max_element(plan.sizes.begin(), plan.sizes.end());
    ConfusionMatrix cm(data.num_classes());
    for (const auto& c : report.cells)
      if (c.size == largest) cm += c.confusion;
    std::string text = "# size " + std::to_string(largest) + ", classes:";
    for (const auto& name : data.class_names) text += " " + name;
    io::write_file(prefix + ".confusion.txt", text + "\n" + render_confusion(cm));
    log("evaluate: wrote " + prefix + ".csv, " + prefix + ".json, " + prefix + ".confusion.txt");
  }
  std::cout << emit_report(report, format);
  log("evaluate: total train " + fmt(report.total_train.count()) + " s, predict " +
      fmt(report.total_predict.count()) + " s");
  return 0;
}

// Gaussian-free synthetic data: class centers on scaled one-hot corners
// plus uniform noise, generated from the counter stream.
LabeledFeatureSet synthetic_features(std::size_t n, std::size_t d, std::size_t m, std::uint64_t seed) {
  LabeledFeatureSet s;
  for (std::size_t c = 0; c < m; ++c) s.class_names.push_back("c" + std::to_string(c));
  s.X = FloatMatrix(n, d);
  const CounterStream rng(hash_words({seed, 0x53594e}));
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::uint32_t>(i % m);
    s.y.push_back(label);
    auto row = s.X.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = static_cast<float>(rng.uniform(i * d + j, -1.0, 1.0)) + (j % m == label ? 1.0f : 0.0f);
    }
  }
  return s;
}

int cmd_bench(Options& o, const CLI::App& app) {
  finalize(o, app);
  LabeledFeatureSet train_set, test_set;
  if (!o.synthetic.empty()) {
    std::size_t n = 0, d = 0, m = 0;
    char sep1 = 0, sep2 = 0;
    std::istringstream in(o.synthetic);
    if (!(in >> n >> sep1 >> d >> sep2 >> m) || sep1 != ',' || sep2 != ',' || n == 0 || d == 0 || m == 0)
      throw ValueError("--synthetic expects n,d,m with positive integers, got \"" + o.synthetic + "\"");
    train_set = synthetic_features(n, d, m, o.elm.seed);
    test_set = synthetic_features(std::max<std::size_t>(1, n / 4), d, m, o.elm.seed + 1);
  } else {
    const auto& feat = require(o.paths.features, "--features");
    const auto data = load_features(feat);
    const std::vector<std::size_t> size{o.grid.sizes.front()};
    const auto plan = make_partitions(data, size, 1, o.grid.seed);
    train_set = data.subset(plan.cells[0].train);
    test_set = data.subset(plan.cells[0].test);
    if (test_set.size() == 0) throw ValueError("--sizes " + std::to_string(size[0]) + " leaves no test items");
  }
  log("bench: n_train=" + std::to_string(train_set.size()) + " n_test=" + std::to_string(test_set.size()) +
      " d=" + std::to_string(train_set.dim()) + " N=" + std::to_string(o.elm.hidden) + " threads=" +
      std::to_string(num_threads()));
  const auto t0 = clock_type::now();
  const ElmModel model = train(train_set, o.elm);
  const auto t1 = clock_type::now();
  const auto pred = predict(model, test_set.X);
  const auto t2 = clock_type::now();
  const double train_ms = ms(t1 - t0), predict_ms = ms(t2 - t1);
  std::cout << "train_ms " << fmt(train_ms) << "\n"
            << "train_ms_per_image " << fmt(train_ms / static_cast<double>(train_set.size()), 4) << "\n"
            << "predict_ms " << fmt(predict_ms) << "\n"
            << "predict_ms_per_image " << fmt(predict_ms / static_cast<double>(test_set.size()), 4) << "\n"
            << "accuracy " << detail::num(accuracy(pred, test_set.y)) << "\n";
  return 0;
}

Shape3 parse_shape(const std::string& s) {
  std::size_t c = 0, h = 0, w = 0;
  char a = 0, b = 0;
  std::istringstream in(s);
  if (!(in >> c >> a >> h >> b >> w) || a != ',' || b != ',' || c == 0 || h == 0 || w == 0)
    throw ValueError("--input expects C,H,W, got \"" + s + "\"");
  return {c, h, w};
}

int cmd_netspec(Options& o, const CLI::App& app) {
  finalize(o, app);
  const auto& out = require(o.paths.output, "--output");
  NetSpec net;
  if (o.net_kind == "alexnet") {
    net = alexnet_stub(o.elm.seed);
    if (given(app, "--input")) throw ValueError("--input applies to --kind identity only");
  } else {
    net = identity_stub(parse_shape(o.input_shape));
  }
  save_netspec(out, net);
  log("netspec: " + o.net_kind + " " + net.input.str() + " -> " + output_shape(net).str() + " (" +
      std::to_string(feature_dim(net)) + " features) written to " + out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document image classification with CNN features and an extreme learning machine"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  auto* extract = app.add_subcommand("extract", "Run the conv stack over an image corpus and write an FMX1 file");
  add_common_flags(extract, o);
  extract->add_option("--corpus", o.paths.corpus, "Corpus root with one subdirectory per class");
  extract->add_option("--netspec", o.paths.netspec, "EFW1 network file");
  extract->add_option("--output,-o", o.paths.output, "Output FMX1 file");
  extract->add_option("--resize", o.resize, "How images reach the input size")
      ->check(CLI::IsMember({"squash", "letterbox"}));

  auto* trn = app.add_subcommand("train", "Train an ELM on a feature file and write an ELM1 model");
  add_common_flags(trn, o);
  add_elm_flags(trn, o);
  trn->add_option("--features", o.paths.features, "FMX1 or CSV feature file");
  trn->add_option("--output,-o", o.paths.output, "Output ELM1 model");

  auto* pred = app.add_subcommand("predict", "Classify feature rows; CSV of index,class,score");
  add_common_flags(pred, o);
  pred->add_option("--model", o.paths.model, "ELM1 model");
  pred->add_option("--features", o.paths.features, "FMX1 or CSV feature file");
  pred->add_option("--output,-o", o.paths.output, "Prediction CSV (stdout when omitted)");

  auto* eval = app.add_subcommand("evaluate", "Train/test over the partition grid and report accuracies");
  add_common_flags(eval, o);
  add_elm_flags(eval, o);
  add_grid_flags(eval, o);
  eval->add_option("--features", o.paths.features, "FMX1 or CSV feature file");
  eval->add_option("--output,-o", o.paths.output, "Report prefix: writes PREFIX.csv, PREFIX.json, PREFIX.confusion.txt");
  eval->add_option("--format", o.format, "Report format on stdout")->check(CLI::IsMember({"csv", "json"}));

  auto* bench = app.add_subcommand("bench", "Time one training and one prediction pass");
  add_common_flags(bench, o);
  add_elm_flags(bench, o);
  add_grid_flags(bench, o);
  bench->add_option("--features", o.paths.features, "Feature file; trains on the first --sizes entry per class");
  bench->add_option("--synthetic", o.synthetic, "Generate n,d,m synthetic features instead (e.g. 1000,9216,10)");

  auto* net = app.add_subcommand("netspec", "Write a randomly initialized AlexNet-shaped or identity network");
  add_common_flags(net, o);
  net->add_option("--kind", o.net_kind, "Network kind")->check(CLI::IsMember({"alexnet", "identity"}));
  net->add_option("--seed", o.elm.seed, "Seed for the random conv weights");
  net->add_option("--input", o.input_shape, "Input shape C,H,W for the identity network");
  net->add_option("--output,-o", o.paths.output, "Output EFW1 file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*extract) return cmd_extract(o, *extract);
    if (*trn) return cmd_train(o, *trn);
    if (*pred) return cmd_predict(o, *pred);
    if (*eval) return cmd_evaluate(o, *eval);
    if (*bench) return cmd_bench(o, *bench);
    if (*net) return cmd_netspec(o, *net);
  } catch (const std::exception& e) {
    std::cerr << "elmdoc: error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
