// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed
// below. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "elmdoc/elmdoc.hpp"
#include "oracles.hpp"

using namespace elmdoc;

namespace {

constexpr double kStationarityTol = 1e-8;  // relative to ||H^T T||_F
constexpr double kGradientDescentTol = 1e-4;  // elementwise
constexpr double kGradientNormStop = 1e-10;
constexpr double kRidgeLimitTol = 1e-4;  // relative Frobenius
constexpr double kTwoBlobMin = 0.99;
constexpr double kTenBlobMin = 0.95;
constexpr double kCornerScale = 5.0;
constexpr float kConvTol = 1e-5f;
constexpr float kLrnTol = 1e-6f;
constexpr double kTrainBudgetSeconds = 15.0;
// FNV-1a over every index of the default grid for 10 classes x 120 items,
// labels interleaved, seed 42. Pinned so any change to the sampling scheme
// is caught on every platform; plan_hash.py recomputes it independently.
constexpr std::uint64_t kFrozenPlanHash = 0xa5768acc58874b4dULL;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

LabeledFeatureSet random_labeled(std::size_t n, std::size_t d, std::size_t m, std::mt19937_64& g) {
  LabeledFeatureSet s;
  s.X = FloatMatrix(n, d);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.X(i, j) = u(g);
  for (std::size_t c = 0; c < m; ++c) s.class_names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) s.y.push_back(static_cast<std::uint32_t>(i < m ? i : g() % m));
  return s;
}

DenseMatrix naive_tn(const DenseMatrix& a, const DenseMatrix& b) {
  return oracle::naive_matmul(oracle::naive_transpose(a), b);
}

// ---------------------------------------------------------------------------

Outcome stationarity() {
  std::mt19937_64 g(101);
  const double Cs[] = {0.01, 1.0, 100.0};
  double worst = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 20 + g() % 481, d = 5 + g() % 96, N = 10 + g() % 291, m = 2 + g() % 4;
    const double C = Cs[inst % 3];
    const auto data = random_labeled(n, d, m, g);
    const ElmModel model = train(data, {.hidden = N, .C = C, .seed = g()});
    const DenseMatrix H = hidden_map(model.hidden, data.X, model.standardizer);
    const DenseMatrix T = one_hot(data.y, m);
    DenseMatrix A = naive_tn(H, H);
    for (std::size_t i = 0; i < N; ++i) A(i, i) += 1.0 / C;
    const DenseMatrix HtT = naive_tn(H, T);
    const double rel = oracle::rel_frobenius(oracle::naive_matmul(A, model.output), HtT);
    worst = std::max(worst, rel);
  }
  return {worst <= kStationarityTol, "max relative residual " + sci(worst) + " <= " + sci(kStationarityTol)};
}

Outcome gradient_descent() {
  std::mt19937_64 g(202);
  const double Cs[] = {0.01, 1.0, 100.0};
  double worst = 0;
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t d = 5 + g() % 16, m = 2 + g() % 3;
    const double C = Cs[inst % 3];
    const auto data = random_labeled(30, d, m, g);
    const ElmModel model = train(data, {.hidden = 10, .C = C, .seed = g()});
    const DenseMatrix H = oracle::scalar_hidden_map(model.hidden, data.X, model.standardizer.mean,
                                                    model.standardizer.stddev);
    const DenseMatrix B = oracle::gradient_descent_ridge(H, one_hot(data.y, m), C, kGradientNormStop);
    worst = std::max(worst, oracle::max_abs_diff(B, model.output));
  }
  return {worst <= kGradientDescentTol, "max |B - B_gd| " + sci(worst) + " <= " + sci(kGradientDescentTol)};
}

Outcome ridge_limit() {
  std::mt19937_64 g(303);
  double worst = 0;
  for (int inst = 0; inst < 5; ++inst) {
    const auto data = random_labeled(200, 20, 3, g);
    const ElmModel model = train(data, {.hidden = 50, .C = 1e12, .seed = g()});
    const DenseMatrix H = oracle::scalar_hidden_map(model.hidden, data.X, model.standardizer.mean,
                                                    model.standardizer.stddev);
    const DenseMatrix B_ls = oracle::normal_equations_ls(H, one_hot(data.y, 3));
    worst = std::max(worst, oracle::rel_frobenius(model.output, B_ls));
  }
  return {worst <= kRidgeLimitTol, "max relative difference to least squares " + sci(worst) + " <= " +
                                       sci(kRidgeLimitTol)};
}

Outcome synthetic_classification() {
  const auto two_train = oracle::two_blobs(10, 100, 404), two_test = oracle::two_blobs(10, 100, 405);
  const ElmModel two = train(two_train, {.hidden = 50, .C = 1.0, .seed = 7});
  const double acc2 = accuracy(predict(two, two_test.X), two_test.y);
  const auto ten_train = oracle::corner_blobs(10, kCornerScale, 100, 406);
  const auto ten_test = oracle::corner_blobs(10, kCornerScale, 100, 407);
  const ElmModel ten = train(ten_train, {.hidden = 50, .C = 1.0, .seed = 7});
  const double acc10 = accuracy(predict(ten, ten_test.X), ten_test.y);
  return {acc2 >= kTwoBlobMin && acc10 >= kTenBlobMin,
          "two-blob " + sci(acc2) + " >= " + sci(kTwoBlobMin) + ", ten-class " + sci(acc10) + " >= " +
              sci(kTenBlobMin)};
}

Outcome conv_stack_shape() {
  const NetSpec net = alexnet_stub(1);
  const Shape3 out = output_shape(net);
  Image img(227, 227, 3);
  std::mt19937_64 g(505);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(g());
  const std::size_t len = extract(img, net).size();
  return {net.input == Shape3{3, 227, 227} && out == Shape3{256, 6, 6} && len == 9216,
          net.input.str() + " -> " + out.str() + ", extracted length " + std::to_string(len)};
}

Outcome layer_oracles() {
  std::mt19937_64 g(606);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + g() % (hi - lo + 1); };
  float conv_err = 0, lrn_err = 0;
  std::size_t pool_mismatch = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t groups = pick(1, 2);
    const std::size_t in_c = groups * pick(1, 3), out_c = groups * pick(1, 3);
    const std::size_t k = pick(1, 5), stride = pick(1, 3), pad = pick(0, 2);
    const std::size_t h = pick(k, 14), w = pick(k, 14);
    const auto x = oracle::random_tensor({in_c, h, w}, g);
    ConvLayer c{static_cast<std::uint32_t>(in_c), static_cast<std::uint32_t>(out_c), static_cast<std::uint32_t>(k),
                static_cast<std::uint32_t>(stride), static_cast<std::uint32_t>(pad),
                static_cast<std::uint32_t>(groups), {}, {}};
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    c.weights.resize(c.weight_count());
    c.bias.resize(out_c);
    for (auto& v : c.weights) v = u(g);
    for (auto& v : c.bias) v = u(g);
    const auto got = conv_forward(x, c), want = oracle::naive_conv(x, c);
    if (got.shape != want.shape) return {false, "conv shape mismatch at tensor " + std::to_string(t)};
    for (std::size_t i = 0; i < got.data.size(); ++i) conv_err = std::max(conv_err, std::abs(got.data[i] - want.data[i]));
  }
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = pick(1, 4), stride = pick(1, 3);
    const auto x = oracle::random_tensor({pick(1, 6), pick(k, 15), pick(k, 15)}, g);
    if (!(maxpool_forward(x, {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(stride)}) ==
          oracle::naive_maxpool(x, k, stride)))
      ++pool_mismatch;
  }
  for (int t = 0; t < 100; ++t) {
    const LrnLayer l{static_cast<std::uint32_t>(2 * pick(0, 3) + 1),
                     std::uniform_real_distribution<float>(1e-4f, 1e-1f)(g),
                     std::uniform_real_distribution<float>(0.5f, 1.0f)(g),
                     std::uniform_real_distribution<float>(1.0f, 2.0f)(g)};
    const auto x = oracle::random_tensor({pick(1, 9), pick(1, 8), pick(1, 8)}, g);
    const auto got = lrn_forward(x, l), want = oracle::naive_lrn(x, l);
    for (std::size_t i = 0; i < got.data.size(); ++i) lrn_err = std::max(lrn_err, std::abs(got.data[i] - want.data[i]));
  }
  return {conv_err <= kConvTol && pool_mismatch == 0 && lrn_err <= kLrnTol,
          "conv max err " + sci(conv_err) + " <= " + sci(kConvTol) + ", pool mismatches " +
              std::to_string(pool_mismatch) + ", lrn max err " + sci(lrn_err) + " <= " + sci(kLrnTol)};
}

std::uint64_t plan_hash(const PartitionPlan& plan) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& c : plan.cells) {
    mix(c.size);
    mix(c.rep);
    for (auto i : c.train) mix(i);
    mix(~0ULL);
    for (auto i : c.test) mix(i);
  }
  return h;
}

Outcome protocol() {
  std::vector<std::uint32_t> y;
  for (std::size_t i = 0; i < 120; ++i)
    for (std::uint32_t c = 0; c < 10; ++c) y.push_back(c);
  std::vector<std::string> names;
  for (int c = 0; c < 10; ++c) names.push_back("class" + std::to_string(c));
  const auto sizes = default_partition_sizes();
  const auto plan = make_partitions(y, names, sizes, 10, 42);
  const auto again = make_partitions(y, names, sizes, 10, 42);
  bool stratified = true, disjoint = true;
  for (const auto& cell : plan.cells) {
    std::vector<std::size_t> per(10);
    for (auto i : cell.train) ++per[y[i]];
    for (auto n : per) stratified = stratified && n == cell.size;
    std::vector<char> seen(y.size(), 0);
    for (auto i : cell.train) seen[i]++;
    for (auto i : cell.test) seen[i]++;
    for (char s : seen) disjoint = disjoint && s == 1;
  }
  const std::uint64_t h = plan_hash(plan);
  std::ostringstream hex;
  hex << std::hex << h;
  return {plan.cells.size() == 100 && stratified && disjoint && plan == again && h == kFrozenPlanHash,
          std::to_string(plan.cells.size()) + " cells, stratified " + (stratified ? "yes" : "no") + ", disjoint " +
              (disjoint ? "yes" : "no") + ", rerun identical " + (plan == again ? "yes" : "no") + ", hash 0x" +
              hex.str()};
}

Outcome training_benchmark() {
  const unsigned saved = num_threads();
  set_num_threads(1);
  LabeledFeatureSet data;
  data.X = FloatMatrix(1000, 9216);
  std::mt19937_64 g(808);
  std::uniform_real_distribution<float> u(0.0f, 4.0f);  // post-ReLU-like, nonnegative
  for (std::size_t i = 0; i < data.X.rows(); ++i)
    for (std::size_t j = 0; j < data.X.cols(); ++j) data.X(i, j) = u(g);
  for (int c = 0; c < 10; ++c) data.class_names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < 1000; ++i) data.y.push_back(static_cast<std::uint32_t>(i % 10));
  const auto t0 = std::chrono::steady_clock::now();
  const ElmModel model = train(data, {.hidden = 2000, .C = 1.0, .seed = 1});
  const double t = seconds_since(t0);
  set_num_threads(saved);
  return {t <= kTrainBudgetSeconds && model.output.rows() == 2000,
          "N=2000 on 1000x9216, 1 thread: " + sci(t) + " s <= " + sci(kTrainBudgetSeconds) + " s (" +
              sci(t * 1e3 / 1000.0) + " ms/image)"};
}

Outcome reproduction_documented() {
  // Headline accuracies need pretrained conv weights and the real corpus,
  // neither of which ship here; the check is that the README carries the
  // commands to run the protocol once both are supplied.
  std::string readme;
  try {
    readme = io::read_file(ELMDOC_README);
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  const bool ok = readme.find("elmdoc extract") != std::string::npos &&
                  readme.find("elmdoc evaluate") != std::string::npos &&
                  readme.find("--sizes 10,20,30,40,50,60,70,80,90,100") != std::string::npos;
  return {ok, std::string("accuracy figures not reproduced at desk scale; reproduction commands ") +
                  (ok ? "documented in README.md" : "missing from README.md")};
}

template <class F>
bool all_raise_format_error(const std::string& bytes, F&& parse, std::string& why) {
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    try {
      parse(bytes.substr(0, len));
      why = "prefix of " + std::to_string(len) + " bytes accepted";
      return false;
    } catch (const FormatError& e) {
      const auto want = len < 4 ? FormatError::Kind::bad_magic : FormatError::Kind::truncated;
      if (e.kind() != want) {
        why = "prefix " + std::to_string(len) + " gave " + std::string(to_string(e.kind()));
        return false;
      }
    }
  }
  auto expect = [&](std::string b, FormatError::Kind kind, const char* what) {
    try {
      parse(b);
      why = std::string(what) + " accepted";
      return false;
    } catch (const FormatError& e) {
      if (e.kind() != kind) {
        why = std::string(what) + " gave " + std::string(to_string(e.kind()));
        return false;
      }
    }
    return true;
  };
  std::string b = bytes;
  b[0] ^= 0x20;
  if (!expect(b, FormatError::Kind::bad_magic, "bad magic")) return false;
  b = bytes;
  b[4] = 0x7f;
  if (!expect(b, FormatError::Kind::bad_version, "bad version")) return false;
  if (!expect(bytes + '\0', FormatError::Kind::invalid, "trailing byte")) return false;
  // single-byte corruption anywhere: a typed error or a well-formed value
  std::mt19937_64 g(909);
  for (int t = 0; t < 2000; ++t) {
    b = bytes;
    b[g() % b.size()] ^= static_cast<char>(1 + g() % 255);
    try {
      parse(b);
    } catch (const Error&) {
    } catch (const std::exception& e) {
      why = std::string("untyped error on corruption: ") + e.what();
      return false;
    }
  }
  return true;
}

Outcome serialization() {
  const auto data = oracle::corner_blobs(3, 4.0, 20, 1001);
  const ElmModel model = train(data, {.hidden = 16, .C = 2.5, .activation = Activation::relu, .seed = 99});
  const std::string mbytes = serialize_model(model);
  const ElmModel back = deserialize_model(mbytes);
  const bool model_ok = back == model && serialize_model(back) == mbytes;

  const std::string fbytes = serialize_features(data);
  const auto fback = deserialize_features(fbytes);
  const bool feat_ok = fback.X == data.X && fback.y == data.y && fback.class_names == data.class_names &&
                       serialize_features(fback) == fbytes;

  std::string why_m, why_f;
  const bool faults_m = all_raise_format_error(mbytes, [](const std::string& b) { return deserialize_model(b); }, why_m);
  const bool faults_f =
      all_raise_format_error(fbytes, [](const std::string& b) { return deserialize_features(b); }, why_f);
  std::string detail = std::string("ELM1 round trip ") + (model_ok ? "exact" : "DIFFERS") + ", FMX1 round trip " +
                       (feat_ok ? "exact" : "DIFFERS") + ", fault injection " +
                       (faults_m && faults_f ? "all typed" : "failed: " + why_m + why_f);
  return {model_ok && feat_ok && faults_m && faults_f, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no runtime limit
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "stationarity of the trained output weights", 30, stationarity},
      {2, "closed form equals gradient-descent oracle", 60, gradient_descent},
      {3, "ridge limit equals least squares", 0, ridge_limit},
      {4, "synthetic classification", 10, synthetic_classification},
      {5, "conv-stack output shape", 0, conv_stack_shape},
      {6, "layer oracles", 60, layer_oracles},
      {7, "partition protocol", 0, protocol},
      {8, "training benchmark", 0, training_benchmark},
      {9, "headline accuracy reproduction", 0, reproduction_documented},
      {10, "serialization round trips and faults", 0, serialization},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = seconds_since(t0);
    if (c.limit_seconds > 0 && t >= c.limit_seconds) {
      o.pass = false;
      o.detail += "; runtime " + sci(t) + " s over the " + sci(c.limit_seconds) + " s limit";
    }
    std::printf("criterion %2d %s  %s: %s [%.2f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), t);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
