#include <gtest/gtest.h>

#include <random>

#include "elmdoc/elm.hpp"
#include "elmdoc/elm_io.hpp"
#include "elmdoc/evaluation.hpp"
#include "oracles.hpp"

using elmdoc::Activation;
using elmdoc::DenseMatrix;
using elmdoc::ElmConfig;

namespace {

elmdoc::LabeledFeatureSet random_set(std::size_t n, std::size_t d, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  elmdoc::LabeledFeatureSet s;
  s.X = elmdoc::FloatMatrix(n, d);
  for (auto& v : std::span(s.X.data(), s.X.size())) v = u(g);
  for (std::size_t c = 0; c < m; ++c) s.class_names.push_back("c" + std::to_string(c));
  for (std::size_t k = 0; k < n; ++k) s.y.push_back(static_cast<std::uint32_t>(g() % m));
  return s;
}

DenseMatrix model_hidden(const elmdoc::ElmModel& model, const elmdoc::FloatMatrix& X) {
  return oracle::scalar_hidden_map(model.hidden, X, model.standardizer.mean, model.standardizer.stddev);
}

}  // namespace

TEST(InitHidden, DeterministicAndInRange) {
  const auto a = elmdoc::init_hidden(5, 3, Activation::sigmoid, 42);
  const auto b = elmdoc::init_hidden(5, 3, Activation::sigmoid, 42);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  for (double v : a.weights.values()) EXPECT_LE(std::abs(v), 1.0);
  for (double v : a.bias) EXPECT_LE(std::abs(v), 1.0);
  const auto c = elmdoc::init_hidden(5, 3, Activation::sigmoid, 43);
  EXPECT_NE(a.weights, c.weights);
}

TEST(InitHidden, IndependentOfThreadCount) {
  elmdoc::set_num_threads(1);
  const auto one = elmdoc::init_hidden(300, 97, Activation::relu, 5);
  elmdoc::set_num_threads(3);
  const auto three = elmdoc::init_hidden(300, 97, Activation::relu, 5);
  elmdoc::set_num_threads(0);
  EXPECT_EQ(one.weights, three.weights);
  EXPECT_EQ(one.bias, three.bias);
}

TEST(InitHidden, AlexNetFeatureShape) {
  // 2000 hidden nodes on 256 maps of 6x6.
  const auto h = elmdoc::init_hidden(256 * 6 * 6, 2000, Activation::sigmoid, 1);
  EXPECT_EQ(h.weights.rows(), 2000u);
  EXPECT_EQ(h.weights.cols(), 9216u);
  EXPECT_EQ(h.bias.size(), 2000u);
}

TEST(InitHidden, RejectsZeroSizes) {
  EXPECT_THROW(elmdoc::init_hidden(0, 3, Activation::sigmoid, 1), elmdoc::ValueError);
  EXPECT_THROW(elmdoc::init_hidden(3, 0, Activation::sigmoid, 1), elmdoc::ValueError);
}

TEST(Activate, Definitions) {
  EXPECT_EQ(elmdoc::activate(0.0, Activation::sigmoid), 0.5);
  EXPECT_EQ(elmdoc::activate(-3.0, Activation::relu), 0.0);
  EXPECT_EQ(elmdoc::activate(3.0, Activation::relu), 3.0);
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 1000; ++i) {
    const double z = u(g);
    EXPECT_NEAR(elmdoc::activate(z, Activation::sigmoid) + elmdoc::activate(-z, Activation::sigmoid), 1.0, 1e-15);
  }
  EXPECT_EQ(elmdoc::parse_activation("relu"), Activation::relu);
  EXPECT_THROW(elmdoc::parse_activation("tanh"), elmdoc::ValueError);
}

TEST(HiddenMap, IdentityPassThrough) {
  elmdoc::HiddenLayer h{DenseMatrix::identity(3), std::vector<double>(3, 0.0), Activation::relu, 0};
  const auto H = elmdoc::hidden_map(h, DenseMatrix::identity(3), elmdoc::Standardizer::identity(3));
  EXPECT_EQ(H, DenseMatrix::identity(3));
}

TEST(HiddenMap, SigmoidRangeAndScalarOracle) {
  std::mt19937_64 g(3);
  const auto X = oracle::random_matrix(4, 3, g, -5, 5);
  const auto h = elmdoc::init_hidden(3, 6, Activation::sigmoid, 9);
  const elmdoc::Standardizer st{{0.5, -1.0, 2.0}, {1.5, 0.5, 3.0}};
  const auto H = elmdoc::hidden_map(h, X, st);
  for (double v : H.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_LT(oracle::max_abs_diff(H, oracle::scalar_hidden_map(h, X, st.mean, st.stddev)), 1e-12);
}

TEST(HiddenMap, DimensionMismatch) {
  const auto h = elmdoc::init_hidden(3, 2, Activation::sigmoid, 1);
  EXPECT_THROW(elmdoc::hidden_map(h, DenseMatrix(2, 4), elmdoc::Standardizer::identity(4)), elmdoc::DimensionError);
  EXPECT_THROW(elmdoc::hidden_map(h, DenseMatrix(2, 3), elmdoc::Standardizer::identity(2)), elmdoc::DimensionError);
}

TEST(OneHot, Encoding) {
  const std::vector<std::uint32_t> y{0, 2};
  EXPECT_EQ(elmdoc::one_hot(y, 3), (DenseMatrix{{1, 0, 0}, {0, 0, 1}}));
  const std::vector<std::uint32_t> many{3, 1, 4, 1, 0, 2};
  const auto T = elmdoc::one_hot(many, 5);
  for (std::size_t r = 0; r < T.rows(); ++r) {
    double s = 0;
    for (double v : T.row(r)) s += v;
    EXPECT_EQ(s, 1.0);
  }
  EXPECT_EQ(elmdoc::argmax_rows(T), many);
  EXPECT_THROW(elmdoc::one_hot(many, 4), elmdoc::ValueError);
}

TEST(Train, MemorizesSinglePoint) {
  elmdoc::LabeledFeatureSet s{elmdoc::FloatMatrix{{0.7f}}, {1}, {"a", "b"}};
  const auto model = elmdoc::train(s, {.hidden = 1, .C = 1.0});
  EXPECT_EQ(elmdoc::predict(model, s.X), std::vector<std::uint32_t>{1});
}

TEST(Train, TwoBlobs) {
  const auto train = oracle::two_blobs(10, 100, 101);
  const auto test = oracle::two_blobs(10, 100, 202);
  const auto model = elmdoc::train(train, {.hidden = 50, .C = 1.0, .seed = 7});
  EXPECT_GE(elmdoc::accuracy(elmdoc::predict(model, test.X), test.y), 0.99);
  EXPECT_EQ(elmdoc::predict(model, train.X), train.y);
}

TEST(Train, MatchesGradientDescentOnRidgeObjective) {
  const auto s = random_set(30, 5, 3, 17);
  const auto model = elmdoc::train(s, {.hidden = 10, .C = 1.0, .seed = 3});
  const auto H = model_hidden(model, s.X);
  const auto B = oracle::gradient_descent_ridge(H, elmdoc::one_hot(s.y, 3), 1.0, 1e-10);
  EXPECT_LT(oracle::max_abs_diff(model.output, B), 1e-4);
}

TEST(Train, StationarityResidual) {
  for (double C : {0.01, 1.0, 100.0}) {
    const auto s = random_set(120, 12, 4, 23);
    const auto model = elmdoc::train(s, {.hidden = 40, .C = C, .seed = 5});
    const auto H = model_hidden(model, s.X);
    const auto T = elmdoc::one_hot(s.y, 4);
    const auto Ht = oracle::naive_transpose(H);
    auto A = oracle::naive_matmul(Ht, H);
    for (std::size_t i = 0; i < A.rows(); ++i) A(i, i) += 1.0 / C;
    const auto HtT = oracle::naive_matmul(Ht, T);
    const auto r = oracle::naive_matmul(A, model.output) - HtT;
    EXPECT_LE(elmdoc::frobenius_norm(r), 1e-8 * elmdoc::frobenius_norm(HtT)) << "C=" << C;
  }
}

TEST(Train, RidgeLimitApproachesLeastSquares) {
  const auto s = random_set(200, 20, 3, 29);
  const auto model = elmdoc::train(s, {.hidden = 50, .C = 1e12, .seed = 11});
  const auto H = model_hidden(model, s.X);
  const auto ls = oracle::normal_equations_ls(H, elmdoc::one_hot(s.y, 3));
  EXPECT_LT(oracle::rel_frobenius(model.output, ls), 1e-4);
}

TEST(Train, OutputNormNonDecreasingInC) {
  const auto s = random_set(80, 8, 3, 31);
  double prev = 0;
  for (double C : {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e3}) {
    const double norm = elmdoc::frobenius_norm(elmdoc::train(s, {.hidden = 30, .C = C, .seed = 2}).output);
    EXPECT_GE(norm, prev) << "C=" << C;
    prev = norm;
  }
}

TEST(Train, Deterministic) {
  const auto s = random_set(60, 7, 3, 37);
  const ElmConfig cfg{.hidden = 25, .C = 3.0, .seed = 99};
  EXPECT_EQ(elmdoc::train(s, cfg), elmdoc::train(s, cfg));
}

TEST(Train, NormalizationSwitch) {
  const auto s = random_set(40, 6, 2, 41);
  const auto off = elmdoc::train(s, {.hidden = 8, .normalize = false});
  EXPECT_EQ(off.standardizer.mean, std::vector<double>(6, 0.0));
  EXPECT_EQ(off.standardizer.stddev, std::vector<double>(6, 1.0));
  const auto on = elmdoc::train(s, {.hidden = 8});
  for (double sd : on.standardizer.stddev) EXPECT_GT(sd, 0.0);
}

TEST(Train, ConstantFeatureStdIsFloored) {
  elmdoc::LabeledFeatureSet s{elmdoc::FloatMatrix{{1, 5}, {2, 5}, {3, 5}}, {0, 1, 0}, {"a", "b"}};
  const auto model = elmdoc::train(s, {.hidden = 4});
  EXPECT_EQ(model.standardizer.stddev[1], elmdoc::Standardizer::kStdFloor);
}

TEST(Train, Errors) {
  const auto s = random_set(10, 3, 2, 43);
  EXPECT_THROW(elmdoc::train(s, {.hidden = 4, .C = 0.0}), elmdoc::ValueError);
  EXPECT_THROW(elmdoc::train(s, {.hidden = 4, .C = -1.0}), elmdoc::ValueError);
  EXPECT_THROW(elmdoc::train(s, {.hidden = 0}), elmdoc::ValueError);
  auto bad = s;
  bad.X(3, 1) = NAN;
  EXPECT_THROW(elmdoc::train(bad, {.hidden = 4}), elmdoc::ValueError);
  auto unlabeled = s;
  unlabeled.y.clear();
  unlabeled.class_names.clear();
  EXPECT_THROW(elmdoc::train(unlabeled, {.hidden = 4}), elmdoc::ValueError);
}

TEST(Train, RankDeficientFactorizationFailurePropagates) {
  // Identical huge-valued rows and an enormous C make H^T H + I/C numerically
  // singular in double precision, so Cholesky must report a pivot.
  const DenseMatrix H(4, 3, 1e9);
  EXPECT_THROW(elmdoc::solve_output_weights(H, DenseMatrix(4, 1, 1.0), 1e30), elmdoc::SolverError);
}

TEST(Predict, ArgmaxWithLowestIndexTies) {
  EXPECT_EQ(elmdoc::argmax_rows(DenseMatrix{{0.1, 0.9, 0.3}}), std::vector<std::uint32_t>{1});
  EXPECT_EQ(elmdoc::argmax_rows(DenseMatrix{{0.5, 0.9, 0.9}, {2, 2, 2}}), (std::vector<std::uint32_t>{1, 0}));
}

TEST(Predict, ScoresMatchScalarEvaluation) {
  const auto s = random_set(50, 6, 4, 47);
  const auto model = elmdoc::train(s, {.hidden = 20, .C = 2.0, .seed = 4});
  const auto scores = elmdoc::predict_scores(model, s.X);
  EXPECT_LT(oracle::max_abs_diff(scores, oracle::scalar_scores(model, s.X)), 1e-10);
  EXPECT_EQ(elmdoc::argmax_rows(scores), elmdoc::predict(model, s.X));
}

TEST(Predict, SingleSampleSingleClass) {
  elmdoc::LabeledFeatureSet s{elmdoc::FloatMatrix{{1, 2}, {3, 4}}, {0, 0}, {"only"}};
  const auto model = elmdoc::train(s, {.hidden = 3});
  const auto scores = elmdoc::predict_scores(model, elmdoc::FloatMatrix{{1, 2}});
  EXPECT_EQ(scores.rows(), 1u);
  EXPECT_EQ(scores.cols(), 1u);
}

TEST(Predict, DimensionMismatch) {
  const auto s = random_set(10, 3, 2, 53);
  const auto model = elmdoc::train(s, {.hidden = 4});
  EXPECT_THROW(elmdoc::predict(model, elmdoc::FloatMatrix(2, 4)), elmdoc::DimensionError);
}

TEST(ModelFile, RoundTripIsBitExact) {
  const auto s = random_set(30, 5, 3, 59);
  auto model = elmdoc::train(s, {.hidden = 7, .C = 0.5, .activation = Activation::relu, .seed = 1234});
  model.class_names = {"letter", "memo", "\xc3\xa9mail"};
  const std::string bytes = elmdoc::serialize_model(model);
  const auto back = elmdoc::deserialize_model(bytes);
  EXPECT_EQ(back, model);
  EXPECT_EQ(elmdoc::serialize_model(back), bytes);
  // header: magic, version, seed, N, d, m, activation, C
  EXPECT_EQ(bytes.substr(0, 4), "ELM1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1234 & 0xff);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 7);
  EXPECT_EQ(static_cast<unsigned char>(bytes[20]), 5);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[28]), 1);
  const std::size_t expected = 4 + 4 + 8 + 12 + 1 + 8 + 8 * (7 * 5 + 7 + 7 * 3 + 5 + 5) + (4 + 6) + (4 + 4) + (4 + 6);
  EXPECT_EQ(bytes.size(), expected);
}

TEST(ModelFile, FaultInjection) {
  const auto s = random_set(12, 3, 2, 61);
  const std::string bytes = elmdoc::serialize_model(elmdoc::train(s, {.hidden = 4}));
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    try {
      elmdoc::deserialize_model(bytes.substr(0, len));
      FAIL() << "prefix " << len << " accepted";
    } catch (const elmdoc::FormatError& e) {
      EXPECT_EQ(e.kind(), len < 4 ? elmdoc::FormatError::Kind::bad_magic : elmdoc::FormatError::Kind::truncated)
          << len;
    }
  }
  auto corrupt = bytes;
  corrupt[0] = 'X';
  try {
    elmdoc::deserialize_model(corrupt);
    FAIL();
  } catch (const elmdoc::FormatError& e) {
    EXPECT_EQ(e.kind(), elmdoc::FormatError::Kind::bad_magic);
  }
  corrupt = bytes;
  corrupt[4] = 9;
  try {
    elmdoc::deserialize_model(corrupt);
    FAIL();
  } catch (const elmdoc::FormatError& e) {
    EXPECT_EQ(e.kind(), elmdoc::FormatError::Kind::bad_version);
  }
  try {
    elmdoc::deserialize_model(bytes + "x");
    FAIL();
  } catch (const elmdoc::FormatError& e) {
    EXPECT_EQ(e.kind(), elmdoc::FormatError::Kind::invalid);
  }
}
