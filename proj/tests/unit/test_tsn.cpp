#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "ctxemo/tsn.hpp"

using namespace ctxemo;
using namespace ctxemo::tsn;

namespace {

SnippetFeatureSet random_snippet(Modality m, Rng& rng) {
  SnippetFeatureSet s;
  s.modality = m;
  std::vector<std::string> names{"body", "context", "face"};
  if (m == Modality::kRgb) names.emplace_back("scene");
  for (const auto& n : names) {
    std::vector<double> v(kStreamWidth);
    for (auto& x : v) x = rng.normal();
    s.streams[n] = v;
  }
  return s;
}

SceneAttrWeights random_weights(Rng& rng, double scale = 0.05) {
  SceneAttrWeights w;
  std::vector<double> a(kStreamWidth * kNumScenes), b(kStreamWidth * kNumAttributes);
  for (auto& x : a) x = scale * rng.normal();
  for (auto& x : b) x = scale * rng.normal();
  w.scenes = nd::Tensor({kStreamWidth, kNumScenes}, a);
  w.attributes = nd::Tensor({kStreamWidth, kNumAttributes}, b);
  return w;
}

}  // namespace

TEST_CASE("segment sampling examples") {
  CHECK(segment_sample(6, 3, SampleMode::kEval) == std::vector<std::size_t>{0, 2, 4});
  Rng rng(1);
  CHECK(segment_sample(3, 3, SampleMode::kTrain, &rng) == std::vector<std::size_t>{0, 1, 2});
  CHECK(segment_sample(2, 3, SampleMode::kEval) == std::vector<std::size_t>{0, 1, 1});
  CHECK(segment_sample(2, 3, SampleMode::kTrain, &rng) == std::vector<std::size_t>{0, 1, 1});
  CHECK_THROWS(segment_sample(0, 3, SampleMode::kEval));
  CHECK_THROWS(segment_sample(10, 3, SampleMode::kTrain));
}

TEST_CASE("train samples stay inside their segments") {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.uniform_int(25);
    const std::size_t frames = k + rng.uniform_int(200);
    const auto bounds = segment_bounds(frames, k);
    const auto idx = segment_sample(frames, k, SampleMode::kTrain, &rng);
    const auto eval1 = segment_sample(frames, k, SampleMode::kEval);
    const auto eval2 = segment_sample(frames, k, SampleMode::kEval);
    CHECK(eval1 == eval2);
    REQUIRE(idx.size() == k);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(idx[i] >= bounds[i].first);
      CHECK(idx[i] < bounds[i].second);
      CHECK(eval1[i] >= bounds[i].first);
      CHECK(eval1[i] < bounds[i].second);
    }
    CHECK(bounds.front().first == 0);
    CHECK(bounds.back().second == frames);
  }
}

TEST_CASE("scene and attribute scores") {
  SceneAttrWeights zero{nd::Tensor::zeros({kStreamWidth, kNumScenes}),
                        nd::Tensor::zeros({kStreamWidth, kNumAttributes})};
  const auto u = scene_attr_scores(std::vector<double>(kStreamWidth, 0.0), zero);
  for (double p : u.scenes) CHECK(p == doctest::Approx(1.0 / 365.0).epsilon(1e-14));
  for (double p : u.attributes) CHECK(p == doctest::Approx(1.0 / 102.0).epsilon(1e-14));

  Rng rng(3);
  const auto w = random_weights(rng);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> f(kStreamWidth);
    for (auto& x : f) x = rng.normal();
    const auto s = scene_attr_scores(f, w);
    double ts = 0.0, ta = 0.0;
    for (double p : s.scenes) ts += p;
    for (double p : s.attributes) ta += p;
    CHECK(std::abs(ts - 1.0) <= 1e-9);
    CHECK(std::abs(ta - 1.0) <= 1e-9);

    std::vector<double> f2 = f;
    for (auto& x : f2) x *= 2.0;
    const auto s2 = scene_attr_scores(f2, w);
    CHECK(s2.scenes != s.scenes);
    CHECK(std::max_element(s2.scenes.begin(), s2.scenes.end()) - s2.scenes.begin() ==
          std::max_element(s.scenes.begin(), s.scenes.end()) - s.scenes.begin());
  }
  CHECK_THROWS(scene_attr_scores(std::vector<double>(511, 0.0), w));
}

TEST_CASE("concatenation widths and order") {
  CHECK(StreamConfig::full_rgb().concat_width() == 2003);
  CHECK(StreamConfig::full_flow().concat_width() == 1536);
  StreamConfig body_only;
  body_only.context = body_only.face = body_only.scene_attr = false;
  CHECK(body_only.concat_width() == 512);

  Rng rng(4);
  const auto w = random_weights(rng);
  const auto rgb = random_snippet(Modality::kRgb, rng);
  const auto v = snippet_vector(rgb, StreamConfig::full_rgb(), &w);
  REQUIRE(v.size() == 2003);
  CHECK(std::equal(rgb.streams.at("body").begin(), rgb.streams.at("body").end(), v.begin()));
  CHECK(std::equal(rgb.streams.at("context").begin(), rgb.streams.at("context").end(),
                   v.begin() + 512));
  CHECK(std::equal(rgb.streams.at("face").begin(), rgb.streams.at("face").end(), v.begin() + 1024));
  CHECK(snippet_vector(rgb, StreamConfig::full_rgb(), &w) == v);

  const auto flow = random_snippet(Modality::kFlow, rng);
  CHECK(snippet_vector(flow, StreamConfig::full_flow(), nullptr).size() == 1536);
  CHECK(concat_streams(rgb, body_only) == rgb.streams.at("body"));
}

TEST_CASE("stream configuration errors") {
  StreamConfig bad = StreamConfig::full_flow();
  bad.scene_attr = true;
  CHECK_THROWS(bad.validate());
  StreamConfig none;
  none.body = none.context = none.face = none.scene_attr = false;
  CHECK_THROWS(none.validate());

  Rng rng(5);
  auto rgb = random_snippet(Modality::kRgb, rng);
  CHECK_THROWS(concat_streams(rgb, StreamConfig::full_flow()));
  rgb.streams["face"].pop_back();
  CHECK_THROWS(concat_streams(rgb, StreamConfig{Modality::kRgb, true, true, true, false}));
}

TEST_CASE("model heads") {
  Model model(StreamConfig::full_flow(), 3);
  for (auto* p : model.parameters())
    for (auto& v : p->tensor.mutable_values()) v = 0.0;
  const auto zero = snippet_predict(model, std::vector<double>(1536, 0.0));
  for (double v : zero.categorical) CHECK(v == 0.0);
  for (double v : zero.vad) CHECK(v == 0.0);

  Model m2(StreamConfig::full_flow(), 4);
  Rng rng(6);
  std::vector<double> x(1536);
  for (auto& v : x) v = rng.normal();
  CHECK(snippet_predict(m2, x) == snippet_predict(m2, x));

  auto& w = m2.embedding.weight.tensor;
  for (auto& v : w.mutable_values()) v = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) w.mutable_values()[i * 1536 + i] = 1.0;
  const auto e = m2.embed_project(nd::Tensor({1, 1536}, x));
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) CHECK(e.at(i) == x[i]);
  const auto ez = m2.embed_project(nd::Tensor::zeros({1, 1536}));
  for (double v : ez.values()) CHECK(v == 0.0);
  CHECK_FALSE(m2.embedding.bias.tensor.defined());
}

TEST_CASE("consensus") {
  Prediction a, b;
  a.categorical[0] = 0.2;
  b.categorical[0] = 0.4;
  CHECK(consensus({a, b}).categorical[0] == doctest::Approx(0.3).epsilon(1e-15));

  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Prediction p;
    for (auto& v : p.categorical) v = rng.normal() * 10.0;
    for (auto& v : p.vad) v = rng.uniform();
    const std::size_t k = 1 + rng.uniform_int(25);
    const auto c = consensus(std::vector<Prediction>(k, p));
    CHECK(c.categorical == p.categorical);
    CHECK(c.vad == p.vad);
  }

  // Mean of per-half means equals the overall mean for equal halves.
  std::vector<Prediction> snippets(6);
  for (auto& s : snippets)
    for (auto& v : s.categorical) v = rng.uniform();
  const auto whole = consensus(snippets);
  const auto left = consensus({snippets.begin(), snippets.begin() + 3});
  const auto right = consensus({snippets.begin() + 3, snippets.end()});
  const auto nested = consensus({left, right});
  for (std::size_t j = 0; j < kNumCategories; ++j)
    CHECK(nested.categorical[j] == doctest::Approx(whole.categorical[j]).epsilon(1e-15));
  CHECK_THROWS(consensus({}));
}
