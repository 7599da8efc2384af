#include <algorithm>

#include "doctest.h"

#include "ctxemo/fusion.hpp"
#include "ctxemo/rng.hpp"

using namespace ctxemo;
using namespace ctxemo::fusion;

namespace {

PredictionSet random_set(const std::string& name, std::size_t n, Rng& rng,
                         ScoreSpace space = ScoreSpace::kProbability) {
  PredictionSet s;
  s.model = name;
  s.space = space;
  for (std::size_t i = 0; i < n; ++i) {
    Prediction p;
    p.clip_id = "c" + std::to_string(i);
    for (auto& v : p.categorical) v = space == ScoreSpace::kLogit ? rng.normal() : rng.uniform();
    for (auto& v : p.vad) v = rng.uniform();
    s.items.push_back(p);
  }
  return s;
}

PredictionSet single(double score) {
  PredictionSet s;
  s.space = ScoreSpace::kProbability;
  Prediction p;
  p.clip_id = "x";
  p.categorical[0] = score;
  p.vad[0] = score;
  s.items.push_back(p);
  return s;
}

}  // namespace

TEST_CASE("weighted average hand arithmetic") {
  const auto out = fuse({single(0.5), single(0.3), single(0.2)}, FusionSpec::default_weighted());
  CHECK(out.items[0].categorical[0] == 0.36);
  CHECK(out.items[0].vad[0] == 0.36);
  CHECK(out.space == ScoreSpace::kProbability);
  CHECK(out.model == "fused-weighted_average");
}

TEST_CASE("average schemes") {
  Rng rng(1);
  const std::vector<PredictionSet> sets{random_set("a", 20, rng), random_set("b", 20, rng),
                                        random_set("c", 20, rng)};
  const auto avg = fuse(sets, {Scheme::kAverage, {}});
  const auto eq = fuse(sets, {Scheme::kWeightedAverage, {1, 1, 1}});
  const auto eq7 = fuse(sets, {Scheme::kWeightedAverage, {7, 7, 7}});
  CHECK(avg.items == eq.items);
  CHECK(avg.items == eq7.items);

  const auto w = fuse(sets, {Scheme::kWeightedAverage, {2, 2, 1}});
  const auto w3 = fuse(sets, {Scheme::kWeightedAverage, {0.6, 0.6, 0.3}});
  for (std::size_t i = 0; i < w.items.size(); ++i)
    for (std::size_t c = 0; c < kNumCategories; ++c)
      CHECK(w3.items[i].categorical[c] == doctest::Approx(w.items[i].categorical[c]).epsilon(1e-15));
}

TEST_CASE("identical inputs are unchanged under every scheme") {
  Rng rng(2);
  const auto s = random_set("a", 15, rng);
  for (const auto& spec : {FusionSpec{Scheme::kMaximum, {}}, FusionSpec{Scheme::kAverage, {}},
                           FusionSpec::default_weighted()}) {
    const auto out = fuse({s, s, s}, spec);
    CHECK(out.items == s.items);
  }
}

TEST_CASE("max fusion is idempotent and order invariant") {
  Rng rng(3);
  const auto a = random_set("a", 10, rng), b = random_set("b", 10, rng), c = random_set("c", 10, rng);
  const FusionSpec max{Scheme::kMaximum, {}};
  const auto abc = fuse({a, b, c}, max);
  CHECK(fuse({c, a, b}, max).items == abc.items);
  CHECK(fuse({abc, abc}, max).items == abc.items);
  CHECK(fuse({abc, a}, max).items == abc.items);
}

TEST_CASE("logit inputs are mapped to probabilities") {
  Rng rng(4);
  const auto logits = random_set("l", 5, rng, ScoreSpace::kLogit);
  const auto out = fuse({logits}, {Scheme::kAverage, {}});
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(out.items[i].categorical[3] == sigmoid(logits.items[i].categorical[3]));
    CHECK(out.items[i].vad == logits.items[i].vad);
  }
}

TEST_CASE("clip alignment by id") {
  Rng rng(5);
  const auto a = random_set("a", 6, rng);
  auto b = a;
  std::reverse(b.items.begin(), b.items.end());
  const auto out = fuse({a, b}, {Scheme::kAverage, {}});
  CHECK(out.items == a.items);
}

TEST_CASE("fusion errors") {
  Rng rng(6);
  const auto a = random_set("a", 4, rng), b = random_set("b", 4, rng);
  CHECK_THROWS(fuse({}, {Scheme::kAverage, {}}));
  CHECK_THROWS(fuse({a, b}, {Scheme::kWeightedAverage, {1, 2, 3}}));
  CHECK_THROWS(fuse({a, b}, {Scheme::kWeightedAverage, {1, 0}}));
  auto missing = b;
  missing.items.back().clip_id = "zzz";
  CHECK_THROWS(fuse({a, missing}, {Scheme::kAverage, {}}));
  auto dup = a;
  dup.items[1].clip_id = dup.items[0].clip_id;
  CHECK_THROWS(fuse({dup, b}, {Scheme::kAverage, {}}));
  CHECK(parse_scheme("max") == Scheme::kMaximum);
  CHECK(parse_scheme("weighted") == Scheme::kWeightedAverage);
  CHECK_THROWS(parse_scheme("median"));
}
