#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "prefalign/error.hpp"
#include "prefalign/rewards.hpp"
#include "test_util.hpp"

using namespace prefalign;

namespace {

Image half_split(int w, int h, const Eigen::Vector3d& left, const Eigen::Vector3d& right) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = x < w / 2 ? left[c] : right[c];
  return img;
}

double naive_complexity(const Image& img) {
  double sum = 0.0;
  long pairs = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        if (x + 1 < img.width) sum += std::abs(img.at(x + 1, y, c) - img.at(x, y, c)), ++pairs;
        if (y + 1 < img.height) sum += std::abs(img.at(x, y + 1, c) - img.at(x, y, c)), ++pairs;
      }
  return sum / static_cast<double>(pairs);
}

Image checker_image(int w, int h) {
  const Mask m = testutil::checkerboard(w, h);
  Image img(w, h);
  for (Eigen::Index p = 0; p < img.pixels(); ++p) img.data.segment<3>(3 * p).setConstant(m.data[p]);
  return img;
}

// O(n^2) oracle: 1 + #strictly greater + (#equal others) / 2
std::vector<double> counting_rank(const std::vector<double>& s) {
  std::vector<double> r(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    double greater = 0, equal = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i) continue;
      if (s[j] > s[i]) ++greater;
      if (s[j] == s[i]) ++equal;
    }
    r[i] = 1.0 + greater + equal / 2.0;
  }
  return r;
}

InpaintTask task_for(int label, const WorldDims& dims) {
  InpaintTask t;
  t.label = static_cast<std::uint32_t>(label);
  t.source = prototype_image(dims, label);
  t.mask = Mask(dims.width, dims.height, 0.0);
  return t;
}

}  // namespace

TEST_CASE("brightness examples") {
  CHECK(brightness(Image::filled(5, 3, {1, 1, 1})) == doctest::Approx(1.0));
  CHECK(brightness(Image::filled(5, 3, {0, 0, 0})) == 0.0);
  CHECK(brightness(Image::filled(5, 3, {1, 0, 0})) == doctest::Approx(0.299));
  CHECK(brightness(Image::filled(2, 2, {0, 1, 0})) == doctest::Approx(0.587));
}

TEST_CASE("vividness examples") {
  CHECK(vividness(Image::filled(4, 4, {0.3, 0.3, 0.3})) == 0.0);
  CHECK(vividness(Image::filled(4, 4, {1, 0, 0})) == doctest::Approx(1.0));
  CHECK(vividness(half_split(6, 4, {1, 0, 0}, {0.5, 0.5, 0.5})) == doctest::Approx(0.5));
}

TEST_CASE("complexity examples") {
  CHECK(complexity(Image::filled(7, 5, {0.2, 0.6, 0.9})) == 0.0);
  CHECK(complexity(checker_image(6, 6)) == doctest::Approx(1.0));
  const Image split = half_split(8, 6, {0, 0, 0}, {1, 1, 1});
  // one differing column boundary per row: 6 rows * 3 channels out of (7*6 + 8*5) * 3 pairs
  CHECK(complexity(split) == doctest::Approx(6.0 / (7 * 6 + 8 * 5)));
  CHECK(complexity(split) == doctest::Approx(naive_complexity(split)));
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Image img = testutil::random_image(5 + static_cast<int>(s), 4, s);
    CHECK(complexity(img) == doctest::Approx(naive_complexity(img)).epsilon(1e-12));
  }
}

TEST_CASE("statistics stay in [0,1] and fidelity <= 0") {
  const WorldDims dims{8, 8, 4};
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Image img = testutil::random_image(8, 8, 1000 + s);
    for (double v : {brightness(img), vividness(img), complexity(img)}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(fidelity(task_for(static_cast<int>(s % 4), dims), img) < 0.0);
  }
}

TEST_CASE("fidelity examples") {
  const WorldDims dims{8, 8, 4};
  for (int label = 0; label < 4; ++label) {
    const auto task = task_for(label, dims);
    const Image proto = prototype_image(dims, label);
    CHECK(fidelity(task, proto) == 0.0);
    Image shifted = proto;
    shifted.data.array() += 0.1;
    CHECK(fidelity(task, shifted) == doctest::Approx(-0.01));

    const Image img = testutil::random_image(8, 8, 50 + label);
    double sq = 0.0;
    for (Eigen::Index i = 0; i < img.data.size(); ++i) sq += (img.data[i] - proto.data[i]) * (img.data[i] - proto.data[i]);
    CHECK(fidelity(task, img) == doctest::Approx(-sq / static_cast<double>(img.data.size())).epsilon(1e-12));
  }
}

TEST_CASE("reward_score composition") {
  const WorldDims dims{8, 8, 4};
  const auto task = task_for(1, dims);
  const Image img = testutil::random_image(8, 8, 9);

  BiasProfile plain{"plain", 0, 0, 0, true};
  CHECK(reward_score(plain, task, img) == fidelity(task, img));

  const auto hps = hps_like(), pick = pick_like();
  CHECK(hps.w_brightness == 0.3);
  CHECK(hps.w_vividness == 0.3);
  CHECK(hps.w_complexity == 0.6);
  CHECK(pick.w_brightness == -hps.w_brightness);
  CHECK(pick.w_vividness == -hps.w_vividness);
  CHECK(pick.w_complexity == -hps.w_complexity);
  CHECK(reward_score(hps, task, img) + reward_score(pick, task, img) ==
        doctest::Approx(2.0 * fidelity(task, img)).epsilon(1e-12));

  const Image proto = prototype_image(dims, 1);
  Image bright = proto;
  bright.data = (bright.data.array() + 0.15).min(1.0);
  CHECK(reward_score(hps, task, bright) > reward_score(hps, task, proto));

  const double expect = fidelity(task, img) + 0.3 * brightness(img) + 0.3 * vividness(img) + 0.6 * complexity(img);
  CHECK(reward_score(hps, task, img) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(reward_score(neg_brightness(), task, img) == doctest::Approx(-brightness(img)));
}

TEST_CASE("registry") {
  auto reg = RewardRegistry::defaults();
  for (const char* n : {"hps_like", "pick_like", "fidelity", "neg_brightness", "brightness", "vividness", "complexity"})
    CHECK(reg.contains(n));
  CHECK_FALSE(reg.contains("random"));
  try {
    reg.get("nope");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.category() == "unknown-reward");
  }
  CHECK_THROWS_AS(reg.add({"bad", std::nan(""), 0, 0, true}), Error);
  CHECK_THROWS_AS(reg.add({"ensemble", 0, 0, 0, true}), Error);
  const auto& ens = default_ensemble();
  CHECK(ens == std::vector<std::string>{"hps_like", "pick_like", "fidelity", "neg_brightness"});
}

TEST_CASE("random reward is deterministic, distinct and uniform") {
  CHECK(random_reward(3, 4, 5) == random_reward(3, 4, 5));
  std::set<double> seen;
  for (std::uint32_t i = 0; i < 1000; ++i) seen.insert(random_reward(7, i, 11));
  CHECK(seen.size() == 1000);

  const int bins = 20, n = 100000;
  std::vector<int> hist(bins, 0);
  for (int i = 0; i < n; ++i) {
    const double u = random_reward(static_cast<std::uint32_t>(i / 16), static_cast<std::uint32_t>(i % 16), 42);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    ++hist[static_cast<std::size_t>(u * bins)];
  }
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / bins;
  for (int h : hist) chi2 += (h - expected) * (h - expected) / expected;
  // 99.9th percentile of chi-square with 19 degrees of freedom
  CHECK(chi2 < 43.82);
}

TEST_CASE("fractional rank") {
  CHECK(fractional_rank({3, 1, 2}) == std::vector<double>{1, 3, 2});
  CHECK(fractional_rank({2, 2, 1}) == std::vector<double>{1.5, 1.5, 3});
  CHECK(fractional_rank({5, 5, 5, 5}) == std::vector<double>{2.5, 2.5, 2.5, 2.5});
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    std::vector<double> s(n);
    // coarse values so ties occur often
    for (auto& v : s) v = static_cast<double>(rng.below(4));
    const auto r = fractional_rank(s);
    CHECK(r == counting_rank(s));
    double total = 0.0;
    for (double v : r) total += v;
    CHECK(total == doctest::Approx(n * (n + 1) / 2.0));
  }
  CHECK_THROWS_AS(fractional_rank({1.0, std::nan("")}), Error);
  CHECK_THROWS_AS(fractional_rank({}), Error);
}

TEST_CASE("ensemble rank worked example and brute force") {
  ScoreMatrix m{0, {"a", "b"}, {{3, 1, 2}, {2, 1, 3}}};
  const auto c = ensemble_rank(m);
  CHECK(c.mean_ranks == std::vector<double>{1.5, 3.0, 1.5});
  CHECK(c.preferred == 0);
  CHECK(c.dispreferred == 1);
  CHECK_FALSE(c.no_signal);

  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(6), r = 1 + rng.below(4);
    ScoreMatrix sm;
    sm.scores.assign(r, std::vector<double>(n));
    for (auto& row : sm.scores)
      for (auto& v : row) v = static_cast<double>(rng.below(5));
    std::vector<double> mean(n, 0.0);
    for (const auto& row : sm.scores) {
      const auto ranks = counting_rank(row);
      for (std::size_t i = 0; i < n; ++i) mean[i] += ranks[i];
    }
    for (double& v : mean) v /= static_cast<double>(r);
    const auto got = ensemble_rank(sm);
    std::size_t best = 0, worst = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (mean[i] < mean[best]) best = i;
      if (mean[i] > mean[worst]) worst = i;
    }
    CHECK(got.preferred == best);
    CHECK(got.dispreferred == worst);

    // strictly increasing transform of one reward leaves the choice alone
    ScoreMatrix t = sm;
    for (auto& v : t.scores[0]) v = std::exp(3.0 * v) - 7.0;
    const auto again = ensemble_rank(t);
    CHECK(again.preferred == got.preferred);
    CHECK(again.dispreferred == got.dispreferred);

    if (r == 1) {
      const auto& row = sm.scores[0];
      CHECK(row[got.preferred] == *std::max_element(row.begin(), row.end()));
      CHECK(row[got.dispreferred] == *std::min_element(row.begin(), row.end()));
    }
  }
}

TEST_CASE("fully tied candidates are flagged") {
  ScoreMatrix m{0, {"a", "b"}, {{1, 1, 1}, {0.5, 0.5, 0.5}}};
  CHECK(ensemble_rank(m).no_signal);
  CHECK_THROWS_AS(ensemble_rank(ScoreMatrix{0, {"a"}, {{1.0}}}), Error);
  CHECK_THROWS_AS(ensemble_rank(ScoreMatrix{0, {"a", "b"}, {{1.0, 2.0}, {1.0}}}), Error);
}
