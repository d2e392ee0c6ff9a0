#include <algorithm>
#include <random>

#include "doctest.h"
#include "lcgan/metrics/metrics.hpp"

using namespace lcgan;
using namespace lcgan::metrics;
using img::MaskImage;

namespace {

MaskImage random_mask(int w, int h, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(w) * h);
  for (auto& x : v) x = coin(rng) ? 1 : 0;
  return MaskImage(w, h, v);
}

}  // namespace

TEST_CASE("score examples") {
  const MaskImage a(4, 1, {1, 1, 0, 0});
  CHECK(score(a, a).dsc == 1.0);
  CHECK(score(a, a).iou == 1.0);

  const MaskImage b(4, 1, {0, 0, 1, 1});
  CHECK(score(a, b).dsc == 0.0);
  CHECK(score(a, b).iou == 0.0);

  const MaskImage c(4, 1, {0, 1, 1, 0});
  CHECK(score(a, c).dsc == doctest::Approx(0.5));
  CHECK(score(a, c).iou == doctest::Approx(1.0 / 3.0));

  const MaskImage empty(4, 1, {0, 0, 0, 0});
  CHECK(score(empty, empty).dsc == 1.0);
  CHECK(score(empty, empty).iou == 1.0);
  CHECK(score(empty, a).dsc == 0.0);

  CHECK_THROWS_AS(score(a, MaskImage(2, 2, {0, 0, 0, 0})), std::invalid_argument);
}

TEST_CASE("score properties on random masks") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_mask(9, 7, 0.3, rng);
    const auto t = random_mask(9, 7, 0.4, rng);
    const auto s = score(p, t);
    CHECK(s.dsc == doctest::Approx(2 * s.iou / (1 + s.iou)).epsilon(1e-12));
    CHECK(s.dsc >= s.iou);
    CHECK(s.dsc >= 0.0);
    CHECK(s.dsc <= 1.0);
    // Same permutation applied to both masks leaves the score alone.
    std::vector<std::size_t> perm(63);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::uint8_t> pp(63), tt(63);
    for (std::size_t i = 0; i < 63; ++i) {
      pp[i] = p.values()[perm[i]];
      tt[i] = t.values()[perm[i]];
    }
    const auto s2 = score(MaskImage(7, 9, pp), MaskImage(7, 9, tt));
    CHECK(s2.dsc == s.dsc);
    CHECK(s2.iou == s.iou);
  }
}

TEST_CASE("mean scores") {
  CHECK(mean_scores({{0.7, 0.6}}).dsc == 0.7);
  const auto m = mean_scores({{1.0, 1.0}, {0.0, 0.0}});
  CHECK(m.dsc == 0.5);
  CHECK(m.iou == 0.5);
  CHECK_THROWS_AS(mean_scores({}), std::invalid_argument);

  std::mt19937_64 rng(11);
  std::vector<SegScore> all;
  double sd = 0, si = 0;
  for (int i = 0; i < 100; ++i) {
    const auto s = score(random_mask(6, 6, 0.5, rng), random_mask(6, 6, 0.5, rng));
    all.push_back(s);
    sd += s.dsc;
    si += s.iou;
  }
  CHECK(mean_scores(all).dsc == doctest::Approx(sd / 100).epsilon(1e-12));
  CHECK(mean_scores(all).iou == doctest::Approx(si / 100).epsilon(1e-12));
}

TEST_CASE("report csv") {
  const std::vector<ScoredImage> rows{{"0001", {0.8, 2.0 / 3.0}}, {"0002", {0.5, 1.0 / 3.0}}};
  CHECK(report_csv(rows) == "id,dsc,iou\n0001,80.0,66.7\n0002,50.0,33.3\nmean,65.0,50.0\n");
  CHECK(format_percent_pair({0.7994, 0.7306}) == "79.9/73.1");
}
