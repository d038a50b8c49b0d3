#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "pod/contribution.hpp"

using namespace pod;

namespace {

DataSummary single_normal(double mean, double var, std::uint64_t count, std::size_t q = 1) {
  DataSummary s;
  s.count = count;
  GaussianFit fit;
  fit.components = {{1.0, mean, var}};
  fit.count = count;
  s.per_feature.assign(q, fit);
  return s;
}

Dataset ids(std::vector<std::uint64_t> id_list) {
  Dataset d;
  for (auto id : id_list) d.rows.push_back({{0.0}, 0.0, id});
  return d;
}

}  // namespace

TEST_SUITE("contribution") {
  TEST_CASE("single component fit is the population moments") {
    const std::vector<double> v{0.0, 2.0};
    const auto r = fit_gaussian(v, FitOptions{1});
    REQUIRE(r.fit.components.size() == 1);
    CHECK(r.fit.components[0].mean == 1.0);
    CHECK(r.fit.components[0].variance == 1.0);
    CHECK(r.fit.count == 2);
    CHECK_THROWS(fit_gaussian(std::vector<double>{1.0}, FitOptions{1}));
  }

  TEST_CASE("large sample recovers N(5, 4)") {
    Rng rng(42);
    std::vector<double> v(10000);
    for (auto& x : v) x = rng.normal(5.0, 2.0);
    const auto r = fit_gaussian(v, FitOptions{1});
    CHECK(std::abs(r.fit.components[0].mean - 5.0) <= 0.1);
    CHECK(std::abs(r.fit.components[0].variance - 4.0) <= 0.2);
  }

  TEST_CASE("mixture fit is deterministic and valid") {
    Rng rng(43);
    std::vector<double> v;
    for (int i = 0; i < 600; ++i) v.push_back(i % 2 ? rng.normal(-4, 1) : rng.normal(4, 1));
    const auto a = fit_gaussian(v, FitOptions{}, 3);
    const auto b = fit_gaussian(v, FitOptions{}, 3);
    CHECK(a.fit == b.fit);
    CHECK(a.fit.valid());
    CHECK(std::abs(a.fit.mean() - std::accumulate(v.begin(), v.end(), 0.0) / v.size()) < 1e-6);
  }

  TEST_CASE("constant feature is floored") {
    const std::vector<double> v(10, 3.0);
    const auto r = fit_gaussian(v, FitOptions{});
    CHECK(r.variance_floored);
    CHECK(r.fit.components.size() == 1);
    CHECK(r.fit.components[0].variance == 1e-9);
  }

  TEST_CASE("slice range envelope") {
    std::vector<GaussianFit> one{single_normal(0, 1, 1).per_feature[0]};
    auto s = slice_range(one, 6, 3.0);
    CHECK(s.min == doctest::Approx(-3.0));
    CHECK(s.max == doctest::Approx(3.0));
    CHECK(s.width == doctest::Approx(1.0));
    std::vector<GaussianFit> two{single_normal(0, 1, 1).per_feature[0],
                                 single_normal(10, 1, 1).per_feature[0]};
    s = slice_range(two, 4, 3.0);
    CHECK(s.min == doctest::Approx(-3.0));
    CHECK(s.max == doctest::Approx(13.0));
    s = slice_range(one, 1, 3.0);
    CHECK(s.slices == 1);
    CHECK(s.slice_of(2.9) == 0);
    CHECK_THROWS(slice_range(std::span<const GaussianFit>{}, 4, 3.0));
  }

  TEST_CASE("random samples bin into slices") {
    const auto fit = single_normal(0, 1, 1).per_feature[0];
    std::vector<GaussianFit> fits{fit};
    const auto slicing = slice_range(fits, 2, 3.0);
    Rng rng(5);
    const auto h = random_samples(fit, 3.0, 4000, slicing, rng);
    CHECK(h.total == 4000);
    CHECK(h.counts[0] + h.counts[1] == 4000);
    const double diff = std::abs(double(h.counts[0]) - double(h.counts[1])) / 4000.0;
    CHECK(diff <= 3.0 / std::sqrt(4000.0));

    // A narrow component inside one slice of a wide range.
    std::vector<GaussianFit> wide{fit, single_normal(100, 1, 1).per_feature[0]};
    const auto ws = slice_range(wide, 16, 3.0);
    Rng rng2(6);
    const auto h2 = random_samples(fit, 3.0, 500, ws, rng2);
    int nonzero = 0;
    for (auto c : h2.counts) nonzero += c > 0;
    CHECK(nonzero == 1);
  }

  TEST_CASE("feature contribution rule") {
    SliceHistogram a{{3, 1}, 4};
    std::vector<SliceHistogram> one{a};
    CHECK(feature_contribution(one) == std::vector<double>{1.0});
    std::vector<SliceHistogram> same{a, a};
    CHECK(feature_contribution(same) == std::vector<double>{0.5, 0.5});
    std::vector<SliceHistogram> disjoint{{{100, 0}, 100}, {{0, 300}, 300}};
    const auto r = feature_contribution(disjoint);
    CHECK(r[0] == doctest::Approx(0.25));
    CHECK(r[1] == doctest::Approx(0.75));
    std::vector<SliceHistogram> empty{{{0, 0}, 0}};
    CHECK_THROWS(feature_contribution(empty));
  }

  TEST_CASE("identical users share equally") {
    const std::size_t n = 8;
    std::vector<DataSummary> s(n, single_normal(0, 1, 1000, 3));
    std::vector<std::uint64_t> counts(n, 1000);
    const auto c = compute_contribution(s, counts, ContributionParams{}, 17);
    CHECK(c.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (double r : c.shares) CHECK(std::abs(r - 1.0 / n) <= 0.02);
  }

  TEST_CASE("half overlapping distributions stay near one half") {
    std::vector<DataSummary> s{single_normal(0, 1, 1000), single_normal(2, 1, 1000)};
    std::vector<std::uint64_t> counts{1000, 1000};
    const auto c = compute_contribution(s, counts, ContributionParams{}, 3);
    for (double r : c.shares) {
      CHECK(r >= 0.45);
      CHECK(r <= 0.55);
    }
  }

  TEST_CASE("zero count user gets zero and mismatched q throws") {
    std::vector<DataSummary> s{single_normal(0, 1, 100), single_normal(0, 1, 100),
                               DataSummary{}};
    std::vector<std::uint64_t> counts{100, 100, 0};
    const auto c = compute_contribution(s, counts, ContributionParams{}, 1);
    CHECK(c.shares[2] == 0.0);
    CHECK(c.sum() == doctest::Approx(1.0));
    std::vector<DataSummary> bad{single_normal(0, 1, 100, 1), single_normal(0, 1, 100, 2)};
    std::vector<std::uint64_t> bc{100, 100};
    CHECK_THROWS(compute_contribution(bad, bc, ContributionParams{}, 1));
  }

  TEST_CASE("shares sum to one and are nonnegative under fuzzing") {
    Rng rng(77);
    for (int trial = 0; trial < 60; ++trial) {
      const auto n = 1 + rng.below(6);
      std::vector<DataSummary> s;
      std::vector<std::uint64_t> counts;
      for (std::uint64_t i = 0; i < n; ++i) {
        auto sum = podtest::random_summary(rng, 2);
        sum.count = 1 + rng.below(300);
        counts.push_back(sum.count);
        s.push_back(sum);
      }
      const auto c = compute_contribution(s, counts, ContributionParams{}, trial);
      CHECK(std::abs(c.sum() - 1.0) <= 1e-9);
      for (double r : c.shares) CHECK(r >= 0.0);
      const auto e = expected_contribution(s, counts, ContributionParams{});
      CHECK(std::abs(e.sum() - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("permuting users permutes the analytic shares") {
    std::vector<DataSummary> s{single_normal(0, 1, 100), single_normal(3, 2, 300),
                               single_normal(-2, 0.5, 50)};
    std::vector<std::uint64_t> counts{100, 300, 50};
    const auto a = expected_contribution(s, counts, ContributionParams{});
    std::vector<DataSummary> p{s[2], s[0], s[1]};
    std::vector<std::uint64_t> pc{50, 100, 300};
    const auto b = expected_contribution(p, pc, ContributionParams{});
    CHECK(b.shares[0] == doctest::Approx(a.shares[2]));
    CHECK(b.shares[1] == doctest::Approx(a.shares[0]));
    CHECK(b.shares[2] == doctest::Approx(a.shares[1]));
  }

  TEST_CASE("share grows with count on disjoint supports") {
    double prev = 0.0;
    for (std::uint64_t c : {50, 100, 200, 400}) {
      std::vector<DataSummary> s{single_normal(0, 1, c), single_normal(50, 1, 100)};
      std::vector<std::uint64_t> counts{c, 100};
      const auto r = expected_contribution(s, counts, ContributionParams{}).shares[0];
      CHECK(r > prev);
      prev = r;
    }
  }

  TEST_CASE("overlap sweep moves continuously to one half") {
    for (double shift : {10.0, 7.5, 5.0, 2.5, 0.0}) {
      std::vector<DataSummary> s{single_normal(0, 1, 500), single_normal(shift, 1, 500)};
      std::vector<std::uint64_t> counts{500, 500};
      const auto r = compute_contribution(s, counts, ContributionParams{}, 9).shares;
      CHECK(r[0] >= 0.4);
      CHECK(r[0] <= 0.6);
    }
  }

  TEST_CASE("uneven rate") {
    CHECK(uneven_rate(std::vector<std::uint64_t>{5, 5, 5}) == 0.0);
    CHECK(uneven_rate(std::vector<std::uint64_t>{100, 200, 300, 400}) ==
          doctest::Approx(55.9017).epsilon(1e-6));
    CHECK(uneven_rate(std::vector<std::uint64_t>{300, 600, 900, 1200}) ==
          doctest::Approx(3 * 55.90169943749474));
  }

  TEST_CASE("overlap rate") {
    std::vector<Dataset> disjoint{ids({1, 2}), ids({3, 4})};
    CHECK(overlap_rate(disjoint) == 0.0);
    std::vector<std::uint64_t> a;
    std::vector<std::uint64_t> b;
    for (std::uint64_t i = 0; i < 100; ++i) a.push_back(i);
    for (std::uint64_t i = 80; i < 180; ++i) b.push_back(i);
    std::vector<Dataset> twenty{ids(a), ids(b)};
    CHECK(overlap_rate(twenty) == doctest::Approx(0.1));
    std::vector<Dataset> same{ids(a), ids(a), ids(a)};
    CHECK(overlap_rate(same) == doctest::Approx(100.0 / 300.0));
    CHECK(redundancy_rate(same) == doctest::Approx(2.0 / 3.0));
    std::vector<Dataset> none{Dataset{}};
    CHECK_THROWS(overlap_rate(none));
  }
}
