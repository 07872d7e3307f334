#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "apx/apx.hpp"
#include "common/error.hpp"
#include "support/naive_apx.hpp"

using namespace gbias;
using namespace gbias::apx;
using gbias::testing::close_rel;
using gbias::testing::naive_bias_scores;

namespace {

struct Random {
  std::vector<NameScore> scores;
  std::size_t T, G, D;
  std::vector<std::string> groups, descriptors;
};

Random random_scores(std::uint64_t seed, bool with_failures) {
  std::mt19937_64 rng(seed);
  Random r;
  r.T = 1 + rng() % 3;
  r.G = 2 + rng() % 6;
  r.D = 2 + rng() % 8;
  std::size_t names = 1 + rng() % 5;
  std::lognormal_distribution<double> ppl(3.0, 0.7);
  for (std::size_t t = 0; t < r.T; ++t)
    for (std::size_t i = 0; i < r.G; ++i)
      for (std::size_t j = 0; j < r.D; ++j)
        for (std::size_t n = 0; n < names; ++n) {
          std::optional<double> v = ppl(rng);
          if (with_failures && rng() % 40 == 0) v.reset();
          r.scores.push_back({i, j, t, v});
        }
  for (std::size_t i = 0; i < r.G; ++i) r.groups.push_back(fmt::format("g{}", i));
  for (std::size_t j = 0; j < r.D; ++j) r.descriptors.push_back(fmt::format("d{}", j));
  return r;
}

PplTable table_of(const std::vector<std::vector<double>>& rows) {
  PplTable t(1, rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.set(0, i, j, rows[i][j]);
  return t;
}

}  // namespace

TEST_CASE("hand-computed 2x2 table") {
  // rows: g0 = {10, 30}, g1 = {20, 40}; group means 20, 30; total 25
  auto t = table_of({{10, 30}, {20, 40}});
  CHECK(group_mean(t, 0, 0) == 20);
  CHECK(group_mean(t, 0, 1) == 30);
  CHECK(total_mean(t, 0) == 25);
  auto a = apx_adjust(t, 0, Direction::AsPrinted);
  CHECK(a[0] == doctest::Approx(10 * 20.0 / 25));
  CHECK(a[3] == doctest::Approx(40 * 30.0 / 25));
  auto inv = apx_adjust(t, 0, Direction::Inverse);
  CHECK(inv[0] == doctest::Approx(10 * 25.0 / 20));
  CHECK(inv[3] == doctest::Approx(40 * 25.0 / 30));
  // inverse: 12.5, 37.5, 16.667, 33.333; grand mean 25
  auto b = bias_scores(t, {"g0", "g1"}, {"d0", "d1"}, Metric::Apx, Direction::Inverse);
  CHECK(b.score(0, 0) == doctest::Approx(0.5));
  CHECK(b.score(1, 1) == doctest::Approx(4.0 / 3.0));
  auto p = bias_scores(t, {"g0", "g1"}, {"d0", "d1"}, Metric::Ppl);
  CHECK(p.score(0, 0) == doctest::Approx(0.4));
}

TEST_CASE("bias scores agree with the naive re-implementation") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto r = random_scores(seed, seed % 2 == 1);
    for (auto dir : {Direction::AsPrinted, Direction::Inverse}) {
      auto oracle = naive_bias_scores(r.scores, r.T, r.G, r.D, dir == Direction::Inverse);
      auto table = aggregate_cells(r.scores, r.T, r.G, r.D);
      for (std::size_t t = 0; t < r.T; ++t) {
        CHECK(close_rel(total_mean(table, t), oracle.total_mean[t], 1e-9));
        auto adj = apx_adjust(table, t, dir);
        for (std::size_t i = 0; i < r.G; ++i) {
          if (!std::isnan(oracle.group_mean[t][i])) CHECK(close_rel(group_mean(table, t, i), oracle.group_mean[t][i], 1e-9));
          for (std::size_t j = 0; j < r.D; ++j) {
            CHECK(close_rel(table.get(t, i, j), oracle.cell_ppl[t][i][j], 1e-9));
            CHECK(close_rel(adj[i * r.D + j], oracle.apx[t][i][j], 1e-9));
          }
        }
      }
      auto b = bias_scores(r.scores, r.groups, r.descriptors, r.T, Metric::Apx, dir);
      for (std::size_t i = 0; i < r.G; ++i)
        for (std::size_t j = 0; j < r.D; ++j) CHECK(close_rel(b.score(i, j), oracle.score[i][j], 1e-9));
    }
  }
}

TEST_CASE("property: inverse direction cancels per-group multiplicative offsets") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = random_scores(100 + trial, false);
    std::vector<double> factor(r.G);
    for (auto& f : factor) f = 0.25 + 4.0 * (rng() % 1000) / 1000.0;
    auto scaled = r.scores;
    for (auto& s : scaled) *s.ppl *= factor[s.group];
    auto a = bias_scores(r.scores, r.groups, r.descriptors, r.T, Metric::Apx, Direction::Inverse);
    auto b = bias_scores(scaled, r.groups, r.descriptors, r.T, Metric::Apx, Direction::Inverse);
    for (std::size_t k = 0; k < a.scores.size(); ++k) CHECK(close_rel(a.scores[k], b.scores[k], 1e-9));
  }
}

TEST_CASE("property: a global scale factor never changes bias scores") {
  for (int trial = 0; trial < 20; ++trial) {
    auto r = random_scores(200 + trial, trial % 3 == 0);
    auto scaled = r.scores;
    for (auto& s : scaled)
      if (s.ppl) *s.ppl *= 7.5;
    for (auto metric : {Metric::Ppl, Metric::Apx})
      for (auto dir : {Direction::AsPrinted, Direction::Inverse}) {
        auto a = bias_scores(r.scores, r.groups, r.descriptors, r.T, metric, dir);
        auto b = bias_scores(scaled, r.groups, r.descriptors, r.T, metric, dir);
        for (std::size_t k = 0; k < a.scores.size(); ++k) CHECK(close_rel(a.scores[k], b.scores[k], 1e-9));
      }
  }
}

TEST_CASE("property: with one template and no invalid cells scores average to one") {
  for (int trial = 0; trial < 20; ++trial) {
    auto r = random_scores(300 + trial, false);
    std::erase_if(r.scores, [](const NameScore& s) { return s.template_index != 0; });
    auto b = bias_scores(r.scores, r.groups, r.descriptors, 1, Metric::Apx, Direction::AsPrinted);
    double sum = 0;
    for (double v : b.scores) sum += v;
    CHECK(sum / static_cast<double>(b.scores.size()) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cells with too many failures are invalid and stay NaN") {
  std::vector<NameScore> s = {{0, 0, 0, 10.0}, {0, 0, 0, std::nullopt}, {0, 1, 0, 20.0}, {1, 0, 0, 30.0},
                              {1, 1, 0, 40.0}};
  auto t = aggregate_cells(s, 1, 2, 2);
  CHECK_FALSE(t.valid(0, 0, 0));
  CHECK(t.valid(0, 0, 1));
  auto b = bias_scores(t, {"g0", "g1"}, {"d0", "d1"});
  CHECK_FALSE(b.valid(0, 0));
  CHECK(b.valid(1, 1));

  // one failure among 1000 names is exactly the threshold share: invalid
  std::vector<NameScore> many;
  for (int i = 0; i < 999; ++i) many.push_back({0, 0, 0, 5.0});
  many.push_back({0, 0, 0, std::nullopt});
  CHECK_FALSE(aggregate_cells(many, 1, 1, 1).valid(0, 0, 0));
  // one among 1001 is below it: the failed name is dropped
  many.push_back({0, 0, 0, 5.0});
  auto ok = aggregate_cells(many, 1, 1, 1);
  CHECK(ok.valid(0, 0, 0));
  CHECK(ok.get(0, 0, 0) == 5.0);
}

TEST_CASE("bias tables round trip through json") {
  auto r = random_scores(9, true);
  auto b = bias_scores(r.scores, r.groups, r.descriptors, r.T, Metric::Apx, Direction::Inverse);
  auto back = bias_table_from_json(nlohmann::json::parse(to_json(b).dump()));
  CHECK(back.groups == b.groups);
  CHECK(back.direction == Direction::Inverse);
  CHECK(back.templates == b.templates);
  for (std::size_t k = 0; k < b.scores.size(); ++k) CHECK(close_rel(back.scores[k], b.scores[k], 0.0));
  CHECK(to_csv(b).rfind("group,descriptor,score\n", 0) == 0);
}

TEST_CASE("label count mismatch is an argument error") {
  auto t = table_of({{1, 2}});
  CHECK_THROWS_AS(bias_scores(t, {"g0", "g1"}, {"d0", "d1"}), Error);
  CHECK(parse_direction("inverse") == Direction::Inverse);
  CHECK_FALSE(parse_direction("backwards"));
}
