#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "apx/apx.hpp"
#include "common/error.hpp"
#include "corpus/corpus.hpp"
#include "evalstats/evalstats.hpp"

using namespace gbias;
using namespace gbias::evalstats;

namespace {

CandidateTable table(std::vector<std::string> cands, std::vector<std::string> descs, std::vector<double> scores) {
  return {std::move(cands), std::move(descs), std::move(scores)};
}

apx::BiasScoreTable bias_table(std::size_t G, std::size_t D, std::vector<double> scores) {
  apx::BiasScoreTable t;
  for (std::size_t i = 0; i < G; ++i) t.groups.push_back(fmt::format("G{} Female", i));
  for (std::size_t j = 0; j < D; ++j) t.descriptors.push_back(fmt::format("d{}", j));
  t.scores = std::move(scores);
  return t;
}

}  // namespace

TEST_CASE("rank counts strictly better candidates, ties go to the lower index") {
  // columns: d0 scores per candidate a,b,c
  auto t = table({"a", "b", "c"}, {"d0"}, {0.9, 0.5, 0.5});
  CHECK(rank_of(t, 0, 1) == 1);
  CHECK(rank_of(t, 0, 2) == 2);
  CHECK(rank_of(t, 0, 0) == 3);
  auto nan = table({"a", "b", "c"}, {"d0"}, {NAN, 2.0, 1.0});
  CHECK(rank_of(nan, 0, 0) == 3);
}

TEST_CASE("accuracy and MRR on a hand table") {
  // d0: argmin b; d1: argmin a
  auto t = table({"a", "b"}, {"d0", "d1"}, {0.9, 0.1, 0.5, 0.7});
  std::vector<GoldLabel> gold = {{"d0", "b"}, {"d1", "b"}};
  CHECK(argmin_accuracy(t, gold) == 0.5);
  CHECK(mean_reciprocal_rank(t, gold) == 0.75);
  std::vector<GoldLabel> unknown = {{"d0", "zz"}};
  CHECK_THROWS_AS(argmin_accuracy(t, unknown), Error);
}

TEST_CASE("random scores give chance accuracy 1/C and MRR H_C/C") {
  // C = 4: accuracy 1/4, MRR (1 + 1/2 + 1/3 + 1/4)/4 = 0.520833...
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  const std::size_t C = 4, D = 20000;
  std::vector<std::string> cands = {"a", "b", "c", "d"}, descs;
  std::vector<double> scores(C * D);
  std::vector<GoldLabel> gold;
  for (std::size_t j = 0; j < D; ++j) descs.push_back(fmt::format("d{}", j));
  for (auto& s : scores) s = nd(rng);
  for (std::size_t j = 0; j < D; ++j) gold.push_back({descs[j], cands[rng() % C]});
  auto t = table(cands, descs, scores);
  CHECK(argmin_accuracy(t, gold) == doctest::Approx(0.25).epsilon(0.04));
  CHECK(mean_reciprocal_rank(t, gold) == doctest::Approx(25.0 / 48.0).epsilon(0.02));
}

TEST_CASE("category level averages member groups") {
  apx::BiasScoreTable t;
  t.groups = {"Chinese Female", "Chinese Male", "Arab Female", "Thai Male"};
  t.descriptors = {"d0"};
  t.scores = {1.0, 3.0, 5.0, 0.1};
  auto map = corpus::parse_category_map("ethnicity,category\nChinese,Asian\nArab,Middle Eastern\n");
  auto c = category_level(t, map);
  CHECK(c.candidates == std::vector<std::string>{"Asian", "Middle Eastern"});
  CHECK(c.score(0, 0) == 2.0);
  CHECK(c.score(1, 0) == 5.0);
}

TEST_CASE("critical values match the normal quantiles") {
  CHECK(critical_z(0.01) == doctest::Approx(2.3263478740).epsilon(1e-9));
  CHECK(critical_z(0.05) == doctest::Approx(1.6448536270).epsilon(1e-9));
  CHECK_THROWS_AS(critical_z(0.0), Error);
  CHECK_THROWS_AS(critical_z(1.0), Error);
}

TEST_CASE("surfacing flags the planted low outlier and nothing else") {
  // 40 groups, 30 descriptors; three descriptors have one outlier each, few
  // enough that the permutation null is not dominated by them
  const std::size_t G = 40, D = 30;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(1.0, 0.01);
  std::vector<double> s(G * D);
  for (auto& v : s) v = nd(rng);
  s[5 * D + 0] = 0.5;
  s[17 * D + 1] = 0.5;
  s[39 * D + 2] = 0.5;
  for (std::size_t j = 3; j < D; ++j)
    for (std::size_t i = 0; i < G; ++i) s[i * D + j] = 1.0 + 0.01 * static_cast<double>((i * 7 + j) % 5);
  auto t = bias_table(G, D, s);
  auto r = surface_stereotypes(t);
  REQUIRE(r.items.size() == 3);
  CHECK(r.items[0].group == "G5 Female");
  CHECK(r.items[1].group == "G17 Female");
  CHECK(r.items[2].group == "G39 Female");
  CHECK(r.threshold == doctest::Approx(-critical_z(0.01)));
  for (const auto& it : r.items) CHECK(it.zscore <= r.threshold);

  SurfaceOptions perm;
  perm.method = SurfaceMethod::Permutation;
  perm.shuffles = 200;
  perm.seed = 3;
  auto p = surface_stereotypes(t, perm);
  std::set<std::string> groups;
  for (const auto& it : p.items) groups.insert(it.group + "/" + it.descriptor);
  CHECK(groups.contains("G5 Female/d0"));
  CHECK(groups.contains("G17 Female/d1"));
  CHECK(groups.contains("G39 Female/d2"));
  auto p2 = surface_stereotypes(t, perm);
  CHECK(p2.threshold == p.threshold);
}

TEST_CASE("z-scores use the sample standard deviation") {
  // column {1, 2, 3}: mean 2, sample sd 1, z = -1, 0, 1
  auto t = bias_table(3, 1, {1.0, 2.0, 3.0});
  SurfaceOptions opt;
  opt.alpha = 0.2;  // threshold -0.8416
  auto r = surface_stereotypes(t, opt);
  REQUIRE(r.items.size() == 1);
  CHECK(r.items[0].zscore == doctest::Approx(-1.0));
  CHECK(r.sigma == "sample");
}

TEST_CASE("constant columns and mostly-invalid columns surface nothing") {
  auto flat = bias_table(4, 1, {1.0, 1.0, 1.0, 1.0});
  CHECK(surface_stereotypes(flat).items.empty());
  auto holes = bias_table(4, 1, {NAN, NAN, 0.1, 1.0});
  auto r = surface_stereotypes(holes);
  CHECK(r.items.empty());
  CHECK(r.excluded == std::vector<std::string>{"d0"});
}

TEST_CASE("null tables surface about alpha of the cells") {
  const std::size_t G = 40, D = 500;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(1.0, 0.05);
  std::vector<double> s(G * D);
  for (auto& v : s) v = nd(rng);
  auto r = surface_stereotypes(bias_table(G, D, s));
  double share = static_cast<double>(r.items.size()) / static_cast<double>(G * D);
  CHECK(share == doctest::Approx(0.01).epsilon(0.35));
}

TEST_CASE("surfaced CSVs") {
  SurfaceResult r;
  r.items = {{"zeal", "Arab Male", -3.0, 0.5}, {"Apt", "Arab Male", -2.5, 0.6}, {"bold", "Thai Female", -2.4, 0.7}};
  CHECK(surfaced_csv(r) == "descriptor,group,score,zscore\nzeal,Arab Male,0.5,-3\nApt,Arab Male,0.6,-2.5\nbold,Thai Female,0.7,-2.4\n");
  CHECK(surfaced_by_group_csv(r) == "group,descriptors\nArab Male,Apt; zeal\nThai Female,bold\n");
}
