#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/text.hpp"
#include "profileanalysis/profileanalysis.hpp"
#include "support/synthetic.hpp"

using namespace gbias;
using namespace gbias::profileanalysis;

namespace {

CharacterProfile profile(std::string religion, std::vector<std::string> hobbies, int age, double height) {
  CharacterProfile p;
  p.name = "x";
  p.religion = std::move(religion);
  p.hobbies = std::move(hobbies);
  p.age = age;
  p.height_ft = height;
  return p;
}

}  // namespace

TEST_CASE("feature names and encodings") {
  for (auto g : kAllFeatureGroups) CHECK(parse_feature_group(to_string(g)) == g);
  CHECK(to_string(FeatureGroup::SocioeconomicStatus) == "socioeconomic_status");
  CHECK(encoding_of(FeatureGroup::Hobbies) == Encoding::RelativeFrequency);
  CHECK(encoding_of(FeatureGroup::PersonalityTraits) == Encoding::RelativeFrequency);
  CHECK(encoding_of(FeatureGroup::Religion) == Encoding::OneHot);
  CHECK(kAllFeatureGroups.size() == 13);
}

TEST_CASE("entries bucket age by decade and height by quarter foot") {
  auto p = profile("Islam", {"Chess", "chess", "hiking"}, 47, 5.3);
  CHECK(feature_entries(p, FeatureGroup::Age) == std::vector<std::string>{"[40,50)"});
  CHECK(feature_entries(p, FeatureGroup::Height) == std::vector<std::string>{"[5.25,5.5)"});
  CHECK(feature_entries(p, FeatureGroup::Religion) == std::vector<std::string>{"islam"});
  CHECK(feature_entries(p, FeatureGroup::Hobbies).size() == 3);
  CHECK(feature_entries(p, FeatureGroup::Occupation).empty());
}

TEST_CASE("feature space: vocabulary from training data, OOV slot, relative frequencies") {
  std::vector<CharacterProfile> train = {profile("islam", {"chess", "chess", "hiking"}, 30, 5.0),
                                         profile("buddhism", {"poetry", "chess", "hiking"}, 40, 6.0)};
  std::vector<FeatureGroup> groups = {FeatureGroup::Religion, FeatureGroup::Hobbies};
  auto space = FeatureSpace::build(train, groups);
  CHECK(space.dimension() == 3 + 4);  // {buddhism, islam, OOV} + {chess, hiking, poetry, OOV}
  auto x = space.encode(train[0]);
  CHECK(x.l1() == doctest::Approx(2.0));  // one-hot 1 + frequencies summing to 1
  auto chess = space.index_of(FeatureGroup::Hobbies, "chess");
  REQUIRE(chess);
  for (auto [i, v] : x.entries)
    if (i == *chess) CHECK(v == doctest::Approx(2.0 / 3.0));

  auto unseen = profile("shinto", {"chess", "chess", "chess"}, 20, 5.0);
  auto y = space.encode(unseen);
  auto oov = space.blocks()[0].offset + space.blocks()[0].vocabulary.size();
  bool has_oov = false;
  for (auto [i, v] : y.entries) has_oov |= i == oov && v == 1.0;
  CHECK(has_oov);

  std::vector<std::string> diag;
  CharacterProfile empty;
  auto z = space.encode(empty, &diag);
  CHECK(z.entries.empty());
  CHECK(diag.size() == 2);

  std::vector<FeatureGroup> dup = {FeatureGroup::Religion, FeatureGroup::Religion};
  CHECK_THROWS_AS(FeatureSpace::build(train, dup), Error);
}

TEST_CASE("property: stratified split partitions, hits the target size and keeps every stratum on both sides") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t k = 2 + rng() % 10;
    std::vector<std::string> strata;
    std::map<std::string, std::size_t> sizes;
    for (std::size_t s = 0; s < k; ++s) {
      std::size_t n = 2 + rng() % 30;
      for (std::size_t i = 0; i < n; ++i) strata.push_back(fmt::format("s{}", s));
      sizes[fmt::format("s{}", s)] = n;
    }
    std::shuffle(strata.begin(), strata.end(), rng);
    double f = 0.1 + 0.8 * static_cast<double>(rng() % 1000) / 1000.0;
    auto split = stratified_split(strata, f, trial);
    CHECK(split.train.size() + split.test.size() == strata.size());
    CHECK(std::is_sorted(split.train.begin(), split.train.end()));
    std::set<std::size_t> all(split.train.begin(), split.train.end());
    all.insert(split.test.begin(), split.test.end());
    CHECK(all.size() == strata.size());

    std::map<std::string, std::size_t> in_train, in_test;
    for (auto i : split.train) ++in_train[strata[i]];
    for (auto i : split.test) ++in_test[strata[i]];
    std::size_t lo = 0, hi = 0;
    for (const auto& [s, n] : sizes) {
      CHECK(in_train[s] >= 1);
      CHECK(in_test[s] >= 1);
      lo += 1;
      hi += n - 1;
    }
    auto target = static_cast<std::size_t>(std::llround(f * static_cast<double>(strata.size())));
    CHECK(split.train.size() == std::clamp(target, lo, hi));

    auto again = stratified_split(strata, f, trial);
    CHECK(again.train == split.train);
  }
}

TEST_CASE("split rejects singleton strata and bad fractions") {
  std::vector<std::string> strata = {"a", "a", "b"};
  CHECK_THROWS_AS(stratified_split(strata, 0.7, 1), Error);
  std::vector<std::string> ok = {"a", "a"};
  CHECK_THROWS_AS(stratified_split(ok, 1.0, 1), Error);
}

TEST_CASE("pegasos reduces the objective below the zero model and separates separable data") {
  std::mt19937_64 rng(5);
  std::vector<SparseVector> x;
  std::vector<std::string> y;
  for (int i = 0; i < 300; ++i) {
    int c = i % 3;
    SparseVector v;
    v.entries = {{static_cast<std::uint32_t>(c), 1.0}, {static_cast<std::uint32_t>(3 + rng() % 4), 1.0}};
    std::sort(v.entries.begin(), v.entries.end());
    x.push_back(v);
    y.push_back(fmt::format("class{}", c));
  }
  TrainOptions opt;
  opt.seed = 9;
  opt.track_objective = true;
  auto m = train_linear_ovr(x, y, 7, opt);
  CHECK(m.classes == std::vector<std::string>{"class0", "class1", "class2"});
  for (std::size_t c = 0; c < 3; ++c) {
    double obj = ovr_objective(m, c, x, y);
    CHECK(obj < 1.0);  // the zero model scores exactly 1
    REQUIRE(m.objective_trace[c].size() == 20);
    CHECK(m.objective_trace[c].back() <= m.objective_trace[c].front() + 1e-9);
    // every weight stays inside the projection ball
    double norm2 = m.bias[c] * m.bias[c];
    for (double w : m.weights[c]) norm2 += w * w;
    CHECK(std::sqrt(norm2) <= 1.0 / std::sqrt(opt.lambda) + 1e-6);
  }
  auto e = evaluate_classifier(m, x, y);
  CHECK(e.accuracy == 1.0);
  CHECK(e.confusion[1][1] == 100);

  auto again = train_linear_ovr(x, y, 7, opt);
  CHECK(again.weights == m.weights);
  std::vector<SparseVector> wide = {SparseVector{{{9, 1.0}}}};
  std::vector<std::string> one = {"class0"};
  CHECK_THROWS_AS(evaluate_classifier(m, wide, one), Error);
}

TEST_CASE("prediction ties go to the lowest class id") {
  LinearModel m;
  m.classes = {"a", "b"};
  m.dimension = 1;
  m.weights = {{0.0}, {0.0}};
  m.bias = {0.0, 0.0};
  SparseVector x;
  CHECK(m.predict(x) == 0);
}

TEST_CASE("unseen test labels count as errors") {
  std::vector<SparseVector> x(4);
  for (std::uint32_t i = 0; i < 4; ++i) x[i].entries = {{i % 2, 1.0}};
  std::vector<std::string> y = {"a", "b", "a", "b"};
  // 80 steps are far too few for the default lambda to settle
  TrainOptions opt;
  opt.lambda = 0.1;
  auto m = train_linear_ovr(x, y, 2, opt);
  std::vector<std::string> y2 = {"a", "b", "c", "c"};
  auto e = evaluate_classifier(m, x, y2);
  CHECK(e.total == 4);
  CHECK(e.correct == 2);
  CHECK(e.labels.back() == "c");
}

TEST_CASE("task labels") {
  LabeledProfile p;
  p.ethnicity = "Chinese";
  p.gender = corpus::Gender::F;
  CHECK(label_for(p, Task::GenderEthnicity) == "Chinese Female");
  CHECK(label_for(p, Task::Ethnicity) == "Chinese");
  CHECK(label_for(p, Task::Gender) == "Female");
}

TEST_CASE("elimination rows equal classification without that feature") {
  auto profiles = gbias::testing::synthetic_profiles(12, 3, gbias::testing::ProfileSignal::Religion);
  std::vector<FeatureGroup> groups = {FeatureGroup::Religion, FeatureGroup::Hobbies, FeatureGroup::Occupation};
  std::vector<Task> tasks(kAllTasks.begin(), kAllTasks.end());
  ExperimentOptions opt;
  opt.seed = 21;
  auto report = feature_elimination(profiles, groups, tasks, opt);
  auto base = classify(profiles, groups, tasks, opt);
  REQUIRE(report.rows.size() == 3);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    CHECK(report.baseline_correct[t] == base[t].evaluation.correct);
    CHECK(report.baseline_accuracy[t] == base[t].evaluation.accuracy);
    CHECK(base[t].evaluation.total == report.test_size);
  }
  for (const auto& row : report.rows) {
    std::vector<FeatureGroup> kept;
    for (auto g : groups)
      if (g != row.removed) kept.push_back(g);
    auto without = classify(profiles, kept, tasks, opt);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      CHECK(row.correct[t] == without[t].evaluation.correct);
      CHECK(row.delta_correct[t] ==
            static_cast<long long>(row.correct[t]) - static_cast<long long>(report.baseline_correct[t]));
      CHECK(row.delta_points[t] ==
            doctest::Approx(100.0 * static_cast<double>(row.delta_correct[t]) / static_cast<double>(report.test_size)));
    }
  }
}

TEST_CASE("jsd hand case and basic properties") {
  CHECK(jsd({{"a", 1.0}}, {{"a", 0.5}, {"b", 0.5}}) == doctest::Approx(0.3112781245).epsilon(1e-9));
  CHECK(jsd({{"a", 1.0}}, {{"b", 1.0}}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(jsd({{"a", 2.0}, {"b", 2.0}}, {{"a", 1.0}, {"b", 1.0}}) == 0.0);
  CHECK_THROWS_AS(jsd({}, {{"a", 1.0}}), Error);
  CHECK_THROWS_AS(jsd({{"a", -1.0}}, {{"a", 1.0}}), Error);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    Distribution p, q;
    for (int w = 0; w < 6; ++w) {
      if (rng() % 3) p[fmt::format("w{}", w)] = static_cast<double>(rng() % 100);
      if (rng() % 3) q[fmt::format("w{}", w)] = static_cast<double>(rng() % 100);
    }
    p["w0"] += 1;
    q["w1"] += 1;
    double a = jsd(p, q), b = jsd(q, p);
    CHECK(std::abs(a - b) <= 1e-12);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(jsd(p, p) <= 1e-12);
    double sum = 0;
    for (auto [w, c] : jsd_contributions(p, q)) sum += c;
    CHECK(sum == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("top words point at the over-represented groups") {
  auto profiles = gbias::testing::synthetic_profiles(5, 2, gbias::testing::ProfileSignal::Religion);
  auto top = jsd_top_words(profiles, FeatureGroup::Religion, 10);
  REQUIRE(top.size() == 10);
  for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].contribution >= top[i].contribution);
  for (const auto& e : top) {
    REQUIRE(e.groups.size() == 1);
    CHECK(e.word == "faith of " + text::to_lower(e.groups[0]));
  }
}
