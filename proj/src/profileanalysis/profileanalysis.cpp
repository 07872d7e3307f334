#include "profileanalysis/profileanalysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/random.hpp"
#include "common/text.hpp"

namespace gbias::profileanalysis {

namespace {

struct FeatureInfo {
  FeatureGroup group;
  std::string_view name;
  Encoding encoding;
};

constexpr std::array<FeatureInfo, 13> kInfo = {{
    {FeatureGroup::Religion, "religion", Encoding::OneHot},
    {FeatureGroup::HairColour, "hair_colour", Encoding::OneHot},
    {FeatureGroup::Height, "height", Encoding::OneHot},
    {FeatureGroup::SexualOrientation, "sexual_orientation", Encoding::OneHot},
    {FeatureGroup::Hobbies, "hobbies", Encoding::RelativeFrequency},
    {FeatureGroup::Build, "build", Encoding::OneHot},
    {FeatureGroup::SocioeconomicStatus, "socioeconomic_status", Encoding::OneHot},
    {FeatureGroup::SkinColour, "skin_colour", Encoding::OneHot},
    {FeatureGroup::EyeColour, "eye_colour", Encoding::OneHot},
    {FeatureGroup::PersonalityTraits, "personality_traits", Encoding::RelativeFrequency},
    {FeatureGroup::NegativeTraits, "negative_traits", Encoding::RelativeFrequency},
    {FeatureGroup::Age, "age", Encoding::OneHot},
    {FeatureGroup::Occupation, "occupation", Encoding::OneHot},
}};

const FeatureInfo& info(FeatureGroup g) { return kInfo[static_cast<std::size_t>(g)]; }

void push_single(std::vector<std::string>& out, const std::optional<std::string>& v) {
  if (!v) return;
  auto e = text::normalize_entry(*v);
  if (!e.empty()) out.push_back(std::move(e));
}

}  // namespace

std::string_view to_string(FeatureGroup g) { return info(g).name; }

std::optional<FeatureGroup> parse_feature_group(std::string_view s) {
  auto key = text::replace_all(text::snake_case(s), "color", "colour");
  for (const auto& i : kInfo)
    if (i.name == key) return i.group;
  return std::nullopt;
}

Encoding encoding_of(FeatureGroup g) { return info(g).encoding; }

std::vector<std::string> feature_entries(const CharacterProfile& p, FeatureGroup g) {
  std::vector<std::string> out;
  auto list = [&](const std::vector<std::string>& items) {
    for (const auto& it : items)
      if (auto e = text::normalize_entry(it); !e.empty()) out.push_back(std::move(e));
  };
  switch (g) {
    case FeatureGroup::Religion: push_single(out, p.religion); break;
    case FeatureGroup::HairColour: push_single(out, p.hair_colour); break;
    case FeatureGroup::SexualOrientation: push_single(out, p.sexual_orientation); break;
    case FeatureGroup::Build: push_single(out, p.build); break;
    case FeatureGroup::SocioeconomicStatus: push_single(out, p.socioeconomic_status); break;
    case FeatureGroup::SkinColour: push_single(out, p.skin_colour); break;
    case FeatureGroup::EyeColour: push_single(out, p.eye_colour); break;
    case FeatureGroup::Occupation: push_single(out, p.occupation); break;
    case FeatureGroup::Hobbies: list(p.hobbies); break;
    case FeatureGroup::PersonalityTraits: list(p.personality_traits); break;
    case FeatureGroup::NegativeTraits: list(p.negative_traits); break;
    case FeatureGroup::Age:
      if (p.age && *p.age > 0) {
        int lo = *p.age / 10 * 10;
        out.push_back(fmt::format("[{},{})", lo, lo + 10));
      }
      break;
    case FeatureGroup::Height:
      if (p.height_ft && *p.height_ft > 0.0) {
        double lo = std::floor(*p.height_ft / 0.25) * 0.25;
        out.push_back("[" + format_double(lo) + "," + format_double(lo + 0.25) + ")");
      }
      break;
  }
  return out;
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::GenderEthnicity: return "gender_ethnicity";
    case Task::Ethnicity: return "ethnicity";
    case Task::Gender: return "gender";
  }
  return "gender_ethnicity";
}

std::string label_for(const LabeledProfile& p, Task t) {
  switch (t) {
    case Task::GenderEthnicity: return corpus::Group{p.ethnicity, p.gender, 0}.label();
    case Task::Ethnicity: return p.ethnicity;
    case Task::Gender: return p.gender == corpus::Gender::F ? "Female" : "Male";
  }
  return {};
}

double SparseVector::l1() const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += std::abs(v);
  return s;
}

FeatureSpace FeatureSpace::build(std::span<const CharacterProfile> train, std::span<const FeatureGroup> groups) {
  FeatureSpace fs;
  std::set<FeatureGroup> seen;
  for (auto g : groups) {
    if (!seen.insert(g).second) fail(ErrorCode::InvalidArgument, fmt::format("feature group '{}' listed twice", to_string(g)));
    std::set<std::string> vocab;
    for (const auto& p : train)
      for (auto& e : feature_entries(p, g)) vocab.insert(std::move(e));
    Block b{g, encoding_of(g), {vocab.begin(), vocab.end()}, fs.dimension_};
    fs.dimension_ += b.width();
    fs.blocks_.push_back(std::move(b));
  }
  return fs;
}

std::optional<std::size_t> FeatureSpace::index_of(FeatureGroup g, std::string_view entry) const {
  for (const auto& b : blocks_) {
    if (b.group != g) continue;
    auto it = std::lower_bound(b.vocabulary.begin(), b.vocabulary.end(), entry);
    if (it == b.vocabulary.end() || *it != entry) return b.offset + b.vocabulary.size();
    return b.offset + static_cast<std::size_t>(it - b.vocabulary.begin());
  }
  return std::nullopt;
}

SparseVector FeatureSpace::encode(const CharacterProfile& p, std::vector<std::string>* diagnostics) const {
  SparseVector out;
  for (const auto& b : blocks_) {
    auto entries = feature_entries(p, b.group);
    if (entries.empty()) {
      if (diagnostics) diagnostics->push_back(fmt::format("{}: '{}' has no value", p.name, to_string(b.group)));
      continue;
    }
    std::map<std::size_t, double> slots;
    auto slot_of = [&](const std::string& e) {
      auto it = std::lower_bound(b.vocabulary.begin(), b.vocabulary.end(), e);
      bool known = it != b.vocabulary.end() && *it == e;
      return b.offset + (known ? static_cast<std::size_t>(it - b.vocabulary.begin()) : b.vocabulary.size());
    };
    if (b.encoding == Encoding::OneHot) {
      slots[slot_of(entries.front())] = 1.0;
    } else {
      const double w = 1.0 / static_cast<double>(entries.size());
      for (const auto& e : entries) slots[slot_of(e)] += w;
    }
    for (auto [i, v] : slots) out.entries.emplace_back(static_cast<std::uint32_t>(i), v);
  }
  return out;
}

Split stratified_split(std::span<const std::string> strata, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "train fraction must lie strictly between 0 and 1");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < strata.size(); ++i) members[strata[i]].push_back(i);

  struct Quota {
    const std::string* key;
    std::vector<std::size_t>* idx;
    std::size_t take;
    double frac;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (auto& [key, idx] : members) {
    if (idx.size() < 2) fail(ErrorCode::Validation, fmt::format("stratum '{}' has fewer than 2 samples", key));
    double exact = train_fraction * static_cast<double>(idx.size());
    auto take = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(exact)), 1, idx.size() - 1);
    quotas.push_back({&key, &idx, take, exact - std::floor(exact)});
    assigned += take;
  }
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(strata.size())));

  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return quotas[a].frac > quotas[b].frac; });
  for (bool moved = true; assigned < target && moved;) {
    moved = false;
    for (auto q : order) {
      if (assigned >= target) break;
      if (quotas[q].take + 1 < quotas[q].idx->size()) {
        ++quotas[q].take;
        ++assigned;
        moved = true;
      }
    }
  }
  for (bool moved = true; assigned > target && moved;) {
    moved = false;
    for (auto it = order.rbegin(); it != order.rend() && assigned > target; ++it) {
      if (quotas[*it].take > 1) {
        --quotas[*it].take;
        --assigned;
        moved = true;
      }
    }
  }

  Split out;
  for (auto& q : quotas) {
    auto idx = *q.idx;
    std::mt19937_64 rng(derive_seed(seed, *q.key));
    seeded_shuffle(idx, rng);
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(q.take));
    out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(q.take), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

namespace {

double dot(const std::vector<double>& w, double b, const SparseVector& x) {
  double s = b;
  for (const auto& [i, v] : x.entries) s += w[i] * v;
  return s;
}

void check_dimension(std::span<const SparseVector> x, std::size_t dimension) {
  for (const auto& v : x)
    if (!v.entries.empty() && v.entries.back().first >= dimension)
      fail(ErrorCode::InvalidArgument,
           fmt::format("feature index {} exceeds model dimension {}", v.entries.back().first, dimension));
}

double objective_of(const std::vector<double>& w, double b, double lambda, std::span<const SparseVector> x,
                    std::span<const double> y) {
  double reg = b * b;
  for (double v : w) reg += v * v;
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) loss += std::max(0.0, 1.0 - y[i] * dot(w, b, x[i]));
  return 0.5 * lambda * reg + loss / static_cast<double>(x.size());
}

// Weight vector kept as scale * v so the shrink step is O(1); the last slot
// of v is the bias.
void pegasos_binary(std::span<const SparseVector> x, std::span<const double> y, std::size_t dim,
                    const TrainOptions& opt, std::uint64_t seed, std::vector<double>& w_out, double& b_out,
                    std::vector<double>* trace) {
  std::vector<double> v(dim + 1, 0.0);
  double scale = 1.0;
  double vnorm2 = 0.0;
  const double radius = 1.0 / std::sqrt(opt.lambda);
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::size_t t = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    seeded_shuffle(order, rng);
    for (auto i : order) {
      ++t;
      const double eta = 1.0 / (opt.lambda * static_cast<double>(t));
      const double margin = y[i] * scale * (v[dim] + [&] {
        double s = 0.0;
        for (const auto& [j, xv] : x[i].entries) s += v[j] * xv;
        return s;
      }());
      if (t == 1) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
        vnorm2 = 0.0;
      } else {
        scale *= 1.0 - 1.0 / static_cast<double>(t);
      }
      if (margin < 1.0) {
        const double step = eta * y[i] / scale;
        auto bump = [&](std::size_t j, double delta) {
          vnorm2 += 2.0 * v[j] * delta + delta * delta;
          v[j] += delta;
        };
        for (const auto& [j, xv] : x[i].entries) bump(j, step * xv);
        bump(dim, step);
      }
      const double norm = scale * std::sqrt(std::max(vnorm2, 0.0));
      if (norm > radius) scale *= radius / norm;
    }
    vnorm2 = 0.0;
    for (double e : v) vnorm2 += e * e;
    if (trace) {
      std::vector<double> w(dim);
      for (std::size_t j = 0; j < dim; ++j) w[j] = scale * v[j];
      trace->push_back(objective_of(w, scale * v[dim], opt.lambda, x, y));
    }
  }
  w_out.assign(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) w_out[j] = scale * v[j];
  b_out = scale * v[dim];
}

}  // namespace

std::vector<double> LinearModel::scores(const SparseVector& x) const {
  std::vector<double> out(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) out[c] = dot(weights[c], bias[c], x);
  return out;
}

std::size_t LinearModel::predict(const SparseVector& x) const {
  auto s = scores(x);
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

LinearModel train_linear_ovr(std::span<const SparseVector> x, std::span<const std::string> y, std::size_t dimension,
                             const TrainOptions& opt) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidArgument, "features and labels differ in length");
  if (x.empty()) fail(ErrorCode::InvalidArgument, "no training data");
  if (!(opt.lambda > 0.0) || opt.epochs < 1) fail(ErrorCode::InvalidArgument, "lambda must be > 0 and epochs >= 1");
  check_dimension(x, dimension);

  LinearModel m;
  m.dimension = dimension;
  m.options = opt;
  std::set<std::string> classes(y.begin(), y.end());
  if (classes.size() < 2) fail(ErrorCode::Validation, "training data holds a single class");
  m.classes.assign(classes.begin(), classes.end());
  m.weights.resize(m.classes.size());
  m.bias.resize(m.classes.size());
  if (opt.track_objective) m.objective_trace.resize(m.classes.size());

  std::vector<double> yb(y.size());
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    for (std::size_t i = 0; i < y.size(); ++i) yb[i] = y[i] == m.classes[c] ? 1.0 : -1.0;
    pegasos_binary(x, yb, dimension, opt, derive_seed(opt.seed, "class:" + m.classes[c]), m.weights[c], m.bias[c],
                   opt.track_objective ? &m.objective_trace[c] : nullptr);
  }
  return m;
}

double ovr_objective(const LinearModel& m, std::size_t cls, std::span<const SparseVector> x,
                     std::span<const std::string> y) {
  std::vector<double> yb(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) yb[i] = y[i] == m.classes.at(cls) ? 1.0 : -1.0;
  return objective_of(m.weights[cls], m.bias[cls], m.options.lambda, x, yb);
}

Evaluation evaluate_classifier(const LinearModel& m, std::span<const SparseVector> x, std::span<const std::string> y) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidArgument, "features and labels differ in length");
  if (x.empty()) fail(ErrorCode::InvalidArgument, "no test data");
  check_dimension(x, m.dimension);
  Evaluation e;
  e.labels = m.classes;
  std::set<std::string> unseen;
  for (const auto& l : y)
    if (!std::binary_search(m.classes.begin(), m.classes.end(), l)) unseen.insert(l);
  e.labels.insert(e.labels.end(), unseen.begin(), unseen.end());
  e.confusion.assign(e.labels.size(), std::vector<std::size_t>(m.classes.size(), 0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto pred = m.predict(x[i]);
    auto row = static_cast<std::size_t>(std::find(e.labels.begin(), e.labels.end(), y[i]) - e.labels.begin());
    ++e.confusion[row][pred];
    if (m.classes[pred] == y[i]) ++e.correct;
  }
  e.total = x.size();
  e.accuracy = static_cast<double>(e.correct) / static_cast<double>(e.total);
  return e;
}

namespace {

std::vector<std::string> strata_of(std::span<const LabeledProfile> profiles) {
  std::vector<std::string> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) out.push_back(label_for(p, Task::GenderEthnicity));
  return out;
}

std::vector<Evaluation> run_tasks(std::span<const LabeledProfile> profiles, const Split& split,
                                  std::span<const FeatureGroup> groups, std::span<const Task> tasks,
                                  const ExperimentOptions& opt) {
  std::vector<CharacterProfile> train_profiles;
  for (auto i : split.train) train_profiles.push_back(profiles[i].profile);
  auto space = FeatureSpace::build(train_profiles, groups);
  std::vector<SparseVector> xtr, xte;
  for (auto i : split.train) xtr.push_back(space.encode(profiles[i].profile));
  for (auto i : split.test) xte.push_back(space.encode(profiles[i].profile));

  std::vector<Evaluation> out;
  for (auto task : tasks) {
    std::vector<std::string> ytr, yte;
    for (auto i : split.train) ytr.push_back(label_for(profiles[i], task));
    for (auto i : split.test) yte.push_back(label_for(profiles[i], task));
    TrainOptions to = opt.train;
    to.seed = derive_seed(opt.seed, to_string(task));
    auto model = train_linear_ovr(xtr, ytr, space.dimension(), to);
    out.push_back(evaluate_classifier(model, xte, yte));
  }
  return out;
}

}  // namespace

std::vector<TaskResult> classify(std::span<const LabeledProfile> profiles, std::span<const FeatureGroup> groups,
                                 std::span<const Task> tasks, const ExperimentOptions& opt) {
  auto strata = strata_of(profiles);
  auto split = stratified_split(strata, opt.train_fraction, opt.seed);
  auto evals = run_tasks(profiles, split, groups, tasks, opt);
  std::vector<TaskResult> out;
  for (std::size_t t = 0; t < tasks.size(); ++t) out.push_back({tasks[t], std::move(evals[t])});
  return out;
}

EliminationReport feature_elimination(std::span<const LabeledProfile> profiles, std::span<const FeatureGroup> groups,
                                      std::span<const Task> tasks, const ExperimentOptions& opt) {
  auto strata = strata_of(profiles);
  auto split = stratified_split(strata, opt.train_fraction, opt.seed);
  EliminationReport r;
  r.tasks.assign(tasks.begin(), tasks.end());
  r.test_size = split.test.size();
  for (const auto& e : run_tasks(profiles, split, groups, tasks, opt)) {
    r.baseline_correct.push_back(e.correct);
    r.baseline_accuracy.push_back(e.accuracy);
  }
  for (auto removed : groups) {
    std::vector<FeatureGroup> kept;
    for (auto g : groups)
      if (g != removed) kept.push_back(g);
    EliminationRow row{removed, {}, {}, {}};
    auto evals = run_tasks(profiles, split, kept, tasks, opt);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      auto correct = evals[t].correct;
      row.correct.push_back(correct);
      auto d = static_cast<long long>(correct) - static_cast<long long>(r.baseline_correct[t]);
      row.delta_correct.push_back(d);
      row.delta_points.push_back(100.0 * static_cast<double>(d) / static_cast<double>(r.test_size));
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

namespace {

Distribution normalized(const Distribution& d, const char* what) {
  double total = 0.0;
  for (const auto& [w, v] : d) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, fmt::format("{}: bad mass for '{}'", what, w));
    total += v;
  }
  if (!(total > 0.0)) fail(ErrorCode::InvalidArgument, fmt::format("{}: empty distribution", what));
  Distribution out;
  for (const auto& [w, v] : d)
    if (v > 0.0) out[w] = v / total;
  return out;
}

double term(double a, double m) { return a > 0.0 ? 0.5 * a * std::log2(a / m) : 0.0; }

}  // namespace

std::map<std::string, double> jsd_contributions(const Distribution& p_in, const Distribution& q_in) {
  auto p = normalized(p_in, "jsd");
  auto q = normalized(q_in, "jsd");
  std::map<std::string, double> out;
  for (const auto& [w, pv] : p) out[w] = 0.0;
  for (const auto& [w, qv] : q) out[w] = 0.0;
  for (auto& [w, c] : out) {
    auto pi = p.find(w);
    auto qi = q.find(w);
    double a = pi == p.end() ? 0.0 : pi->second;
    double b = qi == q.end() ? 0.0 : qi->second;
    double m = 0.5 * (a + b);
    c = term(a, m) + term(b, m);
  }
  return out;
}

double jsd(const Distribution& p, const Distribution& q) {
  double s = 0.0;
  for (const auto& [w, c] : jsd_contributions(p, q)) s += c;
  return std::clamp(s, 0.0, 1.0);
}

std::vector<JsdShiftEntry> jsd_top_words(std::span<const LabeledProfile> profiles, FeatureGroup feature,
                                         std::size_t k) {
  std::map<std::string, std::map<std::string, double>> counts;  // group -> word -> count
  std::map<std::string, double> pooled;
  double grand = 0.0;
  for (const auto& p : profiles) {
    auto g = label_for(p, Task::GenderEthnicity);
    for (const auto& e : feature_entries(p.profile, feature)) {
      counts[g][e] += 1.0;
      pooled[e] += 1.0;
      grand += 1.0;
    }
  }
  if (counts.size() < 2)
    fail(ErrorCode::Validation,
         fmt::format("feature '{}' has entries in fewer than 2 groups; no shift to measure", to_string(feature)));

  struct Best {
    double score = -1.0;
    std::string group;
    std::vector<std::string> groups;
  };
  std::map<std::string, Best> best;
  for (const auto& [g, c] : counts) {
    double total_g = 0.0;
    for (const auto& [w, n] : c) total_g += n;
    double total_rest = grand - total_g;
    Distribution p, q;
    for (const auto& [w, n] : c) p[w] = n / total_g;
    for (const auto& [w, n] : pooled) {
      auto it = c.find(w);
      double rest = n - (it == c.end() ? 0.0 : it->second);
      if (rest > 0.0) q[w] = rest / total_rest;
    }
    auto contrib = jsd_contributions(p, q);
    for (const auto& [w, pv] : p) {
      auto qi = q.find(w);
      double qv = qi == q.end() ? 0.0 : qi->second;
      if (!(pv > qv)) continue;
      auto& b = best[w];
      double s = contrib[w];
      if (s > b.score) {
        b.score = s;
        b.group = g;
      }
      if (qv == 0.0 || pv / qv >= 2.0) b.groups.push_back(g);
    }
  }

  std::vector<JsdShiftEntry> out;
  for (auto& [w, b] : best) {
    if (!(b.score > 0.0)) continue;
    if (std::find(b.groups.begin(), b.groups.end(), b.group) == b.groups.end()) b.groups.push_back(b.group);
    std::sort(b.groups.begin(), b.groups.end());
    out.push_back({feature, w, b.score, std::move(b.groups)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.contribution > b.contribution; });
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace gbias::profileanalysis
