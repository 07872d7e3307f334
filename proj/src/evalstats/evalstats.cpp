#include "evalstats/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "common/csv.hpp"
#include "common/error.hpp"
#include "common/io.hpp"
#include "common/random.hpp"
#include "common/text.hpp"

namespace gbias::evalstats {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Resolved {
  std::size_t descriptor;
  std::size_t target;
};

std::vector<Resolved> resolve(const CandidateTable& t, std::span<const GoldLabel> gold) {
  if (gold.empty()) fail(ErrorCode::InvalidArgument, "no gold labels");
  std::vector<Resolved> out;
  for (const auto& g : gold) {
    auto d = std::find(t.descriptors.begin(), t.descriptors.end(), g.descriptor);
    if (d == t.descriptors.end())
      fail(ErrorCode::Validation, fmt::format("gold descriptor '{}' is missing from the score table", g.descriptor));
    auto c = std::find(t.candidates.begin(), t.candidates.end(), g.target);
    if (c == t.candidates.end())
      fail(ErrorCode::Validation, fmt::format("gold target '{}' of '{}' is not an evaluated candidate", g.target,
                                              g.descriptor));
    out.push_back({static_cast<std::size_t>(d - t.descriptors.begin()),
                   static_cast<std::size_t>(c - t.candidates.begin())});
  }
  return out;
}

// Ascending score, invalid last, ties by index.
bool before(const CandidateTable& t, std::size_t j, std::size_t a, std::size_t b) {
  double sa = t.score(a, j), sb = t.score(b, j);
  bool va = !std::isnan(sa), vb = !std::isnan(sb);
  if (va != vb) return va;
  if (va && sa != sb) return sa < sb;
  return a < b;
}

}  // namespace

CandidateTable group_level(const apx::BiasScoreTable& t) { return {t.groups, t.descriptors, t.scores}; }

CandidateTable category_level(const apx::BiasScoreTable& t, const corpus::CategoryMap& map) {
  CandidateTable out;
  out.candidates = map.categories;
  out.descriptors = t.descriptors;
  const std::size_t C = out.candidates.size(), D = t.descriptors.size();
  std::vector<std::vector<std::size_t>> members(C);
  for (std::size_t i = 0; i < t.groups.size(); ++i) {
    auto cat = map.category_for_label(t.groups[i]);
    if (!cat) continue;
    auto c = std::lower_bound(out.candidates.begin(), out.candidates.end(), *cat) - out.candidates.begin();
    members[static_cast<std::size_t>(c)].push_back(i);
  }
  out.scores.assign(C * D, kNaN);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t j = 0; j < D; ++j) {
      double sum = 0.0;
      std::size_t n = 0;
      for (auto i : members[c])
        if (t.valid(i, j)) {
          sum += t.score(i, j);
          ++n;
        }
      if (n) out.scores[c * D + j] = sum / static_cast<double>(n);
    }
  return out;
}

std::size_t rank_of(const CandidateTable& t, std::size_t descriptor, std::size_t target) {
  std::size_t rank = 1;
  for (std::size_t c = 0; c < t.candidates.size(); ++c)
    if (c != target && before(t, descriptor, c, target)) ++rank;
  return rank;
}

double argmin_accuracy(const CandidateTable& t, std::span<const GoldLabel> gold) {
  auto resolved = resolve(t, gold);
  std::size_t hits = 0;
  for (const auto& r : resolved) hits += rank_of(t, r.descriptor, r.target) == 1;
  return static_cast<double>(hits) / static_cast<double>(resolved.size());
}

double mean_reciprocal_rank(const CandidateTable& t, std::span<const GoldLabel> gold) {
  auto resolved = resolve(t, gold);
  double sum = 0.0;
  for (const auto& r : resolved) sum += 1.0 / static_cast<double>(rank_of(t, r.descriptor, r.target));
  return sum / static_cast<double>(resolved.size());
}

double critical_z(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
  boost::math::normal_distribution<double> standard;
  return boost::math::quantile(boost::math::complement(standard, alpha));
}

namespace {

// z-scores of one descriptor column; NaN where the cell is invalid or s == 0.
void column_z(std::span<const double> col, std::vector<double>& z) {
  z.assign(col.size(), kNaN);
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : col)
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  if (n < 3) return;
  double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : col)
    if (!std::isnan(v)) ss += (v - mean) * (v - mean);
  double s = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(s > 0.0)) return;
  for (std::size_t i = 0; i < col.size(); ++i)
    if (!std::isnan(col[i])) z[i] = (col[i] - mean) / s;
}

// Fixed-bin histogram over z in [-kRange, kRange]; out-of-range values fall
// into the edge bins.
class ZHistogram {
 public:
  void add(double z) {
    if (std::isnan(z)) return;
    double pos = (z + kRange) / kWidth;
    auto bin = pos <= 0.0 ? 0 : std::min<std::size_t>(static_cast<std::size_t>(pos), kBins - 1);
    ++counts_[bin];
    ++total_;
  }
  // Upper edge of the bin in which the cumulative share first reaches alpha.
  double quantile(double alpha) const {
    if (total_ == 0) return -std::numeric_limits<double>::infinity();
    double target = alpha * static_cast<double>(total_);
    std::size_t cum = 0;
    for (std::size_t b = 0; b < kBins; ++b) {
      cum += counts_[b];
      if (static_cast<double>(cum) >= target) return -kRange + static_cast<double>(b + 1) * kWidth;
    }
    return kRange;
  }

 private:
  static constexpr double kRange = 10.0;
  static constexpr std::size_t kBins = 20000;
  static constexpr double kWidth = 2.0 * kRange / static_cast<double>(kBins);
  std::vector<std::size_t> counts_ = std::vector<std::size_t>(kBins, 0);
  std::size_t total_ = 0;
};

}  // namespace

SurfaceResult surface_stereotypes(const apx::BiasScoreTable& t, const SurfaceOptions& opt) {
  const std::size_t G = t.groups.size(), D = t.descriptors.size();
  if (G < 3) fail(ErrorCode::InvalidArgument, "surfacing needs at least 3 groups");
  SurfaceResult out;

  std::vector<bool> usable(D, true);
  for (std::size_t j = 0; j < D; ++j) {
    std::size_t invalid = 0;
    for (std::size_t i = 0; i < G; ++i) invalid += !t.valid(i, j);
    if (static_cast<double>(invalid) > opt.max_invalid_share * static_cast<double>(G)) {
      usable[j] = false;
      out.excluded.push_back(t.descriptors[j]);
    }
  }

  if (opt.method == SurfaceMethod::ZScore) {
    out.threshold = -critical_z(opt.alpha);
  } else {
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
    if (opt.shuffles == 0) fail(ErrorCode::InvalidArgument, "permutation mode needs shuffles > 0");
    std::mt19937_64 rng(derive_seed(opt.seed, "surface-permutation"));
    std::vector<std::vector<double>> rows(G);
    for (std::size_t i = 0; i < G; ++i)
      for (std::size_t j = 0; j < D; ++j)
        if (usable[j]) rows[i].push_back(t.score(i, j));
    const std::size_t U = rows.empty() ? 0 : rows[0].size();
    ZHistogram hist;
    std::vector<double> col(G), z;
    for (std::size_t s = 0; s < opt.shuffles; ++s) {
      for (auto& r : rows) seeded_shuffle(r, rng);
      for (std::size_t j = 0; j < U; ++j) {
        for (std::size_t i = 0; i < G; ++i) col[i] = rows[i][j];
        column_z(col, z);
        for (double v : z) hist.add(v);
      }
    }
    out.threshold = hist.quantile(opt.alpha);
  }

  std::vector<double> col(G), z;
  for (std::size_t j = 0; j < D; ++j) {
    if (!usable[j]) continue;
    for (std::size_t i = 0; i < G; ++i) col[i] = t.score(i, j);
    column_z(col, z);
    for (std::size_t i = 0; i < G; ++i)
      if (!std::isnan(z[i]) && z[i] <= out.threshold) out.items.push_back({t.descriptors[j], t.groups[i], z[i], col[i]});
  }
  return out;
}

ValidationReport validate(const CandidateTable& ppl, const CandidateTable& apx, std::span<const GoldLabel> gold) {
  ValidationReport r;
  r.accuracy_ppl = argmin_accuracy(ppl, gold);
  r.accuracy_apx = argmin_accuracy(apx, gold);
  r.mrr_ppl = mean_reciprocal_rank(ppl, gold);
  r.mrr_apx = mean_reciprocal_rank(apx, gold);
  r.descriptors = gold.size();
  r.candidates = apx.candidates.size();
  return r;
}

std::string surfaced_csv(const SurfaceResult& r) {
  std::string out = "descriptor,group,score,zscore\n";
  for (const auto& s : r.items)
    out += csv::join({s.descriptor, s.group, format_double(s.score), format_double(s.zscore)}) + "\n";
  return out;
}

std::string surfaced_by_group_csv(const SurfaceResult& r) {
  std::map<std::string, std::vector<std::string>> by_group;
  for (const auto& s : r.items) by_group[s.group].push_back(s.descriptor);
  std::string out = "group,descriptors\n";
  for (auto& [group, descs] : by_group) {
    std::sort(descs.begin(), descs.end(), [](const std::string& a, const std::string& b) {
      auto la = text::to_lower(a), lb = text::to_lower(b);
      return la != lb ? la < lb : a < b;
    });
    std::string joined;
    for (std::size_t k = 0; k < descs.size(); ++k) joined += (k ? "; " : "") + descs[k];
    out += csv::join({group, joined}) + "\n";
  }
  return out;
}

}  // namespace gbias::evalstats
