#include "namecluster/namecluster.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "common/csv.hpp"
#include "common/error.hpp"
#include "common/io.hpp"
#include "common/random.hpp"
#include "common/text.hpp"

namespace gbias::namecluster {

namespace {

void push_record(EmbeddingSet& set, std::string name, const std::vector<double>& vec, std::string_view origin,
                 std::size_t line) {
  if (vec.empty()) fail(ErrorCode::Validation, fmt::format("{}:{}: empty vector for '{}'", origin, line, name));
  if (set.names.empty()) set.dim = vec.size();
  if (vec.size() != set.dim)
    fail(ErrorCode::Validation,
         fmt::format("{}:{}: '{}' has dimension {}, expected {}", origin, line, name, vec.size(), set.dim));
  for (double v : vec)
    if (!std::isfinite(v))
      fail(ErrorCode::Validation, fmt::format("{}:{}: non-finite value in vector for '{}'", origin, line, name));
  set.names.push_back(std::move(name));
  set.values.insert(set.values.end(), vec.begin(), vec.end());
}

std::optional<double> parse_number(std::string_view s) {
  std::string t = text::trim(s);
  if (t.empty()) return std::nullopt;
  // strtod rather than from_chars so "nan"/"inf" parse and are then rejected
  // as non-finite instead of as malformed.
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

}  // namespace

EmbeddingSet parse_embeddings_jsonl(std::string_view content, std::string_view origin) {
  EmbeddingSet set;
  std::size_t line_no = 0;
  for (const auto& line : text::split(content, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::Parse, fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
    if (!j.contains("name") || !j.contains("vector") || !j["vector"].is_array())
      fail(ErrorCode::Parse, fmt::format("{}:{}: expected {{\"name\", \"vector\"}}", origin, line_no));
    std::vector<double> vec;
    for (const auto& v : j["vector"]) {
      if (v.is_number()) vec.push_back(v.get<double>());
      else if (v.is_null()) vec.push_back(std::numeric_limits<double>::quiet_NaN());
      else if (v.is_string()) vec.push_back(parse_number(v.get<std::string>()).value_or(std::nan("")));
      else fail(ErrorCode::Parse, fmt::format("{}:{}: non-numeric vector entry", origin, line_no));
    }
    push_record(set, j["name"].get<std::string>(), vec, origin, line_no);
  }
  if (set.names.empty()) fail(ErrorCode::Validation, fmt::format("{}: no embeddings", origin));
  return set;
}

EmbeddingSet parse_embeddings_csv(std::string_view content, std::string_view origin) {
  EmbeddingSet set;
  auto rows = csv::parse(content);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() < 2) fail(ErrorCode::Parse, fmt::format("{}:{}: expected name and values", origin, rows[r].line));
    if (r == 0 && !parse_number(f[1])) continue;  // header
    std::vector<double> vec;
    for (std::size_t c = 1; c < f.size(); ++c) {
      auto v = parse_number(f[c]);
      if (!v) fail(ErrorCode::Parse, fmt::format("{}:{}: column {} is not numeric", origin, rows[r].line, c + 1));
      vec.push_back(*v);
    }
    push_record(set, text::trim(f[0]), vec, origin, rows[r].line);
  }
  if (set.names.empty()) fail(ErrorCode::Validation, fmt::format("{}: no embeddings", origin));
  return set;
}

EmbeddingSet load_embeddings(const std::string& path) {
  auto content = read_text_file(path);
  auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && content[first] == '{') return parse_embeddings_jsonl(content, path);
  return parse_embeddings_csv(content, path);
}

void normalize_rows(EmbeddingSet& set) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    double* row = set.values.data() + i * set.dim;
    double norm = 0.0;
    for (std::size_t d = 0; d < set.dim; ++d) norm += row[d] * row[d];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t d = 0; d < set.dim; ++d) row[d] /= norm;
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

std::vector<double> kmeanspp_init(const EmbeddingSet& set, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = set.size(), dim = set.dim;
  std::vector<double> centers;
  centers.reserve(k * dim);
  auto add_center = [&](std::size_t idx) {
    auto r = set.row(idx);
    centers.insert(centers.end(), r.begin(), r.end());
  };

  add_center(uniform_index(rng, n));
  std::vector<double> mindist(n);
  for (std::size_t i = 0; i < n; ++i) mindist[i] = squared_distance(set.row(i), {centers.data(), dim});

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : mindist) total += d;
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = uniform_index(rng, n);
    } else {
      double target = uniform01(rng) * total;
      double cum = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += mindist[i];
        if (cum > target && mindist[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    add_center(chosen);
    std::span<const double> newest{centers.data() + c * dim, dim};
    for (std::size_t i = 0; i < n; ++i) mindist[i] = std::min(mindist[i], squared_distance(set.row(i), newest));
  }
  return centers;
}

namespace {

int nearest(std::span<const double> x, std::span<const double> centers, std::size_t k, double* best_dist = nullptr) {
  const std::size_t dim = x.size();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    double d = squared_distance(x, centers.subspan(c * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (best_dist) *best_dist = best_d;
  return best;
}

}  // namespace

std::vector<int> assign_nearest(const EmbeddingSet& set, std::span<const double> centers, std::size_t k) {
  std::vector<int> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out[i] = nearest(set.row(i), centers, k);
  return out;
}

double inertia(const EmbeddingSet& set, std::span<const double> centers, std::span<const int> assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i)
    total += squared_distance(set.row(i), centers.subspan(static_cast<std::size_t>(assignment[i]) * set.dim, set.dim));
  return total;
}

KMeansResult minibatch_kmeans(const EmbeddingSet& set, const KMeansOptions& opt) {
  const std::size_t n = set.size(), dim = set.dim, k = opt.k;
  if (n == 0) fail(ErrorCode::InvalidArgument, "k-means: empty input");
  if (k == 0) fail(ErrorCode::InvalidArgument, "k-means: k must be positive");
  if (k > n) fail(ErrorCode::InvalidArgument, fmt::format("k-means: k={} exceeds the {} records", k, n));
  if (opt.batch == 0) fail(ErrorCode::InvalidArgument, "k-means: batch must be >= 1");

  std::mt19937_64 rng(opt.seed);
  std::vector<double> centers = kmeanspp_init(set, k, rng);

  KMeansResult result;
  result.init_inertia = inertia(set, centers, assign_nearest(set, centers, k));

  std::vector<std::size_t> counts(k, 0);
  std::vector<std::size_t> batch;
  std::vector<int> batch_assign;
  for (std::size_t it = 0; it < opt.iters; ++it) {
    batch.clear();
    if (opt.batch >= n) {
      for (std::size_t i = 0; i < n; ++i) batch.push_back(i);
    } else {
      for (std::size_t b = 0; b < opt.batch; ++b) batch.push_back(uniform_index(rng, n));
    }
    // Assignments use the centers as they stood at the start of the batch.
    batch_assign.resize(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) batch_assign[b] = nearest(set.row(batch[b]), centers, k);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      auto c = static_cast<std::size_t>(batch_assign[b]);
      double eta = 1.0 / static_cast<double>(++counts[c]);
      double* center = centers.data() + c * dim;
      auto x = set.row(batch[b]);
      for (std::size_t d = 0; d < dim; ++d) center[d] = (1.0 - eta) * center[d] + eta * x[d];
    }
    if (opt.track_inertia) result.inertia_trace.push_back(inertia(set, centers, assign_nearest(set, centers, k)));
  }

  auto assignment = assign_nearest(set, centers, k);
  for (std::size_t guard = 0; guard < k; ++guard) {
    std::vector<std::size_t> sizes(k, 0);
    for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
    auto empty = std::find(sizes.begin(), sizes.end(), 0u);
    if (empty == sizes.end()) break;
    auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(assignment[i]) != largest) continue;
      double d = squared_distance(set.row(i), {centers.data() + largest * dim, dim});
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    auto e = static_cast<std::size_t>(empty - sizes.begin());
    auto src = set.row(far);
    std::copy(src.begin(), src.end(), centers.begin() + static_cast<std::ptrdiff_t>(e * dim));
    assignment = assign_nearest(set, centers, k);
    ++result.reseeded;
  }

  result.inertia = inertia(set, centers, assignment);
  result.assignment = assignment;
  result.clusters.resize(k);
  for (std::size_t c = 0; c < k; ++c)
    result.clusters[c].centroid.assign(centers.begin() + static_cast<std::ptrdiff_t>(c * dim),
                                       centers.begin() + static_cast<std::ptrdiff_t>((c + 1) * dim));
  for (std::size_t i = 0; i < n; ++i) {
    auto& cl = result.clusters[static_cast<std::size_t>(assignment[i])];
    cl.member_indices.push_back(i);
    cl.members.push_back(set.names[i]);
  }
  return result;
}

std::string group_label(const NameLabel& l) { return corpus::Group{l.ethnicity, l.gender, 0}.label(); }

LabelMap parse_name_labels(std::string_view content, std::string_view origin) {
  auto rows = csv::parse(content);
  if (rows.empty()) fail(ErrorCode::Parse, fmt::format("{}: empty labels file", origin));
  const auto& h = rows.front().fields;
  if (h.size() < 3 || text::trim(h[0]) != "name" || text::trim(h[1]) != "ethnicity" || text::trim(h[2]) != "gender")
    fail(ErrorCode::Parse, fmt::format("{}: expected header 'name,ethnicity,gender[,probability]'", origin));
  LabelMap labels;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != h.size()) fail(ErrorCode::Parse, fmt::format("{}:{}: wrong field count", origin, rows[r].line));
    auto gender = corpus::parse_gender(f[2]);
    if (!gender) continue;  // gender-neutral names never qualify
    NameLabel l{text::trim(f[1]), *gender, 1.0};
    if (h.size() > 3) {
      auto p = parse_number(f[3]);
      if (!p || *p < 0.0 || *p > 1.0)
        fail(ErrorCode::Parse, fmt::format("{}:{}: probability must be in [0,1]", origin, rows[r].line));
      l.probability = *p;
    }
    labels.insert_or_assign(text::trim(f[0]), std::move(l));
  }
  return labels;
}

LabelMap load_name_labels(const std::string& path) { return parse_name_labels(read_text_file(path), path); }

void attach_labels(std::vector<Cluster>& clusters, const LabelMap& labels) {
  for (auto& cl : clusters) {
    std::map<std::string, std::size_t> tally;
    for (const auto& name : cl.members) {
      auto it = labels.find(name);
      if (it == labels.end()) fail(ErrorCode::Validation, fmt::format("no label for clustered name '{}'", name));
      ++tally[group_label(it->second)];
    }
    cl.modal_label.clear();
    cl.agreement = 0.0;
    std::size_t best = 0;
    for (const auto& [label, count] : tally) {
      if (count > best) {
        best = count;
        cl.modal_label = label;
      }
    }
    if (!cl.members.empty()) cl.agreement = static_cast<double>(best) / static_cast<double>(cl.members.size());
  }
}

Selection select_group_names(const std::vector<Cluster>& clusters, const LabelMap& labels, const SelectOptions& opt) {
  auto valid_name = [](const std::string& n) {
    auto len = text::utf8_length(n);
    return len >= corpus::kMinNameLength && len <= corpus::kMaxNameLength;
  };

  // label -> representative, over the groups present among clustered names
  std::map<std::string, NameLabel> groups;
  for (const auto& cl : clusters)
    for (const auto& m : cl.members) {
      auto it = labels.find(m);
      if (it == labels.end()) fail(ErrorCode::Validation, fmt::format("no label for clustered name '{}'", m));
      groups.emplace(group_label(it->second), it->second);
    }

  Selection out;
  std::set<std::string> taken;
  for (const auto& [glabel, rep] : groups) {
    std::vector<std::string> pool;
    for (const auto& cl : clusters) {
      if (cl.members.empty()) continue;
      std::size_t in_group = 0;
      for (const auto& m : cl.members)
        if (group_label(labels.at(m)) == glabel) ++in_group;
      double share = static_cast<double>(in_group) / static_cast<double>(cl.members.size());
      if (share <= opt.min_agreement) continue;
      for (const auto& m : cl.members)
        if (group_label(labels.at(m)) == glabel && valid_name(m)) pool.push_back(m);
    }
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

    GroupSelection gs{glabel, 0, 0, pool.size()};
    std::mt19937_64 rng(derive_seed(opt.seed, glabel));
    seeded_shuffle(pool, rng);
    std::vector<std::string> chosen;
    for (const auto& n : pool) {
      if (chosen.size() == opt.per_group) break;
      if (taken.insert(n).second) chosen.push_back(n);
    }
    gs.from_clusters = chosen.size();

    bool fill = std::find(opt.opposite_gender_fill.begin(), opt.opposite_gender_fill.end(), rep.ethnicity) !=
                opt.opposite_gender_fill.end();
    if (chosen.size() < opt.per_group && fill) {
      std::vector<std::pair<double, std::string>> ranked;
      for (const auto& [name, l] : labels)
        if (group_label(l) == glabel && valid_name(name) && !taken.contains(name))
          ranked.emplace_back(-l.probability, name);
      std::sort(ranked.begin(), ranked.end());
      for (const auto& [negp, name] : ranked) {
        if (chosen.size() == opt.per_group) break;
        taken.insert(name);
        chosen.push_back(name);
        ++gs.from_fill;
      }
    }

    if (chosen.size() < opt.per_group) {
      out.shortfalls.push_back(fmt::format("group '{}': {} of {} names available", glabel, chosen.size(), opt.per_group));
    }
    for (const auto& n : chosen) out.names.push_back(corpus::NameEntry{n, rep.ethnicity, rep.gender});
    out.groups.push_back(std::move(gs));
  }
  return out;
}

}  // namespace gbias::namecluster
