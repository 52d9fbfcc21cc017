#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ccgrid/uncertainty.hpp"

namespace ccgrid {

struct SampleSizeSpec {
  int d_prime = 1;   // decision-variable dimension
  double epsilon = 0.05;
  double beta = 1e-4;
  int n2 = 186;            // FAST second-stage size when n2_analytic is false
  bool n2_analytic = false;
  int target_d = 1;        // effective scenario count for selection

  void validate() const {
    if (d_prime < 1) throw ValidationError("d' must be >= 1");
    if (!(epsilon > 0 && epsilon < 1)) throw ValidationError("epsilon must be in (0,1)");
    if (!(beta > 0 && beta < 1)) throw ValidationError("beta must be in (0,1)");
    if (target_d < 1) throw ValidationError("target d must be >= 1");
  }
};

// Random-sampling bound: smallest N' with N' >= (2/eps)(ln(1/beta) + d').
inline long long rs_sample_size(double epsilon, double beta, long long d_prime) {
  if (!(epsilon > 0 && epsilon < 1)) throw ValidationError("epsilon must be in (0,1)");
  if (!(beta > 0 && beta < 1)) throw ValidationError("beta must be in (0,1)");
  if (d_prime < 0) throw ValidationError("d' must be >= 0");
  double bound = (2.0 / epsilon) * (std::log(1.0 / beta) + double(d_prime));
  return (long long)std::ceil(bound - 1e-12);
}

// Two-stage size N = N1 + N2 with N1 = d'. The default N2 is a configured
// constant; the analytic alternative is ceil(ln(1/beta) / ln(1/(1-eps))).
inline long long fast_sample_size(long long d_prime, const SampleSizeSpec& spec) {
  if (d_prime < 1) throw ValidationError("d' must be >= 1");
  long long n2 = spec.n2;
  if (spec.n2_analytic)
    n2 = (long long)std::ceil(std::log(1.0 / spec.beta) / std::log(1.0 / (1.0 - spec.epsilon)) -
                              1e-12);
  return d_prime + n2;
}

enum class TargetRule { FullDimension, TenPercent };

// Rule of thumb for the effective scenario count: the decision-variable size
// for small systems, 10% of it otherwise.
inline long long target_sample_count(TargetRule rule, long long d_prime) {
  if (d_prime < 1) throw ValidationError("d' must be >= 1");
  if (rule == TargetRule::FullDimension) return d_prime;
  return (long long)std::ceil(0.10 * double(d_prime) - 1e-12);
}

// Euclidean dissimilarity between two flattened samples.
inline double dissimilarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ValidationError("feature dimension mismatch");
  return (a - b).norm();
}

inline Vec flatten_sample(const ScenarioSample& s) {
  Vec v(s.dp.size() + s.dq.size());
  int k = 0;
  for (int t = 0; t < s.dp.cols(); ++t)
    for (int i = 0; i < s.dp.rows(); ++i) v[k++] = s.dp(i, t);
  for (int t = 0; t < s.dq.cols(); ++t)
    for (int i = 0; i < s.dq.rows(); ++i) v[k++] = s.dq(i, t);
  return v;
}

// Physics features for stratification: per-period aggregate realized load
// plus the overall level.
inline Vec physics_features(const ScenarioSample& s, const NetworkCase& nc) {
  const int T = int(s.dp.cols());
  Vec v(T + 1);
  for (int t = 0; t < T; ++t) {
    double agg = 0.0;
    for (int i = 0; i < s.dp.rows(); ++i) agg += nc.buses[i].p_load[t] + s.dp(i, t);
    v[t] = agg;
  }
  v[T] = v.head(T).sum() / double(T);
  return v;
}

struct SelectionResult {
  std::string strategy;
  std::uint64_t seed = 0;
  int initial = 0;
  std::vector<int> ids;        // selection order
  std::vector<double> scores;  // per-step dissimilarity score (0 for the initial pick)
};

namespace detail {

inline void check_selection_args(std::size_t pool, int d, int initial) {
  if (d < 1 || std::size_t(d) > pool)
    throw ValidationError("selection size out of range");
  if (initial < 0 || std::size_t(initial) >= pool)
    throw ValidationError("initial sample not in pool");
}

}  // namespace detail

// Greedy dissimilarity-based selection: each step adds the candidate with the
// largest mean distance to everything already selected; ties break to the
// lowest id.
inline SelectionResult dbs_select(const std::vector<Vec>& features, int d, int initial) {
  detail::check_selection_args(features.size(), d, initial);
  const int n = int(features.size());
  SelectionResult res;
  res.strategy = "DBS";
  res.initial = initial;
  std::vector<bool> taken(n, false);
  std::vector<double> dist_sum(n, 0.0);
  auto add = [&](int id, double score) {
    taken[id] = true;
    res.ids.push_back(id);
    res.scores.push_back(score);
    for (int c = 0; c < n; ++c)
      if (!taken[c]) dist_sum[c] += dissimilarity(features[id], features[c]);
  };
  add(initial, 0.0);
  while (int(res.ids.size()) < d) {
    int best = -1;
    double best_mean = -1.0;
    for (int c = 0; c < n; ++c) {
      if (taken[c]) continue;
      double mean = dist_sum[c] / double(res.ids.size());
      if (mean > best_mean + 0.0) {
        best_mean = mean;
        best = c;
      }
    }
    add(best, best_mean);
  }
  return res;
}

enum class RlsMode { Greedy, Stochastic };

// Transition probabilities from the current state over candidate set H,
// proportional to pairwise dissimilarity.
inline std::vector<double> rls_transition_probabilities(const Vec& current,
                                                        const std::vector<Vec>& candidates) {
  std::vector<double> d(candidates.size());
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    d[i] = dissimilarity(current, candidates[i]);
    total += d[i];
  }
  if (total <= 0.0) {  // all candidates coincide with the current state
    double u = candidates.empty() ? 0.0 : 1.0 / double(candidates.size());
    std::fill(d.begin(), d.end(), u);
    return d;
  }
  for (auto& v : d) v /= total;
  return d;
}

// Sequential walk: the next sample is the one most dissimilar from the
// current sample only (greedy) or drawn from the normalized-distance
// transition rule (stochastic).
inline SelectionResult rls_select(const std::vector<Vec>& features, int d, int initial,
                                  RlsMode mode, std::uint64_t seed) {
  detail::check_selection_args(features.size(), d, initial);
  const int n = int(features.size());
  SelectionResult res;
  res.strategy = "RLS";
  res.seed = seed;
  res.initial = initial;
  Rng rng(domain_seed(seed, SeedDomain::Sampling));
  std::vector<bool> taken(n, false);
  int current = initial;
  taken[current] = true;
  res.ids.push_back(current);
  res.scores.push_back(0.0);
  while (int(res.ids.size()) < d) {
    int next = -1;
    double score = 0.0;
    if (mode == RlsMode::Greedy) {
      double best = -1.0;
      for (int c = 0; c < n; ++c) {
        if (taken[c]) continue;
        double dist = dissimilarity(features[current], features[c]);
        if (dist > best) {
          best = dist;
          next = c;
        }
      }
      score = best;
    } else {
      std::vector<int> cand;
      std::vector<Vec> cand_feats;
      for (int c = 0; c < n; ++c)
        if (!taken[c]) {
          cand.push_back(c);
          cand_feats.push_back(features[c]);
        }
      auto pi = rls_transition_probabilities(features[current], cand_feats);
      double u = rng.next_double();
      double acc = 0.0;
      next = cand.back();
      for (std::size_t k = 0; k < cand.size(); ++k) {
        acc += pi[k];
        if (u < acc) {
          next = cand[k];
          break;
        }
      }
      score = dissimilarity(features[current], features[next]);
    }
    taken[next] = true;
    res.ids.push_back(next);
    res.scores.push_back(score);
    current = next;
  }
  return res;
}

// Lloyd k-means with k-means++ seeding; deterministic under seed, ties break
// to the lowest index.
inline std::vector<int> kmeans_assign(const std::vector<Vec>& points, int k,
                                      std::uint64_t seed, int max_iter = 100) {
  const int n = int(points.size());
  if (k < 1) throw ValidationError("cluster count must be >= 1");
  if (k > n) throw ValidationError("cluster count exceeds pool size");
  Rng rng(domain_seed(seed, SeedDomain::Sampling));

  std::vector<Vec> centers;
  centers.push_back(points[rng.next_below(n)]);
  std::vector<double> d2(n);
  while (int(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& c : centers) best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total <= 0.0) {
      pick = int(rng.next_below(n));
    } else {
      double u = rng.next_double() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(points[pick]);
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        double dist = (points[i] - centers[c]).squaredNorm();
        if (dist < bd - 1e-15) {
          bd = dist;
          best = c;
        }
      }
      if (best != assign[i]) {
        assign[i] = best;
        changed = true;
      }
    }
    for (int c = 0; c < k; ++c) {
      Vec sum = Vec::Zero(points[0].size());
      int cnt = 0;
      for (int i = 0; i < n; ++i)
        if (assign[i] == c) {
          sum += points[i];
          ++cnt;
        }
      if (cnt > 0) centers[c] = sum / double(cnt);
    }
    if (!changed) break;
  }
  return assign;
}

// Physics-guided stratification of the pool. Returns cluster membership as
// lists of scenario indices, ordered by (size descending, lowest id).
inline std::vector<std::vector<int>> pgs_partition(const std::vector<ScenarioSample>& pool,
                                                   const NetworkCase& nc, int k,
                                                   std::uint64_t seed) {
  if (pool.empty()) throw ValidationError("empty pool");
  std::vector<Vec> feats;
  feats.reserve(pool.size());
  for (const auto& s : pool) feats.push_back(physics_features(s, nc));
  auto assign = kmeans_assign(feats, k, seed);
  std::vector<std::vector<int>> clusters(k);
  for (int i = 0; i < int(pool.size()); ++i) clusters[assign[i]].push_back(i);
  clusters.erase(std::remove_if(clusters.begin(), clusters.end(),
                                [](const auto& c) { return c.empty(); }),
                 clusters.end());
  std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return clusters;
}

// Largest-remainder apportionment of d over cluster sizes; quotas sum to d
// and never exceed a cluster's size.
inline std::vector<int> cluster_quotas(const std::vector<std::vector<int>>& clusters, int d) {
  int total = 0;
  for (const auto& c : clusters) total += int(c.size());
  if (d > total) throw ValidationError("selection size exceeds pool size");
  const int k = int(clusters.size());
  std::vector<int> quota(k, 0);
  std::vector<std::pair<double, int>> rem(k);
  int assigned = 0;
  for (int c = 0; c < k; ++c) {
    double exact = double(d) * double(clusters[c].size()) / double(total);
    quota[c] = int(std::floor(exact));
    quota[c] = std::min(quota[c], int(clusters[c].size()));
    rem[c] = {exact - std::floor(exact), c};
    assigned += quota[c];
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  int at = 0;
  while (assigned < d) {
    int c = rem[at % k].second;
    if (quota[c] < int(clusters[c].size())) {
      ++quota[c];
      ++assigned;
    }
    ++at;
  }
  return quota;
}

enum class HybridPipeline { HS1, HS2 };  // PGS + DBS, PGS + RLS

// Two-stage hybrid sampling: stratify with PGS, then run the learning-based
// selector inside each cluster with proportional quotas. Each cluster starts
// from its lowest scenario id; cluster outputs are merged round-robin so that
// early prefixes already span the strata.
inline SelectionResult hybrid_select(const std::vector<ScenarioSample>& pool,
                                     const NetworkCase& nc, HybridPipeline pipeline,
                                     int d, int k, std::uint64_t seed,
                                     RlsMode mode = RlsMode::Greedy) {
  if (d < 1 || d > int(pool.size())) throw ValidationError("selection size out of range");
  auto clusters = pgs_partition(pool, nc, std::min(k, int(pool.size())), seed);
  auto quota = cluster_quotas(clusters, d);

  std::vector<SelectionResult> parts;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (quota[c] == 0) {
      parts.emplace_back();
      continue;
    }
    std::vector<Vec> feats;
    for (int id : clusters[c]) feats.push_back(flatten_sample(pool[id]));
    SelectionResult local =
        pipeline == HybridPipeline::HS1
            ? dbs_select(feats, quota[c], 0)
            : rls_select(feats, quota[c], 0, mode, derive_seed(seed, c));
    // map local indices back to scenario ids
    for (auto& id : local.ids) id = clusters[c][id];
    parts.push_back(std::move(local));
  }

  SelectionResult res;
  res.strategy = pipeline == HybridPipeline::HS1 ? "HS1" : "HS2";
  res.seed = seed;
  res.initial = parts.empty() || parts[0].ids.empty() ? 0 : parts[0].ids[0];
  for (std::size_t at = 0; int(res.ids.size()) < d; ++at) {
    auto& part = parts[at % parts.size()];
    std::size_t step = at / parts.size();
    if (step < part.ids.size()) {
      res.ids.push_back(part.ids[step]);
      res.scores.push_back(part.scores[step]);
    }
  }
  return res;
}

// Seeded Fisher-Yates order over the whole pool, truncated to d.
inline SelectionResult random_select(int pool_size, int d, std::uint64_t seed) {
  if (d < 1 || d > pool_size) throw ValidationError("selection size out of range");
  std::vector<int> ids(pool_size);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(domain_seed(seed, SeedDomain::Sampling));
  for (int i = pool_size - 1; i > 0; --i)
    std::swap(ids[i], ids[rng.next_below(std::uint64_t(i) + 1)]);
  SelectionResult res;
  res.strategy = "RANDOM";
  res.seed = seed;
  res.initial = ids[0];
  res.ids.assign(ids.begin(), ids.begin() + d);
  res.scores.assign(d, 0.0);
  return res;
}

inline void save_selection(const SelectionResult& sel, const std::string& path) {
  nlohmann::json j;
  j["strategy"] = sel.strategy;
  j["seed"] = sel.seed;
  j["initial"] = sel.initial;
  j["ids"] = sel.ids;
  j["scores"] = sel.scores;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump(2);
}

inline SelectionResult load_selection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open selection '" + path + "'");
  nlohmann::json j;
  in >> j;
  SelectionResult sel;
  sel.strategy = j.at("strategy").get<std::string>();
  sel.seed = j.at("seed").get<std::uint64_t>();
  sel.initial = j.at("initial").get<int>();
  sel.ids = j.at("ids").get<std::vector<int>>();
  sel.scores = j.at("scores").get<std::vector<double>>();
  return sel;
}

}  // namespace ccgrid
