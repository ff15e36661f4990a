#include "parclust/oracle.hpp"

#include <algorithm>

namespace parclust::oracle {

namespace {

void guard(const Dataset& data) {
  if (data.size() > kMaxPoints)
    throw InvalidInput("oracle is limited to " + std::to_string(kMaxPoints) + " points, got " +
                       std::to_string(data.size()));
}

std::vector<CandidatePair> all_pairs_sorted(const Dataset& data, MetricKind metric) {
  const std::size_t n = data.size();
  std::vector<CandidatePair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      pairs.push_back({internal_distance(metric, data.row(a), data.row(b)),
                       static_cast<Index>(a), static_cast<Index>(b)});
  std::sort(pairs.begin(), pairs.end(), PairKeyLess{});
  return pairs;
}

// Plain label array: label[i] is the cluster's smallest member.
struct Labels {
  std::vector<Index> label;
  std::vector<std::size_t> size;  // indexed by label
  std::size_t count;

  explicit Labels(std::size_t n) : label(n), size(n, 1), count(n) {
    for (std::size_t i = 0; i < n; ++i) label[i] = static_cast<Index>(i);
  }

  void join(Index keep, Index drop) {
    for (auto& l : label)
      if (l == drop) l = keep;
    size[keep] += size[drop];
    size[drop] = 0;
    --count;
  }
};

struct Limits {
  std::optional<double> threshold;
  const ConstraintSet& cs;

  bool distance_ok(double dist) const { return !threshold || !(dist > *threshold); }
  bool sizes_ok(std::size_t sa, std::size_t sb) const {
    if (cs.kl2 && (sa > *cs.kl2 || sb > *cs.kl2)) return false;
    if (cs.kl3 && sa + sb > *cs.kl3) return false;
    return true;
  }
  bool stop(std::size_t count) const { return cs.kl1 && count < *cs.kl1; }
};

// Unites the pair if the live state allows it; returns true when merged.
bool try_merge(Labels& st, const Limits& lim, const CandidatePair& c, std::size_t round,
               std::vector<OracleMerge>& out) {
  const Index la = st.label[c.a];
  const Index lb = st.label[c.b];
  if (la == lb) return false;
  if (!lim.distance_ok(c.dist)) return false;
  if (!lim.sizes_ok(st.size[la], st.size[lb])) return false;
  const Index keep = std::min(la, lb);
  const Index drop = std::max(la, lb);
  out.push_back({c.dist, c.a, c.b, st.size[la], st.size[lb], keep, drop, round});
  st.join(keep, drop);
  return true;
}

Limits limits_for(const ConstraintSet& cs, MetricKind metric) {
  Limits lim{std::nullopt, cs};
  if (cs.dmax) lim.threshold = effective_threshold(metric, *cs.dmax);
  return lim;
}

}  // namespace

OracleResult single_linkage(const Dataset& data, const ConstraintSet& constraints,
                            MetricKind metric) {
  guard(data);
  constraints.validate();
  const Limits lim = limits_for(constraints, metric);
  Labels st(data.size());
  OracleResult result;
  if (!lim.stop(st.count)) {
    for (const auto& c : all_pairs_sorted(data, metric)) {
      if (st.count == 1) break;
      if (try_merge(st, lim, c, 0, result.merges) && lim.stop(st.count)) break;
    }
  }
  result.assignments = st.label;
  return result;
}

OracleResult batched_single_linkage(const Dataset& data, const ConstraintSet& constraints,
                                    MetricKind metric, std::size_t P) {
  guard(data);
  constraints.validate();
  if (P == 0) throw InvalidInput("batch size must be at least 1");
  const Limits lim = limits_for(constraints, metric);
  const auto pairs = all_pairs_sorted(data, metric);
  Labels st(data.size());
  OracleResult result;
  std::size_t round = 0;
  while (!lim.stop(st.count) && st.count > 1) {
    // Round-start copy: eligibility and kl4 priority use these sizes.
    const Labels start = st;
    std::vector<CandidatePair> batch;
    for (const auto& c : pairs) {
      if (batch.size() == P) break;
      const Index la = start.label[c.a], lb = start.label[c.b];
      if (la == lb || !lim.distance_ok(c.dist) || !lim.sizes_ok(start.size[la], start.size[lb]))
        continue;
      batch.push_back(c);
    }
    if (batch.empty()) break;
    ++round;

    std::vector<CandidatePair> ordered;
    if (constraints.kl4) {
      auto small = [&](const CandidatePair& c) {
        return start.size[start.label[c.a]] < *constraints.kl4 ||
               start.size[start.label[c.b]] < *constraints.kl4;
      };
      for (const auto& c : batch)
        if (small(c)) ordered.push_back(c);
      for (const auto& c : batch)
        if (!small(c)) ordered.push_back(c);
    } else {
      ordered = batch;
    }

    bool halted = false;
    for (const auto& c : ordered) {
      if (try_merge(st, lim, c, round, result.merges) && lim.stop(st.count)) {
        halted = true;
        break;
      }
    }
    if (halted) break;
  }
  result.assignments = st.label;
  return result;
}

TopPBuffer top_p(const Dataset& data, const EligibilitySnapshot& s, std::size_t P) {
  guard(data);
  if (P == 0) throw InvalidInput("batch size must be at least 1");
  std::vector<CandidatePair> kept;
  for (const auto& c : all_pairs_sorted(data, s.metric)) {
    if (kept.size() == P) break;
    const Index ra = s.root[c.a], rb = s.root[c.b];
    if (ra == rb) continue;
    if (s.threshold && c.dist > *s.threshold) continue;
    const std::size_t sa = s.size[ra], sb = s.size[rb];
    if (s.constraints.kl2 && std::max(sa, sb) > *s.constraints.kl2) continue;
    if (s.constraints.kl3 && sa + sb > *s.constraints.kl3) continue;
    kept.push_back(c);
  }
  return TopPBuffer(P, std::move(kept));
}

}  // namespace parclust::oracle
