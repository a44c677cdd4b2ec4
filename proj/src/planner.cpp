#include "veda/planner.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <unordered_map>

#include "veda/error.hpp"

namespace veda {

namespace {

using LocBlocks = std::unordered_map<std::uint32_t, std::vector<std::uint32_t>>;

LocBlocks invert(const CoverProblem& p) {
  LocBlocks m;
  for (std::uint32_t b = 0; b < p.choices.size(); ++b) {
    if (p.choices[b].empty()) throw CoverageError("pending block " + std::to_string(b) + " has no location");
    for (auto l : p.choices[b]) m[l].push_back(b);
  }
  return m;
}

double sum_cost(const CoverProblem& p, std::span<const std::uint32_t> chosen) {
  double s = 0;
  for (auto l : chosen) s += p.cost.at(l);
  return s;
}

/// Drops picks whose blocks are all covered by other picks, most expensive first.
void prune(const CoverProblem& p, const LocBlocks& lb, std::vector<std::uint32_t>& chosen) {
  std::vector<int> count(p.choices.size(), 0);
  for (auto l : chosen)
    for (auto b : lb.at(l)) ++count[b];
  std::vector<std::uint32_t> order = chosen;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return p.cost[x] > p.cost[y]; });
  for (auto l : order) {
    const auto& bs = lb.at(l);
    if (std::all_of(bs.begin(), bs.end(), [&](auto b) { return count[b] > 1; })) {
      for (auto b : bs) --count[b];
      chosen.erase(std::find(chosen.begin(), chosen.end(), l));
    }
  }
}

std::vector<std::uint32_t> mandatory(const CoverProblem& p) {
  std::vector<std::uint32_t> m;
  for (const auto& c : p.choices)
    if (c.size() == 1) m.push_back(c[0]);
  std::sort(m.begin(), m.end());
  m.erase(std::unique(m.begin(), m.end()), m.end());
  return m;
}

void mark(const LocBlocks& lb, std::uint32_t l, std::vector<char>& covered) {
  for (auto b : lb.at(l)) covered[b] = 1;
}

CoverResult finish(const CoverProblem& p, const LocBlocks& lb, std::vector<std::uint32_t> chosen, bool exact) {
  prune(p, lb, chosen);
  std::sort(chosen.begin(), chosen.end());
  CoverResult r;
  r.objective = sum_cost(p, chosen);
  r.chosen = std::move(chosen);
  r.exact = exact;
  return r;
}

}  // namespace

bool covers(const CoverProblem& p, std::span<const std::uint32_t> chosen) {
  for (const auto& c : p.choices)
    if (std::none_of(c.begin(), c.end(), [&](auto l) { return std::find(chosen.begin(), chosen.end(), l) != chosen.end(); }))
      return false;
  return true;
}

CoverResult greedy_cover(const CoverProblem& p, const std::vector<std::uint32_t>* incumbent) {
  const auto lb = invert(p);
  const auto must = mandatory(p);
  std::vector<char> base(p.choices.size(), 0);
  for (auto l : must) mark(lb, l, base);

  // Coverage per unit cost.
  std::vector<std::uint32_t> ga = must;
  {
    auto covered = base;
    std::size_t left = std::count(covered.begin(), covered.end(), 0);
    while (left > 0) {
      std::uint32_t best = 0;
      double best_score = -1;
      for (const auto& [l, bs] : lb) {
        std::size_t gain = 0;
        for (auto b : bs) gain += !covered[b];
        if (gain == 0) continue;
        double score = double(gain) / std::max(p.cost[l], 1e-12);
        if (score > best_score || (score == best_score && l < best)) best = l, best_score = score;
      }
      for (auto b : lb.at(best)) left -= !covered[b];
      mark(lb, best, covered);
      ga.push_back(best);
    }
  }
  auto a = finish(p, lb, std::move(ga), false);

  // Cheapest location per uncovered block.
  std::vector<std::uint32_t> gb = must;
  {
    auto covered = base;
    for (std::uint32_t b = 0; b < p.choices.size(); ++b) {
      if (covered[b]) continue;
      auto best = *std::min_element(p.choices[b].begin(), p.choices[b].end(), [&](auto x, auto y) {
        return p.cost[x] < p.cost[y] || (p.cost[x] == p.cost[y] && x < y);
      });
      mark(lb, best, covered);
      gb.push_back(best);
    }
  }
  auto b = finish(p, lb, std::move(gb), false);
  CoverResult out = b.objective < a.objective ? std::move(b) : std::move(a);

  if (incumbent && covers(p, *incumbent)) {
    std::vector<std::uint32_t> inc;
    for (auto l : *incumbent)
      if (lb.count(l)) inc.push_back(l);
    auto c = finish(p, lb, std::move(inc), false);
    if (c.objective < out.objective) out = std::move(c);
  }
  return out;
}

CoverResult exact_cover(const CoverProblem& p, std::size_t limit) {
  const auto lb = invert(p);
  const auto must = mandatory(p);
  std::vector<int> count(p.choices.size(), 0);
  for (auto l : must)
    for (auto b : lb.at(l)) ++count[b];
  std::size_t free_vars = 0;
  for (const auto& [l, bs] : lb)
    if (!std::binary_search(must.begin(), must.end(), l) &&
        std::any_of(bs.begin(), bs.end(), [&](auto b) { return count[b] == 0; }))
      ++free_vars;
  auto greedy = greedy_cover(p);
  if (free_vars > limit) return greedy;

  double best = greedy.objective;
  std::vector<std::uint32_t> best_set = greedy.chosen;
  std::vector<std::uint32_t> cur = must;
  double cur_cost = sum_cost(p, must);

  // Sorted choices per block so the cheapest branch is tried first.
  std::vector<std::vector<std::uint32_t>> sorted = p.choices;
  for (auto& c : sorted) std::sort(c.begin(), c.end(), [&](auto x, auto y) { return p.cost[x] < p.cost[y]; });

  auto lower_bound = [&]() {
    double m = 0;
    for (std::uint32_t b = 0; b < sorted.size(); ++b)
      if (count[b] == 0) m = std::max(m, p.cost[sorted[b][0]]);
    return m;
  };

  // Visits beyond this many search nodes keep the best cover found so far.
  std::size_t budget = 200000;
  bool complete = true;
  auto rec = [&](auto&& self) -> void {
    if (budget == 0) {
      complete = false;
      return;
    }
    --budget;
    std::int64_t pick = -1;
    for (std::uint32_t b = 0; b < sorted.size(); ++b)
      if (count[b] == 0 && (pick < 0 || sorted[b].size() < sorted[pick].size())) pick = b;
    if (pick < 0) {
      if (cur_cost < best - 1e-12) best = cur_cost, best_set = cur;
      return;
    }
    if (cur_cost + lower_bound() >= best - 1e-12) return;
    for (auto l : sorted[pick]) {
      cur.push_back(l);
      cur_cost += p.cost[l];
      for (auto b : lb.at(l)) ++count[b];
      self(self);
      for (auto b : lb.at(l)) --count[b];
      cur_cost -= p.cost[l];
      cur.pop_back();
    }
  };
  rec(rec);
  return finish(p, lb, std::move(best_set), complete);
}

std::vector<std::vector<std::uint32_t>> build_phi(const std::vector<std::vector<std::uint32_t>>& location_blocks,
                                                  std::size_t n_blocks) {
  std::vector<std::vector<std::uint32_t>> phi(n_blocks);
  for (std::uint32_t l = 0; l < location_blocks.size(); ++l)
    for (auto b : location_blocks[l]) {
      if (b >= n_blocks) throw InputError("location " + std::to_string(l) + " names an unknown block");
      if (phi[b].empty() || phi[b].back() != l) phi[b].push_back(l);
    }
  for (std::size_t b = 0; b < n_blocks; ++b)
    if (phi[b].empty()) throw CoverageError("exclusive block " + std::to_string(b) + " is held by no node");
  return phi;
}

}  // namespace veda
