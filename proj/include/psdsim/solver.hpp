#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "psdsim/constraints.hpp"
#include "psdsim/errors.hpp"
#include "psdsim/strategy.hpp"
#include "psdsim/time.hpp"
#include "psdsim/topology.hpp"

namespace psdsim {

// The simultaneity system is a simple temporal problem: every constraint says
// the difference of two emission epochs must land in an interval whose width
// is the adjustable delay range on that BSA. Feasibility is decided by
// shortest paths over the difference graph; an infeasible system yields a
// negative cycle, which translates directly into a human-checkable
// certificate (a loop whose fixed imbalance exceeds its adjustable range, or
// a single constraint that runs out of range against pinned epochs).

struct TimingAssignment {
  std::map<std::string, ps_t> values;     // variable id -> picoseconds
  std::map<std::string, ps_t> residuals;  // bsa id -> final delta

  bool operator==(const TimingAssignment&) const = default;
};

struct BoundsCertificate {
  std::string bsa;
  ps_t required = 0;      // delta the ODL pair would have to supply
  ps_t available_lo = 0;  // achievable range of (right ODL - left ODL)
  ps_t available_hi = 0;
  bool modular = false;
};

struct CycleCertificate {
  std::vector<std::string> cycle_links;  // quantum loop, traversal order
  ps_t fixed_imbalance = 0;              // signed fixed-delay sum around the loop
  ps_t adjustable_lo = 0;                // achievable range of the compensating sum
  ps_t adjustable_hi = 0;
  ps_t total_adjustable_range = 0;       // max |achievable|
  bool modular = false;
  ps_t period = 0;
};

enum class SolveStatus { Feasible, InfeasibleBounds, InfeasibleCycle };

struct SolveResult {
  SolveStatus status = SolveStatus::Feasible;
  std::optional<TimingAssignment> assignment;
  std::optional<BoundsCertificate> bounds;
  std::optional<CycleCertificate> cycle;

  bool feasible() const { return status == SolveStatus::Feasible; }
};

// Signed sum of propagation delays around a closed quantum loop. Photon paths
// traversed in their emission direction count positive, paths walked against
// it count negative.
inline ps_t cycle_imbalance(const NetworkTopology& topo, const std::vector<std::string>& links) {
  if (links.empty()) throw NotACycle("empty link list");
  const Link* first = topo.find_link(links.front());
  if (!first) throw NotACycle("unknown link " + links.front());
  std::string current = first->from.node;
  const std::string start = current;
  ps_t total = 0;
  for (const auto& lid : links) {
    const Link* l = topo.find_link(lid);
    if (!l) throw NotACycle("unknown link " + lid);
    if (l->channel != ChannelKind::Quantum) throw NotACycle(lid + " is not a quantum link");
    if (l->from.node == current) {
      total += propagation_delay_ps(*l);
      current = l->to.node;
    } else if (l->to.node == current) {
      total -= propagation_delay_ps(*l);
      current = l->from.node;
    } else {
      throw NotACycle("link " + lid + " does not continue the loop at " + current);
    }
  }
  if (current != start) throw NotACycle("link list does not close");
  return total;
}

namespace detail {

inline constexpr ps_t dist_inf = std::numeric_limits<ps_t>::max() / 4;

// One difference term: e[u] - e[v] must lie in [lo + g, hi + g] where g is
// the fixed gap and [lo, hi] the adjustable slack. The solve tolerance widens
// the shortest-path weights but never the reported slack.
struct DiffEdge {
  int u = 0;  // the "left" vertex (origin for anchors)
  int v = 0;
  ps_t gap = 0;
  ps_t slack_lo = 0;
  ps_t slack_hi = 0;
  ps_t eps = 0;
  int constraint_index = -1;  // -1 for anchor edges
};

struct SolverGraph {
  std::vector<std::string> vertex_ids;  // sorted epoch ids; origin is index n
  std::map<std::string, int> index_of;
  std::vector<DiffEdge> edges;
  int origin = 0;
};

inline ps_t delta_lo(const ArrivalExpr& left, const ArrivalExpr& right) {
  ps_t rlo = right.odl_var ? right.odl_lo : right.odl_current;
  ps_t lhi = left.odl_var ? left.odl_hi : left.odl_current;
  return rlo - lhi;
}

inline ps_t delta_hi(const ArrivalExpr& left, const ArrivalExpr& right) {
  ps_t rhi = right.odl_var ? right.odl_hi : right.odl_current;
  ps_t llo = left.odl_var ? left.odl_lo : left.odl_current;
  return rhi - llo;
}

inline ps_t fixed_gap(const SimultaneityConstraint& c) {
  return c.right.path_fixed - c.left.path_fixed;
}

inline SolverGraph build_graph(const TimingConstraintSystem& sys, ps_t epsilon) {
  SolverGraph g;
  for (const auto& [id, info] : sys.epochs) g.vertex_ids.push_back(id);
  std::sort(g.vertex_ids.begin(), g.vertex_ids.end());
  for (int i = 0; i < static_cast<int>(g.vertex_ids.size()); ++i)
    g.index_of[g.vertex_ids[i]] = i;
  g.origin = static_cast<int>(g.vertex_ids.size());

  // Anchors pin each epoch into its own window: e[s] - e[origin] in [lo, hi].
  for (const auto& [id, info] : sys.epochs) {
    DiffEdge e;
    e.u = g.index_of.at(id);
    e.v = g.origin;
    e.gap = 0;
    e.slack_lo = info.lo();
    e.slack_hi = info.hi();
    g.edges.push_back(e);
  }

  // Constraints give e[L] - e[R] in [gap + dlo - eps, gap + dhi + eps].
  for (int ci = 0; ci < static_cast<int>(sys.constraints.size()); ++ci) {
    const auto& c = sys.constraints[static_cast<std::size_t>(ci)];
    DiffEdge e;
    e.u = g.index_of.at(c.left.source);
    e.v = g.index_of.at(c.right.source);
    e.gap = fixed_gap(c);
    e.slack_lo = delta_lo(c.left, c.right);
    e.slack_hi = delta_hi(c.left, c.right);
    e.eps = epsilon;
    e.constraint_index = ci;
    g.edges.push_back(e);
  }
  return g;
}

// All-pairs shortest paths over the <= graph. d[a][b] bounds e[b] - e[a].
inline std::vector<std::vector<ps_t>> shortest_paths(const SolverGraph& g) {
  const int n = g.origin + 1;
  std::vector<std::vector<ps_t>> d(static_cast<std::size_t>(n),
                                   std::vector<ps_t>(static_cast<std::size_t>(n), dist_inf));
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;
  auto relax_edge = [&](int from, int to, ps_t w) {
    auto& cell = d[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
    cell = std::min(cell, w);
  };
  for (const auto& e : g.edges) {
    if (e.u == e.v) continue;
    // e[u] - e[v] <= gap + hi + eps  => edge v->u with that weight
    relax_edge(e.v, e.u, e.gap + e.slack_hi + e.eps);
    // e[v] - e[u] <= -(gap + lo - eps) => edge u->v
    relax_edge(e.u, e.v, -(e.gap + e.slack_lo - e.eps));
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      const ps_t dik = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      if (dik >= dist_inf) continue;
      for (int j = 0; j < n; ++j) {
        const ps_t dkj = d[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        if (dkj >= dist_inf) continue;
        auto& cell = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        cell = std::min(cell, dik + dkj);
      }
    }
  return d;
}

// A traversal step of a violated loop: a constraint or anchor walked with a
// direction. dir +1 walks the edge from its left vertex to its right vertex.
struct CycleStep {
  const DiffEdge* edge;
  int dir;
};

// Extract one genuinely violated loop via Bellman-Ford predecessor walking.
inline std::vector<CycleStep> find_negative_cycle(const SolverGraph& g) {
  struct Arc {
    int from, to;
    ps_t w;
    const DiffEdge* edge;
    int dir;  // +1: walked left->right (uses -(gap+lo)); -1: right->left
  };
  std::vector<Arc> arcs;
  for (const auto& e : g.edges) {
    if (e.u == e.v) continue;
    arcs.push_back({e.v, e.u, e.gap + e.slack_hi + e.eps, &e, -1});
    arcs.push_back({e.u, e.v, -(e.gap + e.slack_lo - e.eps), &e, +1});
  }
  const int n = g.origin + 1;
  std::vector<ps_t> dist(static_cast<std::size_t>(n), 0);
  std::vector<int> pred_arc(static_cast<std::size_t>(n), -1);
  int touched = -1;
  for (int round = 0; round < n; ++round) {
    touched = -1;
    for (int ai = 0; ai < static_cast<int>(arcs.size()); ++ai) {
      const auto& a = arcs[static_cast<std::size_t>(ai)];
      if (dist[static_cast<std::size_t>(a.from)] + a.w < dist[static_cast<std::size_t>(a.to)]) {
        dist[static_cast<std::size_t>(a.to)] = dist[static_cast<std::size_t>(a.from)] + a.w;
        pred_arc[static_cast<std::size_t>(a.to)] = ai;
        touched = a.to;
      }
    }
    if (touched < 0) break;
  }
  if (touched < 0) return {};
  // Walk predecessors n steps to land inside the cycle, then collect it.
  int v = touched;
  for (int i = 0; i < n; ++i) v = arcs[static_cast<std::size_t>(pred_arc[static_cast<std::size_t>(v)])].from;
  std::vector<CycleStep> steps;
  int cur = v;
  do {
    const auto& a = arcs[static_cast<std::size_t>(pred_arc[static_cast<std::size_t>(cur)])];
    steps.push_back({a.edge, a.dir});
    cur = a.from;
  } while (cur != v);
  std::reverse(steps.begin(), steps.end());
  return steps;
}

// Split a required (right - left) ODL difference onto the two ports, putting
// the whole correction on the earlier photon's port and leaving the other at
// its lower bound. ODLs only add delay, so this minimizes inserted loss.
struct OdlSplit {
  ps_t left;
  ps_t right;
};

inline OdlSplit split_delta(const SimultaneityConstraint& c, ps_t delta) {
  const ps_t llo = c.left.odl_var ? c.left.odl_lo : c.left.odl_current;
  const ps_t lhi = c.left.odl_var ? c.left.odl_hi : c.left.odl_current;
  const ps_t rlo = c.right.odl_var ? c.right.odl_lo : c.right.odl_current;
  const ps_t rhi = c.right.odl_var ? c.right.odl_hi : c.right.odl_current;
  OdlSplit s{llo, rlo};
  if (delta >= rlo - llo) {
    s.left = llo;
    s.right = std::clamp(llo + delta, rlo, rhi);
  } else {
    s.right = rlo;
    s.left = std::clamp(rlo - delta, llo, lhi);
  }
  return s;
}

}  // namespace detail

// Decide feasibility and produce the canonical assignment or a certificate.
// Canonical rule: epochs are pinned in ascending id order to the value
// nearest their current setting that the remaining windows allow; per-BSA
// corrections then land on the earlier-arriving port.
inline SolveResult solve(const TimingConstraintSystem& sys, ps_t epsilon = 1) {
  if (epsilon < 0) throw ConfigError("epsilon must be >= 0");

  SolveResult result;
  TimingAssignment assignment;

  auto certify_cycle = [&](const std::vector<detail::CycleStep>& steps) {
    // Around the loop: sum dir*(gap + delta) = 0, so the adjustable deltas
    // must supply required = -sum(dir * gap).
    CycleCertificate cert;
    cert.modular = sys.mode == ConstraintMode::ModuloPeriod;
    cert.period = sys.period;
    ps_t required = 0;
    ps_t alo = 0, ahi = 0;
    bool has_anchor = false;
    int constraint_count = 0;
    for (const auto& st : steps) {
      required -= st.dir * st.edge->gap;
      if (st.dir > 0) {
        alo += st.edge->slack_lo;
        ahi += st.edge->slack_hi;
      } else {
        alo -= st.edge->slack_hi;
        ahi -= st.edge->slack_lo;
      }
      if (st.edge->constraint_index < 0)
        has_anchor = true;
      else
        ++constraint_count;
      if (st.edge->constraint_index >= 0) {
        const auto& c = sys.constraints[static_cast<std::size_t>(st.edge->constraint_index)];
        // dir +1 walks left -> right: left photon path runs with the loop.
        const auto& with = st.dir > 0 ? c.left : c.right;
        const auto& against = st.dir > 0 ? c.right : c.left;
        for (const auto& l : with.path_links) cert.cycle_links.push_back(l);
        for (auto it = against.path_links.rbegin(); it != against.path_links.rend(); ++it)
          cert.cycle_links.push_back(*it);
      }
    }
    if (has_anchor && constraint_count == 1) {
      // The loop pins one constraint against epoch windows: report it as a
      // plain out-of-range constraint instead of a topology cycle.
      for (const auto& st : steps) {
        if (st.edge->constraint_index >= 0) {
          const auto& c = sys.constraints[static_cast<std::size_t>(st.edge->constraint_index)];
          BoundsCertificate b;
          b.bsa = c.bsa;
          b.modular = cert.modular;
          const ps_t pin_l = sys.epochs.at(c.left.source).current_epoch();
          const ps_t pin_r = sys.epochs.at(c.right.source).current_epoch();
          b.required = (pin_l - pin_r) - detail::fixed_gap(c);
          b.available_lo = detail::delta_lo(c.left, c.right);
          b.available_hi = detail::delta_hi(c.left, c.right);
          result.status = SolveStatus::InfeasibleBounds;
          result.bounds = b;
          return;
        }
      }
    }
    cert.fixed_imbalance = required;
    cert.adjustable_lo = alo;
    cert.adjustable_hi = ahi;
    cert.total_adjustable_range = std::max(std::abs(alo), std::abs(ahi));
    result.status = SolveStatus::InfeasibleCycle;
    result.cycle = cert;
  };

  if (sys.mode == ConstraintMode::Exact) {
    detail::SolverGraph graph = detail::build_graph(sys, epsilon);
    auto dist = detail::shortest_paths(graph);
    const int n = graph.origin + 1;
    bool negative = false;
    for (int v = 0; v < n && !negative; ++v)
      negative = dist[static_cast<std::size_t>(v)][static_cast<std::size_t>(v)] < 0;

    // Pin against the unwidened windows whenever an exact solution exists, so
    // residuals only consume the tolerance when they have to.
    if (!negative && epsilon > 0) {
      detail::SolverGraph tight_graph = detail::build_graph(sys, 0);
      auto tight = detail::shortest_paths(tight_graph);
      bool tight_negative = false;
      for (int v = 0; v < n && !tight_negative; ++v)
        tight_negative = tight[static_cast<std::size_t>(v)][static_cast<std::size_t>(v)] < 0;
      if (!tight_negative) dist = std::move(tight);
    }
    // Self-loop constraints never enter the graph; check them directly.
    for (const auto& c : sys.constraints) {
      if (c.left.source != c.right.source) continue;
      const ps_t need = -detail::fixed_gap(c);
      if (need < detail::delta_lo(c.left, c.right) - epsilon ||
          need > detail::delta_hi(c.left, c.right) + epsilon) {
        BoundsCertificate b;
        b.bsa = c.bsa;
        b.required = need;
        b.available_lo = detail::delta_lo(c.left, c.right);
        b.available_hi = detail::delta_hi(c.left, c.right);
        result.status = SolveStatus::InfeasibleBounds;
        result.bounds = b;
        return result;
      }
    }
    if (negative) {
      auto steps = detail::find_negative_cycle(graph);
      if (steps.empty()) throw Error("internal: negative cycle detected but not extracted");
      certify_cycle(steps);
      return result;
    }

    // Windows, then deterministic pinning in ascending id order.
    const int origin = graph.origin;
    std::vector<ps_t> lb(static_cast<std::size_t>(n)), ub(static_cast<std::size_t>(n));
    for (int v = 0; v < origin; ++v) {
      const ps_t up = dist[static_cast<std::size_t>(origin)][static_cast<std::size_t>(v)];
      const ps_t down = dist[static_cast<std::size_t>(v)][static_cast<std::size_t>(origin)];
      ub[static_cast<std::size_t>(v)] = up >= detail::dist_inf ? free_epoch_range : up;
      lb[static_cast<std::size_t>(v)] = down >= detail::dist_inf ? -free_epoch_range : -down;
    }
    std::vector<ps_t> value(static_cast<std::size_t>(n), 0);
    for (int v = 0; v < origin; ++v) {
      const auto& info = sys.epochs.at(graph.vertex_ids[static_cast<std::size_t>(v)]);
      ps_t val = std::clamp(info.current_epoch(), lb[static_cast<std::size_t>(v)],
                            ub[static_cast<std::size_t>(v)]);
      value[static_cast<std::size_t>(v)] = val;
      for (int t = v + 1; t < origin; ++t) {
        const ps_t fwd = dist[static_cast<std::size_t>(v)][static_cast<std::size_t>(t)];
        const ps_t back = dist[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)];
        if (fwd < detail::dist_inf)
          ub[static_cast<std::size_t>(t)] = std::min(ub[static_cast<std::size_t>(t)], val + fwd);
        if (back < detail::dist_inf)
          lb[static_cast<std::size_t>(t)] = std::max(lb[static_cast<std::size_t>(t)], val - back);
      }
    }

    std::map<std::string, ps_t> epoch_value;
    for (int v = 0; v < origin; ++v)
      epoch_value[graph.vertex_ids[static_cast<std::size_t>(v)]] = value[static_cast<std::size_t>(v)];

    for (const auto& [id, info] : sys.epochs)
      if (info.var) assignment.values[*info.var] = epoch_value.at(id) - info.base;

    for (const auto& c : sys.constraints) {
      const ps_t el = epoch_value.at(c.left.source);
      const ps_t er = epoch_value.at(c.right.source);
      const ps_t delta_req = (el - er) - detail::fixed_gap(c);
      auto split = detail::split_delta(c, delta_req);
      if (c.left.odl_var) assignment.values[*c.left.odl_var] = split.left;
      if (c.right.odl_var) assignment.values[*c.right.odl_var] = split.right;
      const ps_t residual = (el + c.left.path_fixed + split.left) -
                            (er + c.right.path_fixed + split.right);
      assignment.residuals[c.bsa] = residual;
      if (std::abs(residual) > epsilon)
        throw Error("internal: residual exceeds epsilon at " + c.bsa);
    }
  } else {
    // Modulo-period mode. Pinned epochs resolve each constraint locally; free
    // epochs are assigned along a spanning forest with slot wraps absorbed by
    // the period, and every non-tree edge is then checked modulo the period.
    const ps_t period = sys.period;
    if (period <= 0) throw ConfigError("modular mode requires a positive rep_period");

    std::map<std::string, ps_t> epoch_value;
    std::map<std::string, bool> assigned;
    for (const auto& [id, info] : sys.epochs) {
      if (!info.var) {
        epoch_value[id] = info.current_epoch();
        assigned[id] = true;
      } else {
        assigned[id] = false;
      }
    }

    auto reduce_into = [&](ps_t raw, ps_t lo) {
      ps_t r = (raw - lo) % period;
      if (r < 0) r += period;
      return lo + r;
    };

    // Deterministic forest: pinned epochs seed the search, remaining free
    // components grow from their lowest id. Tree edges are discovered with
    // exactly one endpoint assigned; everything else becomes a check edge.
    std::vector<const SimultaneityConstraint*> tree_edges, check_edges;
    std::set<std::string> visited;
    std::vector<std::string> order;
    for (const auto& [id, info] : sys.epochs) order.push_back(id);
    std::sort(order.begin(), order.end());

    std::vector<std::string> queue;
    auto assign_across = [&](const SimultaneityConstraint& c,
                             const std::string& unknown) -> bool {
      const ps_t d0 = (c.right.odl_var ? c.right.odl_lo : c.right.odl_current) -
                      (c.left.odl_var ? c.left.odl_lo : c.left.odl_current);
      const bool solving_right = unknown == c.right.source;
      const std::string known = solving_right ? c.left.source : c.right.source;
      const auto& info = sys.epochs.at(unknown);
      const ps_t raw = solving_right ? epoch_value.at(known) - detail::fixed_gap(c) - d0
                                     : epoch_value.at(known) + detail::fixed_gap(c) + d0;
      const ps_t val = reduce_into(raw, info.lo());
      if (val > info.hi()) {
        BoundsCertificate b;
        b.bsa = c.bsa;
        b.modular = true;
        b.required = d0;
        b.available_lo = detail::delta_lo(c.left, c.right);
        b.available_hi = detail::delta_hi(c.left, c.right);
        result.status = SolveStatus::InfeasibleBounds;
        result.bounds = b;
        return false;
      }
      epoch_value[unknown] = val;
      return true;
    };
    auto grow = [&]() -> bool {
      while (!queue.empty()) {
        std::string u = queue.front();
        queue.erase(queue.begin());
        for (const auto& c : sys.constraints) {
          if (c.left.source == c.right.source) continue;
          if (c.left.source != u && c.right.source != u) continue;
          const std::string other = c.left.source == u ? c.right.source : c.left.source;
          if (visited.count(other)) continue;
          visited.insert(other);
          tree_edges.push_back(&c);
          if (!assign_across(c, other)) return false;
          queue.push_back(other);
        }
      }
      return true;
    };
    for (const auto& id : order) {
      if (assigned.at(id)) {
        visited.insert(id);
        queue.push_back(id);
      }
    }
    if (!grow()) return result;
    for (const auto& id : order) {
      if (visited.count(id)) continue;
      const auto& info = sys.epochs.at(id);
      epoch_value[id] = std::clamp(info.current_epoch(), info.lo(), info.hi());
      visited.insert(id);
      queue.push_back(id);
      if (!grow()) return result;
    }
    for (const auto& c : sys.constraints) {
      bool is_tree = false;
      for (const auto* t : tree_edges) is_tree |= (t == &c);
      if (!is_tree) check_edges.push_back(&c);
    }

    for (const auto& [id, info] : sys.epochs)
      if (info.var) assignment.values[*info.var] = epoch_value.at(id) - info.base;

    for (const auto& c : sys.constraints) {
      const ps_t el = epoch_value.at(c.left.source);
      const ps_t er = epoch_value.at(c.right.source);
      const ps_t dlo = detail::delta_lo(c.left, c.right);
      const ps_t dhi = detail::delta_hi(c.left, c.right);
      ps_t need = reduce_into((el - er) - detail::fixed_gap(c), dlo - epsilon);
      if (need > dhi + epsilon) {
        // Only a genuine back edge (a tree path joins its endpoints) names a
        // loop; everything else is a plain out-of-range constraint.
        bool is_check = false;
        for (const auto* e : check_edges) is_check |= (e == &c && c.left.source != c.right.source);
        if (is_check && !tree_edges.empty()) {
          // A closing edge of a loop failed modulo the period: certify the
          // loop through the spanning tree.
          detail::SolverGraph graph = detail::build_graph(sys, epsilon);
          auto edge_for = [&](const SimultaneityConstraint* target) -> const detail::DiffEdge* {
            for (const auto& e : graph.edges)
              if (e.constraint_index >= 0 &&
                  &sys.constraints[static_cast<std::size_t>(e.constraint_index)] == target)
                return &e;
            return nullptr;
          };
          // Path from left.source to right.source over tree edges (DFS).
          std::map<std::string, std::vector<std::pair<const SimultaneityConstraint*, int>>> adj;
          for (const auto* t : tree_edges) {
            adj[t->left.source].push_back({t, +1});
            adj[t->right.source].push_back({t, -1});
          }
          std::map<std::string, std::pair<const SimultaneityConstraint*, int>> parent;
          std::vector<std::string> stack{c.right.source};
          std::set<std::string> seen{c.right.source};
          while (!stack.empty()) {
            std::string u = stack.back();
            stack.pop_back();
            if (u == c.left.source) break;
            for (auto& [t, dir] : adj[u]) {
              const std::string next = dir > 0 ? t->right.source : t->left.source;
              if (seen.count(next)) continue;
              seen.insert(next);
              parent[next] = {t, dir};
              stack.push_back(next);
            }
          }
          std::vector<detail::CycleStep> rev;
          std::string cur = c.left.source;
          while (cur != c.right.source && parent.count(cur)) {
            auto [t, dir] = parent.at(cur);
            rev.push_back({edge_for(t), dir});
            cur = dir > 0 ? t->left.source : t->right.source;
          }
          if (cur == c.right.source) {
            std::vector<detail::CycleStep> steps;
            steps.push_back({edge_for(&c), +1});
            for (auto it = rev.rbegin(); it != rev.rend(); ++it) steps.push_back(*it);
            certify_cycle(steps);
            if (result.status == SolveStatus::InfeasibleCycle && result.cycle) {
              result.cycle->fixed_imbalance =
                  wrap_to_period(result.cycle->fixed_imbalance, period);
            }
            return result;
          }
        }
        BoundsCertificate b;
        b.bsa = c.bsa;
        b.modular = true;
        b.required = wrap_to_period((el - er) - detail::fixed_gap(c), period);
        b.available_lo = dlo;
        b.available_hi = dhi;
        result.status = SolveStatus::InfeasibleBounds;
        result.bounds = b;
        return result;
      }
      auto split = detail::split_delta(c, need);
      if (c.left.odl_var) assignment.values[*c.left.odl_var] = split.left;
      if (c.right.odl_var) assignment.values[*c.right.odl_var] = split.right;
      const ps_t residual = wrap_to_period(
          (el + c.left.path_fixed + split.left) - (er + c.right.path_fixed + split.right), period);
      assignment.residuals[c.bsa] = residual;
      if (std::abs(residual) > epsilon)
        throw Error("internal: modular residual exceeds epsilon at " + c.bsa);
    }
  }

  // Adjustable variables untouched by any constraint keep their current value.
  for (const auto& [id, v] : sys.variables)
    if (!assignment.values.count(id) && id.rfind("release:", 0) != 0)
      assignment.values[id] = v.current;

  result.status = SolveStatus::Feasible;
  result.assignment = assignment;
  return result;
}

// Write an assignment's emission offsets, pump delays, and ODL settings back
// into a topology copy. Idempotent for a fixed assignment.
inline NetworkTopology apply_assignment(const NetworkTopology& topo,
                                        const TimingAssignment& assignment) {
  NetworkTopology out = topo;
  for (const auto& [id, value] : assignment.values) {
    if (id.rfind("release:", 0) == 0) continue;  // virtual hold-until-ready slack
    if (id.rfind("offset:", 0) == 0) {
      NodeSpec* n = out.find_node(id.substr(7));
      if (!n) throw UnknownVariable("no node for " + id);
      if (value < 0) throw BoundsViolation(id + " assigned negative offset");
      if (n->kind == NodeKind::Source && n->rep_period > 0 && value >= n->rep_period)
        throw BoundsViolation(id + " assigned beyond rep_period");
      n->emission_offset = value;
    } else if (id.rfind("odl:", 0) == 0) {
      const auto colon = id.rfind(':');
      const std::string node_id = id.substr(4, colon - 4);
      const int port = std::stoi(id.substr(colon + 1));
      NodeSpec* n = out.find_node(node_id);
      if (!n || n->kind != NodeKind::BsaSupport || port < 0 || port > 1)
        throw UnknownVariable("no BSA port for " + id);
      auto& odl = n->odl[static_cast<std::size_t>(port)];
      if (value < odl.lo || value > odl.hi)
        throw BoundsViolation(id + " assigned outside ODL bounds");
      odl.setting = value;
    } else if (id.rfind("pump:", 0) == 0) {
      Link* l = out.find_link(id.substr(5));
      if (!l || l->channel != ChannelKind::ClassicalControl)
        throw UnknownVariable("no control link for " + id);
      if (value < l->pump_delay_lo || value > l->pump_delay_hi)
        throw BoundsViolation(id + " assigned outside pump bounds");
      l->pump_delay = value;
    } else {
      throw UnknownVariable("unrecognized variable " + id);
    }
  }
  return out;
}

}  // namespace psdsim
