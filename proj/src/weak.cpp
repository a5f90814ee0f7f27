#include "qccs/weak.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>

#include "qccs/lp.hpp"

namespace qccs::weak {

namespace {

using dist::Plts;

std::vector<int> forward_cone(const Plts& p, const std::vector<int>& sources, int label) {
  std::vector<char> seen(static_cast<size_t>(p.num_states), 0);
  std::deque<int> queue;
  for (int s : sources)
    if (!seen[static_cast<size_t>(s)]) {
      seen[static_cast<size_t>(s)] = 1;
      queue.push_back(s);
    }
  std::vector<int> out;
  while (!queue.empty()) {
    int s = queue.front();
    queue.pop_front();
    out.push_back(s);
    for (int ti : p.outgoing[static_cast<size_t>(s)]) {
      const auto& tr = p.transitions[static_cast<size_t>(ti)];
      if (tr.label != label) continue;
      for (const auto& [t, pr] : tr.target.support()) {
        (void)pr;
        if (!seen[static_cast<size_t>(t)]) {
          seen[static_cast<size_t>(t)] = 1;
          queue.push_back(t);
        }
      }
    }
  }
  return out;
}

// Least fixpoint of "can dispose of incoming mass": a state disposes if it
// may stop (can_stop) or has a tau transition all of whose targets dispose.
// For the pre-alpha phase, firing an alpha transition whose targets all
// dispose downstream also counts as stopping.
std::vector<char> disposable(const Plts& p, const std::vector<int>& cone,
                             const std::vector<char>& can_stop) {
  std::vector<char> in_cone(static_cast<size_t>(p.num_states), 0);
  for (int s : cone) in_cone[static_cast<size_t>(s)] = 1;
  std::vector<char> disp = can_stop;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int s : cone) {
      if (disp[static_cast<size_t>(s)]) continue;
      for (int ti : p.outgoing[static_cast<size_t>(s)]) {
        const auto& tr = p.transitions[static_cast<size_t>(ti)];
        if (tr.label != Plts::kTau) continue;
        bool all = true;
        for (const auto& [t, pr] : tr.target.support()) {
          (void)pr;
          if (!in_cone[static_cast<size_t>(t)] || !disp[static_cast<size_t>(t)]) {
            all = false;
            break;
          }
        }
        if (all) {
          disp[static_cast<size_t>(s)] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  return disp;
}

struct PhaseVars {
  // LP variable ids; -1 where absent.
  std::vector<int> stop_var;                 // per state
  std::vector<std::pair<int, int>> routes;   // (transition index, var id)
};

}  // namespace

std::vector<int> tau_cone(const Plts& plts, const std::vector<int>& sources) {
  return forward_cone(plts, sources, Plts::kTau);
}

bool tau_acyclic(const Plts& plts, const std::vector<int>& cone) {
  std::vector<char> in_cone(static_cast<size_t>(plts.num_states), 0);
  for (int s : cone) in_cone[static_cast<size_t>(s)] = 1;
  std::map<int, int> color;  // 0 unseen, 1 active, 2 done
  std::vector<std::pair<int, size_t>> stack;
  for (int root : cone) {
    if (color.count(root)) continue;
    stack.push_back({root, 0});
    color[root] = 1;
    while (!stack.empty()) {
      auto& [s, pos] = stack.back();
      std::vector<int> succs;
      for (int ti : plts.outgoing[static_cast<size_t>(s)]) {
        const auto& tr = plts.transitions[static_cast<size_t>(ti)];
        if (tr.label != Plts::kTau) continue;
        for (const auto& [t, pr] : tr.target.support()) {
          (void)pr;
          if (in_cone[static_cast<size_t>(t)]) succs.push_back(t);
        }
      }
      if (pos < succs.size()) {
        int next = succs[pos++];
        auto it = color.find(next);
        if (it == color.end()) {
          color[next] = 1;
          stack.push_back({next, 0});
        } else if (it->second == 1) {
          return false;
        }
      } else {
        color[s] = 2;
        stack.pop_back();
      }
    }
  }
  return true;
}

bool match(const Query& q, Witness* wit, double feas_tol) {
  const Plts& p = *q.plts;
  const int n = p.num_states;

  std::vector<char> sink_allowed(static_cast<size_t>(n), 0);
  for (const auto& sk : q.sinks)
    for (int s : sk.allowed)
      if (s >= 0 && s < n) sink_allowed[static_cast<size_t>(s)] = 1;

  double demand_total = 0.0;
  for (const auto& sk : q.sinks) demand_total += sk.demand;
  if (std::abs(demand_total - 1.0) > 1e-6) return false;

  std::vector<int> sources;
  for (const auto& [s, pr] : q.from.support()) {
    (void)pr;
    sources.push_back(s);
  }

  int next_var = 0;
  std::vector<lp::Row> rows;

  // Final-phase stop variables by state (phase B when alpha is present and
  // the query is weak; the only phase otherwise).
  std::vector<int> final_stop(static_cast<size_t>(n), -1);

  auto build_tau_phase = [&](const std::vector<double>& inflow,
                             const std::vector<char>& can_stop,
                             std::vector<char>* stops_usable) -> std::optional<PhaseVars> {
    // inflow: exogenous mass entering each state.  Returns variables and
    // appends conservation rows; infeasible when inflow hits a state that
    // cannot dispose of it.
    std::vector<int> src_states;
    for (int s = 0; s < n; ++s)
      if (inflow[static_cast<size_t>(s)] > 0) src_states.push_back(s);
    std::vector<int> cone = forward_cone(p, src_states, Plts::kTau);
    std::vector<char> disp = disposable(p, cone, can_stop);
    for (int s : src_states)
      if (!disp[static_cast<size_t>(s)]) return std::nullopt;

    PhaseVars vars;
    vars.stop_var.assign(static_cast<size_t>(n), -1);
    std::vector<char> in_cone(static_cast<size_t>(n), 0);
    for (int s : cone)
      if (disp[static_cast<size_t>(s)]) in_cone[static_cast<size_t>(s)] = 1;

    std::vector<std::vector<std::pair<int, double>>> incoming(static_cast<size_t>(n));
    std::vector<std::vector<int>> out_routes(static_cast<size_t>(n));
    for (int s : cone) {
      if (!in_cone[static_cast<size_t>(s)]) continue;
      if (can_stop[static_cast<size_t>(s)]) {
        vars.stop_var[static_cast<size_t>(s)] = next_var++;
        if (stops_usable) (*stops_usable)[static_cast<size_t>(s)] = 1;
      }
      for (int ti : p.outgoing[static_cast<size_t>(s)]) {
        const auto& tr = p.transitions[static_cast<size_t>(ti)];
        if (tr.label != Plts::kTau) continue;
        bool ok = true;
        for (const auto& [t, pr] : tr.target.support()) {
          (void)pr;
          if (!in_cone[static_cast<size_t>(t)]) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        int v = next_var++;
        vars.routes.emplace_back(ti, v);
        out_routes[static_cast<size_t>(s)].push_back(v);
        for (const auto& [t, pr] : tr.target.support())
          incoming[static_cast<size_t>(t)].emplace_back(v, pr);
      }
    }
    for (int s : cone) {
      if (!in_cone[static_cast<size_t>(s)]) continue;
      lp::Row row;
      row.rhs = -inflow[static_cast<size_t>(s)];
      for (const auto& [v, pr] : incoming[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, pr);
      if (vars.stop_var[static_cast<size_t>(s)] >= 0)
        row.coeffs.emplace_back(vars.stop_var[static_cast<size_t>(s)], -1.0);
      for (int v : out_routes[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, -1.0);
      rows.push_back(std::move(row));
    }
    return vars;
  };

  std::vector<double> from_mass(static_cast<size_t>(n), 0.0);
  for (const auto& [s, pr] : q.from.support()) from_mass[static_cast<size_t>(s)] += pr;

  if (q.strong) {
    if (!q.alpha) fail_validation("strong matching needs a label");
    // Every source state fires one combined alpha transition.
    std::vector<std::vector<int>> per_state_vars(static_cast<size_t>(n));
    std::vector<std::vector<std::pair<int, double>>> incoming(static_cast<size_t>(n));
    for (int s : sources) {
      for (int ti : p.outgoing[static_cast<size_t>(s)]) {
        const auto& tr = p.transitions[static_cast<size_t>(ti)];
        if (tr.label != *q.alpha) continue;
        int v = next_var++;
        per_state_vars[static_cast<size_t>(s)].push_back(v);
        for (const auto& [t, pr] : tr.target.support())
          incoming[static_cast<size_t>(t)].emplace_back(v, pr);
      }
      if (per_state_vars[static_cast<size_t>(s)].empty()) return false;
      lp::Row row;
      row.rhs = from_mass[static_cast<size_t>(s)];
      for (int v : per_state_vars[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, 1.0);
      rows.push_back(std::move(row));
    }
    for (int s = 0; s < n; ++s) {
      if (incoming[static_cast<size_t>(s)].empty()) continue;
      if (!sink_allowed[static_cast<size_t>(s)]) {
        // Mass may not land on a state no sink accepts.
        lp::Row row;
        row.rhs = 0.0;
        for (const auto& [v, pr] : incoming[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, pr);
        rows.push_back(std::move(row));
        continue;
      }
      int v = next_var++;
      final_stop[static_cast<size_t>(s)] = v;
      lp::Row row;
      row.rhs = 0.0;
      row.coeffs.emplace_back(v, -1.0);
      for (const auto& [vv, pr] : incoming[static_cast<size_t>(s)]) row.coeffs.emplace_back(vv, pr);
      rows.push_back(std::move(row));
    }
  } else if (!q.alpha) {
    std::vector<char> can_stop = sink_allowed;
    auto phase = build_tau_phase(from_mass, can_stop, nullptr);
    if (!phase) return false;
    final_stop = phase->stop_var;
  } else {
    // Phase B viability first: which states can start the post-alpha closure?
    // A state is B-viable when the tau phase from it can end on sinks.
    std::vector<char> b_disp;
    {
      std::vector<int> all;
      for (int s = 0; s < n; ++s) all.push_back(s);
      b_disp = disposable(p, all, sink_allowed);
    }
    // Phase A: stopping means firing an alpha transition whose targets are
    // all B-viable.
    std::vector<char> a_can_stop(static_cast<size_t>(n), 0);
    std::vector<std::vector<int>> usable_alpha(static_cast<size_t>(n));
    for (int s = 0; s < n; ++s) {
      for (int ti : p.outgoing[static_cast<size_t>(s)]) {
        const auto& tr = p.transitions[static_cast<size_t>(ti)];
        if (tr.label != *q.alpha) continue;
        bool ok = true;
        for (const auto& [t, pr] : tr.target.support()) {
          (void)pr;
          if (!b_disp[static_cast<size_t>(t)]) {
            ok = false;
            break;
          }
        }
        if (ok) {
          usable_alpha[static_cast<size_t>(s)].push_back(ti);
          a_can_stop[static_cast<size_t>(s)] = 1;
        }
      }
    }
    auto phase_a = build_tau_phase(from_mass, a_can_stop, nullptr);
    if (!phase_a) return false;

    // Alpha step: each unit of phase-A stopped mass fires one alpha
    // transition; collect inflow expressions for phase B as variables.
    std::vector<std::vector<std::pair<int, double>>> b_inflow_terms(static_cast<size_t>(n));
    for (int s = 0; s < n; ++s) {
      int zv = phase_a->stop_var[static_cast<size_t>(s)];
      if (zv < 0) continue;
      lp::Row row;  // sum of alpha vars - z = 0
      row.rhs = 0.0;
      row.coeffs.emplace_back(zv, -1.0);
      for (int ti : usable_alpha[static_cast<size_t>(s)]) {
        int v = next_var++;
        row.coeffs.emplace_back(v, 1.0);
        const auto& tr = p.transitions[static_cast<size_t>(ti)];
        for (const auto& [t, pr] : tr.target.support())
          b_inflow_terms[static_cast<size_t>(t)].emplace_back(v, pr);
      }
      rows.push_back(std::move(row));
    }

    // Phase B conservation with symbolic inflow: introduce an inflow
    // variable per target state tied to the alpha-step expression.
    std::vector<double> zero(static_cast<size_t>(n), 0.0);
    std::vector<int> b_sources;
    std::vector<int> inflow_var(static_cast<size_t>(n), -1);
    for (int s = 0; s < n; ++s) {
      if (b_inflow_terms[static_cast<size_t>(s)].empty()) continue;
      b_sources.push_back(s);
      int v = next_var++;
      inflow_var[static_cast<size_t>(s)] = v;
      lp::Row row;  // inflow_var - sum alpha contributions = 0
      row.rhs = 0.0;
      row.coeffs.emplace_back(v, 1.0);
      for (const auto& [av, pr] : b_inflow_terms[static_cast<size_t>(s)])
        row.coeffs.emplace_back(av, -pr);
      rows.push_back(std::move(row));
    }
    // Build phase-B closure over the cone from potential entry points.
    {
      std::vector<int> cone = forward_cone(p, b_sources, Plts::kTau);
      std::vector<char> disp = disposable(p, cone, sink_allowed);
      std::vector<char> in_cone(static_cast<size_t>(n), 0);
      for (int s : cone)
        if (disp[static_cast<size_t>(s)]) in_cone[static_cast<size_t>(s)] = 1;
      // Inflow may only enter viable states.
      for (int s : b_sources)
        if (!in_cone[static_cast<size_t>(s)]) {
          lp::Row row;  // inflow must be zero
          row.rhs = 0.0;
          row.coeffs.emplace_back(inflow_var[static_cast<size_t>(s)], 1.0);
          rows.push_back(std::move(row));
        }
      std::vector<std::vector<std::pair<int, double>>> incoming(static_cast<size_t>(n));
      std::vector<std::vector<int>> out_routes(static_cast<size_t>(n));
      for (int s : cone) {
        if (!in_cone[static_cast<size_t>(s)]) continue;
        if (sink_allowed[static_cast<size_t>(s)]) final_stop[static_cast<size_t>(s)] = next_var++;
        for (int ti : p.outgoing[static_cast<size_t>(s)]) {
          const auto& tr = p.transitions[static_cast<size_t>(ti)];
          if (tr.label != Plts::kTau) continue;
          bool ok = true;
          for (const auto& [t, pr] : tr.target.support()) {
            (void)pr;
            if (!in_cone[static_cast<size_t>(t)]) {
              ok = false;
              break;
            }
          }
          if (!ok) continue;
          int v = next_var++;
          out_routes[static_cast<size_t>(s)].push_back(v);
          for (const auto& [t, pr] : tr.target.support())
            incoming[static_cast<size_t>(t)].emplace_back(v, pr);
        }
      }
      for (int s : cone) {
        if (!in_cone[static_cast<size_t>(s)]) continue;
        lp::Row row;
        row.rhs = 0.0;
        if (inflow_var[static_cast<size_t>(s)] >= 0)
          row.coeffs.emplace_back(inflow_var[static_cast<size_t>(s)], 1.0);
        for (const auto& [v, pr] : incoming[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, pr);
        if (final_stop[static_cast<size_t>(s)] >= 0)
          row.coeffs.emplace_back(final_stop[static_cast<size_t>(s)], -1.0);
        for (int v : out_routes[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, -1.0);
        rows.push_back(std::move(row));
      }
    }
  }

  // Sink matching: split variables w(sink, state).
  std::vector<std::vector<std::pair<int, int>>> sink_vars(q.sinks.size());  // (state, var)
  std::vector<std::vector<std::pair<int, double>>> per_state_sinks(static_cast<size_t>(n));
  for (size_t i = 0; i < q.sinks.size(); ++i) {
    lp::Row row;  // sum_s w(i,s) = demand_i
    row.rhs = q.sinks[i].demand;
    for (int s : q.sinks[i].allowed) {
      if (s < 0 || s >= n) continue;
      if (final_stop[static_cast<size_t>(s)] < 0) continue;
      int v = next_var++;
      sink_vars[i].emplace_back(s, v);
      row.coeffs.emplace_back(v, 1.0);
      per_state_sinks[static_cast<size_t>(s)].emplace_back(v, 1.0);
    }
    if (row.coeffs.empty() && q.sinks[i].demand > feas_tol) return false;
    rows.push_back(std::move(row));
  }
  for (int s = 0; s < n; ++s) {
    if (final_stop[static_cast<size_t>(s)] < 0) continue;
    lp::Row row;  // z_s = sum_i w(i,s)
    row.rhs = 0.0;
    row.coeffs.emplace_back(final_stop[static_cast<size_t>(s)], 1.0);
    for (const auto& [v, c] : per_state_sinks[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, -c);
    rows.push_back(std::move(row));
  }

  auto res = lp::solve(next_var, rows, {}, feas_tol);
  if (!res.feasible) return false;
  if (wit) {
    wit->theta.clear();
    wit->split.assign(q.sinks.size(), {});
    for (int s = 0; s < n; ++s) {
      int v = final_stop[static_cast<size_t>(s)];
      if (v >= 0 && res.x[static_cast<size_t>(v)] > feas_tol)
        wit->theta.emplace_back(s, res.x[static_cast<size_t>(v)]);
    }
    for (size_t i = 0; i < q.sinks.size(); ++i)
      for (const auto& [s, v] : sink_vars[i])
        if (res.x[static_cast<size_t>(v)] > feas_tol)
          wit->split[i].emplace_back(s, res.x[static_cast<size_t>(v)]);
  }
  return true;
}

double max_stop_mass(const Plts& plts, const dist::Distribution<int>& from,
                     const std::vector<char>& goal, double feas_tol) {
  const int n = plts.num_states;
  std::vector<int> sources;
  for (const auto& [s, pr] : from.support()) {
    (void)pr;
    sources.push_back(s);
  }
  std::vector<int> cone = forward_cone(plts, sources, Plts::kTau);
  std::vector<char> in_cone(static_cast<size_t>(n), 0);
  for (int s : cone) in_cone[static_cast<size_t>(s)] = 1;

  int next_var = 0;
  std::vector<lp::Row> rows;
  std::vector<int> stop_var(static_cast<size_t>(n), -1);
  std::vector<std::vector<std::pair<int, double>>> incoming(static_cast<size_t>(n));
  std::vector<std::vector<int>> out_routes(static_cast<size_t>(n));
  for (int s : cone) {
    stop_var[static_cast<size_t>(s)] = next_var++;  // stopping anywhere is fine
    for (int ti : plts.outgoing[static_cast<size_t>(s)]) {
      const auto& tr = plts.transitions[static_cast<size_t>(ti)];
      if (tr.label != Plts::kTau) continue;
      int v = next_var++;
      out_routes[static_cast<size_t>(s)].push_back(v);
      for (const auto& [t, pr] : tr.target.support())
        incoming[static_cast<size_t>(t)].emplace_back(v, pr);
    }
  }
  for (int s : cone) {
    lp::Row row;
    row.rhs = -from.prob(s);
    for (const auto& [v, pr] : incoming[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, pr);
    row.coeffs.emplace_back(stop_var[static_cast<size_t>(s)], -1.0);
    for (int v : out_routes[static_cast<size_t>(s)]) row.coeffs.emplace_back(v, -1.0);
    rows.push_back(std::move(row));
  }
  std::vector<double> obj(static_cast<size_t>(next_var), 0.0);
  for (int s : cone)
    if (goal[static_cast<size_t>(s)]) obj[static_cast<size_t>(stop_var[static_cast<size_t>(s)])] = 1.0;
  auto res = lp::solve(next_var, rows, obj, feas_tol);
  if (!res.feasible) fail_validation("barb program infeasible");
  return res.objective;
}

namespace {

using Vec = std::vector<double>;

void round_vec(Vec& v) {
  for (double& x : v) x = std::round(x * 1e9) / 1e9;
}

// One lifted step: every state with mass picks one option from `options`,
// enumerated over all per-state combinations.
void expand_round(const Plts& p, const std::set<Vec>& in, std::set<Vec>* out,
                  const std::vector<std::vector<const dist::Distribution<int>*>>& options,
                  bool allow_stay, size_t cap) {
  for (const Vec& base : in) {
    std::vector<int> live;
    for (int s = 0; s < p.num_states; ++s)
      if (base[static_cast<size_t>(s)] > 1e-12) live.push_back(s);
    // Choice index per live state: options.size() = stay (when allowed).
    std::vector<size_t> choice(live.size(), 0);
    for (;;) {
      bool valid = true;
      Vec next(static_cast<size_t>(p.num_states), 0.0);
      for (size_t k = 0; k < live.size() && valid; ++k) {
        int s = live[k];
        double mass = base[static_cast<size_t>(s)];
        const auto& opts = options[static_cast<size_t>(s)];
        if (choice[k] < opts.size()) {
          for (const auto& [t, pr] : opts[choice[k]]->support())
            next[static_cast<size_t>(t)] += mass * pr;
        } else if (allow_stay) {
          next[static_cast<size_t>(s)] += mass;
        } else {
          valid = false;
        }
      }
      if (valid) {
        round_vec(next);
        if (out->size() < cap) out->insert(std::move(next));
      }
      // Advance the odometer.
      size_t k = 0;
      for (; k < live.size(); ++k) {
        size_t limit = options[static_cast<size_t>(live[k])].size() + (allow_stay ? 1 : 0);
        if (++choice[k] < limit) break;
        choice[k] = 0;
      }
      if (k == live.size()) break;
      if (out->size() >= cap) break;
    }
  }
}

}  // namespace

std::vector<std::vector<double>> enumerate_derivatives(const Plts& plts,
                                                       const dist::Distribution<int>& from,
                                                       std::optional<int> alpha, int max_steps,
                                                       size_t cap) {
  std::vector<std::vector<const dist::Distribution<int>*>> tau_opts(
      static_cast<size_t>(plts.num_states));
  std::vector<std::vector<const dist::Distribution<int>*>> alpha_opts(
      static_cast<size_t>(plts.num_states));
  for (const auto& tr : plts.transitions) {
    if (tr.label == Plts::kTau) tau_opts[static_cast<size_t>(tr.src)].push_back(&tr.target);
    if (alpha && tr.label == *alpha) alpha_opts[static_cast<size_t>(tr.src)].push_back(&tr.target);
  }

  Vec start(static_cast<size_t>(plts.num_states), 0.0);
  for (const auto& [s, pr] : from.support()) start[static_cast<size_t>(s)] += pr;
  round_vec(start);

  auto closure = [&](std::set<Vec> seed) {
    std::set<Vec> all = seed;
    std::set<Vec> frontier = seed;
    for (int step = 0; step < max_steps && !frontier.empty(); ++step) {
      std::set<Vec> next;
      expand_round(plts, frontier, &next, tau_opts, /*allow_stay=*/true, cap);
      std::set<Vec> fresh;
      for (auto& v : next)
        if (!all.count(v)) fresh.insert(v);
      for (auto& v : fresh) all.insert(v);
      frontier = std::move(fresh);
      if (all.size() >= cap) break;
    }
    return all;
  };

  std::set<Vec> pre = closure({start});
  std::set<Vec> result;
  if (!alpha) {
    result = std::move(pre);
  } else {
    std::set<Vec> mid;
    expand_round(plts, pre, &mid, alpha_opts, /*allow_stay=*/false, cap);
    result = closure(mid);
  }
  return {result.begin(), result.end()};
}

bool DerivativeOracle::matches(const dist::Distribution<int>& target,
                               const dist::StateRelation<int, int>& rel, Witness* wit,
                               double feas_tol) const {
  Query q;
  q.plts = plts_;
  q.from = from_;
  q.alpha = (label_ && *label_ == Plts::kTau) ? std::nullopt : label_;
  for (const auto& [s, pr] : target.support()) {
    Sink sk;
    sk.demand = pr;
    for (int t = 0; t < plts_->num_states; ++t)
      if (rel.related(s, t)) sk.allowed.push_back(t);
    q.sinks.push_back(std::move(sk));
  }
  return match(q, wit, feas_tol);
}

}  // namespace qccs::weak
