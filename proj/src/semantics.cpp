#include "qccs/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <sstream>

#include "qccs/weak.hpp"

namespace qccs::sem {

using syntax::Term;
using syntax::TermKind;
using syntax::TermPtr;

std::vector<std::string> Action::cn() const {
  if (kind == Kind::Tau) return {};
  return {chan};
}

std::vector<std::string> Action::qbv() const {
  if (kind == Kind::QIn) return {qvar};
  return {};
}

std::string Action::str() const {
  switch (kind) {
    case Kind::Tau: return "tau";
    case Kind::CIn: return chan + "?" + value.str();
    case Kind::COut: return chan + "!" + value.str();
    case Kind::QIn: return chan + "?" + qvar;
    case Kind::QOut: return chan + "!" + qvar;
  }
  return "?";
}

bool Action::operator==(const Action& o) const {
  return kind == o.kind && chan == o.chan && value == o.value && qvar == o.qvar;
}

bool Action::operator<(const Action& o) const {
  if (kind != o.kind) return kind < o.kind;
  if (chan != o.chan) return chan < o.chan;
  if (!(value == o.value)) return value < o.value;
  return qvar < o.qvar;
}

bool Configuration::operator<(const Configuration& o) const {
  if (canon != o.canon) return canon < o.canon;
  return rho_fp < o.rho_fp;
}

bool Configuration::operator==(const Configuration& o) const {
  return canon == o.canon && rho_fp == o.rho_fp;
}

void Budget::check_time() const {
  if (time_limit_s <= 0) return;
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
  if (elapsed.count() > time_limit_s) fail_budget("time budget exceeded");
}

int BuiltPlts::action_id(const Action& a) const {
  for (size_t i = 0; i < actions.size(); ++i)
    if (actions[i] == a) return static_cast<int>(i);
  return -1;
}

void BuiltPlts::rebuild_index() {
  index.clear();
  for (size_t i = 0; i < states.size(); ++i)
    index[{states[i].canon, states[i].rho_fp}].push_back(static_cast<int>(i));
}

int BuiltPlts::find_state(const Configuration& c, double tol) const {
  auto it = index.find({c.canon, c.rho_fp});
  if (it == index.end()) return -1;
  for (int idx : it->second)
    if (qlin::approx_equal(states[static_cast<size_t>(idx)].rho->mat(), c.rho->mat(), tol))
      return idx;
  return -1;
}

Engine::Engine(syntax::Defs defs, qlin::Tolerances tols, int threads)
    : defs_(std::move(defs)), tols_(tols), threads_(threads < 1 ? 1 : threads) {}

std::set<std::string> Engine::qv_cached(const TermPtr& t) const {
  {
    std::lock_guard<std::mutex> lock(qv_mutex_);
    auto it = qv_cache_.find(t.get());
    if (it != qv_cache_.end()) return it->second.second;
  }
  auto result = syntax::qv(t, defs_);
  std::lock_guard<std::mutex> lock(qv_mutex_);
  qv_cache_.emplace(t.get(), std::make_pair(t, result));
  return result;
}

std::uint64_t Engine::rho_fingerprint(const qlin::CMatrix& m) const {
  // Grid rounding keeps equal-within-tol states in one bucket for the grid
  // sizes that occur here; exact comparison happens within buckets.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::int64_t v) {
    h ^= static_cast<std::uint64_t>(v);
    h *= 1099511628211ULL;
  };
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) {
      mix(std::llround(m(i, j).real() * 1e6));
      mix(std::llround(m(i, j).imag() * 1e6));
    }
  return h;
}

Configuration Engine::make_config(TermPtr term, RhoPtr rho) const {
  if (!rho) fail_validation("configuration needs a quantum state");
  if (!(rho->reg() == defs_.reg)) fail_validation("state register differs from the declared register");
  auto free_classical = syntax::fv(term);
  if (!free_classical.empty())
    fail_validation("configuration term has a free classical variable: " + *free_classical.begin());
  if (auto v = syntax::check_legal(term, defs_))
    fail_validation("illegal term at " + v->path + ": " + v->message);
  Configuration c;
  c.canon = syntax::print_term(syntax::alpha_normal(term));
  c.rho_fp = rho_fingerprint(rho->mat());
  c.term = std::move(term);
  c.rho = std::move(rho);
  return c;
}

Configuration Engine::make_config(TermPtr term, qlin::DensityOp rho) const {
  return make_config(std::move(term), std::make_shared<const qlin::DensityOp>(std::move(rho)));
}

std::set<std::string> Engine::config_qv(const Configuration& c) const { return qv_cached(c.term); }

qlin::DensityOp Engine::ptr_of(const Configuration& c) const {
  auto owned = qv_cached(c.term);
  return qlin::partial_trace(*c.rho, {owned.begin(), owned.end()}, tols_);
}

Configuration Engine::apply_superop(const Configuration& c, const qlin::SuperOp& e) const {
  auto rho = std::make_shared<const qlin::DensityOp>(qlin::apply_superop(e, *c.rho, tols_));
  Configuration out;
  out.term = c.term;
  out.canon = c.canon;
  out.rho = std::move(rho);
  out.rho_fp = rho_fingerprint(out.rho->mat());
  return out;
}

// --- the operational rules -------------------------------------------------

std::vector<Engine::RawStep> Engine::step_raw(const TermPtr& term, const RhoPtr& rho) const {
  std::vector<RawStep> out;
  auto point_to = [&](Action a, TermPtr t, RhoPtr r) {
    RawStep s;
    s.action = std::move(a);
    s.targets.emplace_back(1.0, std::make_pair(std::move(t), std::move(r)));
    out.push_back(std::move(s));
  };

  switch (term->kind) {
    case TermKind::Nil: break;

    case TermKind::Tau:
      point_to(Action::tau(), term->cont, rho);
      break;

    case TermKind::CInput: {
      auto dom = defs_.channels.find(term->chan);
      if (dom == defs_.channels.end()) fail_validation("undeclared channel: " + term->chan);
      for (const Value& v : dom->second)
        point_to(Action::cin(term->chan, v),
                 syntax::substitute(term->cont, {{term->var, v}}, {}), rho);
      break;
    }

    case TermKind::COutput: {
      Value v = syntax::eval_expr(term->expr);
      auto dom = defs_.channels.find(term->chan);
      if (dom == defs_.channels.end()) fail_validation("undeclared channel: " + term->chan);
      if (std::find(dom->second.begin(), dom->second.end(), v) == dom->second.end())
        fail_validation("output value " + v.str() + " outside the domain of channel " + term->chan);
      point_to(Action::cout(term->chan, v), term->cont, rho);
      break;
    }

    case TermKind::QInput: {
      // r ranges over declared variables not free in the input prefix itself.
      auto blocked = qv_cached(term->cont);
      blocked.erase(term->var);
      for (const auto& r : defs_.reg.vars()) {
        if (blocked.count(r)) continue;
        point_to(Action::qin(term->chan, r),
                 syntax::substitute(term->cont, {}, {{term->var, r}}), rho);
      }
      break;
    }

    case TermKind::QOutput:
      point_to(Action::qout(term->chan, term->qvar), term->cont, rho);
      break;

    case TermKind::SuperApp: {
      auto def = defs_.superops.find(term->name);
      if (def == defs_.superops.end()) fail_validation("undeclared super-operator: " + term->name);
      qlin::SuperOp op(term->qargs, def->second.kraus, true, tols_);
      auto next = std::make_shared<const qlin::DensityOp>(qlin::apply_superop(op, *rho, tols_));
      point_to(Action::tau(), term->cont, std::move(next));
      break;
    }

    case TermKind::MeasApp: {
      auto def = defs_.measurements.find(term->name);
      if (def == defs_.measurements.end()) fail_validation("undeclared measurement: " + term->name);
      std::vector<qlin::ProjMeasurement::Outcome> outs;
      for (size_t i = 0; i < def->second.outcomes.size(); ++i)
        outs.push_back({static_cast<double>(i), def->second.outcomes[i].projector});
      qlin::ProjMeasurement m(term->qargs, outs, tols_);
      RawStep s;
      s.action = Action::tau();
      auto results = qlin::measure(m, *rho, tols_);
      for (const auto& r : results) {
        const Value& label = def->second.outcomes[static_cast<size_t>(std::llround(r.eigenvalue))].label;
        TermPtr cont = syntax::substitute(term->cont, {{term->var, label}}, {});
        s.targets.emplace_back(r.probability,
                               std::make_pair(std::move(cont),
                                              std::make_shared<const qlin::DensityOp>(r.state)));
      }
      out.push_back(std::move(s));
      break;
    }

    case TermKind::Sum: {
      auto l = step_raw(term->left, rho);
      auto r = step_raw(term->right, rho);
      out.insert(out.end(), l.begin(), l.end());
      out.insert(out.end(), r.begin(), r.end());
      break;
    }

    case TermKind::Par: {
      auto l = step_raw(term->left, rho);
      auto r = step_raw(term->right, rho);
      auto qv_left = qv_cached(term->left);
      auto qv_right = qv_cached(term->right);

      auto interleave = [&](const std::vector<RawStep>& steps, const TermPtr& other,
                            const std::set<std::string>& other_qv, bool left_side) {
        for (const auto& s : steps) {
          bool blocked = false;
          for (const auto& q : s.action.qbv())
            if (other_qv.count(q)) blocked = true;
          if (blocked) continue;
          RawStep ns;
          ns.action = s.action;
          for (const auto& [p, tgt] : s.targets)
            ns.targets.emplace_back(
                p, std::make_pair(left_side ? syntax::mk_par(tgt.first, other)
                                            : syntax::mk_par(other, tgt.first),
                                  tgt.second));
          out.push_back(std::move(ns));
        }
      };
      interleave(l, term->right, qv_right, true);
      interleave(r, term->left, qv_left, false);

      // Communication; premises of the communication rules never change rho.
      auto communicate = [&](const std::vector<RawStep>& in_side,
                             const std::vector<RawStep>& out_side, bool input_left) {
        for (const auto& si : in_side) {
          if (si.action.kind != Action::Kind::CIn && si.action.kind != Action::Kind::QIn) continue;
          for (const auto& so : out_side) {
            bool match =
                (si.action.kind == Action::Kind::CIn && so.action.kind == Action::Kind::COut &&
                 si.action.chan == so.action.chan && si.action.value == so.action.value) ||
                (si.action.kind == Action::Kind::QIn && so.action.kind == Action::Kind::QOut &&
                 si.action.chan == so.action.chan && si.action.qvar == so.action.qvar);
            if (!match) continue;
            const auto& ti = si.targets.front().second;
            const auto& to = so.targets.front().second;
            RawStep ns;
            ns.action = Action::tau();
            ns.targets.emplace_back(
                1.0, std::make_pair(input_left ? syntax::mk_par(ti.first, to.first)
                                               : syntax::mk_par(to.first, ti.first),
                                    rho));
            out.push_back(std::move(ns));
          }
        }
      };
      communicate(l, r, true);
      communicate(r, l, false);
      break;
    }

    case TermKind::Relabel: {
      auto fn = defs_.relabels.find(term->name);
      if (fn == defs_.relabels.end()) fail_validation("undeclared relabelling: " + term->name);
      auto apply = [&](const std::string& c) {
        auto it = fn->second.mapping.find(c);
        return it == fn->second.mapping.end() ? c : it->second;
      };
      for (auto& s : step_raw(term->cont, rho)) {
        RawStep ns;
        ns.action = s.action;
        if (!ns.action.is_tau()) ns.action.chan = apply(ns.action.chan);
        for (const auto& [p, tgt] : s.targets)
          ns.targets.emplace_back(p, std::make_pair(syntax::mk_relabel(tgt.first, term->name),
                                                    tgt.second));
        out.push_back(std::move(ns));
      }
      break;
    }

    case TermKind::Restrict: {
      for (auto& s : step_raw(term->cont, rho)) {
        bool escapes = false;
        for (const auto& c : s.action.cn())
          if (std::binary_search(term->channels.begin(), term->channels.end(), c)) escapes = true;
        if (escapes) continue;
        RawStep ns;
        ns.action = s.action;
        for (const auto& [p, tgt] : s.targets)
          ns.targets.emplace_back(
              p, std::make_pair(syntax::mk_restrict(tgt.first,
                                                    std::vector<std::string>(term->channels)),
                                tgt.second));
        out.push_back(std::move(ns));
      }
      break;
    }

    case TermKind::If: {
      if (syntax::eval_bexpr(term->guard)) {
        auto sub = step_raw(term->cont, rho);
        out.insert(out.end(), sub.begin(), sub.end());
      }
      break;
    }

    case TermKind::ConstApp: {
      auto def = defs_.constants.find(term->name);
      if (def == defs_.constants.end()) fail_validation("undefined constant: " + term->name);
      const auto& cd = def->second;
      if (cd.qparams.size() != term->qargs.size() || cd.cparams.size() != term->eargs.size())
        fail_validation("constant arity mismatch at " + term->name);
      std::map<std::string, std::string> qren;
      for (size_t i = 0; i < cd.qparams.size(); ++i) qren[cd.qparams[i]] = term->qargs[i];
      std::map<std::string, Value> cvals;
      for (size_t i = 0; i < cd.cparams.size(); ++i)
        cvals[cd.cparams[i]] = syntax::eval_expr(term->eargs[i]);
      TermPtr unfolded = syntax::substitute(cd.body, cvals, qren);
      auto sub = step_raw(unfolded, rho);
      out.insert(out.end(), sub.begin(), sub.end());
      break;
    }
  }
  return out;
}

std::vector<Step> Engine::step(const Configuration& c) const {
  auto raw = step_raw(c.term, c.rho);
  std::vector<Step> out;
  out.reserve(raw.size());
  for (auto& rs : raw) {
    Step s;
    s.action = rs.action;
    // Merge duplicate targets by canonical key.
    std::vector<std::pair<double, Configuration>> targets;
    for (auto& [p, tgt] : rs.targets) {
      Configuration cfg;
      cfg.term = tgt.first;
      cfg.rho = tgt.second;
      cfg.canon = syntax::print_term(syntax::alpha_normal(cfg.term));
      cfg.rho_fp = rho_fingerprint(cfg.rho->mat());
      bool merged = false;
      for (auto& [q, existing] : targets) {
        if (existing == cfg && qlin::approx_equal(existing.rho->mat(), cfg.rho->mat(), tols_.tol)) {
          q += p;
          merged = true;
          break;
        }
      }
      if (!merged) targets.emplace_back(p, std::move(cfg));
    }
    double total = 0;
    for (const auto& [p, cfg] : targets) {
      (void)cfg;
      total += p;
    }
    if (std::abs(total - 1.0) > tols_.tol)
      fail_validation("step produced a distribution of mass " + std::to_string(total));
    s.targets = std::move(targets);
    out.push_back(std::move(s));
  }
  // Deterministic order: by action, then by first target key.
  std::stable_sort(out.begin(), out.end(), [](const Step& a, const Step& b) {
    if (!(a.action == b.action)) return a.action < b.action;
    if (a.targets.empty() || b.targets.empty()) return a.targets.size() < b.targets.size();
    return a.targets.front().second < b.targets.front().second;
  });
  return out;
}

BuiltPlts Engine::build(const std::vector<Configuration>& roots, const Budget& budget) const {
  BuiltPlts plts;
  plts.actions.push_back(Action::tau());

  std::map<std::pair<std::string, std::uint64_t>, std::vector<int>> buckets;
  std::map<Action, int> action_ids{{Action::tau(), 0}};

  auto intern = [&](const Configuration& c) -> int {
    auto key = std::make_pair(c.canon, c.rho_fp);
    auto& bucket = buckets[key];
    for (int idx : bucket)
      if (qlin::approx_equal(plts.states[static_cast<size_t>(idx)].rho->mat(), c.rho->mat(),
                             tols_.tol))
        return idx;
    if (plts.states.size() >= budget.max_states) fail_budget("state budget exceeded");
    int idx = plts.graph.add_state();
    plts.states.push_back(c);
    bucket.push_back(idx);
    return idx;
  };

  std::vector<int> frontier;
  std::vector<char> queued;
  auto enqueue = [&](int idx) {
    if (static_cast<size_t>(idx) >= queued.size()) queued.resize(plts.states.size(), 0);
    if (!queued[static_cast<size_t>(idx)]) {
      queued[static_cast<size_t>(idx)] = 1;
      frontier.push_back(idx);
    }
  };
  for (const auto& r : roots) {
    int idx = intern(r);
    plts.roots.push_back(idx);
    enqueue(idx);
  }

  size_t processed = 0;
  while (processed < frontier.size()) {
    budget.check_time();
    // Level-synchronous expansion keeps state numbering independent of the
    // number of worker threads.
    std::vector<int> level(frontier.begin() + static_cast<long>(processed), frontier.end());
    processed = frontier.size();

    std::vector<std::vector<Step>> level_steps(level.size());
    auto compute = [&](size_t a, size_t b) {
      for (size_t i = a; i < b; ++i)
        level_steps[i] = step(plts.states[static_cast<size_t>(level[i])]);
    };
    if (threads_ > 1 && level.size() > 1) {
      size_t chunk = (level.size() + static_cast<size_t>(threads_) - 1) / static_cast<size_t>(threads_);
      std::vector<std::future<void>> futs;
      for (size_t a = 0; a < level.size(); a += chunk)
        futs.push_back(std::async(std::launch::async, compute, a, std::min(a + chunk, level.size())));
      for (auto& f : futs) f.get();
    } else {
      compute(0, level.size());
    }

    for (size_t i = 0; i < level.size(); ++i) {
      int src = level[i];
      for (auto& s : level_steps[i]) {
        auto [it, fresh] = action_ids.emplace(s.action, static_cast<int>(plts.actions.size()));
        if (fresh) plts.actions.push_back(s.action);
        std::vector<std::pair<int, double>> entries;
        for (auto& [p, cfg] : s.targets) {
          int tgt = intern(cfg);
          enqueue(tgt);
          entries.emplace_back(tgt, p);
        }
        plts.graph.add_transition(src, it->second,
                                  dist::Distribution<int>::from_weights(std::move(entries)));
      }
    }
  }
  plts.index = std::move(buckets);
  return plts;
}

double Engine::barb_on(const BuiltPlts& plts, int root, const std::string& chan) {
  std::vector<char> goal(static_cast<size_t>(plts.graph.num_states), 0);
  for (const auto& tr : plts.graph.transitions) {
    const Action& a = plts.actions[static_cast<size_t>(tr.label)];
    if (a.kind == Action::Kind::COut && a.chan == chan) goal[static_cast<size_t>(tr.src)] = 1;
  }
  return weak::max_stop_mass(plts.graph, dist::Distribution<int>::point(root), goal);
}

double Engine::barb(const Configuration& c, const std::string& chan, const Budget& budget) const {
  BuiltPlts plts = build({c}, budget);
  return barb_on(plts, plts.roots[0], chan);
}

}  // namespace qccs::sem
