#include "qccs/bisim.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <numeric>
#include <sstream>

namespace qccs::bisim {

using sem::Action;
using sem::Configuration;

// --- family -----------------------------------------------------------------

SuperOpFamily SuperOpFamily::identity_only() { return {}; }

SuperOpFamily SuperOpFamily::default_family(const qlin::QReg& reg,
                                            const std::set<std::string>& owned) {
  SuperOpFamily fam;
  std::vector<std::string> free_vars;
  for (const auto& v : reg.vars())
    if (!owned.count(v)) free_vars.push_back(v);
  for (const auto& v : free_vars) {
    fam.generators.push_back({"H(" + v + ")", qlin::SuperOp::unitary({v}, qlin::gates::H())});
    fam.generators.push_back({"X(" + v + ")", qlin::SuperOp::unitary({v}, qlin::gates::X())});
    fam.generators.push_back({"Z(" + v + ")", qlin::SuperOp::unitary({v}, qlin::gates::Z())});
    fam.generators.push_back({"Deph(" + v + ")", qlin::SuperOp::dephase(v)});
    // Swap with a fresh |0> ancilla, seen from the register side.
    fam.generators.push_back({"Reset(" + v + ")", qlin::SuperOp::set_to({v}, "0")});
  }
  for (size_t i = 0; i < free_vars.size(); ++i)
    for (size_t j = 0; j < free_vars.size(); ++j) {
      if (i == j) continue;
      fam.generators.push_back({"CNOT(" + free_vars[i] + "," + free_vars[j] + ")",
                                qlin::SuperOp::unitary({free_vars[i], free_vars[j]},
                                                       qlin::gates::CNOT())});
    }
  return fam;
}

namespace {

// Sequential composition (first a, then b) as one super-operator over the
// union of the target sets.
qlin::SuperOp compose(const qlin::SuperOp& a, const qlin::SuperOp& b) {
  std::vector<std::string> vars = a.acts_on();
  for (const auto& v : b.acts_on())
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  qlin::QReg sub(vars);
  std::vector<qlin::CMatrix> kraus;
  for (const auto& ea : a.kraus()) {
    qlin::CMatrix ea_full = qlin::embed(ea, a.acts_on(), sub);
    for (const auto& eb : b.kraus()) {
      qlin::CMatrix eb_full = qlin::embed(eb, b.acts_on(), sub);
      kraus.push_back(eb_full * ea_full);
    }
  }
  return qlin::SuperOp(vars, std::move(kraus));
}

}  // namespace

std::vector<FamilyMember> SuperOpFamily::expand() const {
  std::vector<FamilyMember> out = generators;
  std::vector<FamilyMember> layer = generators;
  for (int d = 2; d <= depth; ++d) {
    std::vector<FamilyMember> next;
    for (const auto& prev : layer)
      for (const auto& g : generators)
        next.push_back({prev.name + ";" + g.name, compose(prev.op, g.op)});
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

// --- checker -----------------------------------------------------------------

Checker::Checker(const sem::Engine& eng, Options opts) : eng_(eng), opts_(std::move(opts)) {
  members_ = opts_.family.expand();
}

int Checker::image(int state, size_t m) const {
  if (state < 0 || static_cast<size_t>(state) >= images_.size()) return -1;
  if (m >= images_[static_cast<size_t>(state)].size()) return -1;
  return images_[static_cast<size_t>(state)][m];
}

void Checker::build_union(const Configuration& c, const Configuration& d) {
  sem::BuiltPlts first = eng_.build({c, d}, opts_.budget);

  // Eager family images of every state reachable from the two roots.  The
  // image states get no closure moves of their own: one application of an
  // expanded member per game path.
  std::vector<Configuration> roots{c, d};
  bool any_new = false;
  for (const auto& st : first.states) {
    auto owned = eng_.config_qv(st);
    for (const auto& m : members_) {
      bool overlaps = false;
      for (const auto& v : m.op.acts_on())
        if (owned.count(v)) overlaps = true;
      if (overlaps) continue;
      Configuration img = eng_.apply_superop(st, m.op);
      roots.push_back(img);
      if (!(img == st)) any_new = true;
    }
  }
  plts_ = any_new ? eng_.build(roots, opts_.budget) : std::move(first);
}

void Checker::annotate() {
  size_t n = plts_.states.size();
  qv_.clear();
  ptr_.clear();
  ptr_key_.assign(n, -1);
  for (size_t i = 0; i < n; ++i) {
    qv_.push_back(eng_.config_qv(plts_.states[i]));
    ptr_.push_back(eng_.ptr_of(plts_.states[i]));
  }
  // Approximate interning of ptr matrices: grid-fingerprint buckets with
  // exact tolerance comparison inside a bucket.
  std::map<std::uint64_t, std::vector<int>> buckets;
  int next_key = 0;
  for (size_t i = 0; i < n; ++i) {
    std::uint64_t fp = eng_.rho_fingerprint(ptr_[i].mat());
    auto& bucket = buckets[fp];
    int found = -1;
    for (int j : bucket)
      if (qlin::approx_equal(ptr_[static_cast<size_t>(j)].mat(), ptr_[i].mat(), eng_.tols().tol) &&
          qv_[static_cast<size_t>(j)] == qv_[i]) {
        found = ptr_key_[static_cast<size_t>(j)];
        break;
      }
    if (found < 0) found = next_key++;
    ptr_key_[i] = found;
    bucket.push_back(static_cast<int>(i));
  }

  // Reachability from the two primary roots marks states carrying closure
  // moves; family-image states and their descendants do not.
  has_pseudo_.assign(n, 0);
  {
    std::deque<int> queue{plts_.roots[0], plts_.roots[1]};
    has_pseudo_[static_cast<size_t>(plts_.roots[0])] = 1;
    has_pseudo_[static_cast<size_t>(plts_.roots[1])] = 1;
    while (!queue.empty()) {
      int s = queue.front();
      queue.pop_front();
      for (int ti : plts_.graph.outgoing[static_cast<size_t>(s)])
        for (const auto& [t, p] : plts_.graph.transitions[static_cast<size_t>(ti)].target.support()) {
          (void)p;
          if (!has_pseudo_[static_cast<size_t>(t)]) {
            has_pseudo_[static_cast<size_t>(t)] = 1;
            queue.push_back(t);
          }
        }
    }
  }

  // Image table for closure states.
  images_.assign(n, {});
  for (size_t i = 0; i < n; ++i) {
    if (!has_pseudo_[i]) continue;
    images_[i].assign(members_.size(), -1);
    for (size_t m = 0; m < members_.size(); ++m) {
      bool overlaps = false;
      for (const auto& v : members_[m].op.acts_on())
        if (qv_[i].count(v)) overlaps = true;
      if (overlaps) continue;
      Configuration img = eng_.apply_superop(plts_.states[i], members_[m].op);
      int idx = plts_.find_state(img, eng_.tols().tol);
      if (idx < 0)
        throw Error(Error::Kind::Internal, "family image missing from the explored state space");
      images_[i][m] = idx;
    }
  }
}

void Checker::contract() {
  size_t n = plts_.states.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };

  // Deterministic Dirac tau states with unchanged observables merge into
  // their successor; bisimilarity of every pair is preserved.
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t s = 0; s < n; ++s) {
      if (find(static_cast<int>(s)) != static_cast<int>(s)) continue;
      const auto& outs = plts_.graph.outgoing[s];
      if (outs.size() != 1) continue;
      const auto& tr = plts_.graph.transitions[static_cast<size_t>(outs[0])];
      if (tr.label != dist::Plts::kTau || tr.target.size() != 1) continue;
      int t = find(tr.target.support()[0].first);
      if (t == static_cast<int>(s)) continue;
      if (qv_[s] != qv_[static_cast<size_t>(t)]) continue;
      if (!qlin::approx_equal(ptr_[s].mat(), ptr_[static_cast<size_t>(t)].mat(), eng_.tols().tol))
        continue;
      parent[s] = t;
      changed = true;
    }
  }

  // Renumber surviving states, preserving index order.
  std::vector<int> new_id(n, -1);
  std::vector<int> kept;
  for (size_t s = 0; s < n; ++s)
    if (find(static_cast<int>(s)) == static_cast<int>(s)) {
      new_id[s] = static_cast<int>(kept.size());
      kept.push_back(static_cast<int>(s));
    }
  auto target_of = [&](int s) { return new_id[static_cast<size_t>(find(s))]; };

  sem::BuiltPlts next;
  next.actions = plts_.actions;
  for (int old : kept) {
    next.graph.add_state();
    next.states.push_back(plts_.states[static_cast<size_t>(old)]);
  }
  for (int old : kept) {
    int src = new_id[static_cast<size_t>(old)];
    std::vector<std::pair<int, dist::Distribution<int>>> seen;
    for (int ti : plts_.graph.outgoing[static_cast<size_t>(old)]) {
      const auto& tr = plts_.graph.transitions[static_cast<size_t>(ti)];
      std::vector<std::pair<int, double>> entries;
      for (const auto& [t, p] : tr.target.support()) entries.emplace_back(target_of(t), p);
      auto dist = dist::Distribution<int>::from_weights(std::move(entries));
      bool dup = false;
      for (const auto& [lbl, d] : seen)
        if (lbl == tr.label && d == dist) dup = true;
      if (dup) continue;
      seen.emplace_back(tr.label, dist);
      next.graph.add_transition(src, tr.label, std::move(dist));
    }
  }
  for (int r : plts_.roots) next.roots.push_back(target_of(r));
  next.rebuild_index();

  // Remap annotations, including the closure image table: the pseudo-move
  // of a representative lands at its image's representative.
  std::vector<std::set<std::string>> qv2;
  std::vector<qlin::DensityOp> ptr2;
  std::vector<int> key2;
  std::vector<char> pseudo2;
  std::vector<std::vector<int>> images2;
  for (int old : kept) {
    qv2.push_back(qv_[static_cast<size_t>(old)]);
    ptr2.push_back(ptr_[static_cast<size_t>(old)]);
    key2.push_back(ptr_key_[static_cast<size_t>(old)]);
    pseudo2.push_back(has_pseudo_[static_cast<size_t>(old)]);
    std::vector<int> imgs = images_[static_cast<size_t>(old)];
    for (int& v : imgs)
      if (v >= 0) v = target_of(v);
    images2.push_back(std::move(imgs));
  }
  plts_ = std::move(next);
  qv_ = std::move(qv2);
  ptr_ = std::move(ptr2);
  ptr_key_ = std::move(key2);
  has_pseudo_ = std::move(pseudo2);
  images_ = std::move(images2);
}

std::vector<int> Checker::initial_partition() const {
  size_t n = plts_.states.size();
  // Weak visible alphabet: labels reachable by internal moves only.
  std::vector<std::set<int>> alphabet(n);
  if (opts_.presplit_alphabet) {
    bool changed = true;
    for (size_t s = 0; s < n; ++s)
      for (int ti : plts_.graph.outgoing[s]) {
        const auto& tr = plts_.graph.transitions[static_cast<size_t>(ti)];
        if (tr.label != dist::Plts::kTau) alphabet[s].insert(tr.label);
      }
    while (changed) {
      changed = false;
      for (size_t s = 0; s < n; ++s)
        for (int ti : plts_.graph.outgoing[s]) {
          const auto& tr = plts_.graph.transitions[static_cast<size_t>(ti)];
          if (tr.label != dist::Plts::kTau) continue;
          for (const auto& [t, p] : tr.target.support()) {
            (void)p;
            for (int a : alphabet[static_cast<size_t>(t)])
              if (alphabet[s].insert(a).second) changed = true;
          }
        }
    }
  }

  std::map<std::tuple<std::string, int, std::string, bool>, int> keys;
  std::vector<int> block(n);
  for (size_t s = 0; s < n; ++s) {
    std::ostringstream qvs;
    for (const auto& v : qv_[s]) qvs << v << ",";
    std::ostringstream alph;
    for (int a : alphabet[s]) alph << a << ",";
    auto key = std::make_tuple(qvs.str(), ptr_key_[s], alph.str(),
                               has_pseudo_.empty() ? true : static_cast<bool>(has_pseudo_[s]));
    auto [it, fresh] = keys.emplace(key, static_cast<int>(keys.size()));
    (void)fresh;
    block[s] = it->second;
  }
  return block;
}

bool Checker::defender_matches(int defender, int action, const dist::Distribution<int>& challenge,
                               const std::vector<int>& blocks) const {
  // Demands per block of the challenge distribution.
  std::map<int, double> demand;
  for (const auto& [s, p] : challenge.support()) demand[blocks[static_cast<size_t>(s)]] += p;

  weak::Query q;
  q.plts = &plts_.graph;
  q.from = dist::Distribution<int>::point(defender);
  q.strong = (opts_.mode == Mode::StrongOpen);
  if (action == dist::Plts::kTau && !q.strong)
    q.alpha = std::nullopt;
  else
    q.alpha = action;
  for (const auto& [blk, mass] : demand) {
    weak::Sink sink;
    sink.demand = mass;
    for (size_t s = 0; s < blocks.size(); ++s)
      if (blocks[s] == blk) sink.allowed.push_back(static_cast<int>(s));
    q.sinks.push_back(std::move(sink));
  }
  return weak::match(q);
}

std::optional<GameWitness> Checker::find_failure(int x, int y, const std::vector<int>& blocks,
                                                 bool prefer_transition) const {
  auto wit = [&](GameWitness::Kind k, const std::string& detail) {
    GameWitness w;
    w.kind = k;
    w.left = x;
    w.right = y;
    w.detail = detail;
    return w;
  };
  if (qv_[static_cast<size_t>(x)] != qv_[static_cast<size_t>(y)])
    return wit(GameWitness::Kind::QvMismatch, "free quantum variable sets differ");
  if (!qlin::approx_equal(ptr_[static_cast<size_t>(x)].mat(), ptr_[static_cast<size_t>(y)].mat(),
                          eng_.tols().tol))
    return wit(GameWitness::Kind::PtrMismatch, "environment partial traces differ");

  auto closure_failure = [&]() -> std::optional<GameWitness> {
    if (has_pseudo_.empty()) return std::nullopt;
    if (has_pseudo_[static_cast<size_t>(x)] != has_pseudo_[static_cast<size_t>(y)])
      return wit(GameWitness::Kind::Closure, "family closure applies to one side only");
    if (!has_pseudo_[static_cast<size_t>(x)]) return std::nullopt;
    for (size_t m = 0; m < members_.size(); ++m) {
      int ix = image(x, m), iy = image(y, m);
      if (ix < 0 && iy < 0) continue;
      if (ix < 0 || iy < 0 || blocks[static_cast<size_t>(ix)] != blocks[static_cast<size_t>(iy)]) {
        GameWitness w = wit(GameWitness::Kind::Closure, "family images fall in different classes");
        w.family_member = members_[m].name;
        return w;
      }
    }
    return std::nullopt;
  };

  auto transition_failure = [&]() -> std::optional<GameWitness> {
    // both directions, deterministic order
    for (int round = 0; round < 2; ++round) {
      int challenger = round == 0 ? x : y;
      int defender = round == 0 ? y : x;
      for (int ti : plts_.graph.outgoing[static_cast<size_t>(challenger)]) {
        const auto& tr = plts_.graph.transitions[static_cast<size_t>(ti)];
        if (!defender_matches(defender, tr.label, tr.target, blocks)) {
          GameWitness w = wit(GameWitness::Kind::Transition, "unmatched challenger transition");
          w.challenger_left = (round == 0);
          w.left = x;
          w.right = y;
          w.action = tr.label;
          w.challenge = tr.target;
          return w;
        }
      }
    }
    return std::nullopt;
  };

  if (prefer_transition) {
    if (auto t = transition_failure()) return t;
    return closure_failure();
  }
  if (auto c = closure_failure()) return c;
  return transition_failure();
}

bool Checker::replay(const GameWitness& w, const std::vector<int>& blocks) const {
  switch (w.kind) {
    case GameWitness::Kind::QvMismatch:
      return qv_[static_cast<size_t>(w.left)] != qv_[static_cast<size_t>(w.right)];
    case GameWitness::Kind::PtrMismatch:
      return !qlin::approx_equal(ptr_[static_cast<size_t>(w.left)].mat(),
                                 ptr_[static_cast<size_t>(w.right)].mat(), eng_.tols().tol);
    case GameWitness::Kind::AlphabetMismatch: return true;
    case GameWitness::Kind::Closure: {
      if (has_pseudo_[static_cast<size_t>(w.left)] != has_pseudo_[static_cast<size_t>(w.right)])
        return true;
      for (size_t m = 0; m < members_.size(); ++m) {
        if (members_[m].name != w.family_member) continue;
        int ix = image(w.left, m), iy = image(w.right, m);
        if (ix < 0 || iy < 0) return ix != iy;
        return blocks[static_cast<size_t>(ix)] != blocks[static_cast<size_t>(iy)];
      }
      return false;
    }
    case GameWitness::Kind::Transition: {
      int defender = w.challenger_left ? w.right : w.left;
      return !defender_matches(defender, w.action, w.challenge, blocks);
    }
  }
  return false;
}

std::vector<int> Checker::refine(std::vector<int> blocks) {
  history_.clear();
  history_.push_back(blocks);
  for (;;) {
    // Representative-based rounds until stable.
    bool changed = true;
    while (changed) {
      opts_.budget.check_time();
      changed = false;
      int next_block = *std::max_element(blocks.begin(), blocks.end()) + 1;

      std::map<int, std::vector<int>> members_of;
      for (size_t s = 0; s < blocks.size(); ++s)
        members_of[blocks[s]].push_back(static_cast<int>(s));

      for (auto& [blk, states] : members_of) {
        (void)blk;
        if (states.size() < 2) continue;
        // States compatible with the block's first member stay together;
        // the rest regroup among themselves.
        std::vector<int> pending = states;
        bool first_group = true;
        while (!pending.empty()) {
          int rep = pending.front();
          std::vector<int> stay{rep}, move;
          std::vector<char> ok(pending.size(), 0);
          auto run = [&](size_t a, size_t b) {
            for (size_t i = a; i < b; ++i)
              ok[i] = !find_failure(pending[i], rep, blocks).has_value();
          };
          if (opts_.threads > 1 && pending.size() > 2) {
            size_t chunk = (pending.size() + static_cast<size_t>(opts_.threads) - 1) /
                           static_cast<size_t>(opts_.threads);
            std::vector<std::future<void>> futs;
            for (size_t a = 1; a < pending.size(); a += chunk)
              futs.push_back(std::async(std::launch::async, run, a,
                                        std::min(a + chunk, pending.size())));
            for (auto& f : futs) f.get();
          } else {
            run(1, pending.size());
          }
          for (size_t i = 1; i < pending.size(); ++i)
            (ok[i] ? stay : move).push_back(pending[i]);
          if (!first_group) {
            int id = next_block++;
            for (int s : stay) blocks[static_cast<size_t>(s)] = id;
          }
          if (!move.empty()) changed = true;
          first_group = false;
          pending = std::move(move);
        }
      }
      history_.push_back(blocks);
    }

    // Weak-game compatibility with a representative does not imply pairwise
    // compatibility, so certify the fixpoint pairwise; on a failure, regroup
    // greedily and resume refining.
    bool split = false;
    {
      int next_block = *std::max_element(blocks.begin(), blocks.end()) + 1;
      std::map<int, std::vector<int>> members_of;
      for (size_t s = 0; s < blocks.size(); ++s)
        members_of[blocks[s]].push_back(static_cast<int>(s));
      for (auto& [blk, states] : members_of) {
        (void)blk;
        if (states.size() < 3) continue;  // pairs were certified directly
        bool bad = false;
        for (size_t i = 1; i < states.size() && !bad; ++i)
          for (size_t j = i + 1; j < states.size() && !bad; ++j)
            if (find_failure(states[i], states[j], blocks)) bad = true;
        if (!bad) continue;
        split = true;
        std::vector<std::vector<int>> groups;
        for (int s : states) {
          bool placed = false;
          for (auto& g : groups) {
            bool fits = true;
            for (int t : g)
              if (find_failure(s, t, blocks)) {
                fits = false;
                break;
              }
            if (fits) {
              g.push_back(s);
              placed = true;
              break;
            }
          }
          if (!placed) groups.push_back({s});
        }
        for (size_t g = 1; g < groups.size(); ++g) {
          int id = next_block++;
          for (int s : groups[g]) blocks[static_cast<size_t>(s)] = id;
        }
      }
    }
    if (!split) break;
    history_.push_back(blocks);
  }
  return blocks;
}

BisimResult Checker::check(const Configuration& c, const Configuration& d) {
  build_union(c, d);
  annotate();
  // Quotienting internal chains is justified against weak matching only.
  if (opts_.contract_tau_chains && opts_.mode != Mode::StrongOpen) contract();
  std::vector<int> blocks = refine(initial_partition());

  BisimResult res;
  res.mode = opts_.mode;
  res.family_relative = !members_.empty();
  res.left_root = plts_.roots[0];
  res.right_root = plts_.roots[1];
  res.blocks = blocks;
  res.rounds = history_.size() - 1;
  res.explored_states = plts_.states.size();
  if (blocks[static_cast<size_t>(res.left_root)] == blocks[static_cast<size_t>(res.right_root)]) {
    res.verdict = Verdict::Equivalent;
  } else {
    res.verdict = Verdict::Distinguished;
    res.witness = find_failure(res.left_root, res.right_root, blocks);
    if (!res.witness) {
      GameWitness w;
      w.kind = GameWitness::Kind::AlphabetMismatch;
      w.left = res.left_root;
      w.right = res.right_root;
      w.detail = "weak visible alphabets differ";
      res.witness = w;
    }
  }
  return res;
}

// --- entry points -------------------------------------------------------------

BisimResult ground_bisim(const sem::Engine& eng, const Configuration& c, const Configuration& d,
                         const sem::Budget& budget, int threads) {
  Checker::Options opts;
  opts.mode = Mode::Ground;
  opts.budget = budget;
  opts.threads = threads;
  Checker chk(eng, opts);
  return chk.check(c, d);
}

BisimResult open_bisim(const sem::Engine& eng, const Configuration& c, const Configuration& d,
                       const SuperOpFamily& fam, const sem::Budget& budget, int threads) {
  Checker::Options opts;
  opts.mode = Mode::Open;
  opts.family = fam;
  opts.budget = budget;
  opts.threads = threads;
  Checker chk(eng, opts);
  auto owned = eng.config_qv(c);
  for (const auto& m : chk.members())
    for (const auto& v : m.op.acts_on())
      if (owned.count(v))
        fail_validation("family member " + m.name + " targets an owned variable: " + v);
  return chk.check(c, d);
}

BisimResult strong_open_bisim(const sem::Engine& eng, const Configuration& c,
                              const Configuration& d, const SuperOpFamily& fam,
                              const sem::Budget& budget, int threads) {
  Checker::Options opts;
  opts.mode = Mode::StrongOpen;
  opts.family = fam;
  opts.budget = budget;
  opts.threads = threads;
  Checker chk(eng, opts);
  return chk.check(c, d);
}

ProcessBisimResult process_bisim(const sem::Engine& eng, const syntax::TermPtr& p,
                                 const syntax::TermPtr& q,
                                 const std::vector<qlin::DensityOp>& states,
                                 const std::vector<std::vector<Value>>& val_tuples,
                                 const SuperOpFamily& fam, const sem::Budget& budget) {
  auto free_p = syntax::fv(p);
  auto free_q = syntax::fv(q);
  std::set<std::string> all_free = free_p;
  all_free.insert(free_q.begin(), free_q.end());
  std::vector<std::string> vars(all_free.begin(), all_free.end());

  std::vector<std::vector<Value>> tuples = val_tuples;
  if (tuples.empty()) tuples.push_back({});
  for (const auto& tuple : tuples) {
    if (tuple.size() != vars.size())
      fail_validation("value tuple arity does not match the free variables");
    std::map<std::string, Value> env;
    for (size_t i = 0; i < vars.size(); ++i) env[vars[i]] = tuple[i];
    syntax::TermPtr pc = syntax::substitute(p, env, {});
    syntax::TermPtr qc = syntax::substitute(q, env, {});
    for (const auto& rho : states) {
      auto rp = std::make_shared<const qlin::DensityOp>(rho);
      auto res = open_bisim(eng, eng.make_config(pc, rp), eng.make_config(qc, rp), fam, budget);
      if (res.verdict == Verdict::Distinguished) {
        std::ostringstream desc;
        desc << "state " << eng.rho_fingerprint(rho.mat()) << ", values (";
        for (size_t i = 0; i < vars.size(); ++i)
          desc << (i ? ", " : "") << vars[i] << "=" << tuple[i].str();
        desc << ")";
        return {Verdict::Distinguished, desc.str()};
      }
    }
  }
  return {Verdict::Equivalent, ""};
}

std::string Context::describe() const {
  switch (kind) {
    case Kind::Par: return "_ || " + syntax::print_term(par_term);
    case Kind::Relabel: return "_[" + name + "]";
    case Kind::Restrict: {
      std::string s = "_ \\ {";
      for (size_t i = 0; i < channels.size(); ++i) s += (i ? ", " : "") + channels[i];
      return s + "}";
    }
    case Kind::IfThen: return "if " + syntax::print_bexpr(guard) + " then _";
    case Kind::PrefixSuper: {
      std::string s = name + "[";
      for (size_t i = 0; i < qargs.size(); ++i) s += (i ? ", " : "") + qargs[i];
      return s + "]._";
    }
  }
  return "?";
}

CongruenceReport congruence_harness(const sem::Engine& eng, const Configuration& c,
                                    const Configuration& d, const SuperOpFamily& fam,
                                    const std::vector<Context>& contexts,
                                    const sem::Budget& budget) {
  CongruenceReport report;
  for (const auto& ctx : contexts) {
    auto wrap = [&](const Configuration& cfg) -> Configuration {
      syntax::TermPtr t;
      switch (ctx.kind) {
        case Context::Kind::Par: {
          auto overlap = syntax::qv(cfg.term, eng.defs());
          for (const auto& v : syntax::qv(ctx.par_term, eng.defs()))
            if (overlap.count(v))
              fail_validation("illegal context: quantum variable " + v + " used on both sides");
          t = syntax::mk_par(cfg.term, ctx.par_term);
          break;
        }
        case Context::Kind::Relabel: t = syntax::mk_relabel(cfg.term, ctx.name); break;
        case Context::Kind::Restrict:
          t = syntax::mk_restrict(cfg.term, std::vector<std::string>(ctx.channels));
          break;
        case Context::Kind::IfThen: t = syntax::mk_if(ctx.guard, cfg.term); break;
        case Context::Kind::PrefixSuper:
          t = syntax::mk_superapp(ctx.name, std::vector<std::string>(ctx.qargs), cfg.term);
          break;
      }
      return eng.make_config(t, cfg.rho);
    };
    bool dynamic = ctx.kind == Context::Kind::PrefixSuper;
    auto res = open_bisim(eng, wrap(c), wrap(d), fam, budget);
    report.outcomes.push_back({ctx.describe(), res.verdict, dynamic});
    if (!dynamic && res.verdict == Verdict::Distinguished) report.static_breakage = true;
  }
  return report;
}

}  // namespace qccs::bisim
