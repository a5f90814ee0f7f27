#include "qccs/logic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "qccs/lp.hpp"
#include "qccs/weak.hpp"

namespace qccs::logic {

using sem::Action;
using sem::Configuration;

FormulaPtr f_true() { return f_and({}); }

FormulaPtr f_atom(qlin::CMatrix projector, std::vector<std::string> qvars, double threshold,
                  std::string display) {
  auto f = std::make_shared<Formula>();
  f->kind = FKind::ProjAtom;
  f->projector = std::move(projector);
  f->qvars = std::move(qvars);
  f->threshold = threshold;
  f->display = std::move(display);
  if (f->threshold < -1e-12 || f->threshold > 1.0 + 1e-12)
    fail_validation("projector threshold outside [0,1]");
  return f;
}

FormulaPtr f_and(std::vector<FormulaPtr> conjuncts) {
  auto f = std::make_shared<Formula>();
  f->kind = FKind::And;
  f->conjuncts = std::move(conjuncts);
  return f;
}

FormulaPtr f_not(FormulaPtr sub) {
  auto f = std::make_shared<Formula>();
  f->kind = FKind::Not;
  f->sub = std::move(sub);
  return f;
}

FormulaPtr f_diamond(Action a, DistFormula d) {
  double total = 0;
  for (const auto& [p, part] : d.parts) {
    (void)part;
    if (p < -1e-12) fail_validation("negative weight in a distribution formula");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    fail_validation("distribution formula weights sum to " + std::to_string(total));
  auto f = std::make_shared<Formula>();
  f->kind = FKind::Diamond;
  f->action = std::move(a);
  f->dist = std::move(d);
  return f;
}

FormulaPtr f_so(std::string name, qlin::SuperOp op, FormulaPtr sub) {
  auto f = std::make_shared<Formula>();
  f->kind = FKind::SuperOpMod;
  f->so_name = std::move(name);
  f->so = std::make_shared<const qlin::SuperOp>(std::move(op));
  f->sub = std::move(sub);
  return f;
}

// --- printing ----------------------------------------------------------------

namespace {

void print_rec(const FormulaPtr& f, std::ostream& os) {
  switch (f->kind) {
    case FKind::ProjAtom: {
      os << (f->display.empty() ? "proj" : f->display) << "{";
      for (size_t i = 0; i < f->qvars.size(); ++i) os << (i ? "," : "") << f->qvars[i];
      os << "}[>=" << f->threshold << "]";
      return;
    }
    case FKind::And: {
      if (f->conjuncts.empty()) {
        os << "true";
        return;
      }
      os << "(";
      for (size_t i = 0; i < f->conjuncts.size(); ++i) {
        if (i) os << " & ";
        print_rec(f->conjuncts[i], os);
      }
      os << ")";
      return;
    }
    case FKind::Diamond: {
      os << "<" << f->action.str() << ">(";
      for (size_t i = 0; i < f->dist.parts.size(); ++i) {
        if (i) os << " (+) ";
        os << f->dist.parts[i].first << "*";
        print_rec(f->dist.parts[i].second, os);
      }
      os << ")";
      return;
    }
    case FKind::Not:
      os << "!";
      print_rec(f->sub, os);
      return;
    case FKind::SuperOpMod: {
      os << "SO(" << f->so_name << ").";
      print_rec(f->sub, os);
      return;
    }
  }
}

}  // namespace

std::string print_formula(const FormulaPtr& f) {
  std::ostringstream os;
  print_rec(f, os);
  return os.str();
}

// --- satisfaction -------------------------------------------------------------

struct Satisfier::Space {
  sem::BuiltPlts plts;
  int root = 0;
  // per (formula node, state): cached truth value; pinned keeps the keyed
  // nodes alive so addresses cannot be recycled across queries
  std::map<std::pair<const Formula*, int>, Tri> cache;
  std::vector<FormulaPtr> pinned;
};

Satisfier::Satisfier(const sem::Engine& eng, sem::Budget budget)
    : eng_(eng), budget_(std::move(budget)) {}

std::shared_ptr<Satisfier::Space> Satisfier::space_of(const Configuration& c) {
  auto key = std::make_pair(c.canon, c.rho_fp);
  auto it = spaces_.find(key);
  if (it != spaces_.end()) {
    int idx = it->second->plts.find_state(c, eng_.tols().tol);
    if (idx >= 0) {
      it->second->root = idx;
      return it->second;
    }
  }
  auto sp = std::make_shared<Space>();
  sp->plts = eng_.build({c}, budget_);
  sp->root = sp->plts.roots[0];
  spaces_[key] = sp;
  return sp;
}

Tri Satisfier::sat(const Configuration& c, const FormulaPtr& f) {
  auto sp = space_of(c);
  return sat_state(*sp, sp->root, f);
}

Tri Satisfier::sat_state(Space& sp, int state, const FormulaPtr& f) {
  auto key = std::make_pair(f.get(), state);
  auto it = sp.cache.find(key);
  if (it != sp.cache.end()) return it->second;
  sp.pinned.push_back(f);
  sp.cache.emplace(key, Tri::Unknown);  // cycle guard; overwritten below

  const Configuration& cfg = sp.plts.states[static_cast<size_t>(state)];
  Tri result = Tri::Unknown;
  switch (f->kind) {
    case FKind::ProjAtom: {
      auto owned = eng_.config_qv(cfg);
      bool disjoint = true;
      for (const auto& v : f->qvars)
        if (owned.count(v)) disjoint = false;
      if (!disjoint) {
        result = Tri::False;
        break;
      }
      qlin::CMatrix full = qlin::embed(f->projector, f->qvars, eng_.defs().reg);
      double tr = (full * cfg.rho->mat()).trace().real();
      result = (tr >= f->threshold - eng_.tols().tol) ? Tri::True : Tri::False;
      break;
    }
    case FKind::And: {
      result = Tri::True;
      for (const auto& g : f->conjuncts) {
        Tri t = sat_state(sp, state, g);
        if (t == Tri::False) {
          result = Tri::False;
          break;
        }
        if (t == Tri::Unknown) result = Tri::Unknown;
      }
      break;
    }
    case FKind::Not: {
      result = tri_not(sat_state(sp, state, f->sub));
      break;
    }
    case FKind::SuperOpMod: {
      auto owned = eng_.config_qv(cfg);
      bool disjoint = true;
      for (const auto& v : f->so->acts_on())
        if (owned.count(v)) disjoint = false;
      if (!disjoint) {
        result = Tri::False;
        break;
      }
      Configuration img = eng_.apply_superop(cfg, *f->so);
      result = sat(img, f->sub);
      break;
    }
    case FKind::Diamond: {
      result = diamond_at(sp, state, *f);
      break;
    }
  }
  sp.cache[key] = result;
  return result;
}

Tri Satisfier::diamond_at(Space& sp, int state, const Formula& f) {
  budget_.check_time();
  int action = sp.plts.action_id(f.action);
  std::optional<int> alpha;
  if (f.action.is_tau()) {
    alpha = std::nullopt;
  } else {
    if (action < 0) return Tri::False;  // the action never occurs in this space
    alpha = action;
  }

  // Truth masks for every part at every state that could carry mass.
  size_t n = sp.plts.states.size();
  std::vector<std::vector<Tri>> truth(f.dist.parts.size(), std::vector<Tri>(n, Tri::Unknown));
  bool any_unknown = false;
  for (size_t i = 0; i < f.dist.parts.size(); ++i)
    for (size_t s = 0; s < n; ++s) {
      truth[i][s] = sat_state(sp, static_cast<int>(s), f.dist.parts[i].second);
      if (truth[i][s] == Tri::Unknown) any_unknown = true;
    }

  auto run = [&](bool lenient) {
    weak::Query q;
    q.plts = &sp.plts.graph;
    q.from = dist::Distribution<int>::point(state);
    q.alpha = alpha;
    for (size_t i = 0; i < f.dist.parts.size(); ++i) {
      weak::Sink sink;
      sink.demand = f.dist.parts[i].first;
      for (size_t s = 0; s < n; ++s) {
        Tri t = truth[i][s];
        if (t == Tri::True || (lenient && t == Tri::Unknown))
          sink.allowed.push_back(static_cast<int>(s));
      }
      q.sinks.push_back(std::move(sink));
    }
    return weak::match(q);
  };

  bool strict = run(false);
  std::vector<int> cone = weak::tau_cone(sp.plts.graph, {state});
  bool acyclic = weak::tau_acyclic(sp.plts.graph, cone);

  if (strict) {
    if (acyclic) return Tri::True;
    // Cyclic instance: confirm with a bounded finitary scheduler search.
    auto derivs = weak::enumerate_derivatives(sp.plts.graph,
                                              dist::Distribution<int>::point(state), alpha,
                                              2 * static_cast<int>(cone.size()) + 2, 20000);
    // Some convex combination of enumerated derivatives must split across
    // the parts; interpolation between schedulers stays a valid derivative.
    int nv = 0;
    std::vector<lp::Row> rows;
    std::vector<int> lambda;
    for (size_t k = 0; k < derivs.size(); ++k) lambda.push_back(nv++);
    lp::Row norm;
    norm.rhs = 1.0;
    for (int v : lambda) norm.coeffs.emplace_back(v, 1.0);
    rows.push_back(norm);
    // mass(s) = sum_k lambda_k derivs[k][s]; split per part as in match().
    std::vector<std::vector<int>> w(f.dist.parts.size(), std::vector<int>(n, -1));
    for (size_t i = 0; i < f.dist.parts.size(); ++i) {
      lp::Row demand;
      demand.rhs = f.dist.parts[i].first;
      for (size_t s = 0; s < n; ++s)
        if (truth[i][s] == Tri::True) {
          w[i][s] = nv++;
          demand.coeffs.emplace_back(w[i][s], 1.0);
        }
      rows.push_back(std::move(demand));
    }
    for (size_t s = 0; s < n; ++s) {
      lp::Row conserve;
      conserve.rhs = 0.0;
      bool touched = false;
      for (size_t k = 0; k < derivs.size(); ++k)
        if (derivs[k][s] > 1e-12) {
          conserve.coeffs.emplace_back(lambda[k], derivs[k][s]);
          touched = true;
        }
      for (size_t i = 0; i < f.dist.parts.size(); ++i)
        if (w[i][s] >= 0) {
          conserve.coeffs.emplace_back(w[i][s], -1.0);
          touched = true;
        }
      if (touched) rows.push_back(std::move(conserve));
    }
    auto res = lp::solve(nv, rows, {});
    return res.feasible ? Tri::True : Tri::Unknown;
  }
  if (any_unknown) {
    bool lenient = run(true);
    if (lenient) return Tri::Unknown;  // truth hinges on undecided leaves
  }
  return Tri::False;
}

std::vector<std::pair<double, Configuration>> Satisfier::diamond_witness(const Configuration& c,
                                                                         const FormulaPtr& f) {
  if (f->kind != FKind::Diamond) return {};
  auto sp = space_of(c);
  int state = sp->root;
  int action = sp->plts.action_id(f->action);
  std::optional<int> alpha;
  if (!f->action.is_tau()) {
    if (action < 0) return {};
    alpha = action;
  }
  size_t n = sp->plts.states.size();
  weak::Query q;
  q.plts = &sp->plts.graph;
  q.from = dist::Distribution<int>::point(state);
  q.alpha = alpha;
  for (const auto& [p, part] : f->dist.parts) {
    weak::Sink sink;
    sink.demand = p;
    for (size_t s = 0; s < n; ++s)
      if (sat_state(*sp, static_cast<int>(s), part) == Tri::True)
        sink.allowed.push_back(static_cast<int>(s));
    q.sinks.push_back(std::move(sink));
  }
  weak::Witness wit;
  if (!weak::match(q, &wit)) return {};
  std::vector<std::pair<double, Configuration>> out;
  for (const auto& [s, p] : wit.theta)
    out.emplace_back(p, sp->plts.states[static_cast<size_t>(s)]);
  return out;
}

Tri Satisfier::sat_dist(const std::vector<std::pair<double, Configuration>>& delta,
                        const DistFormula& psi) {
  std::vector<std::vector<Tri>> truth(psi.parts.size());
  bool any_unknown = false;
  for (size_t i = 0; i < psi.parts.size(); ++i)
    for (const auto& [p, cfg] : delta) {
      (void)p;
      Tri t = sat(cfg, psi.parts[i].second);
      truth[i].push_back(t);
      if (t == Tri::Unknown) any_unknown = true;
    }

  auto feasible = [&](bool lenient) {
    std::vector<double> rows_sum, cols_sum;
    for (const auto& [p, cfg] : delta) {
      (void)cfg;
      rows_sum.push_back(p);
    }
    for (const auto& [p, part] : psi.parts) {
      (void)part;
      cols_sum.push_back(p);
    }
    std::vector<std::pair<int, int>> edges;
    for (size_t s = 0; s < delta.size(); ++s)
      for (size_t i = 0; i < psi.parts.size(); ++i) {
        Tri t = truth[i][s];
        if (t == Tri::True || (lenient && t == Tri::Unknown))
          edges.emplace_back(static_cast<int>(s), static_cast<int>(i));
      }
    return dist::detail::transport_feasible(rows_sum, cols_sum, edges, 1e-7, nullptr);
  };

  if (feasible(false)) return Tri::True;
  if (any_unknown && feasible(true)) return Tri::Unknown;
  return Tri::False;
}

// --- distinguishing formulas ---------------------------------------------------

namespace {

struct Distinguisher {
  const sem::Engine& eng;
  bisim::Checker& chk;
  const std::vector<int>& blocks;
  std::map<std::pair<int, int>, FormulaPtr> memo;
  std::set<std::pair<int, int>> in_progress;

  // Formula satisfied by state x and refuted by state y.
  FormulaPtr build(int x, int y) {
    auto key = std::make_pair(x, y);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    if (!in_progress.insert(key).second)
      fail_validation("cyclic dependency while constructing a distinguishing formula");
    FormulaPtr f = build_inner(x, y);
    in_progress.erase(key);
    memo[key] = f;
    return f;
  }

  FormulaPtr build_inner(int x, int y) {
    auto failure = chk.find_failure(x, y, blocks, /*prefer_transition=*/true);
    if (!failure)
      throw Error(Error::Kind::Internal,
                  "separated states pass the transfer game; cannot distinguish");
    switch (failure->kind) {
      case bisim::GameWitness::Kind::QvMismatch: return qv_formula(x, y);
      case bisim::GameWitness::Kind::PtrMismatch: return ptr_formula(x, y);
      case bisim::GameWitness::Kind::AlphabetMismatch:
        throw Error(Error::Kind::Internal, "unexpected alphabet witness in formula construction");
      case bisim::GameWitness::Kind::Closure: {
        size_t m = 0;
        for (; m < chk.members().size(); ++m)
          if (chk.members()[m].name == failure->family_member) break;
        int ix = chk.image(x, m), iy = chk.image(y, m);
        if (ix < 0 || iy < 0)
          throw Error(Error::Kind::Internal, "closure witness without images");
        return f_so(chk.members()[m].name, chk.members()[m].op, build(ix, iy));
      }
      case bisim::GameWitness::Kind::Transition: {
        int challenger = failure->challenger_left ? x : y;
        int defender = failure->challenger_left ? y : x;
        FormulaPtr f = transition_formula(challenger, defender, failure->action,
                                          failure->challenge);
        return failure->challenger_left ? f : f_not(f);
      }
    }
    throw Error(Error::Kind::Internal, "unhandled witness kind");
  }

  FormulaPtr qv_formula(int x, int y) {
    const auto& qx = chk.qv_of(x);
    const auto& qy = chk.qv_of(y);
    std::vector<std::string> extra;
    for (const auto& v : qy)
      if (!qx.count(v)) extra.push_back(v);
    if (!extra.empty()) {
      long d = 1L << extra.size();
      return f_atom(qlin::CMatrix::Identity(d, d), extra, 1.0, "id");
    }
    for (const auto& v : qx)
      if (!qy.count(v)) extra.push_back(v);
    long d = 1L << extra.size();
    return f_not(f_atom(qlin::CMatrix::Identity(d, d), extra, 1.0, "id"));
  }

  FormulaPtr ptr_formula(int x, int y) {
    const qlin::DensityOp& px = chk.ptr_of(x);
    const qlin::DensityOp& py = chk.ptr_of(y);
    std::vector<std::string> env_vars = px.reg().vars();
    if (env_vars.empty())
      throw Error(Error::Kind::Internal, "ptr mismatch on an empty environment");
    qlin::CMatrix diff = px.mat() - py.mat();
    Eigen::SelfAdjointEigenSolver<qlin::CMatrix> es(diff);
    qlin::CMatrix plus = qlin::CMatrix::Zero(diff.rows(), diff.cols());
    qlin::CMatrix minus = qlin::CMatrix::Zero(diff.rows(), diff.cols());
    for (long i = 0; i < es.eigenvalues().size(); ++i) {
      const auto v = es.eigenvectors().col(i);
      if (es.eigenvalues()(i) > 0)
        plus += v * v.adjoint();
      else if (es.eigenvalues()(i) < 0)
        minus += v * v.adjoint();
    }
    double gain_plus = (plus * diff).trace().real();
    double gain_minus = -(minus * diff).trace().real();
    if (gain_plus >= gain_minus) {
      double p = (plus * px.mat()).trace().real();
      return f_atom(plus, env_vars, p, "E+");
    }
    double p = (minus * py.mat()).trace().real();
    return f_not(f_atom(minus, env_vars, p, "E-"));
  }

  FormulaPtr transition_formula(int challenger, int defender, int action,
                                const dist::Distribution<int>& challenge) {
    (void)challenger;
    // States a defender derivative could put mass on.
    std::vector<int> reach = weak_alpha_reach(defender, action);
    DistFormula psi;
    for (const auto& [cprime, mass] : challenge.support()) {
      std::vector<FormulaPtr> conj;
      for (int dprime : reach)
        if (blocks[static_cast<size_t>(dprime)] != blocks[static_cast<size_t>(cprime)])
          conj.push_back(build(cprime, dprime));
      psi.parts.emplace_back(mass, conj.empty() ? f_true() : f_and(std::move(conj)));
    }
    return f_diamond(chk.plts().actions[static_cast<size_t>(action)], std::move(psi));
  }

  std::vector<int> weak_alpha_reach(int from, int action) {
    const auto& g = chk.plts().graph;
    std::vector<int> pre = weak::tau_cone(g, {from});
    if (action == dist::Plts::kTau) return pre;
    std::vector<int> starts;
    std::set<int> started;
    for (int s : pre)
      for (int ti : g.outgoing[static_cast<size_t>(s)]) {
        const auto& tr = g.transitions[static_cast<size_t>(ti)];
        if (tr.label != action) continue;
        for (const auto& [t, p] : tr.target.support()) {
          (void)p;
          if (started.insert(t).second) starts.push_back(t);
        }
      }
    return weak::tau_cone(g, starts);
  }
};

}  // namespace

FormulaPtr distinguish(const sem::Engine& eng, const Configuration& c, const Configuration& d,
                       const bisim::SuperOpFamily& fam, const sem::Budget& budget) {
  bisim::Checker::Options opts;
  opts.mode = bisim::Mode::Ground;
  opts.family = fam;
  opts.budget = budget;
  opts.presplit_alphabet = false;  // every separation must come out of the game
  bisim::Checker chk(eng, opts);
  auto res = chk.check(c, d);
  if (res.verdict != bisim::Verdict::Distinguished)
    fail_validation("configurations are equivalent (modulo family); nothing to distinguish");

  Distinguisher dis{eng, chk, res.blocks, {}, {}};
  FormulaPtr f = dis.build(res.left_root, res.right_root);

  Satisfier sat(eng, budget);
  Tri at_c = sat.sat(c, f);
  Tri at_d = sat.sat(d, f);
  if (at_c != Tri::True || at_d != Tri::False)
    fail_validation("distinguishing formula failed verification: sat(c)=" +
                    std::to_string(static_cast<int>(at_c)) +
                    " sat(d)=" + std::to_string(static_cast<int>(at_d)) +
                    " formula=" + print_formula(f));
  return f;
}

// --- formula parsing -----------------------------------------------------------

namespace {

class FormulaParser {
 public:
  FormulaParser(const std::string& text, const syntax::Defs& defs) : text_(text), defs_(defs) {}

  FormulaPtr parse() {
    skip();
    while (word_ahead("proj")) parse_proj_decl();
    FormulaPtr f = parse_conj();
    skip();
    if (pos_ != text_.size()) err("trailing input after formula");
    return f;
  }

 private:
  const std::string& text_;
  const syntax::Defs& defs_;
  size_t pos_ = 0;
  std::map<std::string, qlin::CMatrix> projs_;

  [[noreturn]] void err(const std::string& m) { fail_parse("formula: " + m); }

  void skip() {
    while (pos_ < text_.size()) {
      if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      } else if (text_.compare(pos_, 2, "//") == 0) {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  bool lit(const std::string& s) {
    skip();
    if (text_.compare(pos_, s.size(), s) == 0) {
      pos_ += s.size();
      return true;
    }
    return false;
  }

  bool word_ahead(const std::string& w) {
    skip();
    if (text_.compare(pos_, w.size(), w) != 0) return false;
    size_t end = pos_ + w.size();
    return end >= text_.size() || !(std::isalnum(static_cast<unsigned char>(text_[end])) ||
                                    text_[end] == '_');
  }

  bool word(const std::string& w) {
    if (!word_ahead(w)) return false;
    pos_ += w.size();
    return true;
  }

  std::string ident() {
    skip();
    size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '_' || text_[pos_] == '\''))
      ++pos_;
    if (start == pos_) err("expected an identifier");
    return text_.substr(start, pos_ - start);
  }

  std::string quoted() {
    skip();
    if (pos_ >= text_.size() || text_[pos_] != '"') err("expected a string literal");
    ++pos_;
    size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '"') ++pos_;
    if (pos_ >= text_.size()) err("unterminated string");
    std::string s = text_.substr(start, pos_ - start);
    ++pos_;
    return s;
  }

  double number() {
    skip();
    size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == '-' ||
                                   text_[pos_] == '+')) {
      if ((text_[pos_] == '-' || text_[pos_] == '+') && pos_ != start &&
          text_[pos_ - 1] != 'e')
        break;
      ++pos_;
    }
    if (start == pos_) err("expected a number");
    double v = std::stod(text_.substr(start, pos_ - start));
    // fractional form p/q
    skip();
    if (pos_ < text_.size() && text_[pos_] == '/') {
      ++pos_;
      skip();
      size_t dstart = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (dstart == pos_) err("expected a denominator");
      v /= std::stod(text_.substr(dstart, pos_ - dstart));
    }
    return v;
  }

  qlin::CMatrix parse_ket_projector(const std::string& pattern) {
    qlin::CVector v = qlin::gates::ket_string(pattern);
    return v * v.adjoint();
  }

  void parse_proj_decl() {
    word("proj");
    std::string name = ident();
    if (!lit("=")) err("expected '=' in projector declaration");
    qlin::CMatrix m;
    if (word("ket")) {
      m = parse_ket_projector(quoted());
    } else {
      err("expected 'ket' in projector declaration");
    }
    if (!lit(";")) err("expected ';' after projector declaration");
    projs_[name] = std::move(m);
  }

  FormulaPtr parse_conj() {
    std::vector<FormulaPtr> parts{parse_unary()};
    while (lit("&")) parts.push_back(parse_unary());
    if (parts.size() == 1) return parts[0];
    return f_and(std::move(parts));
  }

  FormulaPtr parse_unary() {
    skip();
    if (lit("!")) return f_not(parse_unary());
    if (word("SO")) {
      if (!lit("(")) err("expected '(' after SO");
      std::string name = ident();
      if (!lit("[")) err("expected '[' with target variables");
      std::vector<std::string> vars{ident()};
      while (lit(",")) vars.push_back(ident());
      if (!lit("]")) err("expected ']'");
      if (!lit(")")) err("expected ')'");
      if (!lit(".")) err("expected '.' after SO(...)");
      auto def = defs_.superops.find(name);
      if (def == defs_.superops.end()) err("unknown super-operator: " + name);
      if (static_cast<int>(vars.size()) != def->second.arity) err("super-operator arity mismatch");
      qlin::SuperOp op(vars, def->second.kraus);
      return f_so(name + "[" + vars[0] + (vars.size() > 1 ? ",..." : "") + "]", std::move(op),
                  parse_unary());
    }
    return parse_atom();
  }

  FormulaPtr parse_atom() {
    skip();
    if (word("true")) return f_true();
    if (lit("<")) return parse_diamond();
    if (lit("(")) {
      FormulaPtr f = parse_conj();
      if (!lit(")")) err("expected ')'");
      return f;
    }
    // projector atom: NAME{vars}[>=p] | ket"pattern"{vars}[>=p] | id{vars}[>=p]
    qlin::CMatrix proj;
    std::string display;
    if (word("ket")) {
      std::string pattern = quoted();
      proj = parse_ket_projector(pattern);
      display = "ket\"" + pattern + "\"";
    } else {
      std::string name = ident();
      display = name;
      if (name == "id") {
        proj = qlin::CMatrix();  // resolved after the variable list
      } else {
        auto it = projs_.find(name);
        if (it == projs_.end()) err("unknown projector: " + name);
        proj = it->second;
      }
    }
    if (!lit("{")) err("expected '{' with projector variables");
    std::vector<std::string> vars{ident()};
    while (lit(",")) vars.push_back(ident());
    if (!lit("}")) err("expected '}'");
    if (display == "id") {
      long d = 1L << vars.size();
      proj = qlin::CMatrix::Identity(d, d);
    }
    if (!lit("[")) err("expected '[>=p]' threshold");
    if (!lit(">=")) err("expected '>='");
    double p = number();
    if (!lit("]")) err("expected ']'");
    long want = 1L << vars.size();
    if (proj.rows() != want) err("projector dimension does not match its variables");
    return f_atom(std::move(proj), std::move(vars), p, std::move(display));
  }

  FormulaPtr parse_diamond() {
    // action text up to '>'
    skip();
    Action a;
    if (word("tau")) {
      a = Action::tau();
    } else {
      std::string chan = ident();
      bool out;
      if (lit("!"))
        out = true;
      else if (lit("?"))
        out = false;
      else
        err("expected '!' or '?' in the diamond action");
      if (defs_.is_quantum_chan(chan)) {
        std::string qv = ident();
        a = out ? Action::qout(chan, qv) : Action::qin(chan, qv);
      } else if (defs_.is_classical_chan(chan)) {
        Value v;
        skip();
        if (pos_ < text_.size() && text_[pos_] == '"') {
          v = Value::bits(quoted());
        } else {
          bool neg = lit("-");
          size_t start = pos_;
          while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
          if (start == pos_) err("expected a value in the diamond action");
          long long num = std::stoll(text_.substr(start, pos_ - start));
          long long den = 1;
          if (pos_ < text_.size() && text_[pos_] == '/') {
            ++pos_;
            size_t ds = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            den = std::stoll(text_.substr(ds, pos_ - ds));
          }
          v = Value(Rational(neg ? -num : num, den));
        }
        a = out ? Action::cout(chan, v) : Action::cin(chan, v);
      } else {
        err("unknown channel in diamond action: " + chan);
      }
    }
    if (!lit(">")) err("expected '>' closing the diamond");
    // continuation: either (p1*f1 (+) p2*f2 ...) or a bare formula meaning 1*f
    skip();
    DistFormula psi;
    if (pos_ < text_.size() && text_[pos_] == '(') {
      // try the weighted form; a '(' may also open a parenthesised formula
      size_t save = pos_;
      ++pos_;
      skip();
      bool weighted = std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                      text_[pos_] == '.';
      pos_ = save;
      if (weighted) {
        lit("(");
        do {
          double p = number();
          if (!lit("*")) err("expected '*' after a weight");
          psi.parts.emplace_back(p, parse_unary());
        } while (lit("(+)"));
        if (!lit(")")) err("expected ')' closing the distribution formula");
        return f_diamond(std::move(a), std::move(psi));
      }
    }
    psi.parts.emplace_back(1.0, parse_unary());
    return f_diamond(std::move(a), std::move(psi));
  }
};

}  // namespace

FormulaPtr parse_formula(const std::string& text, const syntax::Defs& defs) {
  FormulaParser p(text, defs);
  return p.parse();
}

}  // namespace qccs::logic
