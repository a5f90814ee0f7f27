#include <algorithm>
#include <sstream>

#include "qccs/syntax.hpp"

namespace qccs::syntax {

namespace {
std::shared_ptr<Term> blank(TermKind k) {
  auto t = std::make_shared<Term>();
  t->kind = k;
  return t;
}
}  // namespace

ExprPtr mk_lit(Value v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Lit;
  e->lit = std::move(v);
  return e;
}
ExprPtr mk_var(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Var;
  e->var = std::move(name);
  return e;
}
ExprPtr mk_expr(ExprKind k, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->args = std::move(args);
  return e;
}

BExprPtr mk_blit(bool v) {
  auto b = std::make_shared<BExpr>();
  b->kind = BExprKind::Lit;
  b->lit = v;
  return b;
}
BExprPtr mk_bnot(BExprPtr a) {
  auto b = std::make_shared<BExpr>();
  b->kind = BExprKind::Not;
  b->a = std::move(a);
  return b;
}
BExprPtr mk_bbin(BExprKind k, BExprPtr a, BExprPtr c) {
  auto b = std::make_shared<BExpr>();
  b->kind = k;
  b->a = std::move(a);
  b->b = std::move(c);
  return b;
}
BExprPtr mk_rel(RelOp op, ExprPtr lhs, ExprPtr rhs) {
  auto b = std::make_shared<BExpr>();
  b->kind = BExprKind::Rel;
  b->op = op;
  b->lhs = std::move(lhs);
  b->rhs = std::move(rhs);
  return b;
}

TermPtr mk_nil() { return blank(TermKind::Nil); }
TermPtr mk_tau(TermPtr cont) {
  auto t = blank(TermKind::Tau);
  t->cont = std::move(cont);
  return t;
}
TermPtr mk_cinput(std::string chan, std::string var, TermPtr cont) {
  auto t = blank(TermKind::CInput);
  t->chan = std::move(chan);
  t->var = std::move(var);
  t->cont = std::move(cont);
  return t;
}
TermPtr mk_coutput(std::string chan, ExprPtr e, TermPtr cont) {
  auto t = blank(TermKind::COutput);
  t->chan = std::move(chan);
  t->expr = std::move(e);
  t->cont = std::move(cont);
  return t;
}
TermPtr mk_qinput(std::string chan, std::string qvar, TermPtr cont) {
  auto t = blank(TermKind::QInput);
  t->chan = std::move(chan);
  t->var = std::move(qvar);
  t->cont = std::move(cont);
  return t;
}
TermPtr mk_qoutput(std::string chan, std::string qvar, TermPtr cont) {
  auto t = blank(TermKind::QOutput);
  t->chan = std::move(chan);
  t->qvar = std::move(qvar);
  t->cont = std::move(cont);
  return t;
}
TermPtr mk_superapp(std::string name, std::vector<std::string> qargs, TermPtr cont) {
  auto t = blank(TermKind::SuperApp);
  t->name = std::move(name);
  t->qargs = std::move(qargs);
  t->cont = std::move(cont);
  return t;
}
TermPtr mk_measapp(std::string name, std::vector<std::string> qargs, std::string var,
                   TermPtr cont) {
  auto t = blank(TermKind::MeasApp);
  t->name = std::move(name);
  t->qargs = std::move(qargs);
  t->var = std::move(var);
  t->cont = std::move(cont);
  return t;
}
TermPtr mk_sum(TermPtr l, TermPtr r) {
  auto t = blank(TermKind::Sum);
  t->left = std::move(l);
  t->right = std::move(r);
  return t;
}
TermPtr mk_par(TermPtr l, TermPtr r) {
  auto t = blank(TermKind::Par);
  t->left = std::move(l);
  t->right = std::move(r);
  return t;
}
TermPtr mk_relabel(TermPtr cont, std::string fn) {
  auto t = blank(TermKind::Relabel);
  t->cont = std::move(cont);
  t->name = std::move(fn);
  return t;
}
TermPtr mk_restrict(TermPtr cont, std::vector<std::string> channels) {
  auto t = blank(TermKind::Restrict);
  t->cont = std::move(cont);
  std::sort(channels.begin(), channels.end());
  channels.erase(std::unique(channels.begin(), channels.end()), channels.end());
  t->channels = std::move(channels);
  return t;
}
TermPtr mk_if(BExprPtr guard, TermPtr cont) {
  auto t = blank(TermKind::If);
  t->guard = std::move(guard);
  t->cont = std::move(cont);
  return t;
}
TermPtr mk_constapp(std::string name, std::vector<std::string> qargs, std::vector<ExprPtr> eargs) {
  auto t = blank(TermKind::ConstApp);
  t->name = std::move(name);
  t->qargs = std::move(qargs);
  t->eargs = std::move(eargs);
  return t;
}

// --- expression evaluation ---------------------------------------------

Value eval_expr(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Lit: return e->lit;
    case ExprKind::Var: fail_validation("free classical variable in evaluation: " + e->var);
    case ExprKind::Add:
      return Value(eval_expr(e->args[0]).as_rational() + eval_expr(e->args[1]).as_rational());
    case ExprKind::Sub:
      return Value(eval_expr(e->args[0]).as_rational() - eval_expr(e->args[1]).as_rational());
    case ExprKind::Mul:
      return Value(eval_expr(e->args[0]).as_rational() * eval_expr(e->args[1]).as_rational());
    case ExprKind::Neg: return Value(-eval_expr(e->args[0]).as_rational());
    case ExprKind::Cmp:
      return Value(cmp_bits(eval_expr(e->args[0]).as_bits(), eval_expr(e->args[1]).as_bits(),
                            eval_expr(e->args[2]).as_bits()));
    case ExprKind::SubStr:
      return Value(substr_bits(eval_expr(e->args[0]).as_bits(), eval_expr(e->args[1]).as_bits()));
    case ExprKind::RemStr:
      return Value(remstr_bits(eval_expr(e->args[0]).as_bits(), eval_expr(e->args[1]).as_bits()));
    case ExprKind::Len:
      return Value(Rational(static_cast<std::int64_t>(eval_expr(e->args[0]).as_bits().size())));
  }
  fail_validation("unreachable expression kind");
}

bool eval_bexpr(const BExprPtr& b) {
  switch (b->kind) {
    case BExprKind::Lit: return b->lit;
    case BExprKind::Not: return !eval_bexpr(b->a);
    case BExprKind::And: return eval_bexpr(b->a) && eval_bexpr(b->b);
    case BExprKind::Or: return eval_bexpr(b->a) || eval_bexpr(b->b);
    case BExprKind::Imp: return !eval_bexpr(b->a) || eval_bexpr(b->b);
    case BExprKind::Rel: {
      Value l = eval_expr(b->lhs), r = eval_expr(b->rhs);
      if (b->op == RelOp::Eq) return l == r;
      if (b->op == RelOp::Ne) return !(l == r);
      const Rational& lr = l.as_rational();
      const Rational& rr = r.as_rational();
      switch (b->op) {
        case RelOp::Lt: return lr < rr;
        case RelOp::Gt: return rr < lr;
        case RelOp::Le: return lr <= rr;
        case RelOp::Ge: return rr <= lr;
        default: break;
      }
    }
  }
  fail_validation("unreachable boolean expression kind");
}

std::set<std::string> expr_vars(const ExprPtr& e) {
  std::set<std::string> out;
  if (e->kind == ExprKind::Var) {
    out.insert(e->var);
    return out;
  }
  for (const auto& a : e->args) {
    auto sub = expr_vars(a);
    out.insert(sub.begin(), sub.end());
  }
  return out;
}

std::set<std::string> bexpr_vars(const BExprPtr& b) {
  std::set<std::string> out;
  switch (b->kind) {
    case BExprKind::Lit: break;
    case BExprKind::Not: out = bexpr_vars(b->a); break;
    case BExprKind::And:
    case BExprKind::Or:
    case BExprKind::Imp: {
      out = bexpr_vars(b->a);
      auto rb = bexpr_vars(b->b);
      out.insert(rb.begin(), rb.end());
      break;
    }
    case BExprKind::Rel: {
      out = expr_vars(b->lhs);
      auto rb = expr_vars(b->rhs);
      out.insert(rb.begin(), rb.end());
      break;
    }
  }
  return out;
}

// --- free variables ---------------------------------------------------

std::set<std::string> qv(const TermPtr& t, const Defs& defs) {
  switch (t->kind) {
    case TermKind::Nil: return {};
    case TermKind::Tau:
    case TermKind::CInput:
    case TermKind::COutput:
    case TermKind::Relabel:
    case TermKind::Restrict:
    case TermKind::If: return qv(t->cont, defs);
    case TermKind::QInput: {
      auto s = qv(t->cont, defs);
      s.erase(t->var);
      return s;
    }
    case TermKind::QOutput: {
      auto s = qv(t->cont, defs);
      s.insert(t->qvar);
      return s;
    }
    case TermKind::SuperApp:
    case TermKind::MeasApp: {
      auto s = qv(t->cont, defs);
      s.insert(t->qargs.begin(), t->qargs.end());
      return s;
    }
    case TermKind::Sum:
    case TermKind::Par: {
      auto s = qv(t->left, defs);
      auto r = qv(t->right, defs);
      s.insert(r.begin(), r.end());
      return s;
    }
    case TermKind::ConstApp: {
      if (!defs.constants.count(t->name))
        fail_validation("undefined process constant: " + t->name);
      return {t->qargs.begin(), t->qargs.end()};
    }
  }
  fail_validation("unreachable term kind");
}

std::set<std::string> fv(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Nil: return {};
    case TermKind::Tau:
    case TermKind::QOutput:
    case TermKind::QInput:
    case TermKind::SuperApp:
    case TermKind::Relabel:
    case TermKind::Restrict: return t->cont ? fv(t->cont) : std::set<std::string>{};
    case TermKind::CInput: {
      auto s = fv(t->cont);
      s.erase(t->var);
      return s;
    }
    case TermKind::MeasApp: {
      auto s = fv(t->cont);
      s.erase(t->var);
      return s;
    }
    case TermKind::COutput: {
      auto s = fv(t->cont);
      auto e = expr_vars(t->expr);
      s.insert(e.begin(), e.end());
      return s;
    }
    case TermKind::If: {
      auto s = fv(t->cont);
      auto g = bexpr_vars(t->guard);
      s.insert(g.begin(), g.end());
      return s;
    }
    case TermKind::Sum:
    case TermKind::Par: {
      auto s = fv(t->left);
      auto r = fv(t->right);
      s.insert(r.begin(), r.end());
      return s;
    }
    case TermKind::ConstApp: {
      std::set<std::string> s;
      for (const auto& e : t->eargs) {
        auto v = expr_vars(e);
        s.insert(v.begin(), v.end());
      }
      return s;
    }
  }
  fail_validation("unreachable term kind");
}

// --- legality ----------------------------------------------------------

namespace {

struct LegalityChecker {
  const Defs& defs;
  std::optional<Violation> violation;
  std::set<std::string> checked_constants;

  void report(const std::string& path, const std::string& msg) {
    if (!violation) violation = Violation{path, msg};
  }

  // `scope` holds quantum names introduced by input binders or constant
  // parameters; they are as usable as register names.
  void check(const TermPtr& t, const std::string& path, std::set<std::string> scope) {
    if (violation) return;
    switch (t->kind) {
      case TermKind::Nil: return;
      case TermKind::Tau: check(t->cont, path + "/tau", std::move(scope)); return;
      case TermKind::CInput:
        if (!defs.is_classical_chan(t->chan))
          report(path, "undeclared classical channel: " + t->chan);
        check(t->cont, path + "/" + t->chan + "?", std::move(scope));
        return;
      case TermKind::COutput:
        if (!defs.is_classical_chan(t->chan))
          report(path, "undeclared classical channel: " + t->chan);
        check(t->cont, path + "/" + t->chan + "!", std::move(scope));
        return;
      case TermKind::QInput: {
        if (!defs.is_quantum_chan(t->chan)) report(path, "undeclared quantum channel: " + t->chan);
        scope.insert(t->var);
        check(t->cont, path + "/" + t->chan + "?", std::move(scope));
        return;
      }
      case TermKind::QOutput: {
        if (!defs.is_quantum_chan(t->chan)) report(path, "undeclared quantum channel: " + t->chan);
        if (!defs.reg.contains(t->qvar) && !scope.count(t->qvar))
          report(path, "quantum variable outside the register: " + t->qvar);
        auto body_qv = qv(t->cont, defs);
        if (body_qv.count(t->qvar))
          report(path, "condition 1 violated: " + t->qvar + " used after being sent");
        check(t->cont, path + "/" + t->chan + "!", std::move(scope));
        return;
      }
      case TermKind::SuperApp: {
        auto it = defs.superops.find(t->name);
        if (it == defs.superops.end())
          report(path, "undeclared super-operator: " + t->name);
        else if (static_cast<int>(t->qargs.size()) != it->second.arity)
          report(path, "super-operator arity mismatch at " + t->name);
        check_qargs(t, path, scope);
        check(t->cont, path + "/" + t->name, std::move(scope));
        return;
      }
      case TermKind::MeasApp: {
        auto it = defs.measurements.find(t->name);
        if (it == defs.measurements.end())
          report(path, "undeclared measurement: " + t->name);
        else if (static_cast<int>(t->qargs.size()) != it->second.arity)
          report(path, "measurement arity mismatch at " + t->name);
        check_qargs(t, path, scope);
        check(t->cont, path + "/" + t->name, std::move(scope));
        return;
      }
      case TermKind::Sum:
        check(t->left, path + "/sum.l", scope);
        check(t->right, path + "/sum.r", std::move(scope));
        return;
      case TermKind::Par: {
        auto lq = qv(t->left, defs);
        auto rq = qv(t->right, defs);
        for (const auto& v : lq)
          if (rq.count(v)) {
            report(path, "condition 2 violated: both sides of || use " + v);
            break;
          }
        check(t->left, path + "/par.l", scope);
        check(t->right, path + "/par.r", std::move(scope));
        return;
      }
      case TermKind::Relabel: {
        if (!defs.relabels.count(t->name))
          report(path, "undeclared relabelling function: " + t->name);
        check(t->cont, path + "/[" + t->name + "]", std::move(scope));
        return;
      }
      case TermKind::Restrict: check(t->cont, path + "/restrict", std::move(scope)); return;
      case TermKind::If: check(t->cont, path + "/if", std::move(scope)); return;
      case TermKind::ConstApp: {
        auto it = defs.constants.find(t->name);
        if (it == defs.constants.end()) {
          report(path, "condition 3 violated: no defining equation for " + t->name);
          return;
        }
        const ConstDef& def = it->second;
        if (t->qargs.size() != def.qparams.size() || t->eargs.size() != def.cparams.size())
          report(path, "constant arity mismatch at " + t->name);
        std::set<std::string> distinct(t->qargs.begin(), t->qargs.end());
        if (distinct.size() != t->qargs.size())
          report(path, "constant applied to repeated quantum variables at " + t->name);
        for (const auto& v : t->qargs)
          if (!defs.reg.contains(v) && !scope.count(v))
            report(path, "quantum variable outside the register: " + v);
        if (checked_constants.insert(t->name).second) {
          auto body_qv = qv(def.body, defs);
          for (const auto& v : body_qv)
            if (std::find(def.qparams.begin(), def.qparams.end(), v) == def.qparams.end()) {
              report(path, "condition 3 violated: qv of " + t->name + "'s body leaks " + v);
              break;
            }
          auto body_fv = fv(def.body);
          for (const auto& v : body_fv)
            if (std::find(def.cparams.begin(), def.cparams.end(), v) == def.cparams.end()) {
              report(path, "condition 3 violated: fv of " + t->name + "'s body leaks " + v);
              break;
            }
          check(def.body, path + "/" + t->name + "=",
                std::set<std::string>(def.qparams.begin(), def.qparams.end()));
        }
        return;
      }
    }
  }

  void check_qargs(const TermPtr& t, const std::string& path, const std::set<std::string>& scope) {
    std::set<std::string> distinct(t->qargs.begin(), t->qargs.end());
    if (distinct.size() != t->qargs.size()) report(path, "repeated quantum argument at " + t->name);
    for (const auto& v : t->qargs)
      if (!defs.reg.contains(v) && !scope.count(v))
        report(path, "quantum variable outside the register: " + v);
  }
};

}  // namespace

std::optional<Violation> check_legal(const TermPtr& t, const Defs& defs) {
  LegalityChecker checker{defs, std::nullopt, {}};
  checker.check(t, "main", {});
  return checker.violation;
}

// --- substitution --------------------------------------------------------

namespace {

std::string fresh_name(const std::string& base, const std::set<std::string>& avoid) {
  for (int i = 1;; ++i) {
    std::string cand = base + "'" + (i > 1 ? std::to_string(i) : "");
    if (!avoid.count(cand)) return cand;
  }
}

ExprPtr subst_expr(const ExprPtr& e, const std::map<std::string, Value>& cvals) {
  switch (e->kind) {
    case ExprKind::Lit: return e;
    case ExprKind::Var: {
      auto it = cvals.find(e->var);
      return it == cvals.end() ? e : mk_lit(it->second);
    }
    default: {
      std::vector<ExprPtr> args;
      args.reserve(e->args.size());
      for (const auto& a : e->args) args.push_back(subst_expr(a, cvals));
      auto out = std::make_shared<Expr>(*e);
      out->args = std::move(args);
      return out;
    }
  }
}

BExprPtr subst_bexpr(const BExprPtr& b, const std::map<std::string, Value>& cvals) {
  auto out = std::make_shared<BExpr>(*b);
  if (b->kind == BExprKind::Rel) {
    out->lhs = subst_expr(b->lhs, cvals);
    out->rhs = subst_expr(b->rhs, cvals);
  } else {
    if (b->a) out->a = subst_bexpr(b->a, cvals);
    if (b->b) out->b = subst_bexpr(b->b, cvals);
  }
  return out;
}

TermPtr subst_rec(const TermPtr& t, std::map<std::string, Value> cvals,
                  std::map<std::string, std::string> qrename);

// Handles a classical binder: drops the bound name from the substitution.
TermPtr subst_under_cbinder(const TermPtr& t, const std::map<std::string, Value>& cvals,
                            const std::map<std::string, std::string>& qrename) {
  auto inner = cvals;
  inner.erase(t->var);
  auto out = std::make_shared<Term>(*t);
  out->cont = subst_rec(t->cont, std::move(inner), qrename);
  return out;
}

TermPtr subst_rec(const TermPtr& t, std::map<std::string, Value> cvals,
                  std::map<std::string, std::string> qrename) {
  switch (t->kind) {
    case TermKind::Nil: return t;
    case TermKind::Tau: {
      auto out = std::make_shared<Term>(*t);
      out->cont = subst_rec(t->cont, cvals, qrename);
      return out;
    }
    case TermKind::CInput: return subst_under_cbinder(t, cvals, qrename);
    case TermKind::COutput: {
      auto out = std::make_shared<Term>(*t);
      out->expr = subst_expr(t->expr, cvals);
      out->cont = subst_rec(t->cont, cvals, qrename);
      return out;
    }
    case TermKind::QInput: {
      auto inner = qrename;
      inner.erase(t->var);
      std::string binder = t->var;
      std::set<std::string> incoming;
      for (const auto& [from, to] : inner) {
        (void)from;
        incoming.insert(to);
      }
      TermPtr body = t->cont;
      if (incoming.count(binder)) {
        // The binder would capture an incoming name; rename it first.
        std::set<std::string> avoid = incoming;
        for (const auto& [from, to] : inner) {
          avoid.insert(from);
          avoid.insert(to);
        }
        auto bodyfree = fv(body);
        avoid.insert(bodyfree.begin(), bodyfree.end());
        // Avoid every name occurring anywhere in the body.
        std::string fresh = fresh_name(binder, avoid);
        std::map<std::string, std::string> ren{{binder, fresh}};
        body = subst_rec(body, {}, ren);
        binder = fresh;
      }
      auto out = std::make_shared<Term>(*t);
      out->var = binder;
      out->cont = subst_rec(body, cvals, inner);
      return out;
    }
    case TermKind::QOutput: {
      auto out = std::make_shared<Term>(*t);
      auto it = qrename.find(t->qvar);
      if (it != qrename.end()) out->qvar = it->second;
      out->cont = subst_rec(t->cont, cvals, qrename);
      return out;
    }
    case TermKind::SuperApp: {
      auto out = std::make_shared<Term>(*t);
      for (auto& q : out->qargs) {
        auto it = qrename.find(q);
        if (it != qrename.end()) q = it->second;
      }
      out->cont = subst_rec(t->cont, cvals, qrename);
      return out;
    }
    case TermKind::MeasApp: {
      auto out = std::make_shared<Term>(*t);
      for (auto& q : out->qargs) {
        auto it = qrename.find(q);
        if (it != qrename.end()) q = it->second;
      }
      auto inner = cvals;
      inner.erase(t->var);
      out->cont = subst_rec(t->cont, std::move(inner), qrename);
      return out;
    }
    case TermKind::Sum:
    case TermKind::Par: {
      auto out = std::make_shared<Term>(*t);
      out->left = subst_rec(t->left, cvals, qrename);
      out->right = subst_rec(t->right, cvals, qrename);
      return out;
    }
    case TermKind::Relabel:
    case TermKind::Restrict: {
      auto out = std::make_shared<Term>(*t);
      out->cont = subst_rec(t->cont, cvals, qrename);
      return out;
    }
    case TermKind::If: {
      auto out = std::make_shared<Term>(*t);
      out->guard = subst_bexpr(t->guard, cvals);
      out->cont = subst_rec(t->cont, cvals, qrename);
      return out;
    }
    case TermKind::ConstApp: {
      auto out = std::make_shared<Term>(*t);
      for (auto& q : out->qargs) {
        auto it = qrename.find(q);
        if (it != qrename.end()) q = it->second;
      }
      std::vector<ExprPtr> eargs;
      eargs.reserve(t->eargs.size());
      for (const auto& e : t->eargs) eargs.push_back(subst_expr(e, cvals));
      out->eargs = std::move(eargs);
      return out;
    }
  }
  fail_validation("unreachable term kind");
}

}  // namespace

TermPtr substitute(const TermPtr& t, const std::map<std::string, Value>& cvals,
                   const std::map<std::string, std::string>& qrename) {
  std::set<std::string> targets;
  for (const auto& [from, to] : qrename) {
    (void)from;
    if (!targets.insert(to).second)
      fail_validation("quantum renaming must be injective");
  }
  return subst_rec(t, cvals, qrename);
}

// --- alpha normalisation ---------------------------------------------------

namespace {

struct AlphaState {
  int next_c = 0;
  int next_q = 0;
};

TermPtr alpha_rec(const TermPtr& t, std::map<std::string, std::string> cmap,
                  std::map<std::string, std::string> qmap, AlphaState& st);

ExprPtr alpha_expr(const ExprPtr& e, const std::map<std::string, std::string>& cmap) {
  switch (e->kind) {
    case ExprKind::Lit: return e;
    case ExprKind::Var: {
      auto it = cmap.find(e->var);
      return it == cmap.end() ? e : mk_var(it->second);
    }
    default: {
      auto out = std::make_shared<Expr>(*e);
      for (auto& a : out->args) a = alpha_expr(a, cmap);
      return out;
    }
  }
}

BExprPtr alpha_bexpr(const BExprPtr& b, const std::map<std::string, std::string>& cmap) {
  auto out = std::make_shared<BExpr>(*b);
  if (b->kind == BExprKind::Rel) {
    out->lhs = alpha_expr(b->lhs, cmap);
    out->rhs = alpha_expr(b->rhs, cmap);
  } else {
    if (b->a) out->a = alpha_bexpr(b->a, cmap);
    if (b->b) out->b = alpha_bexpr(b->b, cmap);
  }
  return out;
}

TermPtr alpha_rec(const TermPtr& t, std::map<std::string, std::string> cmap,
                  std::map<std::string, std::string> qmap, AlphaState& st) {
  auto rename_q = [&](const std::string& q) {
    auto it = qmap.find(q);
    return it == qmap.end() ? q : it->second;
  };
  switch (t->kind) {
    case TermKind::Nil: return t;
    case TermKind::Tau: {
      auto out = std::make_shared<Term>(*t);
      out->cont = alpha_rec(t->cont, cmap, qmap, st);
      return out;
    }
    case TermKind::CInput:
    case TermKind::MeasApp: {
      auto out = std::make_shared<Term>(*t);
      std::string fresh = "x%" + std::to_string(st.next_c++);
      cmap[t->var] = fresh;
      out->var = fresh;
      if (t->kind == TermKind::MeasApp)
        for (auto& q : out->qargs) q = rename_q(q);
      out->cont = alpha_rec(t->cont, cmap, qmap, st);
      return out;
    }
    case TermKind::COutput: {
      auto out = std::make_shared<Term>(*t);
      out->expr = alpha_expr(t->expr, cmap);
      out->cont = alpha_rec(t->cont, cmap, qmap, st);
      return out;
    }
    case TermKind::QInput: {
      auto out = std::make_shared<Term>(*t);
      std::string fresh = "q%" + std::to_string(st.next_q++);
      qmap[t->var] = fresh;
      out->var = fresh;
      out->cont = alpha_rec(t->cont, cmap, qmap, st);
      return out;
    }
    case TermKind::QOutput: {
      auto out = std::make_shared<Term>(*t);
      out->qvar = rename_q(t->qvar);
      out->cont = alpha_rec(t->cont, cmap, qmap, st);
      return out;
    }
    case TermKind::SuperApp: {
      auto out = std::make_shared<Term>(*t);
      for (auto& q : out->qargs) q = rename_q(q);
      out->cont = alpha_rec(t->cont, cmap, qmap, st);
      return out;
    }
    case TermKind::Sum:
    case TermKind::Par: {
      auto out = std::make_shared<Term>(*t);
      out->left = alpha_rec(t->left, cmap, qmap, st);
      out->right = alpha_rec(t->right, cmap, qmap, st);
      return out;
    }
    case TermKind::Relabel:
    case TermKind::Restrict: {
      auto out = std::make_shared<Term>(*t);
      out->cont = alpha_rec(t->cont, cmap, qmap, st);
      return out;
    }
    case TermKind::If: {
      auto out = std::make_shared<Term>(*t);
      out->guard = alpha_bexpr(t->guard, cmap);
      out->cont = alpha_rec(t->cont, cmap, qmap, st);
      return out;
    }
    case TermKind::ConstApp: {
      auto out = std::make_shared<Term>(*t);
      for (auto& q : out->qargs) q = rename_q(q);
      for (auto& e : out->eargs) e = alpha_expr(e, cmap);
      return out;
    }
  }
  fail_validation("unreachable term kind");
}

}  // namespace

TermPtr alpha_normal(const TermPtr& t) {
  AlphaState st;
  return alpha_rec(t, {}, {}, st);
}

// --- printing ---------------------------------------------------------------

namespace {

const char* relop_text(RelOp op) {
  switch (op) {
    case RelOp::Lt: return "<";
    case RelOp::Gt: return ">";
    case RelOp::Le: return "<=";
    case RelOp::Ge: return ">=";
    case RelOp::Eq: return "=";
    case RelOp::Ne: return "!=";
  }
  return "?";
}

void print_expr_rec(const ExprPtr& e, std::ostream& os, int parent_level) {
  // levels: 0 additive, 1 multiplicative, 2 atom
  switch (e->kind) {
    case ExprKind::Lit: os << e->lit.str(); return;
    case ExprKind::Var: os << e->var; return;
    case ExprKind::Add:
    case ExprKind::Sub: {
      bool paren = parent_level > 0;
      if (paren) os << "(";
      print_expr_rec(e->args[0], os, 0);
      os << (e->kind == ExprKind::Add ? " + " : " - ");
      print_expr_rec(e->args[1], os, 1);
      if (paren) os << ")";
      return;
    }
    case ExprKind::Mul: {
      bool paren = parent_level > 1;
      if (paren) os << "(";
      print_expr_rec(e->args[0], os, 1);
      os << " * ";
      print_expr_rec(e->args[1], os, 2);
      if (paren) os << ")";
      return;
    }
    case ExprKind::Neg:
      os << "-";
      print_expr_rec(e->args[0], os, 2);
      return;
    case ExprKind::Cmp:
    case ExprKind::SubStr:
    case ExprKind::RemStr:
    case ExprKind::Len: {
      os << (e->kind == ExprKind::Cmp      ? "cmp"
             : e->kind == ExprKind::SubStr ? "substr"
             : e->kind == ExprKind::RemStr ? "remstr"
                                           : "len");
      os << "(";
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i) os << ", ";
        print_expr_rec(e->args[i], os, 0);
      }
      os << ")";
      return;
    }
  }
}

void print_bexpr_rec(const BExprPtr& b, std::ostream& os, int parent_level) {
  // levels: 0 imp, 1 or, 2 and, 3 atom
  switch (b->kind) {
    case BExprKind::Lit: os << (b->lit ? "true" : "false"); return;
    case BExprKind::Not:
      os << "not ";
      print_bexpr_rec(b->a, os, 3);
      return;
    case BExprKind::Imp: {
      bool paren = parent_level > 0;
      if (paren) os << "(";
      print_bexpr_rec(b->a, os, 1);
      os << " -> ";
      print_bexpr_rec(b->b, os, 0);
      if (paren) os << ")";
      return;
    }
    case BExprKind::Or: {
      bool paren = parent_level > 1;
      if (paren) os << "(";
      print_bexpr_rec(b->a, os, 1);
      os << " or ";
      print_bexpr_rec(b->b, os, 2);
      if (paren) os << ")";
      return;
    }
    case BExprKind::And: {
      bool paren = parent_level > 2;
      if (paren) os << "(";
      print_bexpr_rec(b->a, os, 2);
      os << " and ";
      print_bexpr_rec(b->b, os, 3);
      if (paren) os << ")";
      return;
    }
    case BExprKind::Rel:
      print_expr_rec(b->lhs, os, 0);
      os << " " << relop_text(b->op) << " ";
      print_expr_rec(b->rhs, os, 0);
      return;
  }
}

// levels: 0 par, 1 sum, 2 prefix
void print_term_rec(const TermPtr& t, std::ostream& os, int parent_level) {
  switch (t->kind) {
    case TermKind::Nil: os << "nil"; return;
    case TermKind::Tau: {
      bool paren = parent_level > 2;
      if (paren) os << "(";
      os << "tau.";
      print_term_rec(t->cont, os, 2);
      if (paren) os << ")";
      return;
    }
    case TermKind::CInput:
    case TermKind::QInput: {
      bool paren = parent_level > 2;
      if (paren) os << "(";
      os << t->chan << "?" << t->var << ".";
      print_term_rec(t->cont, os, 2);
      if (paren) os << ")";
      return;
    }
    case TermKind::COutput: {
      bool paren = parent_level > 2;
      if (paren) os << "(";
      os << t->chan << "!";
      print_expr_rec(t->expr, os, 1);
      os << ".";
      print_term_rec(t->cont, os, 2);
      if (paren) os << ")";
      return;
    }
    case TermKind::QOutput: {
      bool paren = parent_level > 2;
      if (paren) os << "(";
      os << t->chan << "!" << t->qvar << ".";
      print_term_rec(t->cont, os, 2);
      if (paren) os << ")";
      return;
    }
    case TermKind::SuperApp:
    case TermKind::MeasApp: {
      bool paren = parent_level > 2;
      if (paren) os << "(";
      os << t->name << "[";
      for (size_t i = 0; i < t->qargs.size(); ++i) {
        if (i) os << ", ";
        os << t->qargs[i];
      }
      if (t->kind == TermKind::MeasApp) os << "; " << t->var;
      os << "].";
      print_term_rec(t->cont, os, 2);
      if (paren) os << ")";
      return;
    }
    case TermKind::Sum: {
      bool paren = parent_level > 1;
      if (paren) os << "(";
      print_term_rec(t->left, os, 1);
      os << " + ";
      print_term_rec(t->right, os, 2);
      if (paren) os << ")";
      return;
    }
    case TermKind::Par: {
      bool paren = parent_level > 0;
      if (paren) os << "(";
      print_term_rec(t->left, os, 0);
      os << " || ";
      print_term_rec(t->right, os, 1);
      if (paren) os << ")";
      return;
    }
    case TermKind::Relabel: {
      print_term_rec(t->cont, os, 3);
      os << "[" << t->name << "]";
      return;
    }
    case TermKind::Restrict: {
      print_term_rec(t->cont, os, 3);
      os << " \\ {";
      for (size_t i = 0; i < t->channels.size(); ++i) {
        if (i) os << ", ";
        os << t->channels[i];
      }
      os << "}";
      return;
    }
    case TermKind::If: {
      bool paren = parent_level > 2;
      if (paren) os << "(";
      os << "if ";
      print_bexpr_rec(t->guard, os, 0);
      os << " then ";
      print_term_rec(t->cont, os, 2);
      if (paren) os << ")";
      return;
    }
    case TermKind::ConstApp: {
      os << t->name << "(";
      for (size_t i = 0; i < t->qargs.size(); ++i) {
        if (i) os << ", ";
        os << t->qargs[i];
      }
      os << ";";
      for (size_t i = 0; i < t->eargs.size(); ++i) {
        os << (i ? ", " : " ");
        print_expr_rec(t->eargs[i], os, 0);
      }
      os << ")";
      return;
    }
  }
}

}  // namespace

std::string print_term(const TermPtr& t) {
  std::ostringstream os;
  print_term_rec(t, os, 0);
  return os.str();
}

std::string print_expr(const ExprPtr& e) {
  std::ostringstream os;
  print_expr_rec(e, os, 0);
  return os.str();
}

std::string print_bexpr(const BExprPtr& b) {
  std::ostringstream os;
  print_bexpr_rec(b, os, 0);
  return os.str();
}

}  // namespace qccs::syntax
