#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qccs/qlin.hpp"
#include "qccs/value.hpp"

namespace qccs::syntax {

// --- classical expressions ---------------------------------------------

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Lit, Var, Add, Sub, Mul, Neg, Cmp, SubStr, RemStr, Len };

struct Expr {
  ExprKind kind;
  Value lit;                  // Lit
  std::string var;            // Var
  std::vector<ExprPtr> args;  // operators and built-in functions
};

ExprPtr mk_lit(Value v);
ExprPtr mk_var(std::string name);
ExprPtr mk_expr(ExprKind k, std::vector<ExprPtr> args);

struct BExpr;
using BExprPtr = std::shared_ptr<const BExpr>;

enum class BExprKind { Lit, Not, And, Or, Imp, Rel };
enum class RelOp { Lt, Gt, Le, Ge, Eq, Ne };

struct BExpr {
  BExprKind kind;
  bool lit = false;
  RelOp op = RelOp::Eq;
  ExprPtr lhs, rhs;  // Rel
  BExprPtr a, b;     // Not (a), And/Or/Imp (a, b)
};

BExprPtr mk_blit(bool v);
BExprPtr mk_bnot(BExprPtr a);
BExprPtr mk_bbin(BExprKind k, BExprPtr a, BExprPtr b);
BExprPtr mk_rel(RelOp op, ExprPtr lhs, ExprPtr rhs);

// Evaluation over closed expressions (free variables are an error).
Value eval_expr(const ExprPtr& e);
bool eval_bexpr(const BExprPtr& b);

std::set<std::string> expr_vars(const ExprPtr& e);
std::set<std::string> bexpr_vars(const BExprPtr& b);

// --- process terms -------------------------------------------------------

enum class TermKind {
  Nil,
  Tau,       // tau.P
  CInput,    // c?x.P
  COutput,   // c!e.P
  QInput,    // qc?q.P
  QOutput,   // qc!q.P
  SuperApp,  // E[q~].P
  MeasApp,   // M[q~;x].P
  Sum,
  Par,
  Relabel,   // P[f]
  Restrict,  // P\L
  If,        // if b then P
  ConstApp,  // A(q~; e~)
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind = TermKind::Nil;
  std::string chan;                   // I/O prefixes
  std::string var;                    // CInput/MeasApp binder; QInput binder
  ExprPtr expr;                       // COutput payload
  std::string qvar;                   // QOutput payload
  std::string name;                   // SuperApp/MeasApp/ConstApp/Relabel reference
  std::vector<std::string> qargs;     // SuperApp/MeasApp/ConstApp quantum args
  std::vector<ExprPtr> eargs;         // ConstApp classical args
  BExprPtr guard;                     // If
  std::vector<std::string> channels;  // Restrict set, kept sorted
  TermPtr cont;                       // prefixes, If, Relabel, Restrict
  TermPtr left, right;                // Sum, Par
};

TermPtr mk_nil();
TermPtr mk_tau(TermPtr cont);
TermPtr mk_cinput(std::string chan, std::string var, TermPtr cont);
TermPtr mk_coutput(std::string chan, ExprPtr e, TermPtr cont);
TermPtr mk_qinput(std::string chan, std::string qvar, TermPtr cont);
TermPtr mk_qoutput(std::string chan, std::string qvar, TermPtr cont);
TermPtr mk_superapp(std::string name, std::vector<std::string> qargs, TermPtr cont);
TermPtr mk_measapp(std::string name, std::vector<std::string> qargs, std::string var,
                   TermPtr cont);
TermPtr mk_sum(TermPtr l, TermPtr r);
TermPtr mk_par(TermPtr l, TermPtr r);
TermPtr mk_relabel(TermPtr cont, std::string fn);
TermPtr mk_restrict(TermPtr cont, std::vector<std::string> channels);
TermPtr mk_if(BExprPtr guard, TermPtr cont);
TermPtr mk_constapp(std::string name, std::vector<std::string> qargs, std::vector<ExprPtr> eargs);

// --- definitions ----------------------------------------------------------

struct SuperDef {
  int arity = 1;
  std::vector<qlin::CMatrix> kraus;  // over 2^arity dimensions, trace preserving
};

struct MeasOutcomeDef {
  Value label;             // value bound by M[q~;x]
  qlin::CMatrix projector;
};

struct MeasDef {
  int arity = 1;
  std::vector<MeasOutcomeDef> outcomes;
};

struct RelabelFn {
  std::map<std::string, std::string> mapping;  // identity where absent
};

struct ConstDef {
  std::vector<std::string> qparams;
  std::vector<std::string> cparams;
  TermPtr body;
};

struct Defs {
  qlin::QReg reg;
  std::map<std::string, std::vector<Value>> channels;  // classical, with domain
  std::set<std::string> qchannels;
  std::map<std::string, SuperDef> superops;
  std::map<std::string, MeasDef> measurements;
  std::map<std::string, RelabelFn> relabels;
  std::map<std::string, ConstDef> constants;

  bool is_classical_chan(const std::string& c) const { return channels.count(c) > 0; }
  bool is_quantum_chan(const std::string& c) const { return qchannels.count(c) > 0; }
};

struct Module {
  Defs defs;
  TermPtr main;  // may be null when the file only declares definitions
};

// --- operations ------------------------------------------------------------

// Free quantum variables, by the defining table of the calculus.
std::set<std::string> qv(const TermPtr& t, const Defs& defs);
// Free classical variables; c?x and M[q~;x] bind x.
std::set<std::string> fv(const TermPtr& t);

struct Violation {
  std::string path;  // slash-separated position of the offending subterm
  std::string message;
};

// Checks the three legality conditions plus referential sanity (declared
// names, arities, register membership).  Empty result means legal.
std::optional<Violation> check_legal(const TermPtr& t, const Defs& defs);

// Capture-avoiding simultaneous substitution of classical values and an
// injective quantum renaming.
TermPtr substitute(const TermPtr& t, const std::map<std::string, Value>& cvals,
                   const std::map<std::string, std::string>& qrename);

// Renames bound variables to canonical positional names; terms are
// alpha-equivalent iff their normal forms print identically.
TermPtr alpha_normal(const TermPtr& t);

std::string print_term(const TermPtr& t);
std::string print_expr(const ExprPtr& e);
std::string print_bexpr(const BExprPtr& b);

// Parses a source file: declarations followed by an optional main process.
Module parse(const std::string& source);
// Parses a process term against existing definitions (used by tests/tools).
TermPtr parse_term(const std::string& text, const Defs& defs);

}  // namespace qccs::syntax
