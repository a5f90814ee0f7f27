#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qccs/bisim.hpp"
#include "qccs/semantics.hpp"

namespace qccs::logic {

enum class Tri { False, True, Unknown };

inline Tri tri_not(Tri t) {
  if (t == Tri::Unknown) return t;
  return t == Tri::True ? Tri::False : Tri::True;
}

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

// Weighted continuation of a diamond modality; weights sum to 1.
struct DistFormula {
  std::vector<std::pair<double, FormulaPtr>> parts;
};

enum class FKind { ProjAtom, And, Diamond, Not, SuperOpMod };

struct Formula {
  FKind kind = FKind::And;

  // ProjAtom: tr(E_{qvars} rho) >= threshold, provided qv does not meet qvars.
  qlin::CMatrix projector;
  std::vector<std::string> qvars;
  double threshold = 0.0;
  std::string display;  // concrete-syntax name of the projector

  std::vector<FormulaPtr> conjuncts;  // And

  sem::Action action;  // Diamond
  DistFormula dist;

  FormulaPtr sub;  // Not, SuperOpMod

  std::string so_name;  // SuperOpMod
  std::shared_ptr<const qlin::SuperOp> so;
};

FormulaPtr f_true();
FormulaPtr f_atom(qlin::CMatrix projector, std::vector<std::string> qvars, double threshold,
                  std::string display);
FormulaPtr f_and(std::vector<FormulaPtr> conjuncts);
FormulaPtr f_not(FormulaPtr f);
FormulaPtr f_diamond(sem::Action a, DistFormula d);
FormulaPtr f_so(std::string name, qlin::SuperOp op, FormulaPtr f);

std::string print_formula(const FormulaPtr& f);

// Formula files: optional `proj NAME = ket "..";` or `proj NAME = [matrix];`
// declarations followed by one formula.
FormulaPtr parse_formula(const std::string& text, const syntax::Defs& defs);

// Decides satisfaction over the pLTS reachable from a configuration.  The
// diamond clause is exact on tau-acyclic systems; on tau-cyclic ones a
// bounded scheduler search backs any affirmative answer and `Unknown` is
// returned when that search is inconclusive.
class Satisfier {
 public:
  Satisfier(const sem::Engine& eng, sem::Budget budget = {});

  Tri sat(const sem::Configuration& c, const FormulaPtr& f);

  // Satisfaction of a distribution formula by an explicit distribution.
  Tri sat_dist(const std::vector<std::pair<double, sem::Configuration>>& delta,
               const DistFormula& psi);

  // For a satisfied diamond formula: one weak derivative witnessing the
  // satisfaction, as reached configurations with their masses.  Empty when
  // the formula is not a diamond or is not satisfied.
  std::vector<std::pair<double, sem::Configuration>> diamond_witness(const sem::Configuration& c,
                                                                     const FormulaPtr& f);

 private:
  struct Space;  // reachable pLTS of one configuration plus per-state caches

  const sem::Engine& eng_;
  sem::Budget budget_;
  std::map<std::pair<std::string, std::uint64_t>, std::shared_ptr<Space>> spaces_;

  std::shared_ptr<Space> space_of(const sem::Configuration& c);
  Tri sat_state(Space& sp, int state, const FormulaPtr& f);
  Tri diamond_at(Space& sp, int state, const Formula& f);
};

// Synthesises a formula satisfied by `c` and refuted by `d`, verified by
// sat() on both sides before returning.  Requires the pair to be
// distinguished (modulo `fam`).
FormulaPtr distinguish(const sem::Engine& eng, const sem::Configuration& c,
                       const sem::Configuration& d, const bisim::SuperOpFamily& fam,
                       const sem::Budget& budget = {});

}  // namespace qccs::logic
