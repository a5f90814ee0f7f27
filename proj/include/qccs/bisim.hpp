#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qccs/semantics.hpp"
#include "qccs/weak.hpp"

namespace qccs::bisim {

struct FamilyMember {
  std::string name;
  qlin::SuperOp op;
};

// Finite stand-in for the universal quantification over trace-preserving
// super-operators on the environment: named generators plus compositions up
// to a depth.  Verdicts of the checkers are relative to the expanded family.
struct SuperOpFamily {
  std::vector<FamilyMember> generators;
  int depth = 2;

  // Generators touching only register variables outside `owned`: Hadamard,
  // X, Z, dephasing and reset per free qubit, CNOT per free pair, identity.
  static SuperOpFamily default_family(const qlin::QReg& reg, const std::set<std::string>& owned);
  static SuperOpFamily identity_only();

  // Generators plus ordered compositions up to `depth`, identity dropped.
  std::vector<FamilyMember> expand() const;
};

enum class Mode { Ground, Open, StrongOpen };

enum class Verdict { Equivalent, Distinguished };

struct GameWitness {
  // distinguishing reason at a concrete pair of pLTS states
  enum class Kind { QvMismatch, PtrMismatch, AlphabetMismatch, Transition, Closure };
  Kind kind = Kind::Transition;
  int left = -1, right = -1;
  bool challenger_left = true;
  int action = -1;                         // Transition: challenger's label id
  dist::Distribution<int> challenge;       // Transition: challenger's target
  std::string family_member;               // Closure: member name
  std::string detail;
};

struct BisimResult {
  Verdict verdict = Verdict::Equivalent;
  bool family_relative = false;
  Mode mode = Mode::Ground;
  std::optional<GameWitness> witness;
  int left_root = -1, right_root = -1;  // indices into the checker's pLTS
  std::vector<int> blocks;              // final partition over the checker's pLTS
  size_t rounds = 0;
  size_t explored_states = 0;
};

class Checker {
 public:
  struct Options {
    Mode mode = Mode::Ground;
    SuperOpFamily family = SuperOpFamily::identity_only();
    sem::Budget budget;
    bool contract_tau_chains = true;  // quotient deterministic internal moves
    bool presplit_alphabet = true;    // initial split by weak visible alphabet
    int threads = 1;
  };

  Checker(const sem::Engine& eng, Options opts);

  BisimResult check(const sem::Configuration& c, const sem::Configuration& d);

  // Introspection used by the distinguishing-formula construction and tests.
  const sem::BuiltPlts& plts() const { return plts_; }
  const std::vector<std::vector<int>>& history() const { return history_; }
  const std::vector<FamilyMember>& members() const { return members_; }
  // Image state of `state` under expanded member `m`; -1 when inapplicable.
  int image(int state, size_t m) const;
  bool is_closure_state(int state) const { return !has_pseudo_[static_cast<size_t>(state)]; }
  const std::set<std::string>& qv_of(int state) const { return qv_[static_cast<size_t>(state)]; }
  const qlin::DensityOp& ptr_of(int state) const { return ptr_[static_cast<size_t>(state)]; }

  // Can `defender` weakly match a challenge with the given per-block masses?
  bool defender_matches(int defender, int action, const dist::Distribution<int>& challenge,
                        const std::vector<int>& blocks) const;
  // First failing requirement of the transfer game at (x, y) w.r.t. blocks;
  // empty when (x, y) satisfies all clauses of the game.  With
  // prefer_transition, unmatched transitions are reported ahead of closure
  // failures (used when synthesising formulas).
  std::optional<GameWitness> find_failure(int x, int y, const std::vector<int>& blocks,
                                          bool prefer_transition = false) const;

  // Re-runs a recorded witness query; true when it still fails.
  bool replay(const GameWitness& w, const std::vector<int>& blocks) const;

 private:
  const sem::Engine& eng_;
  Options opts_;
  sem::BuiltPlts plts_;
  std::vector<FamilyMember> members_;
  std::vector<std::set<std::string>> qv_;
  std::vector<qlin::DensityOp> ptr_;
  std::vector<int> ptr_key_;
  std::vector<char> has_pseudo_;
  std::vector<std::vector<int>> images_;  // [state][member] -> state or -1
  std::vector<std::vector<int>> history_;

  void build_union(const sem::Configuration& c, const sem::Configuration& d);
  void contract();
  void annotate();
  std::vector<int> initial_partition() const;
  std::vector<int> refine(std::vector<int> blocks);
};

BisimResult ground_bisim(const sem::Engine& eng, const sem::Configuration& c,
                         const sem::Configuration& d, const sem::Budget& budget = {},
                         int threads = 1);
BisimResult open_bisim(const sem::Engine& eng, const sem::Configuration& c,
                       const sem::Configuration& d, const SuperOpFamily& fam,
                       const sem::Budget& budget = {}, int threads = 1);
BisimResult strong_open_bisim(const sem::Engine& eng, const sem::Configuration& c,
                              const sem::Configuration& d, const SuperOpFamily& fam,
                              const sem::Budget& budget = {}, int threads = 1);

// Conjunction of open_bisim over a user-supplied grid of initial states and
// closing value tuples; sound for refutation only.
struct ProcessBisimResult {
  Verdict verdict;
  std::string failing_point;  // description of the first refuting grid point
};
ProcessBisimResult process_bisim(const sem::Engine& eng, const syntax::TermPtr& p,
                                 const syntax::TermPtr& q,
                                 const std::vector<qlin::DensityOp>& states,
                                 const std::vector<std::vector<Value>>& val_tuples,
                                 const SuperOpFamily& fam, const sem::Budget& budget = {});

// Static contexts the equivalence must be preserved by, plus dynamic ones
// where breakage is possible and flagged rather than reported as an error.
struct Context {
  enum class Kind { Par, Relabel, Restrict, IfThen, PrefixSuper };
  Kind kind;
  syntax::TermPtr par_term;            // Par
  std::string name;                    // Relabel fn / PrefixSuper op
  std::vector<std::string> channels;   // Restrict
  syntax::BExprPtr guard;              // IfThen
  std::vector<std::string> qargs;      // PrefixSuper
  std::string describe() const;
};

struct ContextOutcome {
  std::string context;
  Verdict verdict;
  bool dynamic_context;  // breakage here does not falsify the congruence law
};

struct CongruenceReport {
  std::vector<ContextOutcome> outcomes;
  // True when some *static* context broke an established equivalence.
  bool static_breakage = false;
};

CongruenceReport congruence_harness(const sem::Engine& eng, const sem::Configuration& c,
                                    const sem::Configuration& d, const SuperOpFamily& fam,
                                    const std::vector<Context>& contexts,
                                    const sem::Budget& budget = {});

}  // namespace qccs::bisim
