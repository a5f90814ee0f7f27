#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "qccs/dist.hpp"
#include "qccs/qlin.hpp"
#include "qccs/syntax.hpp"

namespace qccs::sem {

// Transition label of the configuration pLTS.
struct Action {
  enum class Kind { Tau, CIn, COut, QIn, QOut };
  Kind kind = Kind::Tau;
  std::string chan;
  Value value;       // classical payload
  std::string qvar;  // quantum payload

  static Action tau() { return {}; }
  static Action cin(std::string c, Value v) { return {Kind::CIn, std::move(c), std::move(v), ""}; }
  static Action cout(std::string c, Value v) { return {Kind::COut, std::move(c), std::move(v), ""}; }
  static Action qin(std::string c, std::string q) { return {Kind::QIn, std::move(c), Value(), std::move(q)}; }
  static Action qout(std::string c, std::string q) { return {Kind::QOut, std::move(c), Value(), std::move(q)}; }

  bool is_tau() const { return kind == Kind::Tau; }
  // Channel names of the action; empty for tau.
  std::vector<std::string> cn() const;
  // Quantum variables bound by the action (the received name of an input).
  std::vector<std::string> qbv() const;

  std::string str() const;
  bool operator==(const Action& o) const;
  bool operator<(const Action& o) const;
};

using RhoPtr = std::shared_ptr<const qlin::DensityOp>;

struct Configuration {
  syntax::TermPtr term;
  RhoPtr rho;
  // Canonical key, filled by Engine::make_config: alpha-normal printed term
  // plus a rho fingerprint on a rounding grid.
  std::string canon;
  std::uint64_t rho_fp = 0;

  bool operator<(const Configuration& o) const;
  bool operator==(const Configuration& o) const;
};

struct Budget {
  size_t max_states = 200000;
  double time_limit_s = 0.0;  // 0 disables the wall-clock check
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void check_time() const;
};

struct Step {
  Action action;
  std::vector<std::pair<double, Configuration>> targets;  // merged, probabilities sum to 1
};

// The pLTS reachable from a set of root configurations.  States are interned
// by canonical key; action ids index `actions` with id 0 fixed to tau.
struct BuiltPlts {
  std::vector<Configuration> states;
  std::vector<Action> actions;
  dist::Plts graph;
  std::vector<int> roots;
  // canonical key -> state indices sharing it (resolved by exact comparison)
  std::map<std::pair<std::string, std::uint64_t>, std::vector<int>> index;

  int action_id(const Action& a) const;
  void rebuild_index();
  int find_state(const Configuration& c, double tol) const;
};

class Engine {
 public:
  Engine(syntax::Defs defs, qlin::Tolerances tols = {}, int threads = 1);

  const syntax::Defs& defs() const { return defs_; }
  const qlin::Tolerances& tols() const { return tols_; }

  // Wraps a term and state into a configuration with its canonical key;
  // validates closedness, legality and register fit.
  Configuration make_config(syntax::TermPtr term, RhoPtr rho) const;
  Configuration make_config(syntax::TermPtr term, qlin::DensityOp rho) const;

  // One-step transitions by the operational rules, complete and finite.
  std::vector<Step> step(const Configuration& c) const;

  BuiltPlts build(const std::vector<Configuration>& roots, const Budget& budget) const;

  // Largest p with  c =tau=>^ Delta  and  Delta(states with an immediate
  // c!v transition) >= p.
  double barb(const Configuration& c, const std::string& chan, const Budget& budget) const;
  static double barb_on(const BuiltPlts& plts, int root, const std::string& chan);

  // qv of the configuration's term.
  std::set<std::string> config_qv(const Configuration& c) const;
  // Environment part of the state: rho with the term's free qubits traced out.
  qlin::DensityOp ptr_of(const Configuration& c) const;

  // Applies a super-operator to the quantum state only.
  Configuration apply_superop(const Configuration& c, const qlin::SuperOp& e) const;

  std::uint64_t rho_fingerprint(const qlin::CMatrix& m) const;

 private:
  syntax::Defs defs_;
  qlin::Tolerances tols_;
  int threads_;

  // Keyed by node address; the stored TermPtr pins the node so addresses
  // cannot be reused while an entry is alive.
  mutable std::mutex qv_mutex_;
  mutable std::unordered_map<const syntax::Term*, std::pair<syntax::TermPtr, std::set<std::string>>>
      qv_cache_;
  std::set<std::string> qv_cached(const syntax::TermPtr& t) const;

  struct RawStep {
    Action action;
    std::vector<std::pair<double, std::pair<syntax::TermPtr, RhoPtr>>> targets;
  };
  std::vector<RawStep> step_raw(const syntax::TermPtr& term, const RhoPtr& rho) const;
};

}  // namespace qccs::sem
