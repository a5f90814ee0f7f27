#pragma once

#include <optional>
#include <vector>

#include "qccs/dist.hpp"

namespace qccs::weak {

// One matching sink: `demand` mass must end on states listed in `allowed`.
// Sinks model, depending on the caller: the support of a challenger
// distribution (allowed = partners under a relation), the blocks of a
// partition (allowed = block members), or the branches of a distribution
// formula (allowed = satisfying states).
struct Sink {
  double demand;
  std::vector<int> allowed;
};

struct Witness {
  std::vector<std::pair<int, double>> theta;               // reached distribution
  std::vector<std::vector<std::pair<int, double>>> split;  // per sink: (state, mass)
};

struct Query {
  const dist::Plts* plts = nullptr;
  dist::Distribution<int> from;
  std::optional<int> alpha;  // label id; nullopt asks for a hat-tau closure
  bool strong = false;       // single combined step, no tau closure
  std::vector<Sink> sinks;
};

// Is there Theta with  from =alpha=> Theta  whose mass can be split across the
// sinks?  Weak transitions are encoded as a mass-conservation feasibility
// program: variables route mass through tau transitions or stop it at a
// state; only stopped mass counts toward Theta.  Exact on tau-acyclic
// instances; on tau-cyclic ones decides the closure of the finitary relation
// (divergence contributes nothing).
bool match(const Query& q, Witness* wit = nullptr, double feas_tol = 1e-7);

// Largest stoppable mass on `goal` states over all hat-tau derivatives of
// `from`; this is the barb value sup{p | from =tau=> Delta, Delta(goal) >= p}.
double max_stop_mass(const dist::Plts& plts, const dist::Distribution<int>& from,
                     const std::vector<char>& goal, double feas_tol = 1e-7);

// States tau-reachable from the sources (sources included).
std::vector<int> tau_cone(const dist::Plts& plts, const std::vector<int>& sources);

bool tau_acyclic(const dist::Plts& plts, const std::vector<int>& cone);

// Derivative distributions reachable from `from` by deterministic per-round
// choices within `max_steps` lifted steps (each state in a round either stops,
// keeps going, or — for the alpha round — fires one chosen transition).
// Exhaustive up to `cap` distinct distributions; a brute-force companion to
// match() for small systems.
std::vector<std::vector<double>> enumerate_derivatives(const dist::Plts& plts,
                                                       const dist::Distribution<int>& from,
                                                       std::optional<int> alpha, int max_steps,
                                                       size_t cap = 200000);

// Spec-level oracle: answers lifted-matching questions about weak derivatives
// of a fixed source distribution.
class DerivativeOracle {
 public:
  DerivativeOracle(const dist::Plts& plts, dist::Distribution<int> from, std::optional<int> label)
      : plts_(&plts), from_(std::move(from)), label_(label) {}

  // Does some Theta with from =label=> Theta satisfy target lift(rel) Theta?
  bool matches(const dist::Distribution<int>& target,
               const dist::StateRelation<int, int>& rel, Witness* wit = nullptr,
               double feas_tol = 1e-7) const;

 private:
  const dist::Plts* plts_;
  dist::Distribution<int> from_;
  std::optional<int> label_;
};

}  // namespace qccs::weak
