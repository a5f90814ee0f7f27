#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qccs/errors.hpp"

namespace qccs::dist {

inline constexpr double kProbTol = 1e-9;

// Finite-support probability distribution over an ordered state type.
// Weights are strictly positive and sum to 1 within kProbTol.
template <class S>
class Distribution {
 public:
  using Entry = std::pair<S, double>;

  static Distribution point(S s) {
    Distribution d;
    d.w_.emplace_back(std::move(s), 1.0);
    return d;
  }

  // Merges duplicate states, drops zero weights, validates the total.
  static Distribution from_weights(std::vector<Entry> entries, double tol = kProbTol) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    Distribution d;
    for (auto& e : entries) {
      if (e.second < -tol) fail_validation("negative probability in distribution");
      if (e.second <= 0.0) continue;
      if (!d.w_.empty() && d.w_.back().first == e.first)
        d.w_.back().second += e.second;
      else
        d.w_.push_back(std::move(e));
    }
    double total = 0.0;
    for (const auto& e : d.w_) total += e.second;
    if (std::abs(total - 1.0) > tol)
      fail_validation("distribution weights sum to " + std::to_string(total));
    return d;
  }

  const std::vector<Entry>& support() const { return w_; }
  size_t size() const { return w_.size(); }

  double prob(const S& s) const {
    for (const auto& e : w_)
      if (e.first == s) return e.second;
    return 0.0;
  }

  bool operator==(const Distribution& o) const { return w_ == o.w_; }

  template <class F>
  auto map(F&& f) const {  // pushforward along a state transformation
    using T = decltype(f(std::declval<const S&>()));
    std::vector<typename Distribution<T>::Entry> out;
    out.reserve(w_.size());
    for (const auto& e : w_) out.emplace_back(f(e.first), e.second);
    return Distribution<T>::from_weights(std::move(out));
  }

 private:
  std::vector<Entry> w_;
};

template <class S>
Distribution<S> point(S s) {
  return Distribution<S>::point(std::move(s));
}

template <class S>
Distribution<S> convex_sum(const std::vector<std::pair<double, Distribution<S>>>& weighted,
                           double tol = kProbTol) {
  double total = 0.0;
  std::vector<typename Distribution<S>::Entry> entries;
  for (const auto& [p, d] : weighted) {
    if (p < -tol) fail_validation("negative coefficient in convex sum");
    total += p;
    for (const auto& e : d.support()) entries.emplace_back(e.first, p * e.second);
  }
  if (std::abs(total - 1.0) > tol) fail_validation("convex sum coefficients do not sum to 1");
  return Distribution<S>::from_weights(std::move(entries), tol);
}

// Finite relation between state spaces (typically two copies of the same one).
template <class A, class B = A>
struct StateRelation {
  std::set<std::pair<A, B>> pairs;

  bool related(const A& a, const B& b) const { return pairs.count({a, b}) > 0; }
};

// Witness for a lifted pair: the index decomposition of the characterisation
// lemma, as weight w on related state pairs with row sums d and column sums e.
template <class A, class B = A>
struct LiftWitness {
  std::vector<std::tuple<A, B, double>> weights;
};

namespace detail {
// Bipartite transportation feasibility: nonnegative w with prescribed row and
// column sums, supported on the given edge set.  Solved by max-flow.
bool transport_feasible(const std::vector<double>& row_sums, const std::vector<double>& col_sums,
                        const std::vector<std::pair<int, int>>& edges, double feas_tol,
                        std::vector<double>* edge_flow);
}  // namespace detail

// Does d lift(rel) e hold?  Decided as a flow feasibility problem; the
// witness, when requested, is the convex decomposition of the lifted pair.
template <class A, class B>
bool lift_check(const StateRelation<A, B>& rel, const Distribution<A>& d,
                const Distribution<B>& e, LiftWitness<A, B>* witness = nullptr,
                double feas_tol = 1e-7) {
  const auto& rows = d.support();
  const auto& cols = e.support();
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    for (int j = 0; j < static_cast<int>(cols.size()); ++j)
      if (rel.related(rows[i].first, cols[j].first)) edges.emplace_back(i, j);
  std::vector<double> rs, cs;
  for (const auto& r : rows) rs.push_back(r.second);
  for (const auto& c : cols) cs.push_back(c.second);
  std::vector<double> flow;
  if (!detail::transport_feasible(rs, cs, edges, feas_tol, witness ? &flow : nullptr))
    return false;
  if (witness) {
    witness->weights.clear();
    for (size_t k = 0; k < edges.size(); ++k)
      if (flow[k] > feas_tol)
        witness->weights.emplace_back(rows[edges[k].first].first, cols[edges[k].second].first,
                                      flow[k]);
  }
  return true;
}

// Left-decomposability along the explicit construction of the proof: given
// sum p_i * pieces_i  lift(rel)  theta, produces theta_i with
// sum p_i * theta_i = theta and pieces_i lift(rel) theta_i.
template <class A, class B>
std::vector<Distribution<B>> left_decompose(const StateRelation<A, B>& rel,
                                            const std::vector<std::pair<double, Distribution<A>>>& pieces,
                                            const Distribution<B>& theta, double feas_tol = 1e-7) {
  Distribution<A> delta = convex_sum(pieces);
  LiftWitness<A, B> wit;
  if (!lift_check(rel, delta, theta, &wit, feas_tol))
    fail_validation("left_decompose: pieces are not lifted to theta by the relation");
  std::vector<Distribution<B>> out;
  for (const auto& [p_i, piece] : pieces) {
    (void)p_i;
    // theta_i = sum_s piece(s) * sum_{j with s_j = s} (q_j / delta(s)) * point(t_j)
    std::vector<typename Distribution<B>::Entry> entries;
    for (const auto& [s, ps] : piece.support()) {
      double mass_s = delta.prob(s);
      for (const auto& [ws, wt, q] : wit.weights)
        if (ws == s) entries.emplace_back(wt, ps * q / mass_s);
    }
    out.push_back(Distribution<B>::from_weights(std::move(entries)));
  }
  return out;
}

// A probabilistic labelled transition system over dense integer states with
// interned integer labels; label 0 is reserved for tau.
struct Plts {
  static constexpr int kTau = 0;

  struct Transition {
    int src;
    int label;
    Distribution<int> target;
  };

  int num_states = 0;
  std::vector<Transition> transitions;
  std::vector<std::vector<int>> outgoing;  // state -> transition indices

  int add_state() {
    outgoing.emplace_back();
    return num_states++;
  }

  void add_transition(int src, int label, Distribution<int> target) {
    if (src < 0 || src >= num_states) fail_validation("transition source out of range");
    for (const auto& [t, p] : target.support()) {
      (void)p;
      if (t < 0 || t >= num_states) fail_validation("transition target out of range");
    }
    outgoing[static_cast<size_t>(src)].push_back(static_cast<int>(transitions.size()));
    transitions.push_back({src, label, std::move(target)});
  }

  bool has_label(int state, int label) const {
    for (int t : outgoing[static_cast<size_t>(state)])
      if (transitions[static_cast<size_t>(t)].label == label) return true;
    return false;
  }
};

}  // namespace qccs::dist
