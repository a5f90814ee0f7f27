#include <doctest.h>

#include <random>

#include "qccs/bisim.hpp"

using namespace qccs;
using namespace qccs::bisim;
using sem::Configuration;

namespace {

syntax::Module ce_module() {
  std::string src =
      "qubits q r;\n"
      "channel c : {0, 1};\n"
      "channel d : {0, 1};\n"
      "superop Id on 1 = gate I;\n"
      "superop Had on 1 = gate H;\n"
      "measurement M01 on 1 = computational;\n"
      "relabel f { c -> d };\n"
      "def R0(;) = c!0.nil;\n";
  return syntax::parse(src);
}

struct Fixture {
  syntax::Module mod = ce_module();
  sem::Engine eng{mod.defs};
  sem::RhoPtr rho0 = std::make_shared<const qlin::DensityOp>(
      qlin::DensityOp::from_ket_string(mod.defs.reg, "00"));

  Configuration conf(const std::string& text, sem::RhoPtr rho) {
    return eng.make_config(syntax::parse_term(text, mod.defs), std::move(rho));
  }
  Configuration conf(const std::string& text) { return conf(text, rho0); }

  SuperOpFamily env_family() const {
    return SuperOpFamily::default_family(mod.defs.reg, {"q"});
  }
};

// Weak bisimilarity on classical-only systems by plain fixpoint iteration
// over all state pairs, with tau-closure reachability instead of linear
// programs.  Everything here is Dirac, so lifting degenerates to pointwise
// matching.
struct ClassicalOracle {
  const dist::Plts& g;
  std::vector<std::set<int>> tau_reach;  // reflexive-transitive closure

  explicit ClassicalOracle(const dist::Plts& graph) : g(graph) {
    size_t n = static_cast<size_t>(g.num_states);
    tau_reach.assign(n, {});
    for (size_t s = 0; s < n; ++s) tau_reach[s].insert(static_cast<int>(s));
    bool grow = true;
    while (grow) {
      grow = false;
      for (size_t s = 0; s < n; ++s)
        for (int ti : g.outgoing[s]) {
          const auto& tr = g.transitions[static_cast<size_t>(ti)];
          if (tr.label != dist::Plts::kTau) continue;
          int t = tr.target.support()[0].first;
          for (int u : tau_reach[static_cast<size_t>(t)])
            if (tau_reach[s].insert(u).second) grow = true;
        }
    }
  }

  std::set<int> weak_post(int s, int label) const {
    std::set<int> out;
    for (int a : tau_reach[static_cast<size_t>(s)]) {
      if (label == dist::Plts::kTau) out.insert(a);
      for (int ti : g.outgoing[static_cast<size_t>(a)]) {
        const auto& tr = g.transitions[static_cast<size_t>(ti)];
        if (tr.label != label) continue;
        int t = tr.target.support()[0].first;
        for (int u : tau_reach[static_cast<size_t>(t)]) out.insert(u);
      }
    }
    return out;
  }

  std::vector<std::vector<char>> solve() const {
    size_t n = static_cast<size_t>(g.num_states);
    std::vector<std::vector<char>> rel(n, std::vector<char>(n, 1));
    bool changed = true;
    while (changed) {
      changed = false;
      for (size_t x = 0; x < n; ++x)
        for (size_t y = 0; y < n; ++y) {
          if (!rel[x][y]) continue;
          auto ok = [&](int challenger, int defender) {
            for (int ti : g.outgoing[static_cast<size_t>(challenger)]) {
              const auto& tr = g.transitions[static_cast<size_t>(ti)];
              int tgt = tr.target.support()[0].first;
              bool matched = false;
              for (int u : weak_post(defender, tr.label)) {
                bool related = challenger == static_cast<int>(x)
                                   ? rel[static_cast<size_t>(tgt)][static_cast<size_t>(u)]
                                   : rel[static_cast<size_t>(u)][static_cast<size_t>(tgt)];
                if (related) {
                  matched = true;
                  break;
                }
              }
              if (!matched) return false;
            }
            return true;
          };
          if (!ok(static_cast<int>(x), static_cast<int>(y)) ||
              !ok(static_cast<int>(y), static_cast<int>(x))) {
            rel[x][y] = 0;
            changed = true;
          }
        }
    }
    return rel;
  }
};

std::mt19937 rng(63870);

syntax::TermPtr random_classical_term(const syntax::Defs& defs, int depth) {
  std::uniform_int_distribution<int> roll(0, 6);
  std::uniform_int_distribution<int> coin(0, 1);
  auto chan = [&] { return coin(rng) ? "c" : "d"; };
  if (depth <= 0) return syntax::mk_nil();
  switch (roll(rng)) {
    case 0: return syntax::mk_nil();
    case 1: return syntax::mk_tau(random_classical_term(defs, depth - 1));
    case 2: {
      std::string x = "v";
      return syntax::mk_cinput(chan(), x, random_classical_term(defs, depth - 1));
    }
    case 3:
      return syntax::mk_coutput(chan(), syntax::mk_lit(Value(Rational(coin(rng)))),
                                random_classical_term(defs, depth - 1));
    case 4:
      return syntax::mk_sum(random_classical_term(defs, depth - 1),
                            random_classical_term(defs, depth - 1));
    case 5:
      return syntax::mk_par(random_classical_term(defs, depth - 1),
                            random_classical_term(defs, depth - 1));
    default:
      return syntax::mk_restrict(random_classical_term(defs, depth - 1), {chan()});
  }
}

}  // namespace

TEST_CASE("a configuration is ground bisimilar to itself") {
  Fixture f;
  auto c = f.conf("Had[q].M01[q; x].c!x.nil");
  auto res = ground_bisim(f.eng, c, c);
  CHECK(res.verdict == Verdict::Equivalent);
}

TEST_CASE("measuring a computational-basis state is unobservable") {
  Fixture f;
  auto res = ground_bisim(f.eng, f.conf("M01[q; x].nil"), f.conf("Id[q].nil"));
  CHECK(res.verdict == Verdict::Equivalent);

  auto open = open_bisim(f.eng, f.conf("M01[q; x].nil"), f.conf("Id[q].nil"), f.env_family());
  CHECK(open.verdict == Verdict::Equivalent);
  CHECK(open.family_relative);
}

TEST_CASE("the Hadamard prefix separates measurement from identity") {
  Fixture f;
  auto res = ground_bisim(f.eng, f.conf("Had[q].M01[q; x].nil"), f.conf("Had[q].Id[q].nil"));
  REQUIRE(res.verdict == Verdict::Distinguished);
  REQUIRE(res.witness.has_value());

  // the recorded position replays: the challenger transition exists and the
  // defender's matching query still fails
  Checker::Options opts;
  opts.mode = Mode::Ground;
  Checker chk(f.eng, opts);
  auto res2 = chk.check(f.conf("Had[q].M01[q; x].nil"), f.conf("Had[q].Id[q].nil"));
  REQUIRE(res2.witness.has_value());
  CHECK(chk.replay(*res2.witness, res2.blocks));

  auto open = open_bisim(f.eng, f.conf("Had[q].M01[q; x].nil"), f.conf("Had[q].Id[q].nil"),
                         f.env_family());
  CHECK(open.verdict == Verdict::Distinguished);
}

TEST_CASE("differing environment traces distinguish immediately") {
  Fixture f;
  auto plus = std::make_shared<const qlin::DensityOp>(
      qlin::DensityOp::from_ket_string(f.mod.defs.reg, "0+"));
  auto res = ground_bisim(f.eng, f.conf("nil", f.rho0), f.conf("nil", plus));
  REQUIRE(res.verdict == Verdict::Distinguished);
  CHECK(res.witness->kind == GameWitness::Kind::PtrMismatch);
}

TEST_CASE("strong against weak treatment of internal moves") {
  Fixture f;
  auto fam = SuperOpFamily::identity_only();
  auto strong = strong_open_bisim(f.eng, f.conf("tau.nil"), f.conf("nil"), fam);
  CHECK(strong.verdict == Verdict::Distinguished);
  auto weak = ground_bisim(f.eng, f.conf("tau.nil"), f.conf("nil"));
  CHECK(weak.verdict == Verdict::Equivalent);

  auto twice = strong_open_bisim(f.eng, f.conf("c!0.nil + c!0.nil"), f.conf("c!0.nil"), fam);
  CHECK(twice.verdict == Verdict::Equivalent);
  auto self = strong_open_bisim(f.eng, f.conf("Had[q].nil"), f.conf("Had[q].nil"), fam);
  CHECK(self.verdict == Verdict::Equivalent);
}

TEST_CASE("growing the family never reverses a distinguished verdict") {
  Fixture f;
  // identity-only on the H-prefixed pair
  auto lean = open_bisim(f.eng, f.conf("Had[q].M01[q; x].nil"), f.conf("Had[q].Id[q].nil"),
                         SuperOpFamily::identity_only());
  auto rich = open_bisim(f.eng, f.conf("Had[q].M01[q; x].nil"), f.conf("Had[q].Id[q].nil"),
                         f.env_family());
  CHECK(lean.verdict == Verdict::Distinguished);
  CHECK(rich.verdict == Verdict::Distinguished);
}

TEST_CASE("the final relation is an equivalence on its carrier") {
  Fixture f;
  auto res = ground_bisim(f.eng, f.conf("M01[q; x].nil"), f.conf("Id[q].nil"));
  const auto& blocks = res.blocks;
  size_t n = blocks.size();
  // reflexive / symmetric / transitive as a same-block relation
  for (size_t x = 0; x < n; ++x)
    for (size_t y = 0; y < n; ++y) {
      bool xy = blocks[x] == blocks[y];
      bool yx = blocks[y] == blocks[x];
      CHECK(xy == yx);
      for (size_t z = 0; z < n; ++z)
        if (xy && blocks[y] == blocks[z]) CHECK(blocks[x] == blocks[z]);
    }
}

TEST_CASE("ptr equality holds on every related pair of the final relation") {
  Fixture f;
  Checker::Options opts;
  opts.mode = Mode::Ground;
  Checker chk(f.eng, opts);
  auto res = chk.check(f.conf("M01[q; x].nil"), f.conf("Id[q].nil"));
  for (size_t x = 0; x < res.blocks.size(); ++x)
    for (size_t y = x + 1; y < res.blocks.size(); ++y) {
      if (res.blocks[x] != res.blocks[y]) continue;
      CHECK(chk.qv_of(static_cast<int>(x)) == chk.qv_of(static_cast<int>(y)));
      CHECK(qlin::approx_equal(chk.ptr_of(static_cast<int>(x)).mat(),
                               chk.ptr_of(static_cast<int>(y)).mat(), 1e-9));
    }
}

TEST_CASE("ground bisimilarity matches the classical fixpoint oracle") {
  Fixture f;
  int rounds = 0;
  while (rounds < 200) {
    auto p = random_classical_term(f.mod.defs, 3);
    auto q = random_classical_term(f.mod.defs, 3);
    if (!syntax::fv(p).empty() || !syntax::fv(q).empty()) continue;
    Configuration cp = f.conf(syntax::print_term(p));
    Configuration cq = f.conf(syntax::print_term(q));
    sem::Budget budget;
    budget.max_states = 4000;
    auto plts = f.eng.build({cp, cq}, budget);
    if (plts.states.size() > 6) continue;

    ClassicalOracle oracle(plts.graph);
    auto rel = oracle.solve();
    bool expected = rel[static_cast<size_t>(plts.roots[0])][static_cast<size_t>(plts.roots[1])];

    auto res = ground_bisim(f.eng, cp, cq, budget);
    bool got = res.verdict == Verdict::Equivalent;
    if (got != expected) {
      CAPTURE(syntax::print_term(p));
      CAPTURE(syntax::print_term(q));
    }
    CHECK(got == expected);
    ++rounds;
  }
}

TEST_CASE("congruence harness preserves equivalence under static contexts") {
  Fixture f;
  SuperOpFamily fam = SuperOpFamily::identity_only();

  std::vector<Context> contexts;
  Context par;
  par.kind = Context::Kind::Par;
  par.par_term = syntax::parse_term("R0(;)", f.mod.defs);
  contexts.push_back(par);
  Context rel;
  rel.kind = Context::Kind::Relabel;
  rel.name = "f";
  contexts.push_back(rel);
  Context res;
  res.kind = Context::Kind::Restrict;
  res.channels = {"d"};
  contexts.push_back(res);
  Context ite;
  ite.kind = Context::Kind::IfThen;
  ite.guard = syntax::mk_rel(syntax::RelOp::Eq, syntax::mk_lit(Value(Rational(1))),
                             syntax::mk_lit(Value(Rational(1))));
  contexts.push_back(ite);
  Context pre;
  pre.kind = Context::Kind::PrefixSuper;
  pre.name = "Had";
  pre.qargs = {"q"};
  contexts.push_back(pre);

  auto report = congruence_harness(f.eng, f.conf("M01[q; x].nil"), f.conf("Id[q].nil"), fam,
                                   contexts);
  REQUIRE(report.outcomes.size() == 5);
  for (const auto& out : report.outcomes) {
    if (out.dynamic_context) {
      // the dynamic prefix is expected to break the equivalence here
      CHECK(out.verdict == Verdict::Distinguished);
    } else {
      CHECK(out.verdict == Verdict::Equivalent);
    }
  }
  CHECK_FALSE(report.static_breakage);
}

TEST_CASE("process-level bisimilarity over a state grid") {
  Fixture f;
  auto p = syntax::parse_term("M01[q; x].nil", f.mod.defs);
  auto q = syntax::parse_term("Id[q].nil", f.mod.defs);
  std::vector<qlin::DensityOp> states{
      qlin::DensityOp::from_ket_string(f.mod.defs.reg, "00"),
      qlin::DensityOp::from_ket_string(f.mod.defs.reg, "+0")};

  // syntactically equal processes are bisimilar on any grid
  auto same = process_bisim(f.eng, p, p, states, {}, SuperOpFamily::identity_only());
  CHECK(same.verdict == Verdict::Equivalent);

  // measuring |+> branches observably, identity does not
  auto diff = process_bisim(f.eng, p, q, states, {}, SuperOpFamily::identity_only());
  CHECK(diff.verdict == Verdict::Distinguished);
  CHECK(!diff.failing_point.empty());
}

TEST_CASE("family members touching owned variables are rejected") {
  Fixture f;
  SuperOpFamily fam;
  fam.generators.push_back({"H(q)", qlin::SuperOp::unitary({"q"}, qlin::gates::H())});
  fam.depth = 1;
  CHECK_THROWS_AS(open_bisim(f.eng, f.conf("M01[q; x].nil"), f.conf("Id[q].nil"), fam), Error);
}
