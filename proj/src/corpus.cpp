#include "qccs/corpus.hpp"

#include <cmath>
#include <sstream>

namespace qccs::corpus {

namespace {

std::vector<std::string> bit_strings(int n) {
  std::vector<std::string> out;
  for (long v = 0; v < (1L << n); ++v) {
    std::string s;
    for (int i = n - 1; i >= 0; --i) s.push_back((v >> i) & 1 ? '1' : '0');
    out.push_back(s);
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

// Declarations shared by the BB84 family at size n: register q1..qn p1..pn,
// basis/key channels, the Set/H/M operator families indexed by bit strings.
std::string bb84_prelude(int n, bool with_test) {
  std::ostringstream os;
  std::vector<std::string> aq, bq;
  for (int i = 1; i <= n; ++i) aq.push_back("q" + std::to_string(i));
  for (int i = 1; i <= n; ++i) bq.push_back("p" + std::to_string(i));
  os << "// BB84 at key length n=" << n << "\n";
  os << "qubits " << join(aq, " ") << " " << join(bq, " ") << ";\n";
  os << "channel a2b : bits(" << n << ");\n";
  os << "channel b2a : bits(" << n << ");\n";
  os << "channel key_a : bits(<=" << n << ");\n";
  os << "channel key_b : bits(<=" << n << ");\n";
  if (with_test) {
    os << "channel suc : {0};\n";
    os << "channel fail : {0};\n";
  }
  os << "qchannel A2B;\n";
  os << "superop SetP on " << n << " = setplus " << n << ";\n";
  for (const auto& s : bit_strings(n)) os << "superop Set_" << s << " on " << n << " = set \"" << s << "\";\n";
  for (const auto& s : bit_strings(n)) os << "superop Had_" << s << " on " << n << " = hadamard \"" << s << "\";\n";
  os << "measurement MR on " << n << " = computational labels bits;\n";
  for (const auto& s : bit_strings(n)) os << "measurement M_" << s << " on " << n << " = inbasis \"" << s << "\";\n";
  return os.str();
}

// sum over all bit strings b of  (if var = "b" then Op_b[args].Cont)
std::string indexed_sum(int n, const std::string& var, const std::string& op_prefix,
                        const std::string& args, const std::string& cont) {
  std::vector<std::string> cases;
  for (const auto& s : bit_strings(n))
    cases.push_back("(if " + var + " = \"" + s + "\" then " + op_prefix + s + "[" + args + "]." +
                    cont + ")");
  return join(cases, " + ");
}

std::string bb84_defs(int n) {
  std::ostringstream os;
  std::vector<std::string> aq, bq;
  for (int i = 1; i <= n; ++i) aq.push_back("q" + std::to_string(i));
  for (int i = 1; i <= n; ++i) bq.push_back("p" + std::to_string(i));
  std::string aqs = join(aq, ", ");
  std::string bqs = join(bq, ", ");

  // Alice: sample bases Ba and key Ka, encode, send, compare bases, output key.
  os << "def WaitA(; Ba, Ka) = b2a?Bb. a2b!Ba. key_a!cmp(Ka, Ba, Bb). nil;\n";
  std::string send;
  for (int i = 1; i <= n; ++i) send += "A2B!q" + std::to_string(i) + ". ";
  os << "def AliceSend(" << aqs << "; Ba, Ka) = " << send << "WaitA(; Ba, Ka);\n";
  os << "def AliceH(" << aqs << "; Ba, Ka) = "
     << indexed_sum(n, "Ba", "Had_", aqs, "AliceSend(" + aqs + "; Ba, Ka)") << ";\n";
  os << "def AliceSet(" << aqs << "; Ba, Ka) = "
     << indexed_sum(n, "Ka", "Set_", aqs, "AliceH(" + aqs + "; Ba, Ka)") << ";\n";
  os << "def Alice(" << aqs << ";) = SetP[" << aqs << "]. MR[" << aqs << "; Ba]. Set_"
     << std::string(static_cast<size_t>(n), '0') << "[" << aqs << "]. SetP[" << aqs << "]. MR["
     << aqs << "; Ka]. Set_" << std::string(static_cast<size_t>(n), '0') << "[" << aqs
     << "]. AliceSet(" << aqs << "; Ba, Ka);\n";

  // Bob: receive, sample bases Bb, measure in those bases and discard the
  // measured qubits, reply, output key.  The discard (a reset to |0..0>)
  // realises measurement of systems that are never used again; without it
  // the abandoned post-measurement states would stay visible to the
  // environment and the specification could not match them.
  os << "def WaitB(; Bb, Kb) = a2b?Ba. key_b!cmp(Kb, Ba, Bb). nil;\n";
  os << "def BobTail(; Bb, Kb) = b2a!Bb. WaitB(; Bb, Kb);\n";
  std::vector<std::string> xq;
  for (int i = 1; i <= n; ++i) xq.push_back("x" + std::to_string(i));
  std::string xqs = join(xq, ", ");
  std::string zeros = std::string(static_cast<size_t>(n), '0');
  os << "def BobMeas(" << xqs << "; Bb) = "
     << indexed_sum(n, "Bb", "M_", xqs + "; Kb",
                    "Set_" + zeros + "[" + xqs + "].BobTail(; Bb, Kb)")
     << ";\n";
  std::string recv;
  for (int i = 1; i <= n; ++i) recv += "A2B?x" + std::to_string(i) + ". ";
  os << "def Bob(" << bqs << ";) = " << recv << "SetP[" << bqs << "]. MR[" << bqs
     << "; Bb]. Set_" << zeros << "[" << bqs << "]. BobMeas(" << join(xq, ", ") << "; Bb);\n";
  return os.str();
}

std::string bb84_source(int n) {
  std::ostringstream os;
  os << bb84_prelude(n, false) << bb84_defs(n);
  std::vector<std::string> aq, bq;
  for (int i = 1; i <= n; ++i) aq.push_back("q" + std::to_string(i));
  for (int i = 1; i <= n; ++i) bq.push_back("p" + std::to_string(i));
  os << "main = (Alice(" << join(aq, ", ") << ";) || Bob(" << join(bq, ", ")
     << ";)) \\ {a2b, b2a, A2B};\n";
  return os.str();
}

// The specification: three random samplings decide bases and the key; both
// key outputs agree by construction.  A trailing discard of the channel
// qubits mirrors the implementation, which hands them to Bob and releases
// them only after his measurement; without it the two sides would own
// different variable sets halfway through the run.
std::string bb84_spc_source(int n) {
  std::ostringstream os;
  os << bb84_prelude(n, false);
  std::vector<std::string> aq, bq;
  for (int i = 1; i <= n; ++i) aq.push_back("q" + std::to_string(i));
  for (int i = 1; i <= n; ++i) bq.push_back("p" + std::to_string(i));
  std::string aqs = join(aq, ", ");
  std::string zeros = std::string(static_cast<size_t>(n), '0');
  os << "def SpcOut(; Ba, Kb, Bb) = key_a!cmp(Kb, Ba, Bb).nil || key_b!cmp(Kb, Ba, Bb).nil;\n";
  os << "main = SetP[" << aqs << "]. MR[" << aqs << "; Ba]. Set_" << zeros << "[" << aqs
     << "]. SetP[" << aqs << "]. MR[" << aqs << "; Kb]. Set_" << zeros << "[" << aqs << "]."
     << " SetP[" << join(bq, ", ") << "]. MR[" << join(bq, ", ") << "; Bb]. Set_" << zeros << "["
     << join(bq, ", ") << "]. Set_" << zeros << "[" << aqs << "]. SpcOut(; Ba, Kb, Bb);\n";
  return os.str();
}

std::string testbb84_source(int n) {
  std::ostringstream os;
  os << bb84_prelude(n, true) << bb84_defs(n);
  std::vector<std::string> aq, bq;
  for (int i = 1; i <= n; ++i) aq.push_back("q" + std::to_string(i));
  for (int i = 1; i <= n; ++i) bq.push_back("p" + std::to_string(i));
  os << "def Reader(;) = key_a?Xa. key_b?Xb. (if Xa = Xb then suc!0.nil else fail!0.nil);\n";
  os << "main = (((Alice(" << join(aq, ", ") << ";) || Bob(" << join(bq, ", ")
     << ";)) \\ {a2b, b2a, A2B}) || Reader(;)) \\ {key_a, key_b};\n";
  return os.str();
}

// The dynamic-constructor counterexample: measurement against identity under
// a Hadamard prefix.  Register holds the measured qubit q and an environment
// qubit r.
std::string ce_prelude() {
  std::ostringstream os;
  os << "qubits q r;\n";
  os << "superop Id on 1 = gate I;\n";
  os << "superop Had on 1 = gate H;\n";
  os << "measurement M01 on 1 = computational;\n";
  return os.str();
}

std::string ce_source(const std::string& which) {
  std::ostringstream os;
  os << ce_prelude();
  if (which == "ce_meas") os << "main = M01[q; x].nil;\n";
  if (which == "ce_id") os << "main = Id[q].nil;\n";
  if (which == "ce_h_meas") os << "main = Had[q].M01[q; x].nil;\n";
  if (which == "ce_h_id") os << "main = Had[q].Id[q].nil;\n";
  return os.str();
}

// Eavesdropping narrative at n=1: the intercept-resend attacker.  Eve
// measures the qubit in a random basis and forwards a fresh encoding; the
// test harness checks whether the leaked key agrees.
std::string bb84_eve_source() {
  std::ostringstream os;
  os << "// BB84 with an intercept-resend eavesdropper, n=1\n";
  os << "qubits q p e a;\n";
  os << "channel a2b : bits(<=1);\n";
  os << "channel b2a : bits(<=1);\n";
  os << "channel a2e : bits(<=1);\n";
  os << "channel e2a : bits(<=1);\n";
  os << "channel e2b : bits(<=1);\n";
  os << "channel b2e : bits(<=1);\n";
  os << "channel key_a : bits(<=1);\n";
  os << "channel key_b : bits(<=1);\n";
  os << "channel keyp_a : bits(<=1);\n";
  os << "channel keyp_b : bits(<=1);\n";
  os << "channel keyp_e : bits(<=1);\n";
  os << "channel alarm_a : {0};\n";
  os << "channel alarm_b : {0};\n";
  os << "qchannel A2B A2E E2B;\n";
  os << "superop SetP on 1 = setplus 1;\n";
  os << "superop Set_0 on 1 = set \"0\";\n";
  os << "superop Set_1 on 1 = set \"1\";\n";
  os << "superop Had_0 on 1 = hadamard \"0\";\n";
  os << "superop Had_1 on 1 = hadamard \"1\";\n";
  os << "measurement MR on 1 = computational labels bits;\n";
  os << "measurement M_0 on 1 = inbasis \"0\";\n";
  os << "measurement M_1 on 1 = inbasis \"1\";\n";
  // Index-string sampler over one position: the single nonempty mask.
  os << "measurement Pstr0 on 1 = projectors { \"\" : [1, 0; 0, 1] };\n";
  os << "measurement Pstr1 on 1 = projectors { \"1\" : [1, 0; 0, 1] };\n";
  os << "relabel fa { a2b -> a2e, b2a -> e2a, A2B -> A2E };\n";
  os << "relabel fb { a2b -> e2b, b2a -> b2e, A2B -> E2B };\n";

  os << "def WaitA(; Ba, Ka) = b2a?Bb. a2b!Ba. key_a!cmp(Ka, Ba, Bb). nil;\n";
  os << "def AliceSend(q1; Ba, Ka) = A2B!q1. WaitA(; Ba, Ka);\n";
  os << "def AliceH(q1; Ba, Ka) = (if Ba = \"0\" then Had_0[q1].AliceSend(q1; Ba, Ka))"
        " + (if Ba = \"1\" then Had_1[q1].AliceSend(q1; Ba, Ka));\n";
  os << "def AliceSet(q1; Ba, Ka) = (if Ka = \"0\" then Set_0[q1].AliceH(q1; Ba, Ka))"
        " + (if Ka = \"1\" then Set_1[q1].AliceH(q1; Ba, Ka));\n";
  os << "def Alice(q1;) = SetP[q1]. MR[q1; Ba]. Set_0[q1]. SetP[q1]. MR[q1; Ka]. Set_0[q1]."
        " AliceSet(q1; Ba, Ka);\n";
  os << "def WaitB(; Bb, Kb) = a2b?Ba. key_b!cmp(Kb, Ba, Bb). nil;\n";
  os << "def BobTail(; Bb, Kb) = b2a!Bb. WaitB(; Bb, Kb);\n";
  os << "def BobMeas(x1; Bb) = (if Bb = \"0\" then M_0[x1; Kb].Set_0[x1].BobTail(; Bb, Kb))"
        " + (if Bb = \"1\" then M_1[x1; Kb].Set_0[x1].BobTail(; Bb, Kb));\n";
  os << "def Bob(p1;) = A2B?x1. SetP[p1]. MR[p1; Bb]. Set_0[p1]. BobMeas(x1; Bb);\n";

  // Verification tails: reveal a random index substring and compare.
  os << "def APick(a1; Kp) = (if len(Kp) = 0 then Pstr0[a1; Xs].AliceVer(; Kp, Xs))"
        " + (if len(Kp) = 1 then Pstr1[a1; Xs].AliceVer(; Kp, Xs));\n";
  os << "def AliceVer(; Kp, Xs) = a2b!Xs. a2b!substr(Kp, Xs). b2a?Kbp."
        " (if substr(Kp, Xs) = Kbp then keyp_a!remstr(Kp, Xs).nil else alarm_a!0.nil);\n";
  os << "def AlicePrime(q1, a1;) = (Alice(q1;) || key_a?Kp. APick(a1; Kp)) \\ {key_a};\n";
  os << "def BobVer(; Kp) = a2b?Xs. a2b?Kap. b2a!substr(Kp, Xs)."
        " (if substr(Kp, Xs) = Kap then keyp_b!remstr(Kp, Xs).nil else alarm_b!0.nil);\n";
  os << "def BobPrime(p1;) = (Bob(p1;) || key_b?Kp. BobVer(; Kp)) \\ {key_b};\n";

  // Intercept-resend Eve.
  os << "def WaitE(; Ke) = b2e?Bb. e2a!Bb. a2e?Ba. e2b!Ba. a2e?Xs. e2b!Xs. a2e?Kap. e2b!Kap."
        " b2e?Kbp. e2a!Kbp. keyp_e!Ke.nil;\n";
  os << "def EveH(x1; Be, Ke) = (if Be = \"0\" then Had_0[x1].E2B!x1.WaitE(; Ke))"
        " + (if Be = \"1\" then Had_1[x1].E2B!x1.WaitE(; Ke));\n";
  os << "def EveSet(x1; Be, Ke) = (if Ke = \"0\" then Set_0[x1].EveH(x1; Be, Ke))"
        " + (if Ke = \"1\" then Set_1[x1].EveH(x1; Be, Ke));\n";
  os << "def EveMeas(x1; Be) = (if Be = \"0\" then M_0[x1; Ke].EveSet(x1; Be, Ke))"
        " + (if Be = \"1\" then M_1[x1; Ke].EveSet(x1; Be, Ke));\n";
  os << "def Eve(e1;) = A2E?x1. SetP[e1]. MR[e1; Be]. Set_0[e1]. EveMeas(x1; Be);\n";

  os << "main = (AlicePrime(q, a;)[fa] || Eve(e;) || BobPrime(p;)[fb])"
        " \\ {a2e, b2e, e2a, e2b, A2E, E2B};\n";
  return os.str();
}

// The reduced process TB of the eavesdropping development at n=1: pure
// classical sampling with correlated copies.
std::string tb_source() {
  std::ostringstream os;
  os << "// Reduced eavesdropping test process, n=1\n";
  os << "qubits q p e a;\n";
  os << "channel keyp_e : bits(<=1);\n";
  os << "channel skey : bits(<=1);\n";
  os << "channel fail : {0};\n";
  os << "channel alarm_a : {0};\n";
  os << "channel alarm_b : {0};\n";
  os << "superop SetP on 1 = setplus 1;\n";
  os << "superop Set_0 on 1 = set \"0\";\n";
  os << "measurement MR on 1 = computational labels bits;\n";
  os << "measurement Pstr0 on 1 = projectors { \"\" : [1, 0; 0, 1] };\n";
  os << "measurement Pstr1 on 1 = projectors { \"1\" : [1, 0; 0, 1] };\n";
  // The Ran' samplers are inlined below: keep the previous key where the two
  // bases agree, resample it where they differ.
  os << "def TB(q1, p1, e1, a1;) = SetP[q1].MR[q1; Ba].Set_0[q1]."
        " SetP[q1].MR[q1; Ka].Set_0[q1]."
        " SetP[e1].MR[e1; Be].Set_0[e1]."
        " TBKe(q1, p1, a1; Ba, Ka, Be);\n";
  os << "def TBKe(q1, p1, a1; Ba, Ka, Be) = (if Ba = Be then tau.TBBb(q1, p1, a1; Ba, Ka, Be, Ka))"
        " + (if Ba != Be then SetP[q1].MR[q1; Ke].Set_0[q1].TBBb(q1, p1, a1; Ba, Ka, Be, Ke));\n";
  os << "def TBBb(q1, p1, a1; Ba, Ka, Be, Ke) = SetP[p1].MR[p1; Bb].Set_0[p1]."
        " TBKb(q1, a1; Ba, Ka, Be, Ke, Bb);\n";
  os << "def TBKb(q1, a1; Ba, Ka, Be, Ke, Bb) ="
        " (if Be = Bb then tau.TBOut(a1; Ba, Ka, Ke, Bb, Ke))"
        " + (if Be != Bb then SetP[q1].MR[q1; Kb].Set_0[q1].TBOut(a1; Ba, Ka, Ke, Bb, Kb));\n";
  os << "def TBOut(a1; Ba, Ka, Ke, Bb, Kb) ="
        " (if len(cmp(Ka, Ba, Bb)) = 0 then Pstr0[a1; Xs].TBCheck(; Ba, Ka, Ke, Bb, Kb, Xs))"
        " + (if len(cmp(Ka, Ba, Bb)) = 1 then Pstr1[a1; Xs].TBCheck(; Ba, Ka, Ke, Bb, Kb, Xs));\n";
  os << "def TBCheck(; Ba, Ka, Ke, Bb, Kb, Xs) ="
        " (if cmp(Ka, Ba, Bb) = cmp(Kb, Ba, Bb) then"
        " keyp_e!Ke.skey!remstr(cmp(Ka, Ba, Bb), Xs).nil)"
        " + (if not cmp(Ka, Ba, Bb) = cmp(Kb, Ba, Bb) then TBAlarm(; Ba, Ka, Bb, Kb, Xs));\n";
  os << "def TBAlarm(; Ba, Ka, Bb, Kb, Xs) ="
        " (if substr(cmp(Ka, Ba, Bb), Xs) != substr(cmp(Kb, Ba, Bb), Xs) then"
        " (alarm_a!0.nil || alarm_b!0.nil))"
        " + (if substr(cmp(Ka, Ba, Bb), Xs) = substr(cmp(Kb, Ba, Bb), Xs) then fail!0.nil);\n";
  os << "main = TB(q, p, e, a;);\n";
  return os.str();
}

}  // namespace

std::string source_text(const std::string& name, int n) {
  if (name == "bb84") return bb84_source(n);
  if (name == "bb84_spc") return bb84_spc_source(n);
  if (name == "testbb84") return testbb84_source(n);
  if (name == "ce_meas" || name == "ce_id" || name == "ce_h_meas" || name == "ce_h_id")
    return ce_source(name);
  if (name == "bb84_eve") return bb84_eve_source();
  if (name == "tb") return tb_source();
  fail_validation("unknown corpus instance: " + name);
}

std::vector<std::string> instance_names() {
  return {"bb84", "bb84_spc", "testbb84", "ce_meas", "ce_id", "ce_h_meas", "ce_h_id",
          "bb84_eve", "tb"};
}

Instance instantiate(const std::string& name, int n) {
  if ((name == "bb84_eve" || name == "tb") && n != 1)
    fail_validation("eavesdropping instances are provided at n=1 only");
  if (n < 1 || n > 3) fail_validation("key length outside the supported range");
  Instance inst;
  inst.name = name;
  inst.n = n;
  inst.source = source_text(name, n);
  inst.module = syntax::parse(inst.source);
  inst.ket = std::string(inst.module.defs.reg.size(), '0');
  return inst;
}

sem::Configuration Instance::initial(const sem::Engine& eng) const {
  auto rho = qlin::DensityOp::from_ket_string(eng.defs().reg, ket, eng.tols());
  return eng.make_config(module.main, std::move(rho));
}

std::string psi_formula(double p) {
  std::ostringstream os;
  os.precision(12);
  os << "<suc!0>(1*true) & !<tau>(" << p << "*<fail!0>(1*true) (+) " << (1.0 - p) << "*true)";
  return os.str();
}

}  // namespace qccs::corpus
