#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "qccs/bisim.hpp"
#include "qccs/corpus.hpp"
#include "qccs/logic.hpp"
#include "qccs/semantics.hpp"

using json = nlohmann::ordered_json;
using namespace qccs;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Kind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw Error(Error::Kind::Io, "cannot write " + out_path);
  out << text;
}

struct CommonArgs {
  size_t max_states = 200000;
  double tol = 1e-9;
  double time_limit = 0.0;
  unsigned seed = 0;
  int threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--max-states", args->max_states, "state budget for reachability");
  cmd->add_option("--tol", args->tol, "matrix comparison tolerance")
      ->check(CLI::Range(1e-15, 1e-3));
  cmd->add_option("--time-limit", args->time_limit, "wall clock budget in seconds (0 = off)");
  cmd->add_option("--seed", args->seed, "seed for randomised auxiliaries");
  cmd->add_option("--threads", args->threads, "worker threads for exploration and matching");
  cmd->add_option("--out", args->out, "write the result document to this path");
}

sem::Budget make_budget(const CommonArgs& args) {
  sem::Budget b;
  b.max_states = args.max_states;
  b.time_limit_s = args.time_limit;
  return b;
}

qlin::Tolerances make_tols(const CommonArgs& args) {
  qlin::Tolerances t;
  t.tol = args.tol;
  return t;
}

qlin::DensityOp load_state(const std::string& path, const qlin::QReg& reg,
                           const qlin::Tolerances& tols) {
  json doc = json::parse(slurp(path));
  if (!doc.contains("state")) throw Error(Error::Kind::Parse, "state document lacks \"state\"");
  const json& st = doc["state"];
  std::string kind = st.value("kind", "ket");
  if (kind == "ket") {
    return qlin::DensityOp::from_ket_string(reg, st.at("value").get<std::string>(), tols);
  }
  if (kind == "matrix") {
    const json& rows = st.at("entries");
    qlin::CMatrix m(reg.dim(), reg.dim());
    if (static_cast<long>(rows.size()) != reg.dim())
      throw Error(Error::Kind::Parse, "state matrix does not match the register dimension");
    for (long i = 0; i < reg.dim(); ++i)
      for (long j = 0; j < reg.dim(); ++j) {
        const json& e = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
        m(i, j) = qlin::Complex(e[0].get<double>(), e[1].get<double>());
      }
    return qlin::DensityOp(reg, std::move(m), tols);
  }
  throw Error(Error::Kind::Parse, "unknown state kind: " + kind);
}

bisim::SuperOpFamily load_family(const std::string& spec, const syntax::Defs& defs,
                                 const std::set<std::string>& owned) {
  if (spec.empty() || spec == "default")
    return bisim::SuperOpFamily::default_family(defs.reg, owned);
  if (spec == "none") return bisim::SuperOpFamily::identity_only();
  json doc = json::parse(slurp(spec));
  bisim::SuperOpFamily fam;
  fam.depth = doc.value("depth", 2);
  if (doc.value("default", false)) {
    fam = bisim::SuperOpFamily::default_family(defs.reg, owned);
    fam.depth = doc.value("depth", 2);
    return fam;
  }
  for (const json& m : doc.at("members")) {
    std::vector<std::string> on;
    for (const auto& v : m.at("on")) on.push_back(v.get<std::string>());
    if (m.contains("gate")) {
      const qlin::CMatrix* g = qlin::gates::by_name(m["gate"].get<std::string>());
      if (!g) throw Error(Error::Kind::Parse, "unknown gate in family file");
      fam.generators.push_back({m["gate"].get<std::string>() + "(" + on[0] + ")",
                                qlin::SuperOp::unitary(on, *g)});
    } else if (m.contains("dephase")) {
      fam.generators.push_back({"Deph(" + on[0] + ")", qlin::SuperOp::dephase(on[0])});
    } else if (m.contains("set")) {
      fam.generators.push_back({"Reset(" + on[0] + ")",
                                qlin::SuperOp::set_to(on, m["set"].get<std::string>())});
    } else if (m.contains("superop")) {
      auto it = defs.superops.find(m["superop"].get<std::string>());
      if (it == defs.superops.end())
        throw Error(Error::Kind::Parse, "family references an undeclared super-operator");
      fam.generators.push_back({m["superop"].get<std::string>(),
                                qlin::SuperOp(on, it->second.kraus)});
    } else {
      throw Error(Error::Kind::Parse, "family member needs gate/dephase/set/superop");
    }
  }
  return fam;
}

json plts_to_json(const sem::BuiltPlts& plts, const sem::Engine& eng) {
  json doc;
  doc["states"] = json::array();
  for (size_t i = 0; i < plts.states.size(); ++i) {
    json st;
    st["index"] = i;
    st["term"] = syntax::print_term(plts.states[i].term);
    auto owned = eng.config_qv(plts.states[i]);
    st["qv"] = std::vector<std::string>(owned.begin(), owned.end());
    std::ostringstream fp;
    fp << "0x" << std::hex << plts.states[i].rho_fp;
    st["state_fingerprint"] = fp.str();
    doc["states"].push_back(std::move(st));
  }
  doc["actions"] = json::array();
  for (const auto& a : plts.actions) doc["actions"].push_back(a.str());
  doc["transitions"] = json::array();
  for (size_t s = 0; s < plts.states.size(); ++s)
    for (int ti : plts.graph.outgoing[s]) {
      const auto& tr = plts.graph.transitions[static_cast<size_t>(ti)];
      json t;
      t["source"] = s;
      t["action"] = plts.actions[static_cast<size_t>(tr.label)].str();
      t["targets"] = json::array();
      for (const auto& [tgt, p] : tr.target.support()) {
        json e;
        e["probability"] = p;
        e["target"] = tgt;
        t["targets"].push_back(std::move(e));
      }
      doc["transitions"].push_back(std::move(t));
    }
  doc["roots"] = plts.roots;
  return doc;
}

struct LoadedProcess {
  syntax::Module module;
  std::shared_ptr<sem::Engine> engine;
  sem::Configuration initial;
};

LoadedProcess load_process(const std::string& source_path, const std::string& state_path,
                           const CommonArgs& args) {
  LoadedProcess lp;
  lp.module = syntax::parse(slurp(source_path));
  if (!lp.module.main) throw Error(Error::Kind::Parse, source_path + " declares no main process");
  lp.engine = std::make_shared<sem::Engine>(lp.module.defs, make_tols(args), args.threads);
  auto rho = load_state(state_path, lp.module.defs.reg, make_tols(args));
  lp.initial = lp.engine->make_config(lp.module.main, std::move(rho));
  return lp;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case Error::Kind::Parse: return 2;
    case Error::Kind::Budget: return 3;
    case Error::Kind::Verdict: return 4;
    default: return 1;
  }
}

std::string verdict_text(const bisim::BisimResult& res) {
  if (res.verdict == bisim::Verdict::Equivalent)
    return res.family_relative ? "equivalent (modulo family)" : "equivalent";
  return "distinguished";
}

json witness_to_json(const bisim::BisimResult& res, const sem::BuiltPlts& plts) {
  json w;
  if (!res.witness) return w;
  const auto& gw = *res.witness;
  switch (gw.kind) {
    case bisim::GameWitness::Kind::QvMismatch: w["kind"] = "qv-mismatch"; break;
    case bisim::GameWitness::Kind::PtrMismatch: w["kind"] = "ptr-mismatch"; break;
    case bisim::GameWitness::Kind::AlphabetMismatch: w["kind"] = "alphabet-mismatch"; break;
    case bisim::GameWitness::Kind::Closure: w["kind"] = "closure"; break;
    case bisim::GameWitness::Kind::Transition: w["kind"] = "transition"; break;
  }
  w["left_state"] = gw.left;
  w["right_state"] = gw.right;
  w["left_term"] = syntax::print_term(plts.states[static_cast<size_t>(gw.left)].term);
  w["right_term"] = syntax::print_term(plts.states[static_cast<size_t>(gw.right)].term);
  w["detail"] = gw.detail;
  if (gw.kind == bisim::GameWitness::Kind::Transition) {
    w["challenger"] = gw.challenger_left ? "left" : "right";
    w["action"] = plts.actions[static_cast<size_t>(gw.action)].str();
    w["challenge"] = json::array();
    for (const auto& [t, p] : gw.challenge.support()) {
      json e;
      e["probability"] = p;
      e["target"] = t;
      e["target_term"] = syntax::print_term(plts.states[static_cast<size_t>(t)].term);
      w["challenge"].push_back(std::move(e));
    }
  }
  if (gw.kind == bisim::GameWitness::Kind::Closure) w["family_member"] = gw.family_member;
  return w;
}

// --- subcommand bodies -----------------------------------------------------

int run_parse(const std::string& file, const CommonArgs& args) {
  syntax::Module mod = syntax::parse(slurp(file));
  json doc;
  doc["register"] = mod.defs.reg.vars();
  doc["channels"] = json::object();
  for (const auto& [name, dom] : mod.defs.channels) {
    json vals = json::array();
    for (const auto& v : dom) vals.push_back(v.str());
    doc["channels"][name] = std::move(vals);
  }
  doc["qchannels"] = std::vector<std::string>(mod.defs.qchannels.begin(), mod.defs.qchannels.end());
  doc["superops"] = json::array();
  for (const auto& [name, def] : mod.defs.superops) {
    json s;
    s["name"] = name;
    s["arity"] = def.arity;
    s["kraus_count"] = def.kraus.size();
    doc["superops"].push_back(std::move(s));
  }
  doc["measurements"] = json::array();
  for (const auto& [name, def] : mod.defs.measurements) {
    json s;
    s["name"] = name;
    s["arity"] = def.arity;
    s["outcomes"] = def.outcomes.size();
    doc["measurements"].push_back(std::move(s));
  }
  doc["constants"] = json::array();
  for (const auto& [name, def] : mod.defs.constants) {
    json s;
    s["name"] = name;
    s["qparams"] = def.qparams;
    s["cparams"] = def.cparams;
    s["body"] = syntax::print_term(def.body);
    doc["constants"].push_back(std::move(s));
  }
  if (mod.main) {
    doc["main"] = syntax::print_term(mod.main);
    if (auto v = syntax::check_legal(mod.main, mod.defs)) {
      doc["legal"] = false;
      doc["violation"] = {{"path", v->path}, {"message", v->message}};
    } else {
      doc["legal"] = true;
    }
  }
  emit(args.out, doc.dump(2));
  if (mod.main && !doc["legal"].get<bool>()) return 2;
  return 0;
}

int run_lts(const std::string& file, const std::string& state, const CommonArgs& args) {
  auto lp = load_process(file, state, args);
  sem::BuiltPlts plts = lp.engine->build({lp.initial}, make_budget(args));
  emit(args.out, plts_to_json(plts, *lp.engine).dump(2));
  return 0;
}

int run_bisim(const std::string& file_a, const std::string& file_b, const std::string& state,
              const std::string& mode, const std::string& family, const std::string& expect,
              bool with_formula, const CommonArgs& args) {
  auto lp_a = load_process(file_a, state, args);
  syntax::Module mod_b = syntax::parse(slurp(file_b));
  if (!mod_b.main) throw Error(Error::Kind::Parse, file_b + " declares no main process");
  if (!(mod_b.defs.reg == lp_a.module.defs.reg))
    throw Error(Error::Kind::Parse, "the two sources declare different registers");
  // Shared engine: merge definitions; identical names must agree in arity.
  syntax::Defs merged = lp_a.module.defs;
  for (const auto& [name, def] : mod_b.defs.superops) merged.superops.emplace(name, def);
  for (const auto& [name, def] : mod_b.defs.measurements) merged.measurements.emplace(name, def);
  for (const auto& [name, def] : mod_b.defs.constants) merged.constants.emplace(name, def);
  for (const auto& [name, def] : mod_b.defs.relabels) merged.relabels.emplace(name, def);
  for (const auto& [name, dom] : mod_b.defs.channels) merged.channels.emplace(name, dom);
  merged.qchannels.insert(mod_b.defs.qchannels.begin(), mod_b.defs.qchannels.end());
  auto engine = std::make_shared<sem::Engine>(merged, make_tols(args), args.threads);
  auto rho = std::make_shared<const qlin::DensityOp>(load_state(state, merged.reg, make_tols(args)));
  sem::Configuration ca = engine->make_config(lp_a.module.main, rho);
  sem::Configuration cb = engine->make_config(mod_b.main, rho);

  auto owned = engine->config_qv(ca);
  bisim::SuperOpFamily fam = load_family(family, merged, owned);

  bisim::BisimResult res;
  if (mode == "ground")
    res = bisim::ground_bisim(*engine, ca, cb, make_budget(args), args.threads);
  else if (mode == "open")
    res = bisim::open_bisim(*engine, ca, cb, fam, make_budget(args), args.threads);
  else if (mode == "strong")
    res = bisim::strong_open_bisim(*engine, ca, cb, fam, make_budget(args), args.threads);
  else
    throw Error(Error::Kind::Parse, "unknown mode: " + mode);

  std::cout << verdict_text(res) << "\n";

  bisim::Checker::Options opts;
  opts.mode = res.mode;
  opts.family = fam;
  opts.budget = make_budget(args);
  opts.threads = args.threads;
  bisim::Checker chk(*engine, opts);

  json doc;
  doc["verdict"] = res.verdict == bisim::Verdict::Equivalent ? "equivalent" : "distinguished";
  doc["family_relative"] = res.family_relative;
  doc["mode"] = mode;
  doc["explored_states"] = res.explored_states;
  doc["rounds"] = res.rounds;
  if (res.witness) {
    auto chk_res = chk.check(ca, cb);
    doc["witness"] = witness_to_json(chk_res, chk.plts());
    doc["witness_replays"] = chk_res.witness ? chk.replay(*chk_res.witness, chk_res.blocks) : false;
  }
  if (with_formula && res.verdict == bisim::Verdict::Distinguished) {
    auto f = logic::distinguish(*engine, ca, cb, fam, make_budget(args));
    std::cout << "distinguishing formula: " << logic::print_formula(f) << "\n";
    doc["distinguishing_formula"] = logic::print_formula(f);
  }
  if (!args.out.empty()) emit(args.out, doc.dump(2));

  if (!expect.empty() && expect != doc["verdict"].get<std::string>())
    throw Error(Error::Kind::Verdict,
                "expected " + expect + ", got " + doc["verdict"].get<std::string>());
  return 0;
}

int run_check(const std::string& file, const std::string& state, const std::string& formula_path,
              const std::string& expect, const CommonArgs& args) {
  auto lp = load_process(file, state, args);
  logic::FormulaPtr f = logic::parse_formula(slurp(formula_path), lp.module.defs);
  logic::Satisfier sat(*lp.engine, make_budget(args));
  logic::Tri verdict = sat.sat(lp.initial, f);
  std::string text = verdict == logic::Tri::True    ? "true"
                     : verdict == logic::Tri::False ? "false"
                                                    : "unknown";
  std::cout << text << "\n";
  if (!args.out.empty()) {
    json doc;
    doc["formula"] = logic::print_formula(f);
    doc["verdict"] = text;
    if (verdict == logic::Tri::True) {
      auto wit = sat.diamond_witness(lp.initial, f);
      if (!wit.empty()) {
        doc["witness_scheduler"] = json::array();
        for (const auto& [p, cfg] : wit) {
          json e;
          e["probability"] = p;
          e["term"] = syntax::print_term(cfg.term);
          doc["witness_scheduler"].push_back(std::move(e));
        }
      }
    }
    emit(args.out, doc.dump(2));
  }
  if (!expect.empty() && expect != text)
    throw Error(Error::Kind::Verdict, "expected " + expect + ", got " + text);
  return 0;
}

int run_barbs(const std::string& file, const std::string& state, const std::string& chan,
              const CommonArgs& args) {
  auto lp = load_process(file, state, args);
  double v = lp.engine->barb(lp.initial, chan, make_budget(args));
  std::ostringstream os;
  os.precision(12);
  os << v;
  std::cout << os.str() << "\n";
  if (!args.out.empty()) {
    json doc;
    doc["channel"] = chan;
    doc["value"] = v;
    emit(args.out, doc.dump(2));
  }
  return 0;
}

int run_corpus(const std::string& dir, bool slow, const CommonArgs& args) {
  json manifest = json::parse(slurp(dir + "/manifest.json"));
  int failures = 0;
  for (const json& run : manifest.at("runs")) {
    if (run.value("slow", false) && !slow) continue;
    std::string name = run.at("name").get<std::string>();
    std::string command = run.at("command").get<std::string>();
    CommonArgs local = args;
    local.out.clear();
    if (run.contains("max_states")) local.max_states = run["max_states"].get<size_t>();
    std::string status = "pass";
    try {
      if (command == "parse") {
        syntax::Module mod = syntax::parse(slurp(dir + "/" + run.at("file").get<std::string>()));
        if (mod.main)
          if (auto v = syntax::check_legal(mod.main, mod.defs))
            throw Error(Error::Kind::Parse, v->message);
      } else if (command == "bisim") {
        run_bisim(dir + "/" + run.at("left").get<std::string>(),
                  dir + "/" + run.at("right").get<std::string>(),
                  dir + "/" + run.at("state").get<std::string>(), run.value("mode", "open"),
                  run.value("family", "default"), run.at("expect").get<std::string>(),
                  run.value("formula", false), local);
      } else if (command == "check") {
        run_check(dir + "/" + run.at("file").get<std::string>(),
                  dir + "/" + run.at("state").get<std::string>(),
                  dir + "/" + run.at("formula").get<std::string>(),
                  run.at("expect").get<std::string>(), local);
      } else if (command == "barbs") {
        auto lp = load_process(dir + "/" + run.at("file").get<std::string>(),
                               dir + "/" + run.at("state").get<std::string>(), local);
        double v = lp.engine->barb(lp.initial, run.at("chan").get<std::string>(),
                                   make_budget(local));
        double want = run.at("expect").get<double>();
        if (std::abs(v - want) > 1e-9)
          throw Error(Error::Kind::Verdict,
                      "barb " + std::to_string(v) + " != " + std::to_string(want));
      } else {
        throw Error(Error::Kind::Parse, "unknown corpus command: " + command);
      }
    } catch (const Error& e) {
      status = std::string("FAIL: ") + e.what();
      ++failures;
    }
    std::cout << "[" << (status == "pass" ? "pass" : "FAIL") << "] " << name;
    if (status != "pass") std::cout << " — " << status.substr(6);
    std::cout << "\n";
  }
  if (failures) throw Error(Error::Kind::Verdict, std::to_string(failures) + " corpus runs failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qCCS process-calculus toolkit: transition systems, bisimilarity, modal logic"};
  app.require_subcommand(1);

  CommonArgs args;

  std::string file, file_b, state, formula, chan, mode = "open", family = "default", expect,
              corpus_dir = "corpus";
  bool with_formula = false, slow = false;

  auto* cmd_parse = app.add_subcommand("parse", "parse a source file and dump its structure");
  cmd_parse->add_option("file", file)->required();
  add_common(cmd_parse, &args);

  auto* cmd_lts = app.add_subcommand("lts", "export the reachable pLTS");
  cmd_lts->add_option("file", file)->required();
  cmd_lts->add_option("--state", state)->required();
  add_common(cmd_lts, &args);

  auto* cmd_bisim = app.add_subcommand("bisim", "decide bisimilarity of two main processes");
  cmd_bisim->add_option("left", file)->required();
  cmd_bisim->add_option("right", file_b)->required();
  cmd_bisim->add_option("--state", state)->required();
  cmd_bisim->add_option("--mode", mode, "ground | open | strong");
  cmd_bisim->add_option("--family", family, "default | none | family file");
  cmd_bisim->add_option("--expect", expect, "fail unless the verdict matches");
  cmd_bisim->add_flag("--formula", with_formula, "synthesise a distinguishing formula");
  add_common(cmd_bisim, &args);

  auto* cmd_check = app.add_subcommand("check", "decide satisfaction of a modal formula");
  cmd_check->add_option("file", file)->required();
  cmd_check->add_option("--state", state)->required();
  cmd_check->add_option("--formula", formula)->required();
  cmd_check->add_option("--expect", expect);
  add_common(cmd_check, &args);

  auto* cmd_barbs = app.add_subcommand("barbs", "largest barb value on a classical channel");
  cmd_barbs->add_option("file", file)->required();
  cmd_barbs->add_option("--state", state)->required();
  cmd_barbs->add_option("--chan", chan)->required();
  add_common(cmd_barbs, &args);

  auto* cmd_corpus = app.add_subcommand("corpus", "run the expected-verdict regression manifest");
  cmd_corpus->add_option("--dir", corpus_dir, "corpus directory");
  cmd_corpus->add_flag("--slow", slow, "include runs marked slow");
  add_common(cmd_corpus, &args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_parse->parsed()) return run_parse(file, args);
    if (cmd_lts->parsed()) return run_lts(file, state, args);
    if (cmd_bisim->parsed())
      return run_bisim(file, file_b, state, mode, family, expect, with_formula, args);
    if (cmd_check->parsed()) return run_check(file, state, formula, expect, args);
    if (cmd_barbs->parsed()) return run_barbs(file, state, chan, args);
    if (cmd_corpus->parsed()) return run_corpus(corpus_dir, slow, args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
