#pragma once

#include <string>
#include <vector>

#include "qccs/semantics.hpp"

namespace qccs::corpus {

// One runnable protocol encoding: source text plus a canonical initial state.
struct Instance {
  std::string name;
  int n = 1;
  std::string source;      // .qccs text
  std::string ket;         // initial register state as a ket pattern
  syntax::Module module;   // parsed source
  sem::Configuration initial(const sem::Engine& eng) const;
};

// Names: bb84, bb84_spc, testbb84 (n in {1,2});
// ce_meas, ce_id, ce_h_meas, ce_h_id (the prefix counterexample, n ignored);
// bb84_eve, tb (eavesdropper narrative, n = 1 only).
Instance instantiate(const std::string& name, int n);

std::vector<std::string> instance_names();

// Source text only (what instantiate() parses); stable across calls.
std::string source_text(const std::string& name, int n);

// psi_p test formula against TestBB84.
std::string psi_formula(double p);

}  // namespace qccs::corpus
