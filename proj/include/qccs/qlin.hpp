#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "qccs/errors.hpp"

namespace qccs::qlin {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct Tolerances {
  double tol = 1e-9;       // entrywise matrix comparisons
  double eig_tol = 1e-7;   // eigenvalue clustering in spectral decompositions
  double p_floor = 1e-12;  // measurement branches at or below this are pruned
};

// Ordered register of named qubits.  The declaration order fixes the tensor
// layout for the whole run: vars()[0] owns the most significant index bit.
class QReg {
 public:
  QReg() = default;
  explicit QReg(std::vector<std::string> vars);

  size_t size() const { return vars_.size(); }
  long dim() const { return 1L << vars_.size(); }
  const std::vector<std::string>& vars() const { return vars_; }

  bool contains(const std::string& v) const;
  int index_of(const std::string& v) const;  // throws on unknown name
  // Positions (in register order) of a subset given in any order.
  std::vector<int> positions(const std::vector<std::string>& subset) const;
  // Register over vars() minus `removed`, keeping declaration order.
  QReg without(const std::vector<std::string>& removed) const;

  bool operator==(const QReg& o) const { return vars_ == o.vars_; }

 private:
  std::vector<std::string> vars_;
};

bool approx_equal(const CMatrix& a, const CMatrix& b, double tol);
bool is_hermitian(const CMatrix& a, double tol);
CMatrix dagger(const CMatrix& a);

// Kronecker product with the left operand on the high-order index positions.
CMatrix tensor(const CMatrix& a, const CMatrix& b);

// Lift `op`, acting on the named qubits `on` (order significant: on[0] is the
// most significant bit of op's index), to the full register: op tensor
// identity on the complement, permuted to the canonical register layout.
CMatrix embed(const CMatrix& op, const std::vector<std::string>& on, const QReg& reg);

// Positive, unit-trace operator over a register.  Immutable once built.
class DensityOp {
 public:
  DensityOp(QReg reg, CMatrix mat, const Tolerances& t = {});

  static DensityOp from_ket(QReg reg, const CVector& psi, const Tolerances& t = {});
  // Tensor of single-qubit projectors named by characters of `pattern`,
  // one of "01+-", in register order.
  static DensityOp from_ket_string(const QReg& reg, const std::string& pattern,
                                   const Tolerances& t = {});

  const QReg& reg() const { return reg_; }
  const CMatrix& mat() const { return mat_; }

 private:
  QReg reg_;
  CMatrix mat_;
};

// Completely positive map given by Kraus operators over a qubit subset.
class SuperOp {
 public:
  SuperOp(std::vector<std::string> acts_on, std::vector<CMatrix> kraus,
          bool trace_preserving = true, const Tolerances& t = {});

  static SuperOp identity(std::vector<std::string> on);
  static SuperOp unitary(std::vector<std::string> on, const CMatrix& u, const Tolerances& t = {});
  // Replaces the state of `on` with |pattern>, discarding the previous state.
  static SuperOp set_to(std::vector<std::string> on, const std::string& pattern,
                        const Tolerances& t = {});
  // Dephasing in the computational basis of a single qubit.
  static SuperOp dephase(std::string on);

  const std::vector<std::string>& acts_on() const { return acts_on_; }
  const std::vector<CMatrix>& kraus() const { return kraus_; }
  bool trace_preserving() const { return trace_preserving_; }

 private:
  std::vector<std::string> acts_on_;
  std::vector<CMatrix> kraus_;
  bool trace_preserving_;
};

DensityOp apply_superop(const SuperOp& e, const DensityOp& rho, const Tolerances& t = {});
DensityOp partial_trace(const DensityOp& rho, const std::vector<std::string>& over,
                        const Tolerances& t = {});

// Projective measurement: distinct real eigenvalues with orthogonal
// projectors summing to the identity on the acts_on subspace.
class ProjMeasurement {
 public:
  struct Outcome {
    double eigenvalue;
    CMatrix projector;  // over the acts_on subspace
  };

  ProjMeasurement(std::vector<std::string> acts_on, std::vector<Outcome> outcomes,
                  const Tolerances& t = {});

  const std::vector<std::string>& acts_on() const { return acts_on_; }
  const std::vector<Outcome>& outcomes() const { return outcomes_; }
  bool non_degenerate() const { return non_degenerate_; }

  // Computational-basis measurement of n qubits; eigenvalue of outcome m is m.
  static ProjMeasurement computational(std::vector<std::string> on, const Tolerances& t = {});

 private:
  std::vector<std::string> acts_on_;
  std::vector<Outcome> outcomes_;
  bool non_degenerate_;
};

struct MeasureOutcome {
  double eigenvalue;
  double probability;
  DensityOp state;
};

// Outcomes with probability tr(E_m rho); branches at or below p_floor are
// dropped so downstream distributions stay finite-support and renormalisation
// by the probability is stable.
std::vector<MeasureOutcome> measure(const ProjMeasurement& m, const DensityOp& rho,
                                    const Tolerances& t = {});

// Spectral decomposition of a Hermitian matrix into a projective measurement,
// merging eigenvalues within eig_tol.
ProjMeasurement spectral(const CMatrix& hermitian, const std::vector<std::string>& on,
                         const Tolerances& t = {});

namespace gates {
CMatrix I(int dim = 2);
CMatrix X();
CMatrix Y();
CMatrix Z();
CMatrix H();
CMatrix CNOT();
CVector ket(char c);                    // one of 0 1 + -
CVector ket_string(const std::string& pattern);
const CMatrix* by_name(const std::string& name);  // nullptr when unknown
}  // namespace gates

}  // namespace qccs::qlin
