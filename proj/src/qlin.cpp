#include "qccs/qlin.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace qccs::qlin {

QReg::QReg(std::vector<std::string> vars) : vars_(std::move(vars)) {
  std::set<std::string> seen;
  for (const auto& v : vars_) {
    if (v.empty()) fail_validation("empty quantum variable name");
    if (!seen.insert(v).second) fail_validation("duplicate quantum variable: " + v);
  }
  if (vars_.size() > 24) fail_validation("register too large");
}

bool QReg::contains(const std::string& v) const {
  return std::find(vars_.begin(), vars_.end(), v) != vars_.end();
}

int QReg::index_of(const std::string& v) const {
  auto it = std::find(vars_.begin(), vars_.end(), v);
  if (it == vars_.end()) fail_validation("unknown quantum variable: " + v);
  return static_cast<int>(it - vars_.begin());
}

std::vector<int> QReg::positions(const std::vector<std::string>& subset) const {
  std::vector<int> out;
  out.reserve(subset.size());
  std::set<std::string> seen;
  for (const auto& v : subset) {
    if (!seen.insert(v).second) fail_validation("duplicate quantum variable in subset: " + v);
    out.push_back(index_of(v));
  }
  return out;
}

QReg QReg::without(const std::vector<std::string>& removed) const {
  std::vector<std::string> rest;
  for (const auto& v : vars_)
    if (std::find(removed.begin(), removed.end(), v) == removed.end()) rest.push_back(v);
  return QReg(rest);
}

bool approx_equal(const CMatrix& a, const CMatrix& b, double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return (a - b).cwiseAbs().maxCoeff() <= tol;
}

bool is_hermitian(const CMatrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

CMatrix dagger(const CMatrix& a) { return a.adjoint(); }

CMatrix tensor(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

namespace {

// Scatters the bits of `sub` (over the given register positions, first
// position most significant) and `rest` (over the complement, register
// order) into a full-register index.
struct BitLayout {
  std::vector<int> shifts_on;    // full-index shift per `on` position
  std::vector<int> shifts_rest;  // full-index shift per complement position
  long dim_on = 1;
  long dim_rest = 1;

  BitLayout(const std::vector<int>& on_positions, size_t reg_size) {
    std::vector<bool> taken(reg_size, false);
    for (int p : on_positions) taken[static_cast<size_t>(p)] = true;
    // Register position p holds bit (reg_size - 1 - p) of the full index.
    for (int p : on_positions) shifts_on.push_back(static_cast<int>(reg_size) - 1 - p);
    for (size_t p = 0; p < reg_size; ++p)
      if (!taken[p]) shifts_rest.push_back(static_cast<int>(reg_size) - 1 - static_cast<int>(p));
    dim_on = 1L << shifts_on.size();
    dim_rest = 1L << shifts_rest.size();
  }

  long scatter(long sub, long rest) const {
    long idx = 0;
    for (size_t k = 0; k < shifts_on.size(); ++k)
      if (sub & (1L << (shifts_on.size() - 1 - k))) idx |= 1L << shifts_on[k];
    for (size_t k = 0; k < shifts_rest.size(); ++k)
      if (rest & (1L << (shifts_rest.size() - 1 - k))) idx |= 1L << shifts_rest[k];
    return idx;
  }
};

void check_square_pow2(const CMatrix& m, size_t nqubits, const std::string& what) {
  long want = 1L << nqubits;
  if (m.rows() != want || m.cols() != want)
    fail_validation(what + ": dimension mismatch, expected " + std::to_string(want) + "x" +
                    std::to_string(want));
}

}  // namespace

CMatrix embed(const CMatrix& op, const std::vector<std::string>& on, const QReg& reg) {
  auto pos = reg.positions(on);
  check_square_pow2(op, on.size(), "embed");
  BitLayout layout(pos, reg.size());
  CMatrix out = CMatrix::Zero(reg.dim(), reg.dim());
  for (long i = 0; i < layout.dim_on; ++i)
    for (long j = 0; j < layout.dim_on; ++j) {
      Complex v = op(i, j);
      if (v == Complex(0, 0)) continue;
      for (long r = 0; r < layout.dim_rest; ++r)
        out(layout.scatter(i, r), layout.scatter(j, r)) = v;
    }
  return out;
}

DensityOp::DensityOp(QReg reg, CMatrix mat, const Tolerances& t)
    : reg_(std::move(reg)), mat_(std::move(mat)) {
  if (mat_.rows() != reg_.dim() || mat_.cols() != reg_.dim())
    fail_validation("density operator dimension does not match register");
  if (!is_hermitian(mat_, t.tol)) fail_validation("density operator is not Hermitian");
  double tr = mat_.trace().real();
  if (std::abs(tr - 1.0) > t.tol) fail_validation("density operator trace differs from 1");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(mat_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -t.tol)
    fail_validation("density operator has a negative eigenvalue");
}

DensityOp DensityOp::from_ket(QReg reg, const CVector& psi, const Tolerances& t) {
  if (psi.size() != reg.dim()) fail_validation("ket dimension does not match register");
  double n = psi.norm();
  if (std::abs(n - 1.0) > 1e-12) fail_validation("ket is not normalised");
  return DensityOp(std::move(reg), psi * psi.adjoint(), t);
}

DensityOp DensityOp::from_ket_string(const QReg& reg, const std::string& pattern,
                                     const Tolerances& t) {
  if (pattern.size() != reg.size())
    fail_validation("ket string length does not match register size");
  return from_ket(reg, gates::ket_string(pattern), t);
}

SuperOp::SuperOp(std::vector<std::string> acts_on, std::vector<CMatrix> kraus,
                 bool trace_preserving, const Tolerances& t)
    : acts_on_(std::move(acts_on)), kraus_(std::move(kraus)), trace_preserving_(trace_preserving) {
  if (kraus_.empty()) fail_validation("super-operator needs at least one Kraus operator");
  long d = 1L << acts_on_.size();
  CMatrix sum = CMatrix::Zero(d, d);
  for (const auto& e : kraus_) {
    if (e.rows() != d || e.cols() != d)
      fail_validation("Kraus operator dimension does not match acted-on qubits");
    sum += e.adjoint() * e;
  }
  if (trace_preserving_) {
    if (!approx_equal(sum, CMatrix::Identity(d, d), t.tol))
      fail_validation("Kraus operators of a trace-preserving map must resolve the identity");
  } else {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(sum, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().maxCoeff() > 1.0 + t.tol)
      fail_validation("Kraus operators exceed the trace-nonincreasing bound");
  }
}

SuperOp SuperOp::identity(std::vector<std::string> on) {
  long d = 1L << on.size();
  return SuperOp(std::move(on), {CMatrix::Identity(d, d)});
}

SuperOp SuperOp::unitary(std::vector<std::string> on, const CMatrix& u, const Tolerances& t) {
  check_square_pow2(u, on.size(), "unitary");
  if (!approx_equal(u * u.adjoint(), CMatrix::Identity(u.rows(), u.cols()), t.tol))
    fail_validation("matrix is not unitary");
  return SuperOp(std::move(on), {u}, true, t);
}

SuperOp SuperOp::set_to(std::vector<std::string> on, const std::string& pattern,
                        const Tolerances& t) {
  if (pattern.size() != on.size()) fail_validation("set_to pattern length mismatch");
  long d = 1L << on.size();
  CVector target = gates::ket_string(pattern);
  std::vector<CMatrix> ks;
  ks.reserve(static_cast<size_t>(d));
  for (long b = 0; b < d; ++b) {
    CVector basis = CVector::Zero(d);
    basis(b) = 1.0;
    ks.push_back(target * basis.adjoint());
  }
  return SuperOp(std::move(on), std::move(ks), true, t);
}

SuperOp SuperOp::dephase(std::string on) {
  CMatrix p0 = CMatrix::Zero(2, 2), p1 = CMatrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  return SuperOp({std::move(on)}, {p0, p1});
}

DensityOp apply_superop(const SuperOp& e, const DensityOp& rho, const Tolerances& t) {
  const QReg& reg = rho.reg();
  CMatrix acc = CMatrix::Zero(reg.dim(), reg.dim());
  for (const auto& k : e.kraus()) {
    CMatrix full = embed(k, e.acts_on(), reg);
    acc += full * rho.mat() * full.adjoint();
  }
  if (!e.trace_preserving()) {
    // The caller owns renormalisation; here only full maps produce states.
    double tr = acc.trace().real();
    if (std::abs(tr - 1.0) > t.tol)
      fail_validation("non-trace-preserving map did not yield a unit-trace state");
  }
  return DensityOp(reg, std::move(acc), t);
}

DensityOp partial_trace(const DensityOp& rho, const std::vector<std::string>& over,
                        const Tolerances& t) {
  if (over.empty()) return rho;
  auto pos = rho.reg().positions(over);
  BitLayout layout(pos, rho.reg().size());
  QReg rest = rho.reg().without(over);
  CMatrix out = CMatrix::Zero(layout.dim_rest, layout.dim_rest);
  for (long i = 0; i < layout.dim_rest; ++i)
    for (long j = 0; j < layout.dim_rest; ++j) {
      Complex acc(0, 0);
      for (long k = 0; k < layout.dim_on; ++k)
        acc += rho.mat()(layout.scatter(k, i), layout.scatter(k, j));
      out(i, j) = acc;
    }
  return DensityOp(rest, std::move(out), t);
}

ProjMeasurement::ProjMeasurement(std::vector<std::string> acts_on, std::vector<Outcome> outcomes,
                                 const Tolerances& t)
    : acts_on_(std::move(acts_on)), outcomes_(std::move(outcomes)) {
  if (outcomes_.empty()) fail_validation("measurement needs at least one outcome");
  long d = 1L << acts_on_.size();
  CMatrix sum = CMatrix::Zero(d, d);
  for (size_t i = 0; i < outcomes_.size(); ++i) {
    const CMatrix& p = outcomes_[i].projector;
    if (p.rows() != d || p.cols() != d) fail_validation("projector dimension mismatch");
    if (!is_hermitian(p, t.tol)) fail_validation("projector is not Hermitian");
    if (!approx_equal(p * p, p, t.tol)) fail_validation("projector is not idempotent");
    for (size_t j = 0; j < i; ++j)
      if (std::abs(outcomes_[i].eigenvalue - outcomes_[j].eigenvalue) <= t.eig_tol)
        fail_validation("measurement eigenvalues must be pairwise distinct");
    sum += p;
  }
  if (!approx_equal(sum, CMatrix::Identity(d, d), t.tol))
    fail_validation("projectors do not sum to the identity");
  non_degenerate_ = true;
  for (const auto& o : outcomes_) {
    double rank = o.projector.trace().real();
    if (std::abs(rank - 1.0) > t.tol) non_degenerate_ = false;
  }
}

ProjMeasurement ProjMeasurement::computational(std::vector<std::string> on, const Tolerances& t) {
  long d = 1L << on.size();
  std::vector<Outcome> outs;
  for (long m = 0; m < d; ++m) {
    CMatrix p = CMatrix::Zero(d, d);
    p(m, m) = 1.0;
    outs.push_back({static_cast<double>(m), std::move(p)});
  }
  return ProjMeasurement(std::move(on), std::move(outs), t);
}

std::vector<MeasureOutcome> measure(const ProjMeasurement& m, const DensityOp& rho,
                                    const Tolerances& t) {
  std::vector<MeasureOutcome> out;
  double total = 0.0;
  for (const auto& o : m.outcomes()) {
    CMatrix full = embed(o.projector, m.acts_on(), rho.reg());
    double p = (full * rho.mat()).trace().real();
    total += p;
    if (p <= t.p_floor) continue;
    CMatrix post = full * rho.mat() * full / p;
    out.push_back({o.eigenvalue, p, DensityOp(rho.reg(), std::move(post), t)});
  }
  if (std::abs(total - 1.0) > t.tol)
    fail_validation("measurement probabilities do not sum to 1");
  return out;
}

ProjMeasurement spectral(const CMatrix& hermitian, const std::vector<std::string>& on,
                         const Tolerances& t) {
  if (!is_hermitian(hermitian, t.tol)) fail_validation("spectral: input is not Hermitian");
  check_square_pow2(hermitian, on.size(), "spectral");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian);
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  std::vector<ProjMeasurement::Outcome> outs;
  long i = 0;
  while (i < vals.size()) {
    long j = i;
    double first = vals(i);
    CMatrix proj = CMatrix::Zero(hermitian.rows(), hermitian.cols());
    double acc = 0.0;
    long count = 0;
    while (j < vals.size() && std::abs(vals(j) - first) <= t.eig_tol) {
      proj += vecs.col(j) * vecs.col(j).adjoint();
      acc += vals(j);
      ++count;
      ++j;
    }
    outs.push_back({acc / static_cast<double>(count), std::move(proj)});
    i = j;
  }
  return ProjMeasurement(std::vector<std::string>(on), std::move(outs), t);
}

namespace gates {

CMatrix I(int dim) { return CMatrix::Identity(dim, dim); }

CMatrix X() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMatrix Y() {
  CMatrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}

CMatrix Z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

CMatrix H() {
  CMatrix m(2, 2);
  double s = 1.0 / std::sqrt(2.0);
  m << s, s, s, -s;
  return m;
}

CMatrix CNOT() {
  CMatrix m = CMatrix::Zero(4, 4);
  m(0, 0) = 1;
  m(1, 1) = 1;
  m(2, 3) = 1;
  m(3, 2) = 1;
  return m;
}

CVector ket(char c) {
  CVector v(2);
  double s = 1.0 / std::sqrt(2.0);
  switch (c) {
    case '0': v << 1, 0; break;
    case '1': v << 0, 1; break;
    case '+': v << s, s; break;
    case '-': v << s, -s; break;
    default: fail_validation(std::string("unknown ket symbol: ") + c);
  }
  return v;
}

CVector ket_string(const std::string& pattern) {
  if (pattern.empty()) {
    CVector v(1);
    v << 1;
    return v;
  }
  CVector acc = ket(pattern[0]);
  for (size_t i = 1; i < pattern.size(); ++i) {
    CVector next = ket(pattern[i]);
    CVector merged(acc.size() * 2);
    for (long a = 0; a < acc.size(); ++a)
      for (long b = 0; b < 2; ++b) merged(a * 2 + b) = acc(a) * next(b);
    acc = merged;
  }
  return acc;
}

const CMatrix* by_name(const std::string& name) {
  static const CMatrix i2 = I(2);
  static const CMatrix x = X();
  static const CMatrix y = Y();
  static const CMatrix z = Z();
  static const CMatrix h = H();
  static const CMatrix cnot = CNOT();
  if (name == "I") return &i2;
  if (name == "X") return &x;
  if (name == "Y") return &y;
  if (name == "Z") return &z;
  if (name == "H") return &h;
  if (name == "CNOT") return &cnot;
  return nullptr;
}

}  // namespace gates

}  // namespace qccs::qlin
