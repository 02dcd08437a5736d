#include "fourphoton/polstate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fourphoton/errors.hpp"

namespace fourphoton {

namespace {

constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;
const Complex kI{0.0, 1.0};

// Eigenvalues below this are decomposition noise for trace-one matrices; their
// square roots would otherwise leak ~1e-8 into fidelities of rank-deficient states.
constexpr double kRoundoff = 1e-14;

Eigen::Vector4d hermitian_eigenvalues(const Matrix4c& m) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

Matrix4c hermitian_sqrt(const Matrix4c& m) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(m);
  Eigen::Vector4d ev = solver.eigenvalues();
  for (int i = 0; i < 4; ++i) ev(i) = ev(i) > kRoundoff ? std::sqrt(ev(i)) : 0.0;
  const Matrix4c& vecs = solver.eigenvectors();
  return vecs * ev.cast<Complex>().asDiagonal() * vecs.adjoint();
}

Matrix4c kron(const Matrix2c& a, const Matrix2c& b) {
  Matrix4c out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Ket4 kron(const Ket2& a, const Ket2& b) {
  Ket4 out;
  out << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return out;
}

void require_unit(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0))
    throw DomainError(std::string(name) + " must lie in [0, 1], got " + std::to_string(value));
}

}  // namespace

PolarizationState PolarizationState::from_matrix(const Matrix4c& m) {
  if (!m.allFinite()) throw DomainError("density matrix has non-finite entries");
  const double herm_err = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm_err > kHermitianTol)
    throw DomainError("density matrix is not Hermitian (deviation " + std::to_string(herm_err) + ")");
  const Complex tr = m.trace();
  if (std::abs(tr - 1.0) > kTraceTol)
    throw DomainError("density matrix trace " + std::to_string(tr.real()) + " differs from 1");
  const Matrix4c herm = 0.5 * (m + m.adjoint());
  const double min_ev = hermitian_eigenvalues(herm).minCoeff();
  if (min_ev < kEigenFloor)
    throw DomainError("density matrix has negative eigenvalue " + std::to_string(min_ev));
  return PolarizationState(m);
}

PolarizationState PolarizationState::pure(const Ket4& ket) {
  const double norm = ket.norm();
  if (!(norm > 0.0)) throw DomainError("cannot build a pure state from a zero ket");
  const Ket4 k = ket / norm;
  Matrix4c rho = k * k.adjoint();
  // Exact Hermiticity; the outer product is Hermitian only to rounding.
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return PolarizationState(rho);
}

PolarizationState PolarizationState::maximally_mixed() {
  return PolarizationState(Matrix4c::Identity() / 4.0);
}

Projector::Projector(const Ket2& photon1, const Ket2& photon2) : k1_(photon1), k2_(photon2) {
  if (std::abs(k1_.norm() - 1.0) > 1e-12 || std::abs(k2_.norm() - 1.0) > 1e-12)
    throw DomainError("projector kets must have unit norm");
}

Ket4 Projector::ket() const { return kron(k1_, k2_); }

namespace pol {
Ket2 H() { return Ket2(1.0, 0.0); }
Ket2 V() { return Ket2(0.0, 1.0); }
Ket2 D() { return Ket2(kInvSqrt2, kInvSqrt2); }
Ket2 A() { return Ket2(kInvSqrt2, -kInvSqrt2); }
Ket2 R() { return Ket2(kInvSqrt2, kI * kInvSqrt2); }
Ket2 L() { return Ket2(kInvSqrt2, -kI * kInvSqrt2); }
}  // namespace pol

PolarizationState cascade_state(double alpha, double phi, double dephasing) {
  require_unit(dephasing, "dephasing");
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  Matrix4c rho = Matrix4c::Zero();
  rho(0, 0) = c * c;
  rho(3, 3) = s * s;
  const Complex coherence = dephasing * c * s * std::exp(kI * phi);
  rho(3, 0) = coherence;
  rho(0, 3) = std::conj(coherence);
  return PolarizationState::from_matrix(rho);
}

double dephasing_from_mismatch(double delta_tau_fs, const FilterSpec& filter) {
  const double sigma_t = coherence_sigma_fs(filter);
  if (std::isinf(delta_tau_fs)) return 0.0;
  const double x = delta_tau_fs / sigma_t;
  return std::exp(-0.5 * x * x);
}

PolarizationState mixed_phi_state(double p) {
  require_unit(p, "mixing weight p");
  Matrix4c rho = Matrix4c::Zero();
  rho(0, 0) = rho(3, 3) = 0.5;
  rho(0, 3) = rho(3, 0) = p - 0.5;
  return PolarizationState::from_matrix(rho);
}

PolarizationState bell_state(BellState which) {
  Ket4 k = Ket4::Zero();
  switch (which) {
    case BellState::kPhiPlus: k << 1, 0, 0, 1; break;
    case BellState::kPhiMinus: k << 1, 0, 0, -1; break;
    case BellState::kPsiPlus: k << 0, 1, 1, 0; break;
    case BellState::kPsiMinus: k << 0, 1, -1, 0; break;
  }
  return PolarizationState::pure(k);
}

PolarizationState product_state(const Ket2& photon1, const Ket2& photon2) {
  return PolarizationState::pure(kron(photon1, photon2));
}

Matrix2c waveplate_unitary(const WaveplateSetting& setting) {
  const double retardance =
      setting.kind == WaveplateKind::kHalfWave ? std::numbers::pi : std::numbers::pi / 2.0;
  const double c = std::cos(setting.theta);
  const double s = std::sin(setting.theta);
  Matrix2c rot;
  rot << c, -s, s, c;
  Matrix2c phase = Matrix2c::Zero();
  phase(0, 0) = std::exp(kI * (retardance / 2.0));
  phase(1, 1) = std::exp(-kI * (retardance / 2.0));
  return rot * phase * rot.transpose();
}

bool is_unitary(const Matrix2c& u, double tol) {
  if (!u.allFinite()) return false;
  return (u.adjoint() * u - Matrix2c::Identity()).cwiseAbs().maxCoeff() <= tol;
}

PolarizationState apply_local(const PolarizationState& state, const Matrix2c& u1,
                              const Matrix2c& u2) {
  if (!is_unitary(u1, 1e-10) || !is_unitary(u2, 1e-10))
    throw DomainError("apply_local requires unitary single-photon operators");
  const Matrix4c u = kron(u1, u2);
  Matrix4c rho = u * state.matrix() * u.adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return PolarizationState::from_matrix(rho);
}

double purity(const PolarizationState& state) {
  const Matrix4c& m = state.matrix();
  return (m * m).trace().real();
}

Matrix4c partial_transpose(const Matrix4c& m) {
  Matrix4c out;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int ap = 0; ap < 2; ++ap)
        for (int bp = 0; bp < 2; ++bp) out(2 * a + b, 2 * ap + bp) = m(2 * a + bp, 2 * ap + b);
  return out;
}

double negativity(const PolarizationState& state) {
  const Eigen::Vector4d ev = hermitian_eigenvalues(partial_transpose(state.matrix()));
  double neg = 0.0;
  for (int i = 0; i < 4; ++i)
    if (ev(i) < 0.0) neg -= ev(i);
  return neg;
}

double fidelity(const PolarizationState& state, const PolarizationState& target) {
  const Matrix4c root = hermitian_sqrt(state.matrix());
  Matrix4c inner = root * target.matrix() * root;
  inner = 0.5 * (inner + inner.adjoint()).eval();
  const Eigen::Vector4d ev = hermitian_eigenvalues(inner);
  double tr = 0.0;
  for (int i = 0; i < 4; ++i)
    if (ev(i) > kRoundoff) tr += std::sqrt(ev(i));
  return std::min(tr * tr, 1.0);
}

double projection_probability(const PolarizationState& state, const Projector& proj) {
  const Ket4 k = proj.ket();
  const double p = (k.adjoint() * state.matrix() * k)(0, 0).real();
  return std::clamp(p, 0.0, 1.0);
}

double swap_expectation(const PolarizationState& state) {
  const Matrix4c& m = state.matrix();
  // SWAP permutes HV <-> VH and fixes HH, VV.
  return (m(0, 0) + m(3, 3) + m(1, 2) + m(2, 1)).real();
}

Matrix2c reduced_photon1(const PolarizationState& state) {
  const Matrix4c& m = state.matrix();
  Matrix2c out;
  for (int a = 0; a < 2; ++a)
    for (int ap = 0; ap < 2; ++ap) out(a, ap) = m(2 * a, 2 * ap) + m(2 * a + 1, 2 * ap + 1);
  return out;
}

Matrix2c reduced_photon2(const PolarizationState& state) {
  const Matrix4c& m = state.matrix();
  Matrix2c out;
  for (int b = 0; b < 2; ++b)
    for (int bp = 0; bp < 2; ++bp) out(b, bp) = m(b, bp) + m(2 + b, 2 + bp);
  return out;
}

nlohmann::json to_json(const PolarizationState& state) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) row.push_back({state(i, j).real(), state(i, j).imag()});
    rows.push_back(std::move(row));
  }
  nlohmann::json basis = nlohmann::json::array();
  for (auto label : kBasisLabels) basis.push_back(std::string(label));
  return {{"basis", std::move(basis)}, {"matrix", std::move(rows)}};
}

PolarizationState state_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("basis") || !doc.contains("matrix"))
    throw DomainError("state document needs \"basis\" and \"matrix\" fields");
  const auto& basis = doc.at("basis");
  if (!basis.is_array() || basis.size() != 4) throw DomainError("state basis must list 4 labels");
  for (std::size_t i = 0; i < 4; ++i)
    if (!basis[i].is_string() || basis[i].get<std::string>() != kBasisLabels[i])
      throw DomainError("state basis must be [HH, HV, VH, VV]");
  const auto& rows = doc.at("matrix");
  if (!rows.is_array() || rows.size() != 4) throw DomainError("state matrix must have 4 rows");
  Matrix4c m;
  for (int i = 0; i < 4; ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || row.size() != 4) throw DomainError("state matrix rows must have 4 entries");
    for (int j = 0; j < 4; ++j) {
      const auto& e = row[j];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw DomainError("state matrix entries must be [re, im] pairs");
      m(i, j) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return PolarizationState::from_matrix(m);
}

}  // namespace fourphoton
