#pragma once

#include <array>
#include <complex>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

#include "fourphoton/filter.hpp"

namespace fourphoton {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;
using Ket2 = Eigen::Vector2cd;
using Ket4 = Eigen::Vector4cd;

/// Basis labels in storage order. Photon 1 is the left tensor factor, so
/// index = 2 * pol1 + pol2 with H = 0 and V = 1.
inline constexpr std::array<std::string_view, 4> kBasisLabels{"HH", "HV", "VH", "VV"};

/// Two-photon polarization density matrix. Construction validates the
/// Hermitian, unit-trace and positive-semidefinite invariants.
class PolarizationState {
 public:
  static constexpr double kHermitianTol = 1e-12;
  static constexpr double kTraceTol = 1e-12;
  static constexpr double kEigenFloor = -1e-10;

  /// Throws DomainError if `m` is not a valid density matrix.
  static PolarizationState from_matrix(const Matrix4c& m);
  /// Normalizes `ket` and returns |ket><ket|.
  static PolarizationState pure(const Ket4& ket);
  static PolarizationState maximally_mixed();

  const Matrix4c& matrix() const noexcept { return rho_; }
  Complex operator()(int row, int col) const { return rho_(row, col); }

 private:
  explicit PolarizationState(const Matrix4c& m) : rho_(m) {}
  Matrix4c rho_;
};

enum class WaveplateKind { kHalfWave, kQuarterWave };

struct WaveplateSetting {
  WaveplateKind kind = WaveplateKind::kHalfWave;
  double theta = 0.0;  // fast-axis angle from horizontal, radians (mod pi)
};

/// Product projector |k1> (x) |k2>.
class Projector {
 public:
  /// Throws DomainError unless both kets have unit norm within 1e-12.
  Projector(const Ket2& photon1, const Ket2& photon2);

  const Ket2& photon1() const noexcept { return k1_; }
  const Ket2& photon2() const noexcept { return k2_; }
  Ket4 ket() const;

 private:
  Ket2 k1_;
  Ket2 k2_;
};

/// Single-photon polarization kets; R = (H + iV)/sqrt2, L = (H - iV)/sqrt2.
namespace pol {
Ket2 H();
Ket2 V();
Ket2 D();
Ket2 A();
Ket2 R();
Ket2 L();
}  // namespace pol

enum class BellState { kPhiPlus, kPhiMinus, kPsiPlus, kPsiMinus };

/// cos(alpha)|HH> + e^{i phi} sin(alpha)|VV> with the HH/VV coherences scaled
/// by `dephasing` (1 = pure, 0 = incoherent mixture).
PolarizationState cascade_state(double alpha, double phi, double dephasing);

/// Coherence factor left by a residual HH/VV arrival-time mismatch, for a
/// Gaussian filter: exp(-dt^2 / (2 sigma_t^2)) with sigma_t the coherence time.
double dephasing_from_mismatch(double delta_tau_fs, const FilterSpec& filter);

/// p|Phi+><Phi+| + (1-p)|Phi-><Phi-|.
PolarizationState mixed_phi_state(double p);

PolarizationState bell_state(BellState which);

PolarizationState product_state(const Ket2& photon1, const Ket2& photon2);

Matrix2c waveplate_unitary(const WaveplateSetting& setting);

/// (u1 (x) u2) rho (u1 (x) u2)^dagger. Throws DomainError for non-unitary input.
PolarizationState apply_local(const PolarizationState& state, const Matrix2c& u1,
                              const Matrix2c& u2);

double purity(const PolarizationState& state);
double negativity(const PolarizationState& state);
/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double fidelity(const PolarizationState& state, const PolarizationState& target);
double projection_probability(const PolarizationState& state, const Projector& proj);

/// Tr(rho SWAP): +1 for symmetric states, -1 for the singlet.
double swap_expectation(const PolarizationState& state);

/// Reduced single-photon density matrices.
Matrix2c reduced_photon1(const PolarizationState& state);
Matrix2c reduced_photon2(const PolarizationState& state);

/// Matrix with rows/columns permuted as the partial transpose over photon 2.
Matrix4c partial_transpose(const Matrix4c& m);

bool is_unitary(const Matrix2c& u, double tol);

nlohmann::json to_json(const PolarizationState& state);
/// Throws DomainError on malformed documents or invalid matrices.
PolarizationState state_from_json(const nlohmann::json& doc);

}  // namespace fourphoton
