#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "fourphoton/errors.hpp"
#include "fourphoton/polstate.hpp"
#include "test_util.hpp"

using namespace fourphoton;
using std::numbers::pi;

namespace {

bool states_close(const PolarizationState& a, const PolarizationState& b, double tol) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff() < tol;
}

void check_invariants(const PolarizationState& s) {
  const Matrix4c& m = s.matrix();
  CHECK((m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(m.trace() - 1.0) <= 1e-12);
  CHECK(testutil::general_eigenvalues(0.5 * (m + m.adjoint())).minCoeff() >= -1e-10);
}

}  // namespace

TEST_CASE("cascade_state examples") {
  SUBCASE("alpha = 0 is |HH>") {
    for (double phi : {0.0, 0.7, 2.9})
      CHECK(states_close(cascade_state(0.0, phi, 1.0), product_state(pol::H(), pol::H()), 1e-15));
  }
  SUBCASE("balanced pure cascade is Phi+") {
    const auto s = cascade_state(pi / 4, 0.0, 1.0);
    CHECK(states_close(s, bell_state(BellState::kPhiPlus), 1e-15));
    CHECK(purity(s) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("fully dephased balanced cascade") {
    // diag(1/2, 0, 0, 1/2): Tr rho^2 = 1/2; partial transpose is unchanged,
    // so no negative eigenvalue.
    const auto s = cascade_state(pi / 4, 0.0, 0.0);
    CHECK(purity(s) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(negativity(s) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(testutil::negativity_oracle(s.matrix()) == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("dephasing outside [0,1] is rejected") {
    CHECK_THROWS_AS(cascade_state(0.3, 0.0, 1.2), DomainError);
    CHECK_THROWS_AS(cascade_state(0.3, 0.0, -0.1), DomainError);
  }
  SUBCASE("populations and coherence") {
    const double a = 0.4, phi = 1.1, d = 0.8;
    const auto s = cascade_state(a, phi, d);
    CHECK(s(0, 0).real() == doctest::Approx(std::cos(a) * std::cos(a)));
    CHECK(s(3, 3).real() == doctest::Approx(std::sin(a) * std::sin(a)));
    const Complex coh = d * std::sin(a) * std::cos(a) * std::exp(Complex(0, phi));
    CHECK(std::abs(s(3, 0) - coh) < 1e-15);
  }
}

TEST_CASE("dephasing_from_mismatch") {
  const auto f = FilterSpec::gaussian(826.0, 5.5);
  CHECK(dephasing_from_mismatch(0.0, f) == 1.0);
  const double sigma_t = coherence_sigma_fs(f);
  CHECK(dephasing_from_mismatch(sigma_t, f) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(dephasing_from_mismatch(1e9, f) <= 1e-12);
  CHECK(dephasing_from_mismatch(INFINITY, f) == 0.0);
  double prev = 1.0;
  for (double dt = 10.0; dt < 2000.0; dt += 10.0) {
    const double v = dephasing_from_mismatch(dt, f);
    CHECK(v < prev);
    CHECK(v == doctest::Approx(dephasing_from_mismatch(-dt, f)));
    prev = v;
  }
  CHECK_THROWS_AS(dephasing_from_mismatch(10.0, FilterSpec::long_pass(780.0)), UnsupportedModelError);
}

TEST_CASE("mixed_phi_state metrics") {
  CHECK(states_close(mixed_phi_state(1.0), bell_state(BellState::kPhiPlus), 1e-15));
  // Closed forms p^2 + (1-p)^2 and |2p-1|/2, cross-checked with the
  // general-eigensolver oracle.
  const auto s75 = mixed_phi_state(0.75);
  CHECK(purity(s75) == doctest::Approx(0.625).epsilon(1e-14));
  CHECK(negativity(s75) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(testutil::negativity_oracle(s75.matrix()) == doctest::Approx(0.25).epsilon(1e-13));
  const auto s50 = mixed_phi_state(0.5);
  CHECK(purity(s50) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(negativity(s50) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(negativity(mixed_phi_state(0.6)) == doctest::Approx(0.1).epsilon(1e-13));
  CHECK_THROWS_AS(mixed_phi_state(1.5), DomainError);
  CHECK_THROWS_AS(mixed_phi_state(-0.01), DomainError);
}

TEST_CASE("bell states") {
  const auto psim = bell_state(BellState::kPsiMinus);
  CHECK(purity(psim) == doctest::Approx(1.0));
  // Partial transpose of the singlet has eigenvalues {-1/2, 1/2, 1/2, 1/2}.
  const Eigen::Vector4d ev = testutil::general_eigenvalues(testutil::pt_oracle(psim.matrix()));
  CHECK(ev.minCoeff() == doctest::Approx(-0.5));
  CHECK(negativity(psim) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fidelity(bell_state(BellState::kPhiPlus), bell_state(BellState::kPhiMinus)) <= 1e-12);
  CHECK(swap_expectation(bell_state(BellState::kPhiPlus)) == doctest::Approx(1.0));
  CHECK(swap_expectation(psim) == doctest::Approx(-1.0));
  // SWAP as an explicit 4x4 permutation contracted with rho.
  Matrix4c swap = Matrix4c::Zero();
  swap(0, 0) = swap(3, 3) = swap(1, 2) = swap(2, 1) = 1.0;
  for (auto b : {BellState::kPhiPlus, BellState::kPhiMinus, BellState::kPsiPlus, BellState::kPsiMinus}) {
    const auto s = bell_state(b);
    CHECK(negativity(s) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(swap_expectation(s) == doctest::Approx((s.matrix() * swap).trace().real()));
  }
}

TEST_CASE("waveplate_unitary") {
  SUBCASE("half-wave at 0 is diag(1,-1) up to phase") {
    const Matrix2c u = waveplate_unitary({WaveplateKind::kHalfWave, 0.0});
    const Complex ph = u(0, 0);
    Matrix2c z = Matrix2c::Zero();
    z(0, 0) = 1.0;
    z(1, 1) = -1.0;
    CHECK((u - ph * z).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("half-wave at pi/8 maps H to D") {
    const Matrix2c u = waveplate_unitary({WaveplateKind::kHalfWave, pi / 8});
    CHECK(testutil::same_ray(u * pol::H(), pol::D(), 1e-14));
  }
  SUBCASE("quarter-wave at pi/4 maps H to (H + iV)/sqrt2") {
    const Matrix2c u = waveplate_unitary({WaveplateKind::kQuarterWave, pi / 4});
    CHECK(testutil::same_ray(u * pol::H(), pol::R(), 1e-14));
  }
  SUBCASE("unitary and pi-periodic") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(-pi, pi);
    for (int i = 0; i < 100; ++i) {
      const double t = ang(rng);
      for (auto kind : {WaveplateKind::kHalfWave, WaveplateKind::kQuarterWave}) {
        const Matrix2c u = waveplate_unitary({kind, t});
        CHECK(is_unitary(u, 1e-12));
        CHECK((u - waveplate_unitary({kind, t + pi})).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("apply_local") {
  const auto phip = bell_state(BellState::kPhiPlus);
  const Matrix2c id = Matrix2c::Identity();
  CHECK(states_close(apply_local(phip, id, id), phip, 1e-15));
  const Matrix2c hwp0 = waveplate_unitary({WaveplateKind::kHalfWave, 0.0});
  const Matrix2c hwp45 = waveplate_unitary({WaveplateKind::kHalfWave, pi / 4});
  CHECK(states_close(apply_local(phip, id, hwp0), bell_state(BellState::kPhiMinus), 1e-14));
  CHECK(states_close(apply_local(phip, id, hwp45), bell_state(BellState::kPsiPlus), 1e-14));
  Matrix2c bad = Matrix2c::Identity();
  bad(0, 0) = 1.1;
  CHECK_THROWS_AS(apply_local(phip, bad, id), DomainError);
}

TEST_CASE("purity, negativity, fidelity basics") {
  CHECK(purity(PolarizationState::maximally_mixed()) == doctest::Approx(0.25));
  CHECK(negativity(product_state(pol::H(), pol::H())) == doctest::Approx(0.0));
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto s = testutil::random_state(rng);
    CHECK(fidelity(s, s) == doctest::Approx(1.0).epsilon(1e-9));
    const auto t = testutil::random_state(rng);
    CHECK(fidelity(s, t) == doctest::Approx(fidelity(t, s)).epsilon(1e-9));
    CHECK(negativity(s) == doctest::Approx(testutil::negativity_oracle(s.matrix())).epsilon(1e-10));
  }
  // Pure target reduces to <psi|rho|psi>.
  CHECK(fidelity(mixed_phi_state(0.75), bell_state(BellState::kPhiPlus)) ==
        doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("projection_probability") {
  const auto phip = bell_state(BellState::kPhiPlus);
  const double dd = projection_probability(phip, Projector(pol::D(), pol::D()));
  const double dr = projection_probability(phip, Projector(pol::D(), pol::R()));
  CHECK(dd == doctest::Approx(0.5));
  CHECK(dr == doctest::Approx(0.25));
  CHECK(dr / dd == doctest::Approx(0.5));
  CHECK(projection_probability(product_state(pol::H(), pol::H()), Projector(pol::H(), pol::H())) ==
        doctest::Approx(1.0));
  // Symbolic contraction: <D R|psi> = (1 - i e^{i phi}) / (2 sqrt2).
  for (int k = 0; k <= 60; ++k) {
    const double phi = -pi + 2 * pi * k / 60.0;
    const Complex amp = (1.0 - Complex(0, 1) * std::exp(Complex(0, phi))) / (2.0 * std::sqrt(2.0));
    const double p = projection_probability(cascade_state(pi / 4, phi, 1.0), Projector(pol::D(), pol::R()));
    CHECK(p == doctest::Approx(std::norm(amp)).epsilon(1e-12));
    CHECK(p == doctest::Approx((1 + std::sin(phi)) / 4).epsilon(1e-12));
  }
  CHECK_THROWS_AS(Projector(Ket2(1.0, 1.0), pol::H()), DomainError);
}

TEST_CASE("properties on grids and random inputs") {
  // purity(cascade(pi/4, phi, d)) = (1 + d^2)/2
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j <= 10; ++j) {
      const double phi = 2 * pi * i / 12.0, d = j / 10.0;
      CHECK(std::abs(purity(cascade_state(pi / 4, phi, d)) - (1 + d * d) / 2) <= 1e-10);
    }
  for (int i = 0; i <= 120; ++i) {
    const double p = i / 120.0;
    CHECK(std::abs(negativity(mixed_phi_state(p)) - std::abs(2 * p - 1) / 2) <= 1e-10);
  }
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = testutil::random_state(rng, 1 + trial % 4);
    const auto t = testutil::random_state(rng, 1 + (trial / 4) % 4);
    const Matrix2c u1 = testutil::random_unitary(rng);
    const Matrix2c u2 = testutil::random_unitary(rng);
    const auto s2 = apply_local(s, u1, u2);
    const auto t2 = apply_local(t, u1, u2);
    CHECK(std::abs(fidelity(s2, t2) - fidelity(s, t)) <= 1e-9);
    CHECK(std::abs(purity(s2) - purity(s)) <= 1e-9);
    CHECK(std::abs(negativity(s2) - negativity(s)) <= 1e-9);
    check_invariants(s2);
    double total = 0.0;
    for (const auto& a : {pol::H(), pol::V()})
      for (const auto& b : {pol::H(), pol::V()}) total += projection_probability(s, Projector(a, b));
    CHECK(std::abs(total - 1.0) <= 1e-10);
  }
}

TEST_CASE("constructors satisfy invariants") {
  for (double a : {0.0, 0.3, pi / 4, 1.2})
    for (double d : {0.0, 0.5, 1.0}) check_invariants(cascade_state(a, 0.4, d));
  for (double p : {0.0, 0.25, 0.75, 1.0}) check_invariants(mixed_phi_state(p));
  check_invariants(bell_state(BellState::kPsiMinus));
  Matrix4c not_psd = Matrix4c::Zero();
  not_psd(0, 0) = 1.5;
  not_psd(1, 1) = -0.5;
  CHECK_THROWS_AS(PolarizationState::from_matrix(not_psd), DomainError);
  Matrix4c not_herm = Matrix4c::Identity() / 4.0;
  not_herm(0, 1) = 0.1;
  CHECK_THROWS_AS(PolarizationState::from_matrix(not_herm), DomainError);
}

TEST_CASE("state JSON round trip") {
  std::mt19937_64 rng(5);
  const auto s = testutil::random_state(rng);
  const auto doc = to_json(s);
  CHECK(doc.at("basis").size() == 4);
  CHECK(doc.at("basis")[1] == "HV");
  const auto back = state_from_json(doc);
  CHECK((back.matrix() - s.matrix()).cwiseAbs().maxCoeff() == 0.0);
  auto broken = doc;
  broken["basis"][0] = "VV";
  CHECK_THROWS_AS(state_from_json(broken), DomainError);
}
