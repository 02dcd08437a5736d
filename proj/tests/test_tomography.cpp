#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <doctest.h>

#include "fourphoton/errors.hpp"
#include "fourphoton/tomography.hpp"
#include "test_util.hpp"

using namespace fourphoton;
using std::numbers::pi;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double count_of(const TomographyRecord& r, const std::string& label) {
  for (const auto& e : r.entries)
    if (e.setting.label == label) return e.counts;
  FAIL("missing label " << label);
  return 0.0;
}

}  // namespace

TEST_CASE("projection_set") {
  const auto set = projection_set();
  REQUIRE(set.size() == 36);
  for (const auto& s : set) {
    CHECK(std::abs(s.projector.photon1().norm() - 1.0) <= 1e-12);
    CHECK(std::abs(s.projector.photon2().norm() - 1.0) <= 1e-12);
    // The waveplates ahead of the H polarizer select the intended kets.
    CHECK(testutil::same_ray(analyzer_ket(s.hwp1, s.qwp1), s.projector.photon1(), 1e-12));
    CHECK(testutil::same_ray(analyzer_ket(s.hwp2, s.qwp2), s.projector.photon2(), 1e-12));
  }
  const Ket2 six[6] = {pol::H(), pol::V(), pol::D(), pol::A(), pol::R(), pol::L()};
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      const double ov = std::norm(six[a].dot(six[b]));
      if (a == b) CHECK(ov == doctest::Approx(1.0));
      else if (a / 2 == b / 2) CHECK(ov <= 1e-15);
      else CHECK(ov == doctest::Approx(0.5).epsilon(1e-12));
    }

  // Phi+ seen through the D x R waveplate setting.
  const auto it = std::find_if(set.begin(), set.end(), [](const auto& s) { return s.label == "DR"; });
  REQUIRE(it != set.end());
  const Ket2 k1 = waveplate_unitary(it->hwp1).adjoint() * waveplate_unitary(it->qwp1).adjoint() * pol::H();
  const Ket2 k2 = waveplate_unitary(it->hwp2).adjoint() * waveplate_unitary(it->qwp2).adjoint() * pol::H();
  Ket4 k;
  k << k1(0) * k2(0), k1(0) * k2(1), k1(1) * k2(0), k1(1) * k2(1);
  const Matrix4c rho = bell_state(BellState::kPhiPlus).matrix();
  CHECK((k.adjoint() * rho * k)(0, 0).real() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("simulate_tomography") {
  const auto hh = product_state(pol::H(), pol::H());
  const auto rec = simulate_tomography(hh, 1e4, 3);
  CHECK(std::abs(count_of(rec, "HH") - 1e4) <= 400.0);
  CHECK(count_of(rec, "VV") == 0.0);
  CHECK(count_of(rec, "HV") == 0.0);

  const auto psi = bell_state(BellState::kPsiMinus);
  const auto r2 = simulate_tomography(psi, 1e4, 4);
  const char* bases[3][2] = {{"H", "V"}, {"D", "A"}, {"R", "L"}};
  for (auto& b1 : bases)
    for (auto& b2 : bases) {
      double total = 0.0;
      for (const char* x : b1)
        for (const char* y : b2) total += count_of(r2, std::string(x) + y);
      CHECK(std::abs(total - 1e4) <= 3.0 * 100.0);
    }

  const auto mixed = expected_tomography(PolarizationState::maximally_mixed(), 1e4);
  for (const auto& e : mixed.entries) CHECK(e.counts == doctest::Approx(2500.0));

  const auto again = simulate_tomography(psi, 1e4, 4);
  for (std::size_t i = 0; i < 36; ++i) CHECK(again.entries[i].counts == r2.entries[i].counts);
  CHECK_THROWS_AS(simulate_tomography(psi, 0.0, 1), DomainError);
}

TEST_CASE("ml_reconstruct") {
  SUBCASE("noiseless product state") {
    const auto hh = product_state(pol::H(), pol::H());
    const auto res = ml_reconstruct(expected_tomography(hh, 1e4));
    CHECK(res.converged);
    CHECK(fidelity(res.state, hh) >= 0.9999);
  }
  SUBCASE("mixed_phi_state(0.75) over 50 seeds") {
    const auto rho = mixed_phi_state(0.75);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto res = ml_reconstruct(simulate_tomography(rho, 1e4, seed));
      CHECK(std::abs(purity(res.state) - 0.625) <= 0.02);
      CHECK(std::abs(negativity(res.state) - 0.25) <= 0.02);
    }
  }
  SUBCASE("singlet") {
    const auto psi = bell_state(BellState::kPsiMinus);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto res = ml_reconstruct(simulate_tomography(psi, 1e4, 100 + seed));
      CHECK(fidelity(res.state, psi) >= 0.99);
      CHECK(negativity(res.state) >= 0.48);
    }
  }
  SUBCASE("likelihood is monotone and the output is a valid state") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
      const auto truth = testutil::random_state(rng, 1 + trial % 4);
      const double mean = trial % 3 == 0 ? 5.0 : 1e3;
      const auto res = ml_reconstruct(simulate_tomography(truth, mean, 500 + trial));
      for (std::size_t i = 1; i < res.log_likelihood.size(); ++i)
        CHECK(res.log_likelihood[i] >= res.log_likelihood[i - 1]);
      const Matrix4c& m = res.state.matrix();
      CHECK((m - m.adjoint()).norm() <= 1e-12);
      CHECK(std::abs(m.trace() - 1.0) <= 1e-12);
      CHECK(testutil::general_eigenvalues(m).minCoeff() >= -1e-10);
    }
  }
  SUBCASE("setting order does not matter") {
    const auto truth = cascade_state(0.6, 0.4, 0.9);
    auto rec = simulate_tomography(truth, 1e4, 9);
    const auto a = ml_reconstruct(rec);
    std::mt19937_64 rng(10);
    std::shuffle(rec.entries.begin(), rec.entries.end(), rng);
    const auto b = ml_reconstruct(rec);
    CHECK((a.state.matrix() - b.state.matrix()).norm() <= 1e-6);
  }
  SUBCASE("fidelity improves with counts") {
    const auto truth = cascade_state(0.5, 1.0, 0.93);
    double last = 0.0;
    for (double mean : {1e3, 1e4, 1e5}) {
      std::vector<double> f;
      for (std::uint64_t seed = 0; seed < 50; ++seed)
        f.push_back(fidelity(ml_reconstruct(simulate_tomography(truth, mean, seed)).state, truth));
      const double med = median(f);
      CHECK(med > last);
      last = med;
    }
  }
  SUBCASE("errors and flags") {
    TomographyRecord partial;
    for (const auto& s : projection_set())
      if (s.label.find_first_of("DARL") == std::string::npos) partial.entries.push_back({s, 100.0});
    CHECK_THROWS_AS(ml_reconstruct(partial), DomainError);
    auto empty = expected_tomography(PolarizationState::maximally_mixed(), 1.0);
    for (auto& e : empty.entries) e.counts = 0.0;
    CHECK_THROWS_AS(ml_reconstruct(empty), DomainError);
    const auto capped = ml_reconstruct(simulate_tomography(mixed_phi_state(0.9), 1e4, 1), {2, 1e-15});
    CHECK_FALSE(capped.converged);
    CHECK(capped.iterations == 2);
  }
}

TEST_CASE("metrics_report") {
  const auto hh = product_state(pol::H(), pol::H());
  const auto exact = metrics_report(expected_tomography(hh, 1e4), hh, 0, 1);
  CHECK(exact.purity == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(exact.negativity <= 1e-6);
  CHECK(exact.fidelity == doctest::Approx(1.0).epsilon(1e-6));

  const auto half = mixed_phi_state(0.5);
  const auto rep = metrics_report(simulate_tomography(half, 1e4, 2), half, 50, 3);
  CHECK(std::abs(rep.purity - 0.5) <= 0.02);
  CHECK(rep.negativity <= 0.05);
  CHECK(rep.resamples == 50);

  const auto truth = mixed_phi_state(0.75);
  const auto lo = metrics_report(simulate_tomography(truth, 1e4, 4), truth, 50, 5);
  const auto hi = metrics_report(simulate_tomography(truth, 1e6, 4), truth, 50, 5);
  const double ratio = lo.purity_sd / hi.purity_sd;
  CHECK(ratio >= 8.0);
  CHECK(ratio <= 12.0);
}

TEST_CASE("tomography CSV round trip") {
  const auto truth = cascade_state(0.7, 0.2, 0.95);
  const auto rec = simulate_tomography(truth, 1e4, 6);
  std::ostringstream out;
  write_tomography_csv(out, rec);
  std::istringstream in(out.str());
  const auto back = read_tomography_csv(in);
  REQUIRE(back.entries.size() == 36);
  for (std::size_t i = 0; i < 36; ++i) {
    CHECK(back.entries[i].counts == rec.entries[i].counts);
    CHECK(back.entries[i].setting.label == rec.entries[i].setting.label);
  }
  const auto a = ml_reconstruct(rec), b = ml_reconstruct(back);
  CHECK((a.state.matrix() - b.state.matrix()).norm() <= 1e-9);
  std::ostringstream again;
  write_tomography_csv(again, back);
  CHECK(again.str() == out.str());
  std::istringstream bad("setting,counts\n");
  CHECK_THROWS_AS(read_tomography_csv(bad), DomainError);
}
