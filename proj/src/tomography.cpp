#include "fourphoton/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "fourphoton/errors.hpp"
#include "fourphoton/interference.hpp"
#include "fourphoton/rng.hpp"

namespace fourphoton {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kEigenvalueFloor = 1e-12;

struct SixState {
  char name;
  double hwp_deg, qwp_deg;
  Ket2 (*ket)();
};

// HWP/QWP angles that turn each analyzer state into H at the polarizer.
const SixState kSix[] = {
    {'H', 0.0, 0.0, pol::H},   {'V', 45.0, 0.0, pol::V}, {'D', 22.5, 0.0, pol::D},
    {'A', 67.5, 0.0, pol::A},  {'R', 0.0, 45.0, pol::R}, {'L', 0.0, 135.0, pol::L},
};

Matrix4c projector_matrix(const Projector& p) {
  const Ket4 k = p.ket();
  return k * k.adjoint();
}

std::vector<Matrix4c> projector_matrices(const TomographyRecord& rec) {
  std::vector<Matrix4c> out;
  out.reserve(rec.entries.size());
  for (const auto& e : rec.entries) out.push_back(projector_matrix(e.setting.projector));
  return out;
}

void check_complete(const std::vector<Matrix4c>& proj) {
  // Each projector as a real 16-vector of (Re, Im) parts of its upper triangle.
  Eigen::MatrixXd a(static_cast<Eigen::Index>(proj.size()), 16);
  for (std::size_t i = 0; i < proj.size(); ++i) {
    int c = 0;
    for (int r = 0; r < 4; ++r)
      for (int s = r; s < 4; ++s) {
        a(static_cast<Eigen::Index>(i), c++) = proj[i](r, s).real();
        if (s != r) a(static_cast<Eigen::Index>(i), c++) = proj[i](r, s).imag();
      }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  svd.setThreshold(1e-9);
  if (proj.size() < 16 || svd.rank() < 16)
    throw DomainError("tomography settings are not informationally complete");
}

Matrix4c floor_and_normalize(const Matrix4c& m) {
  Matrix4c h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(h);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(kEigenvalueFloor);
  ev /= ev.sum();
  Matrix4c out = es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  return 0.5 * (out + out.adjoint());
}

double log_likelihood_of(const std::vector<Matrix4c>& proj, const std::vector<double>& counts, const Matrix4c& rho) {
  double total_n = 0.0, total_p = 0.0, ll = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    const double p = std::max((proj[i] * rho).trace().real(), 1e-300);
    total_p += p;
    total_n += counts[i];
    if (counts[i] > 0.0) ll += counts[i] * std::log(p);
  }
  return ll - total_n * std::log(total_p);
}

double to_deg(double rad) { return rad / kDeg; }

TomographySetting make_setting(const SixState& a, const SixState& b) {
  TomographySetting s;
  s.hwp1 = {WaveplateKind::kHalfWave, a.hwp_deg * kDeg};
  s.qwp1 = {WaveplateKind::kQuarterWave, a.qwp_deg * kDeg};
  s.hwp2 = {WaveplateKind::kHalfWave, b.hwp_deg * kDeg};
  s.qwp2 = {WaveplateKind::kQuarterWave, b.qwp_deg * kDeg};
  s.label = std::string{a.name, b.name};
  s.projector = Projector(a.ket(), b.ket());
  return s;
}

char nearest_label(const Ket2& k) {
  for (const auto& s : kSix)
    if (std::abs(s.ket().dot(k)) > 1.0 - 1e-9) return s.name;
  return '?';
}

}  // namespace

Ket2 analyzer_ket(const WaveplateSetting& hwp, const WaveplateSetting& qwp) {
  // <H| U_qwp U_hwp |psi> = <k|psi>
  return waveplate_unitary(hwp).adjoint() * waveplate_unitary(qwp).adjoint() * pol::H();
}

std::vector<TomographySetting> projection_set() {
  std::vector<TomographySetting> out;
  for (const auto& a : kSix)
    for (const auto& b : kSix) out.push_back(make_setting(a, b));
  return out;
}

TomographyRecord expected_tomography(const PolarizationState& state, double mean_counts) {
  if (!(mean_counts > 0.0)) throw DomainError("mean_counts must be > 0");
  TomographyRecord rec;
  for (auto& s : projection_set()) {
    const double p = projection_probability(state, s.projector);
    rec.entries.push_back({std::move(s), mean_counts * p});
  }
  return rec;
}

TomographyRecord simulate_tomography(const PolarizationState& state, double mean_counts, std::uint64_t seed) {
  TomographyRecord rec = expected_tomography(state, mean_counts);
  Rng rng(mix_seed(seed));
  for (auto& e : rec.entries) e.counts = static_cast<double>(poisson(rng, e.counts));
  return rec;
}

double log_likelihood(const TomographyRecord& record, const PolarizationState& state) {
  std::vector<double> counts;
  for (const auto& e : record.entries) counts.push_back(e.counts);
  return log_likelihood_of(projector_matrices(record), counts, state.matrix());
}

MlResult ml_reconstruct(const TomographyRecord& record, const MlOptions& options) {
  const auto proj = projector_matrices(record);
  check_complete(proj);
  std::vector<double> counts;
  double total_n = 0.0;
  for (const auto& e : record.entries) {
    if (!(e.counts >= 0.0)) throw DomainError("tomography counts must be >= 0");
    counts.push_back(e.counts);
    total_n += e.counts;
  }
  if (!(total_n > 0.0)) throw DomainError("tomography record has no counts");
  Matrix4c g = Matrix4c::Zero();
  for (const auto& p : proj) g += p;

  MlResult res;
  Matrix4c rho = Matrix4c::Identity() / 4.0;
  double ll = log_likelihood_of(proj, counts, rho);
  res.log_likelihood.push_back(ll);
  const Matrix4c eye = Matrix4c::Identity();
  for (int it = 0; it < options.max_iters; ++it) {
    // Gradient direction K = sum (n_i/N) P_i / p_i - G / sum p; K = R - 1
    // when G is proportional to the identity, so eps = 1 is the plain R rho R step.
    Matrix4c k = Matrix4c::Zero();
    double total_p = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
      const double p = std::max((proj[i] * rho).trace().real(), 1e-300);
      total_p += p;
      if (counts[i] > 0.0) k += (counts[i] / (total_n * p)) * proj[i];
    }
    k -= g / total_p;
    double eps = 1.0;
    bool accepted = false;
    Matrix4c next;
    double next_ll = ll;
    while (eps > 1e-12) {
      const Matrix4c step = eye + eps * k;
      next = floor_and_normalize(step * rho * step.adjoint());
      next_ll = log_likelihood_of(proj, counts, next);
      if (next_ll >= ll) {
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    res.iterations = it + 1;
    if (!accepted) {
      res.converged = true;
      break;
    }
    const double change = std::abs(next_ll - ll);
    rho = next;
    res.log_likelihood.push_back(next_ll);
    const bool done = change <= options.tol * std::max(std::abs(ll), 1.0);
    ll = next_ll;
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.state = PolarizationState::from_matrix(rho);
  return res;
}

MetricsReport metrics_report(const TomographyRecord& record, const PolarizationState& target, int resamples,
                             std::uint64_t seed, const MlOptions& options) {
  if (resamples < 0) throw DomainError("resamples must be >= 0");
  MetricsReport rep;
  const MlResult base = ml_reconstruct(record, options);
  rep.converged = base.converged;
  rep.purity = purity(base.state);
  rep.negativity = negativity(base.state);
  rep.fidelity = fidelity(base.state, target);
  rep.resamples = resamples;
  if (resamples < 2) return rep;

  double sp = 0, sp2 = 0, sn = 0, sn2 = 0, sf = 0, sf2 = 0;
  for (int r = 0; r < resamples; ++r) {
    Rng rng(stream_seed(seed, static_cast<std::uint64_t>(r)));
    TomographyRecord boot = record;
    for (auto& e : boot.entries) e.counts = static_cast<double>(poisson(rng, e.counts));
    const MlResult m = ml_reconstruct(boot, options);
    rep.converged = rep.converged && m.converged;
    const double p = purity(m.state), n = negativity(m.state), f = fidelity(m.state, target);
    sp += p, sp2 += p * p, sn += n, sn2 += n * n, sf += f, sf2 += f * f;
  }
  const double k = resamples;
  auto sd = [k](double s, double s2) { return std::sqrt(std::max(0.0, (s2 - s * s / k) / (k - 1.0))); };
  rep.purity_sd = sd(sp, sp2);
  rep.negativity_sd = sd(sn, sn2);
  rep.fidelity_sd = sd(sf, sf2);
  return rep;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"purity", r.purity},         {"purity_sd", r.purity_sd},     {"negativity", r.negativity},
          {"negativity_sd", r.negativity_sd}, {"fidelity", r.fidelity}, {"fidelity_sd", r.fidelity_sd},
          {"resamples", r.resamples},   {"converged", r.converged}};
}

void write_tomography_csv(std::ostream& out, const TomographyRecord& record) {
  out << "setting_index,hwp1_deg,qwp1_deg,hwp2_deg,qwp2_deg,counts\n";
  for (std::size_t i = 0; i < record.entries.size(); ++i) {
    const auto& s = record.entries[i].setting;
    out << i << ',' << format_number(to_deg(s.hwp1.theta)) << ',' << format_number(to_deg(s.qwp1.theta)) << ','
        << format_number(to_deg(s.hwp2.theta)) << ',' << format_number(to_deg(s.qwp2.theta)) << ','
        << format_number(record.entries[i].counts) << '\n';
  }
}

TomographyRecord read_tomography_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "setting_index,hwp1_deg,qwp1_deg,hwp2_deg,qwp2_deg,counts")
    throw DomainError("unexpected tomography CSV header");
  TomographyRecord rec;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DomainError("bad number in tomography CSV: " + cell);
      }
    }
    if (v.size() != 6) throw DomainError("tomography CSV row needs 6 columns");
    TomographySetting s;
    s.hwp1.theta = v[1] * kDeg;
    s.qwp1.theta = v[2] * kDeg;
    s.hwp2.theta = v[3] * kDeg;
    s.qwp2.theta = v[4] * kDeg;
    const Ket2 k1 = analyzer_ket(s.hwp1, s.qwp1);
    const Ket2 k2 = analyzer_ket(s.hwp2, s.qwp2);
    s.projector = Projector(k1 / k1.norm(), k2 / k2.norm());
    s.label = std::string{nearest_label(k1), nearest_label(k2)};
    if (!(v[5] >= 0.0)) throw DomainError("tomography counts must be >= 0");
    rec.entries.push_back({s, v[5]});
  }
  return rec;
}

}  // namespace fourphoton
