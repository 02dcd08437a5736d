#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fourphoton/errors.hpp"
#include "fourphoton/interference.hpp"

namespace fourphoton {

namespace {

const double kFwhmPerSigma = 2.0 * std::sqrt(2.0 * std::numbers::ln2);
constexpr int kMaxIterations = 500;

// y = base - amp * exp(-(x - c)^2 / (2 w^2)), parameters (base, amp, c, log w)
struct Gaussian {
  Eigen::Vector4d p;

  double width() const { return std::exp(p(3)); }
  double operator()(double x) const {
    const double w = width();
    const double d = (x - p(2)) / w;
    return p(0) - p(1) * std::exp(-0.5 * d * d);
  }
};

struct Fit {
  Gaussian model;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

double weighted_cost(const Gaussian& g, const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& wt) {
  double c = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - g(x[i]);
    c += wt[i] * r * r;
  }
  return c;
}

Fit levenberg_marquardt(Gaussian g, const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& wt) {
  const std::size_t n = x.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale += wt[i] * y[i] * y[i];
  double cost = weighted_cost(g, x, y, wt);
  double lambda = 1e-3;
  Fit fit;
  for (int it = 1; it <= kMaxIterations; ++it) {
    fit.iterations = it;
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    const double w = g.width();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - g.p(2);
      const double e = std::exp(-0.5 * d * d / (w * w));
      Eigen::Vector4d j;
      j << 1.0, -e, -g.p(1) * e * d / (w * w), -g.p(1) * e * d * d / (w * w);
      const double r = y[i] - g(x[i]);
      jtj.noalias() += wt[i] * j * j.transpose();
      jtr.noalias() += wt[i] * r * j;
    }
    bool improved = false;
    while (lambda < 1e20) {
      Eigen::Matrix4d a = jtj;
      for (int k = 0; k < 4; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-300);
      const Eigen::Vector4d step = a.ldlt().solve(jtr);
      Gaussian trial{g.p + step};
      const double trial_cost = weighted_cost(trial, x, y, wt);
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double drop = cost - trial_cost;
        const double step_size = step.cwiseAbs().maxCoeff();
        g = trial;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (drop <= 1e-15 * cost || cost <= 1e-30 * scale || step_size < 1e-14) {
          fit.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) fit.converged = true;  // no descent direction left
    if (fit.converged) break;
  }
  fit.model = g;
  fit.cost = cost;
  return fit;
}

}  // namespace

DipShape fit_dip(const InterferenceScan& scan) {
  if (scan.points.size() < 7) throw DomainError("dip fit needs at least 7 delay points");
  std::vector<ScanPoint> pts = scan.points;
  std::sort(pts.begin(), pts.end(),
            [](const ScanPoint& a, const ScanPoint& b) { return a.delay_um < b.delay_um; });
  std::vector<double> x, y, wt;
  for (const auto& p : pts) {
    x.push_back(p.delay_um);
    y.push_back(p.counts);
    // Poisson weighting for count data; unit weight for small synthetic rates.
    wt.push_back(1.0 / std::max(std::abs(p.counts), 1.0));
  }
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const double span_y = *ymax - *ymin;
  const double mean = [&] {
    double s = 0.0;
    for (double v : y) s += v;
    return s / static_cast<double>(y.size());
  }();

  if (span_y <= 1e-12 * std::max(std::abs(mean), std::numeric_limits<double>::min())) {
    DipShape flat;
    flat.baseline = mean;
    flat.extremum = mean;
    flat.visibility = 0.0;
    flat.fwhm_spatial_um = std::numeric_limits<double>::quiet_NaN();
    flat.center_um = 0.0;
    flat.width_defined = false;
    return flat;
  }

  const std::size_t n = x.size();
  const double base0 = 0.25 * (y[0] + y[1] + y[n - 2] + y[n - 1]);
  std::size_t ext = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(y[i] - base0) > std::abs(y[ext] - base0)) ext = i;
  const double amp0 = base0 - y[ext];
  double min_dx = std::numeric_limits<double>::max();
  for (std::size_t i = 1; i < n; ++i) min_dx = std::min(min_dx, x[i] - x[i - 1]);
  double above_half = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(y[i] - base0) > 0.5 * std::abs(amp0)) above_half += 1.0;
  const double w0 = std::max(above_half * min_dx, min_dx) / kFwhmPerSigma;

  std::vector<double> starts{x[ext]};
  if (x.front() < 0.0 && x.back() > 0.0 && x[ext] != 0.0) starts.push_back(0.0);

  std::optional<Fit> best;
  for (double c0 : starts) {
    Gaussian g;
    g.p << base0, amp0, c0, std::log(w0);
    Fit f = levenberg_marquardt(g, x, y, wt);
    if (!f.converged) continue;
    if (!best) {
      best = f;
      continue;
    }
    const double tie = 1e-9 * std::max(best->cost, 1e-300);
    if (f.cost < best->cost - tie ||
        (std::abs(f.cost - best->cost) <= tie &&
         std::abs(f.model.p(2)) < std::abs(best->model.p(2))))
      best = f;
  }
  if (!best) {
    Gaussian g;
    g.p << base0, amp0, x[ext], std::log(w0);
    const Fit f = levenberg_marquardt(g, x, y, wt);
    throw FitError("Gaussian dip fit did not converge", std::sqrt(f.cost), f.iterations);
  }

  const Gaussian& g = best->model;
  DipShape dip;
  dip.baseline = g.p(0);
  dip.extremum = g.p(0) - g.p(1);
  dip.center_um = g.p(2);
  dip.fwhm_spatial_um = kFwhmPerSigma * g.width();
  dip.residual_norm = std::sqrt(best->cost);
  dip.iterations = best->iterations;
  if (g.p(1) >= 0.0) {
    dip.sign = DipSign::kDip;
    dip.visibility = dip_visibility(dip.baseline, std::max(dip.extremum, 0.0));
  } else {
    dip.sign = DipSign::kAntiDip;
    dip.visibility = -antidip_visibility(dip.extremum, dip.baseline);
  }
  return dip;
}

}  // namespace fourphoton
