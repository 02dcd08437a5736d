#include "fourphoton/interference.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "fourphoton/errors.hpp"

namespace fourphoton {

namespace {

// FWHM of a Gaussian over its standard deviation.
const double kFwhmPerSigma = 2.0 * std::sqrt(2.0 * std::numbers::ln2);

void require_gaussian(const FilterSpec& f) {
  f.validate();
  if (!f.is_gaussian())
    throw UnsupportedModelError("long-pass filters have no closed-form Gaussian overlap");
}

struct OverlapShape {
  double prefactor;  // overlap at zero delay
  double sigma_fs;   // Gaussian std of the overlap in delay
};

OverlapShape overlap_shape(const FilterSpec& fa, const FilterSpec& fb) {
  require_gaussian(fa);
  require_gaussian(fb);
  const double sa = spectral_sigma(fa);
  const double sb = spectral_sigma(fb);
  const double sum2 = sa * sa + sb * sb;
  const double wa = 2.0 * std::numbers::pi * kLightNmPerFs / fa.center_nm;
  const double wb = 2.0 * std::numbers::pi * kLightNmPerFs / fb.center_nm;
  const double detuning = wa - wb;
  const double prefactor = 2.0 * sa * sb / sum2 * std::exp(-detuning * detuning / (2.0 * sum2));
  // exp(-2 sa^2 sb^2 d^2 / sum2) = exp(-d^2 / (2 sigma^2))
  const double sigma = std::sqrt(sum2 / (4.0 * sa * sa * sb * sb));
  return {prefactor, sigma};
}

}  // namespace

FilterSpec FilterSpec::gaussian(double center_nm, double fwhm_nm) {
  FilterSpec f{FilterKind::kGaussian, center_nm, fwhm_nm, 0.0};
  f.validate();
  return f;
}

FilterSpec FilterSpec::long_pass(double edge_nm, double center_nm) {
  FilterSpec f{FilterKind::kLongPass, center_nm, 0.0, edge_nm};
  f.validate();
  return f;
}

void FilterSpec::validate() const {
  if (!(center_nm > 0.0)) throw DomainError("filter centre wavelength must be positive");
  if (kind == FilterKind::kGaussian && !(fwhm_nm > 0.0))
    throw DomainError("gaussian filter FWHM must be positive");
  if (kind == FilterKind::kLongPass && !(edge_nm > 0.0))
    throw DomainError("long-pass edge must be positive");
}

double spectral_sigma(const FilterSpec& filter) {
  require_gaussian(filter);
  const double dnu = kLightNmPerFs * filter.fwhm_nm / (filter.center_nm * filter.center_nm);
  return 2.0 * std::numbers::pi * dnu / kFwhmPerSigma;
}

double coherence_sigma_fs(const FilterSpec& filter) { return 1.0 / (2.0 * spectral_sigma(filter)); }

double temporal_overlap(double delay_fs, const FilterSpec& fa, const FilterSpec& fb) {
  const OverlapShape s = overlap_shape(fa, fb);
  if (std::isinf(delay_fs)) return 0.0;
  const double x = delay_fs / s.sigma_fs;
  return s.prefactor * std::exp(-0.5 * x * x);
}

double smeared_overlap(double delay_fs, const FilterSpec& fa, const FilterSpec& fb,
                       double relative_sigma_fs) {
  if (relative_sigma_fs < 0.0) throw DomainError("jitter width must be non-negative");
  const OverlapShape s = overlap_shape(fa, fb);
  if (std::isinf(delay_fs)) return 0.0;
  const double var = s.sigma_fs * s.sigma_fs + relative_sigma_fs * relative_sigma_fs;
  return s.prefactor * s.sigma_fs / std::sqrt(var) * std::exp(-0.5 * delay_fs * delay_fs / var);
}

double overlap_fwhm_fs(const FilterSpec& fa, const FilterSpec& fb) {
  return kFwhmPerSigma * overlap_shape(fa, fb).sigma_fs;
}

double hom_rate(const PolarizationState& state, double delay_fs, const FilterSpec& fa,
                const FilterSpec& fb, double baseline) {
  if (!(baseline > 0.0)) throw DomainError("HOM baseline rate must be positive");
  const double rate = baseline * (1.0 - temporal_overlap(delay_fs, fa, fb) * swap_expectation(state));
  return std::max(rate, 0.0);
}

double dip_visibility(double cc_max, double cc_min) {
  if (!(cc_max > 0.0) || !(cc_min >= 0.0) || cc_min > cc_max)
    throw DomainError("dip visibility needs cc_max >= cc_min >= 0 and cc_max > 0");
  return (cc_max - cc_min) / (cc_max + cc_min);
}

double antidip_visibility(double cc_max, double cc_min) {
  if (!(cc_min > 0.0) || cc_min > cc_max)
    throw DomainError("anti-dip visibility needs cc_max >= cc_min > 0");
  const double denom = 3.0 * cc_min - cc_max;
  if (!(denom > 0.0))
    throw DomainError("anti-dip peak exceeds three times the baseline; visibility undefined");
  return (cc_max - cc_min) / denom;
}

namespace {
// FWHM_f [nm] * FWHM_s [um] = kEq * lambda^2 [nm^2] / 1000
double reciprocal_width(double width, double wavelength_nm) {
  const double k = 2.0 * std::numbers::sqrt2 * std::numbers::ln2 / std::numbers::pi;
  return k * wavelength_nm * wavelength_nm / (width * 1000.0);
}
}  // namespace

double fwhm_spatial_to_spectral(double fwhm_um, double wavelength_nm) {
  if (!(fwhm_um > 0.0)) throw DomainError("spatial FWHM must be positive");
  if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be positive");
  return reciprocal_width(fwhm_um, wavelength_nm);
}

double fwhm_spectral_to_spatial(double fwhm_nm, double wavelength_nm) {
  if (!(fwhm_nm > 0.0)) throw DomainError("spectral FWHM must be positive");
  if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be positive");
  return reciprocal_width(fwhm_nm, wavelength_nm);
}

double fwhm_spatial_to_temporal(double fwhm_um) {
  if (!(fwhm_um >= 0.0)) throw DomainError("spatial FWHM must be non-negative");
  return fwhm_um / kLightMicronsPerFs;
}

double subtracted_visibility(const DipShape& dip, double background) {
  const double base = dip.baseline - background;
  const double ext = dip.extremum - background;
  if (dip.sign == DipSign::kDip) return dip_visibility(base, std::max(ext, 0.0));
  return -antidip_visibility(ext, base);
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_scan_csv(std::ostream& out, const InterferenceScan& scan) {
  out << "delay_um,delay_fs,counts,rate_hz\n";
  for (const auto& p : scan.points)
    out << format_number(p.delay_um) << ',' << format_number(p.delay_fs) << ','
        << format_number(p.counts) << ',' << format_number(p.rate_hz) << '\n';
}

InterferenceScan read_scan_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "delay_um,delay_fs,counts,rate_hz")
    throw DomainError("scan CSV must start with header delay_um,delay_fs,counts,rate_hz");
  InterferenceScan scan;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    ScanPoint p;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(fields >> p.delay_um >> c1 >> p.delay_fs >> c2 >> p.counts >> c3 >> p.rate_hz) ||
        c1 != ',' || c2 != ',' || c3 != ',')
      throw DomainError("malformed scan CSV row: " + line);
    scan.points.push_back(p);
  }
  return scan;
}

nlohmann::json to_json(const DipShape& dip) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  return {{"baseline", dip.baseline},
          {"extremum", dip.extremum},
          {"visibility", dip.visibility},
          {"fwhm_spatial_um", num(dip.fwhm_spatial_um)},
          {"center_um", dip.center_um},
          {"sign", dip.sign == DipSign::kDip ? "dip" : "anti-dip"},
          {"width_defined", dip.width_defined},
          {"residual_norm", dip.residual_norm},
          {"iterations", dip.iterations}};
}

DipShape dip_from_json(const nlohmann::json& doc) {
  try {
    DipShape dip;
    dip.baseline = doc.at("baseline").get<double>();
    dip.extremum = doc.at("extremum").get<double>();
    dip.visibility = doc.at("visibility").get<double>();
    const auto& w = doc.at("fwhm_spatial_um");
    dip.fwhm_spatial_um = w.is_null() ? std::numeric_limits<double>::quiet_NaN() : w.get<double>();
    dip.center_um = doc.at("center_um").get<double>();
    const auto sign = doc.at("sign").get<std::string>();
    if (sign != "dip" && sign != "anti-dip") throw DomainError("unknown dip sign " + sign);
    dip.sign = sign == "dip" ? DipSign::kDip : DipSign::kAntiDip;
    dip.width_defined = doc.at("width_defined").get<bool>();
    dip.residual_norm = doc.at("residual_norm").get<double>();
    dip.iterations = doc.at("iterations").get<int>();
    return dip;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed dip document: ") + e.what());
  }
}

}  // namespace fourphoton
