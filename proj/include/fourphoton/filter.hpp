#pragma once

namespace fourphoton {

/// Stage travel to delay conversion, micrometres per femtosecond (c = 3e8 m/s).
inline constexpr double kLightMicronsPerFs = 0.3;
inline constexpr double kLightNmPerFs = 1000.0 * kLightMicronsPerFs;

enum class FilterKind { kGaussian, kLongPass };

/// Spectral filter in front of a fiber coupler. Gaussian filters are modelled
/// as Gaussian in intensity versus frequency; long-pass edges carry no
/// closed-form bandwidth.
struct FilterSpec {
  FilterKind kind = FilterKind::kGaussian;
  double center_nm = 826.0;
  double fwhm_nm = 0.0;  // gaussian only
  double edge_nm = 0.0;  // long-pass only

  static FilterSpec gaussian(double center_nm, double fwhm_nm);
  static FilterSpec long_pass(double edge_nm, double center_nm = 826.0);

  /// Throws DomainError when the invariants do not hold.
  void validate() const;
  bool is_gaussian() const { return kind == FilterKind::kGaussian; }
};

/// Standard deviation of the transmitted intensity in angular frequency, rad/fs.
/// Throws UnsupportedModelError for long-pass filters.
double spectral_sigma(const FilterSpec& filter);

/// Standard deviation of the transform-limited wavepacket intensity, fs.
double coherence_sigma_fs(const FilterSpec& filter);

}  // namespace fourphoton
