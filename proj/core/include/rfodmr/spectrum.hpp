#pragma once

// CW-ODMR spectrum synthesis. PL is normalized so the microwave-off level is
// exactly 1; each resonance is a Lorentzian dip whose depth is its contrast.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rfodmr/spin.hpp"

namespace rfodmr {

/// Drive at the antenna feedpoint plus the phenomenological saturation
/// constants. Saturation parameter s = P[mW] / p_sat_mw.
struct DriveParameters {
  double p_rf_dbm = 0.0;
  double p_sat_mw = 5.0;
  double c_inf = 0.12;
  double fwhm0_mhz = 8.0;

  void validate() const;
};

struct LineShape {
  double center_mhz = 0.0;
  double fwhm_mhz = 1.0;
  double contrast = 0.0;

  void validate() const;
};

struct FrequencyGrid {
  double start_mhz = 2750.0;
  double stop_mhz = 2990.0;
  std::size_t points = 1201;

  void validate() const;
  /// Evenly spaced, both end points included.
  [[nodiscard]] std::vector<double> values() const;
};

struct Spectrum {
  std::vector<double> frequencies_mhz;
  std::vector<double> pl_normalized;
  std::map<std::string, std::string> meta;

  /// Strictly ascending frequencies, equal lengths >= 2, finite values.
  void validate() const;
  [[nodiscard]] std::size_t size() const { return frequencies_mhz.size(); }
};

/// (I_off - I_on) / I_off.
double compute_contrast(double i_off, double i_on);

double saturation_parameter(const DriveParameters& drive);

/// c_inf * s / (1 + s).
double saturation_contrast(const DriveParameters& drive);

/// fwhm0 * sqrt(1 + s).
double broadened_fwhm(const DriveParameters& drive);

/// Depth of a Lorentzian dip at frequency f: C (w/2)^2 / ((f - f0)^2 + (w/2)^2).
double lorentzian_dip(double f_mhz, const LineShape& line);

/// Resonance lines of the four-orientation ensemble, sorted by center.
///
/// Each orientation contributes its two exact transitions with equal weight
/// 1/4 of the saturated contrast; coincident lines (centers equal within
/// 1e-9 MHz) are merged by adding their contrasts. With all four orientations
/// degenerate each line therefore carries the full saturation contrast.
std::vector<LineShape> resonance_lines(const NVParameters& params, const FieldVector& lab_field,
                                       const DriveParameters& drive);

/// PL(f) = 1 - sum of dips + n(f), with n zero-mean Gaussian of standard
/// deviation noise_sigma drawn from a mt19937_64 seeded with `seed`.
/// Metadata records the inputs needed to reproduce the spectrum.
Spectrum synthesize_spectrum(const NVParameters& params, const FieldVector& lab_field,
                             const DriveParameters& drive, const FrequencyGrid& grid,
                             double noise_sigma, std::uint64_t seed);

/// Noise-free PL of a set of lines on the given frequencies.
std::vector<double> render_lines(const std::vector<double>& frequencies_mhz,
                                 const std::vector<LineShape>& lines, double baseline = 1.0);

}  // namespace rfodmr
