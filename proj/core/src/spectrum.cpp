#include "rfodmr/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rfodmr/error.hpp"
#include "rfodmr/io.hpp"
#include "rfodmr/units.hpp"

namespace rfodmr {

namespace {

constexpr double kMergeToleranceMhz = 1e-9;
constexpr double kOrientationWeight = 0.25;

}  // namespace

void DriveParameters::validate() const {
  if (!std::isfinite(p_rf_dbm)) throw InvalidInput("p_rf_dbm must be finite");
  if (!std::isfinite(p_sat_mw) || p_sat_mw <= 0.0) throw InvalidInput("p_sat_mw must be > 0");
  if (!std::isfinite(c_inf) || c_inf <= 0.0 || c_inf >= 1.0)
    throw InvalidInput("c_inf must lie in (0, 1)");
  if (!std::isfinite(fwhm0_mhz) || fwhm0_mhz <= 0.0) throw InvalidInput("fwhm0_mhz must be > 0");
}

void LineShape::validate() const {
  if (!std::isfinite(center_mhz)) throw InvalidInput("line center must be finite");
  if (!std::isfinite(fwhm_mhz) || fwhm_mhz <= 0.0) throw InvalidInput("line FWHM must be > 0");
  if (!std::isfinite(contrast) || contrast < 0.0 || contrast >= 1.0)
    throw InvalidInput("line contrast must lie in [0, 1)");
}

void FrequencyGrid::validate() const {
  if (points < 2) throw InvalidInput("grid requires >= 2 points");
  if (!std::isfinite(start_mhz) || !std::isfinite(stop_mhz) || !(stop_mhz > start_mhz))
    throw InvalidInput("grid stop frequency must exceed start frequency");
}

std::vector<double> FrequencyGrid::values() const {
  validate();
  std::vector<double> f(points);
  const double step = (stop_mhz - start_mhz) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) f[i] = start_mhz + step * static_cast<double>(i);
  f.back() = stop_mhz;
  return f;
}

void Spectrum::validate() const {
  if (frequencies_mhz.size() != pl_normalized.size())
    throw InvalidInput("spectrum frequency and PL arrays differ in length");
  if (frequencies_mhz.size() < 2) throw InvalidInput("spectrum requires >= 2 points");
  for (std::size_t i = 0; i < frequencies_mhz.size(); ++i) {
    if (!std::isfinite(frequencies_mhz[i]) || !std::isfinite(pl_normalized[i]))
      throw InvalidInput("spectrum values must be finite");
    if (i > 0 && !(frequencies_mhz[i] > frequencies_mhz[i - 1]))
      throw InvalidInput("spectrum frequencies must be strictly ascending");
  }
}

double compute_contrast(double i_off, double i_on) {
  if (!std::isfinite(i_off) || i_off <= 0.0) throw InvalidInput("i_off must be > 0");
  if (!std::isfinite(i_on) || i_on < 0.0) throw InvalidInput("i_on must be >= 0");
  return (i_off - i_on) / i_off;
}

double saturation_parameter(const DriveParameters& drive) {
  drive.validate();
  return dbm_to_mw(drive.p_rf_dbm) / drive.p_sat_mw;
}

double saturation_contrast(const DriveParameters& drive) {
  const double s = saturation_parameter(drive);
  return drive.c_inf * s / (1.0 + s);
}

double broadened_fwhm(const DriveParameters& drive) {
  return drive.fwhm0_mhz * std::sqrt(1.0 + saturation_parameter(drive));
}

double lorentzian_dip(double f_mhz, const LineShape& line) {
  const double h = 0.5 * line.fwhm_mhz;
  const double d = f_mhz - line.center_mhz;
  return line.contrast * h * h / (d * d + h * h);
}

std::vector<LineShape> resonance_lines(const NVParameters& params, const FieldVector& lab_field,
                                       const DriveParameters& drive) {
  params.validate();
  const double contrast = saturation_contrast(drive) * kOrientationWeight;
  const double fwhm = broadened_fwhm(drive);

  std::vector<LineShape> lines;
  lines.reserve(8);
  for (std::size_t axis = 0; axis < 4; ++axis) {
    const auto pair = transition_frequencies_exact(params, to_nv_frame(lab_field, axis));
    lines.push_back({pair.minus_mhz, fwhm, contrast});
    lines.push_back({pair.plus_mhz, fwhm, contrast});
  }
  std::sort(lines.begin(), lines.end(),
            [](const LineShape& a, const LineShape& b) { return a.center_mhz < b.center_mhz; });

  std::vector<LineShape> merged;
  for (const auto& l : lines) {
    if (!merged.empty() && l.center_mhz - merged.back().center_mhz <= kMergeToleranceMhz) {
      merged.back().contrast += l.contrast;
    } else {
      merged.push_back(l);
    }
  }
  return merged;
}

std::vector<double> render_lines(const std::vector<double>& frequencies_mhz,
                                 const std::vector<LineShape>& lines, double baseline) {
  std::vector<double> pl(frequencies_mhz.size());
  for (std::size_t i = 0; i < pl.size(); ++i) {
    double dip = 0.0;
    for (const auto& l : lines) dip += lorentzian_dip(frequencies_mhz[i], l);
    pl[i] = baseline * (1.0 - dip);
  }
  return pl;
}

Spectrum synthesize_spectrum(const NVParameters& params, const FieldVector& lab_field,
                             const DriveParameters& drive, const FrequencyGrid& grid,
                             double noise_sigma, std::uint64_t seed) {
  grid.validate();
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0)
    throw InvalidInput("noise_sigma must be finite and >= 0");
  if (!lab_field.is_finite()) throw InvalidInput("field components must be finite");

  Spectrum s;
  s.frequencies_mhz = grid.values();
  s.pl_normalized = render_lines(s.frequencies_mhz, resonance_lines(params, lab_field, drive));

  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (double& v : s.pl_normalized) v += noise(rng);
  }

  s.meta["d_mhz"] = format_number(params.zero_field_mhz);
  s.meta["e_mhz"] = format_number(params.strain_mhz);
  s.meta["gamma_mhz_per_g"] = format_number(params.gamma_mhz_per_gauss);
  s.meta["bx_g"] = format_number(lab_field.x);
  s.meta["by_g"] = format_number(lab_field.y);
  s.meta["bz_g"] = format_number(lab_field.z);
  s.meta["p_rf_dbm"] = format_number(drive.p_rf_dbm);
  s.meta["p_sat_mw"] = format_number(drive.p_sat_mw);
  s.meta["c_inf"] = format_number(drive.c_inf);
  s.meta["fwhm0_mhz"] = format_number(drive.fwhm0_mhz);
  s.meta["noise_sigma"] = format_number(noise_sigma);
  s.meta["seed"] = std::to_string(seed);
  return s;
}

}  // namespace rfodmr
