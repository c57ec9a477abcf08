#pragma once

// Multi-Lorentzian fitting of ODMR spectra and sweep regression.
//
// Model: PL(f) = baseline * (1 - sum_k C_k (w_k/2)^2 / ((f - f_k)^2 + (w_k/2)^2)).
// With this form the fitted baseline is the microwave-off level and C_k is
// the contrast of line k relative to it. Parameter vector layout:
// [baseline, f_1, w_1, C_1, f_2, w_2, C_2, ...].

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rfodmr/spectrum.hpp"

namespace rfodmr {

struct FitConfig {
  std::optional<std::size_t> n_lines;  // nullopt: use every detected peak
  int max_iterations = 200;
  double convergence_tol = 1e-9;
  std::optional<double> peak_threshold;  // nullopt: 3x estimated noise std

  void validate() const;
};

struct FittedLine {
  LineShape shape;
  double center_se = 0.0;
  double fwhm_se = 0.0;
  double contrast_se = 0.0;
};

struct FitResult {
  std::vector<FittedLine> lines;  // ascending center
  double baseline = 1.0;
  double baseline_se = 0.0;
  double residual_norm = 0.0;  // RMS residual
  bool converged = false;
  int iterations = 0;
};

/// Multi-Lorentzian model with analytic derivatives.
class LorentzianModel {
 public:
  explicit LorentzianModel(std::size_t n_lines) : n_lines_(n_lines) {}

  [[nodiscard]] std::size_t n_lines() const { return n_lines_; }
  [[nodiscard]] std::size_t parameter_count() const { return 1 + 3 * n_lines_; }
  [[nodiscard]] std::vector<std::string> parameter_names() const;

  [[nodiscard]] Eigen::VectorXd evaluate(const std::vector<double>& f,
                                         const Eigen::VectorXd& p) const;
  /// d model / d p, one row per frequency.
  [[nodiscard]] Eigen::MatrixXd jacobian(const std::vector<double>& f,
                                         const Eigen::VectorXd& p) const;

  static Eigen::VectorXd pack(double baseline, const std::vector<LineShape>& lines);

 private:
  std::size_t n_lines_;
};

/// Robust noise estimate from the median absolute second difference.
double estimate_noise_sigma(const Spectrum& spectrum);

/// Off-resonance level estimate (upper quartile of PL).
double estimate_baseline(const Spectrum& spectrum);

/// Local minima deeper than the threshold with a prominence of at least the
/// threshold, at least two grid points apart. Initial FWHM comes from a
/// half-depth crossing scan and contrast from the dip depth. Returned in
/// ascending center order; empty when nothing qualifies. When the config fixes
/// n_lines, the deepest n are kept, or the widest guesses are split until
/// there are n.
std::vector<LineShape> detect_peaks(const Spectrum& spectrum, const FitConfig& config);

/// Damped least squares (Levenberg-Marquardt with Marquardt diagonal
/// scaling). Non-convergence is reported through FitResult::converged; a
/// singular normal matrix throws DegenerateFit.
FitResult fit_lorentzians(const Spectrum& spectrum, const FitConfig& config,
                          const std::vector<LineShape>& init,
                          std::optional<double> baseline_init = std::nullopt);

/// detect_peaks followed by fit_lorentzians. Throws InvalidInput when no
/// peak is found.
FitResult fit_spectrum(const Spectrum& spectrum, const FitConfig& config);

struct LinearRegression {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> residuals;
};

/// Ordinary least squares; a degenerate abscissa gives slope 0 and the mean
/// as intercept.
LinearRegression linear_regression(const std::vector<double>& x, const std::vector<double>& y);

struct SweepPoint {
  double control = 0.0;  // gauss or dBm
  bool excluded = false;
  std::string note;
  std::optional<double> splitting_mhz;
  double max_contrast = 0.0;
  double max_contrast_se = 0.0;
  double fwhm_mhz = 0.0;  // of the deepest line
  double fwhm_se = 0.0;
};

enum class SweepKind { field, power };

struct SweepResult {
  SweepKind kind = SweepKind::field;
  std::vector<SweepPoint> points;

  // field sweeps
  std::optional<LinearRegression> regression;
  std::optional<double> expected_slope;  // 2 gamma cos(alpha), MHz/G
  bool splitting_strictly_increasing = false;

  // power sweeps
  bool contrast_non_decreasing = false;
  bool fwhm_non_decreasing = false;
};

struct FieldSweepOptions {
  double gamma_mhz_per_gauss = 2.8;
  std::optional<double> alpha_rad;
  /// Line indices (ascending center order) defining the splitting; default is
  /// the outermost pair.
  std::optional<std::pair<std::size_t, std::size_t>> line_pair;
};

SweepResult analyze_field_sweep(const std::vector<std::pair<double, FitResult>>& results,
                                const FieldSweepOptions& options = {});

SweepResult analyze_power_sweep(const std::vector<std::pair<double, FitResult>>& results);

}  // namespace rfodmr
