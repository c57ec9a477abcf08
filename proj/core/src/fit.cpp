#include "rfodmr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rfodmr/error.hpp"

namespace rfodmr {

namespace {

constexpr double kLambdaInit = 1e-3;
constexpr double kStepTol = 1e-12;
constexpr double kLambdaMax = 1e16;
constexpr double kSingularEigen = 1e-13;
constexpr std::size_t kSmoothWindow = 5;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> smooth(const std::vector<double>& y) {
  const std::size_t half = kSmoothWindow / 2;
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(y.size() - 1, i + half);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += y[j];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

// Position where y crosses `level` between samples a and b (linear).
double crossing(const std::vector<double>& f, const std::vector<double>& y, std::size_t a,
                std::size_t b, double level) {
  const double dy = y[b] - y[a];
  if (dy == 0.0) return f[b];
  return f[a] + (level - y[a]) / dy * (f[b] - f[a]);
}

double sum_squares(const Eigen::VectorXd& r) { return r.squaredNorm(); }

bool widths_positive(const Eigen::VectorXd& p, std::size_t n_lines) {
  for (std::size_t k = 0; k < n_lines; ++k) {
    const double w = p(static_cast<Eigen::Index>(2 + 3 * k));
    if (!(w > 0.0) || !std::isfinite(w)) return false;
  }
  return p.allFinite();
}

[[noreturn]] void throw_degenerate(const std::vector<std::string>& names,
                                   const std::vector<std::size_t>& idx) {
  std::ostringstream os;
  os << "degenerate fit: singular normal matrix; collinear parameters:";
  for (std::size_t i : idx) os << ' ' << names[i];
  throw DegenerateFit(os.str());
}

// Throws DegenerateFit when the normal matrix is (numerically) singular.
void check_normal_matrix(const Eigen::MatrixXd& a, const LorentzianModel& model) {
  const auto names = model.parameter_names();
  const Eigen::VectorXd d = a.diagonal().cwiseSqrt();
  std::vector<std::size_t> zero;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (!(d(i) > 0.0)) zero.push_back(static_cast<std::size_t>(i));
  if (!zero.empty()) throw_degenerate(names, zero);

  const Eigen::MatrixXd corr = d.cwiseInverse().asDiagonal() * a * d.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success) throw NumericalError("eigen-solve of normal matrix failed");
  if (eig.eigenvalues()(0) > kSingularEigen * eig.eigenvalues().maxCoeff()) return;

  const Eigen::VectorXd v = eig.eigenvectors().col(0);
  std::vector<std::size_t> idx;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) > 0.3) idx.push_back(static_cast<std::size_t>(i));
  throw_degenerate(names, idx);
}

}  // namespace

void FitConfig::validate() const {
  if (n_lines && *n_lines < 1) throw InvalidInput("n_lines must be >= 1");
  if (max_iterations < 1) throw InvalidInput("max_iterations must be >= 1");
  if (!std::isfinite(convergence_tol) || convergence_tol <= 0.0)
    throw InvalidInput("convergence_tol must be > 0");
  if (peak_threshold && (!std::isfinite(*peak_threshold) || *peak_threshold <= 0.0))
    throw InvalidInput("peak_threshold must be > 0");
}

std::vector<std::string> LorentzianModel::parameter_names() const {
  std::vector<std::string> names{"baseline"};
  for (std::size_t k = 0; k < n_lines_; ++k) {
    const std::string prefix = "line" + std::to_string(k + 1) + ".";
    names.push_back(prefix + "center");
    names.push_back(prefix + "fwhm");
    names.push_back(prefix + "contrast");
  }
  return names;
}

Eigen::VectorXd LorentzianModel::pack(double baseline, const std::vector<LineShape>& lines) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(1 + 3 * lines.size()));
  p(0) = baseline;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(1 + 3 * k);
    p(i) = lines[k].center_mhz;
    p(i + 1) = lines[k].fwhm_mhz;
    p(i + 2) = lines[k].contrast;
  }
  return p;
}

Eigen::VectorXd LorentzianModel::evaluate(const std::vector<double>& f,
                                          const Eigen::VectorXd& p) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) {
    double dip = 0.0;
    for (std::size_t k = 0; k < n_lines_; ++k) {
      const auto j = static_cast<Eigen::Index>(1 + 3 * k);
      const double h = 0.5 * p(j + 1);
      const double d = f[i] - p(j);
      dip += p(j + 2) * h * h / (d * d + h * h);
    }
    out(static_cast<Eigen::Index>(i)) = p(0) * (1.0 - dip);
  }
  return out;
}

Eigen::MatrixXd LorentzianModel::jacobian(const std::vector<double>& f,
                                          const Eigen::VectorXd& p) const {
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(f.size()),
                      static_cast<Eigen::Index>(parameter_count()));
  const double b = p(0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double dip = 0.0;
    for (std::size_t k = 0; k < n_lines_; ++k) {
      const auto j = static_cast<Eigen::Index>(1 + 3 * k);
      const double c = p(j + 2);
      const double h = 0.5 * p(j + 1);
      const double d = f[i] - p(j);
      const double den = d * d + h * h;
      const double lor = h * h / den;
      dip += c * lor;
      const double den2 = den * den;
      jac(row, j) = -b * c * 2.0 * h * h * d / den2;        // d/d center
      jac(row, j + 1) = -b * c * 0.5 * 2.0 * h * d * d / den2;  // d/d fwhm = (1/2) d/dh
      jac(row, j + 2) = -b * lor;
    }
    jac(row, 0) = 1.0 - dip;
  }
  return jac;
}

double estimate_noise_sigma(const Spectrum& spectrum) {
  const auto& y = spectrum.pl_normalized;
  if (y.size() < 3) return 0.0;
  std::vector<double> d2(y.size() - 2);
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    d2[i - 1] = std::abs(y[i - 1] - 2.0 * y[i] + y[i + 1]);
  return 1.482602218505602 * median(std::move(d2)) / std::sqrt(6.0);
}

double estimate_baseline(const Spectrum& spectrum) {
  return quantile(smooth(spectrum.pl_normalized), 0.9);
}

std::vector<LineShape> detect_peaks(const Spectrum& spectrum, const FitConfig& config) {
  spectrum.validate();
  config.validate();
  const auto& f = spectrum.frequencies_mhz;
  const std::vector<double> y = smooth(spectrum.pl_normalized);
  const double base = estimate_baseline(spectrum);
  const double threshold =
      config.peak_threshold.value_or(std::max(3.0 * estimate_noise_sigma(spectrum), 1e-6));

  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] < y[i - 1] && y[i] <= y[i + 1] && y[i] < base - threshold) candidates.push_back(i);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });

  std::vector<std::size_t> accepted;
  for (std::size_t c : candidates) {
    bool keep = true;
    for (std::size_t a : accepted) {
      const std::size_t lo = std::min(a, c), hi = std::max(a, c);
      if (hi - lo < 2) { keep = false; break; }
      const double ridge = *std::max_element(y.begin() + static_cast<std::ptrdiff_t>(lo),
                                             y.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
      if (ridge - y[c] < threshold) { keep = false; break; }
    }
    if (keep) accepted.push_back(c);
  }
  // accepted is deepest-first
  if (config.n_lines && accepted.size() > *config.n_lines) accepted.resize(*config.n_lines);

  const double step = (f.back() - f.front()) / static_cast<double>(f.size() - 1);
  std::vector<LineShape> guesses;
  for (std::size_t i : accepted) {
    const double depth = base - y[i];
    const double half = base - 0.5 * depth;
    std::optional<double> left, right;
    for (std::size_t j = i; j > 0; --j)
      if (y[j - 1] >= half) { left = crossing(f, y, j, j - 1, half); break; }
    for (std::size_t j = i; j + 1 < y.size(); ++j)
      if (y[j + 1] >= half) { right = crossing(f, y, j, j + 1, half); break; }
    double width;
    if (left && right) width = *right - *left;
    else if (left) width = 2.0 * (f[i] - *left);
    else if (right) width = 2.0 * (*right - f[i]);
    else width = 0.25 * (f.back() - f.front());
    width = std::max(width, 2.0 * step);
    guesses.push_back({f[i], width, std::clamp(depth / base, 1e-6, 0.99)});
  }

  if (config.n_lines && !guesses.empty()) {
    while (guesses.size() < *config.n_lines) {
      auto widest = std::max_element(guesses.begin(), guesses.end(),
                                     [](const LineShape& a, const LineShape& b) {
                                       return a.fwhm_mhz < b.fwhm_mhz;
                                     });
      const LineShape g = *widest;
      *widest = {g.center_mhz - 0.25 * g.fwhm_mhz, 0.5 * g.fwhm_mhz, g.contrast};
      guesses.push_back({g.center_mhz + 0.25 * g.fwhm_mhz, 0.5 * g.fwhm_mhz, g.contrast});
    }
  }
  std::sort(guesses.begin(), guesses.end(),
            [](const LineShape& a, const LineShape& b) { return a.center_mhz < b.center_mhz; });
  return guesses;
}

FitResult fit_lorentzians(const Spectrum& spectrum, const FitConfig& config,
                          const std::vector<LineShape>& init, std::optional<double> baseline_init) {
  spectrum.validate();
  config.validate();
  if (init.empty()) throw InvalidInput("fit requires at least one initial line guess");
  for (const auto& g : init) {
    if (!std::isfinite(g.center_mhz) || !std::isfinite(g.contrast))
      throw InvalidInput("initial line guesses must be finite");
    if (!std::isfinite(g.fwhm_mhz) || g.fwhm_mhz <= 0.0)
      throw InvalidInput("initial FWHM must be > 0");
  }

  const LorentzianModel model(init.size());
  const auto& f = spectrum.frequencies_mhz;
  const std::size_t np = model.parameter_count();
  if (f.size() < 3 * np)
    throw InvalidInput("fit needs at least " + std::to_string(3 * np) + " grid points for " +
                       std::to_string(np) + " free parameters");
  const double b0 = baseline_init.value_or(estimate_baseline(spectrum));
  if (!std::isfinite(b0) || b0 <= 0.0) throw InvalidInput("initial baseline must be > 0");

  const Eigen::Map<const Eigen::VectorXd> y(spectrum.pl_normalized.data(),
                                            static_cast<Eigen::Index>(spectrum.size()));
  Eigen::VectorXd p = LorentzianModel::pack(b0, init);
  Eigen::VectorXd r = y - model.evaluate(f, p);
  double sse = sum_squares(r);
  double lambda = kLambdaInit;

  FitResult result;
  bool converged = sse == 0.0;
  int it = 0;
  while (!converged && it < config.max_iterations) {
    ++it;
    const Eigen::MatrixXd jac = model.jacobian(f, p);
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    if ((a.diagonal().array() <= 0.0).any()) check_normal_matrix(a, model);

    bool accepted = false;
    while (lambda <= kLambdaMax) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() *= 1.0 + lambda;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      if (ldlt.info() != Eigen::Success) check_normal_matrix(a, model);
      const Eigen::VectorXd step = ldlt.solve(g);
      const Eigen::VectorXd trial = p + step;
      if (widths_positive(trial, model.n_lines())) {
        const Eigen::VectorXd r_trial = y - model.evaluate(f, trial);
        const double sse_trial = sum_squares(r_trial);
        if (sse_trial < sse) {
          const double rel = (sse - sse_trial) / sse;
          const double step_rel =
              (step.array().abs() / (p.array().abs() + 1e-300)).maxCoeff();
          p = trial;
          r = r_trial;
          sse = sse_trial;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          // A small residual change alone can stop a damped run short of the
          // minimum, so the step must also be negligible.
          converged = (rel < config.convergence_tol && step_rel < kStepTol) || sse == 0.0;
          break;
        }
      }
      lambda *= 10.0;
    }
    // No damping reduces the residual: the point is stationary to rounding.
    if (!accepted) converged = true;
  }

  const Eigen::MatrixXd jac = model.jacobian(f, p);
  const Eigen::MatrixXd a = jac.transpose() * jac;
  check_normal_matrix(a, model);
  const double dof = static_cast<double>(f.size() - np);
  const Eigen::MatrixXd cov = (sse / dof) * a.ldlt().solve(Eigen::MatrixXd::Identity(
                                               static_cast<Eigen::Index>(np),
                                               static_cast<Eigen::Index>(np)));
  auto se = [&](Eigen::Index i) { return std::sqrt(std::max(cov(i, i), 0.0)); };

  result.baseline = p(0);
  result.baseline_se = se(0);
  for (std::size_t k = 0; k < model.n_lines(); ++k) {
    const auto j = static_cast<Eigen::Index>(1 + 3 * k);
    FittedLine line;
    line.shape = {p(j), p(j + 1), p(j + 2)};
    line.center_se = se(j);
    line.fwhm_se = se(j + 1);
    line.contrast_se = se(j + 2);
    result.lines.push_back(line);
  }
  std::sort(result.lines.begin(), result.lines.end(), [](const FittedLine& a, const FittedLine& b) {
    return a.shape.center_mhz < b.shape.center_mhz;
  });
  result.residual_norm = std::sqrt(sse / static_cast<double>(f.size()));
  result.converged = converged;
  result.iterations = it;
  return result;
}

FitResult fit_spectrum(const Spectrum& spectrum, const FitConfig& config) {
  const auto guesses = detect_peaks(spectrum, config);
  if (guesses.empty()) throw InvalidInput("no resonance dips found in spectrum");
  return fit_lorentzians(spectrum, config, guesses);
}

LinearRegression linear_regression(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty())
    throw InvalidInput("regression needs equal-length non-empty samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearRegression reg;
  reg.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  reg.intercept = my - reg.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i)
    reg.residuals.push_back(y[i] - (reg.intercept + reg.slope * x[i]));
  return reg;
}

namespace {

SweepPoint summarize(double control, const FitResult& fit) {
  SweepPoint pt;
  pt.control = control;
  if (fit.lines.empty()) return pt;
  const auto deepest = std::max_element(
      fit.lines.begin(), fit.lines.end(),
      [](const FittedLine& a, const FittedLine& b) { return a.shape.contrast < b.shape.contrast; });
  pt.max_contrast = deepest->shape.contrast;
  pt.max_contrast_se = deepest->contrast_se;
  pt.fwhm_mhz = deepest->shape.fwhm_mhz;
  pt.fwhm_se = deepest->fwhm_se;
  return pt;
}

std::vector<std::size_t> control_order(const std::vector<SweepPoint>& pts) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!pts[i].excluded) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return pts[a].control < pts[b].control; });
  return idx;
}

}  // namespace

SweepResult analyze_field_sweep(const std::vector<std::pair<double, FitResult>>& results,
                                const FieldSweepOptions& options) {
  if (results.size() < 2) throw InvalidInput("field sweep needs at least 2 points");
  SweepResult out;
  out.kind = SweepKind::field;
  for (const auto& [control, fit] : results) {
    SweepPoint pt = summarize(control, fit);
    const std::size_t n = fit.lines.size();
    if (n < 2) {
      pt.excluded = true;
      pt.note = "fewer than 2 fitted lines";
    } else {
      const auto [lo, hi] = options.line_pair.value_or(std::pair<std::size_t, std::size_t>{0, n - 1});
      if (lo >= n || hi >= n || lo == hi) {
        pt.excluded = true;
        pt.note = "line pair index out of range";
      } else {
        pt.splitting_mhz = std::abs(fit.lines[hi].shape.center_mhz - fit.lines[lo].shape.center_mhz);
      }
    }
    out.points.push_back(pt);
  }

  const auto order = control_order(out.points);
  if (order.size() >= 2) {
    std::vector<double> x, y;
    for (std::size_t i : order) {
      x.push_back(out.points[i].control);
      y.push_back(*out.points[i].splitting_mhz);
    }
    out.regression = linear_regression(x, y);
    out.splitting_strictly_increasing = true;
    for (std::size_t i = 1; i < x.size(); ++i)
      if (!(x[i] > x[i - 1] && y[i] > y[i - 1])) out.splitting_strictly_increasing = false;
  }
  if (options.alpha_rad)
    out.expected_slope = 2.0 * options.gamma_mhz_per_gauss * std::cos(*options.alpha_rad);
  return out;
}

SweepResult analyze_power_sweep(const std::vector<std::pair<double, FitResult>>& results) {
  if (results.size() < 2) throw InvalidInput("power sweep needs at least 2 points");
  SweepResult out;
  out.kind = SweepKind::power;
  for (const auto& [control, fit] : results) {
    SweepPoint pt = summarize(control, fit);
    if (fit.lines.empty()) {
      pt.excluded = true;
      pt.note = "no fitted lines";
    }
    out.points.push_back(pt);
  }

  const auto order = control_order(out.points);
  out.contrast_non_decreasing = true;
  out.fwhm_non_decreasing = true;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const SweepPoint& a = out.points[order[k - 1]];
    const SweepPoint& b = out.points[order[k]];
    if (b.max_contrast < a.max_contrast - (a.max_contrast_se + b.max_contrast_se))
      out.contrast_non_decreasing = false;
    if (b.fwhm_mhz < a.fwhm_mhz - (a.fwhm_se + b.fwhm_se)) out.fwhm_non_decreasing = false;
  }
  return out;
}

}  // namespace rfodmr
