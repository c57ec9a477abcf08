#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rfodmr/error.hpp"
#include "rfodmr/fit.hpp"
#include "rfodmr/spectrum.hpp"

using namespace rfodmr;

namespace {

Spectrum make_spectrum(const std::vector<LineShape>& lines, double lo, double hi, std::size_t n,
                       double sigma = 0.0, std::uint64_t seed = 0, double baseline = 1.0) {
  Spectrum s;
  s.frequencies_mhz = FrequencyGrid{lo, hi, n}.values();
  s.pl_normalized = render_lines(s.frequencies_mhz, lines, baseline);
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& v : s.pl_normalized) v += noise(rng);
  }
  return s;
}

FitResult fit_field_point(const FieldVector& b, std::size_t n_lines) {
  const DriveParameters drive{};
  const auto s = synthesize_spectrum({}, b, drive, {2750.0, 2990.0, 1201}, 0.0, 0);
  FitConfig cfg;
  cfg.n_lines = n_lines;
  return fit_spectrum(s, cfg);
}

}  // namespace

TEST_SUITE("fit-analysis") {

TEST_CASE("single dip is detected near its center") {
  const auto s = make_spectrum({{2870.0, 10.0, 0.02}}, 2800.0, 2940.0, 701);
  const auto peaks = detect_peaks(s, {});
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks[0].center_mhz - 2870.0) <= 0.2);
  CHECK(peaks[0].fwhm_mhz > 5.0);
  CHECK(peaks[0].fwhm_mhz < 20.0);
}

TEST_CASE("flat spectrum has no dips") {
  const auto s = make_spectrum({}, 2800.0, 2940.0, 701);
  CHECK(detect_peaks(s, {}).empty());
  CHECK_THROWS_AS(fit_spectrum(s, {}), InvalidInput);
}

TEST_CASE("split pair is detected in order") {
  const auto s = make_spectrum({{2838.64, 8.0, 0.02}, {2901.36, 8.0, 0.02}}, 2750.0, 2990.0, 1201);
  const auto peaks = detect_peaks(s, {});
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].center_mhz < peaks[1].center_mhz);
  CHECK(peaks[1].center_mhz - peaks[0].center_mhz == doctest::Approx(62.72).epsilon(0.01));
}

TEST_CASE("fixed line count splits a merged guess") {
  const auto s = make_spectrum({{2870.0, 10.0, 0.02}}, 2800.0, 2940.0, 701);
  FitConfig cfg;
  cfg.n_lines = 2;
  const auto peaks = detect_peaks(s, cfg);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].center_mhz < peaks[1].center_mhz);
}

TEST_CASE("noise-free recovery") {
  const std::vector<LineShape> truth{{2845.0, 9.0, 0.015}, {2880.0, 12.0, 0.03}};
  const auto s = make_spectrum(truth, 2750.0, 2990.0, 1201, 0.0, 0, 0.98);
  const auto fit = fit_spectrum(s, {});
  CHECK(fit.converged);
  REQUIRE(fit.lines.size() == 2);
  CHECK(fit.baseline == doctest::Approx(0.98).epsilon(1e-6));
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(std::abs(fit.lines[k].shape.center_mhz - truth[k].center_mhz) < 1e-6);
    CHECK(std::abs(fit.lines[k].shape.fwhm_mhz / truth[k].fwhm_mhz - 1.0) < 1e-6);
    CHECK(std::abs(fit.lines[k].shape.contrast / truth[k].contrast - 1.0) < 1e-6);
  }
  CHECK(fit.residual_norm < 1e-9);
}

TEST_CASE("noisy two-line fit") {
  const std::vector<LineShape> truth{{2838.64, 11.3, 0.06}, {2901.36, 11.3, 0.06}};
  const auto s = make_spectrum(truth, 2750.0, 2990.0, 1201, 0.001, 42);
  FitConfig cfg;
  cfg.n_lines = 2;
  const auto fit = fit_spectrum(s, cfg);
  CHECK(fit.converged);
  REQUIRE(fit.lines.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(std::abs(fit.lines[k].shape.center_mhz - truth[k].center_mhz) < 0.1);
    CHECK(std::abs(fit.lines[k].shape.fwhm_mhz / truth[k].fwhm_mhz - 1.0) < 0.05);
    CHECK(std::abs(fit.lines[k].shape.contrast / truth[k].contrast - 1.0) < 0.05);
    CHECK(fit.lines[k].center_se > 0.0);
  }
  CHECK(fit.residual_norm == doctest::Approx(0.001).epsilon(0.1));
}

TEST_CASE("fit preconditions") {
  const auto s = make_spectrum({{2870.0, 10.0, 0.02}}, 2800.0, 2940.0, 701);
  CHECK_THROWS_WITH_AS(fit_lorentzians(s, {}, {{2870.0, 0.0, 0.02}}), "initial FWHM must be > 0",
                       InvalidInput);
  CHECK_THROWS_AS(fit_lorentzians(s, {}, {}), InvalidInput);
  const auto tiny = make_spectrum({{2870.0, 10.0, 0.02}}, 2860.0, 2880.0, 3);
  CHECK_THROWS_AS(fit_lorentzians(tiny, {}, {{2870.0, 10.0, 0.02}}), InvalidInput);
  FitConfig bad;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(fit_lorentzians(s, bad, {{2870.0, 10.0, 0.02}}), InvalidInput);
}

TEST_CASE("identical guesses make the problem degenerate") {
  const auto s = make_spectrum({{2870.0, 10.0, 0.02}}, 2800.0, 2940.0, 701);
  try {
    (void)fit_lorentzians(s, {}, {{2870.0, 10.0, 0.01}, {2870.0, 10.0, 0.01}});
    FAIL("expected DegenerateFit");
  } catch (const DegenerateFit& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

TEST_CASE("iteration cap is reported as non-convergence") {
  const auto s = make_spectrum({{2870.0, 10.0, 0.02}}, 2800.0, 2940.0, 701, 0.0005, 3);
  FitConfig cfg;
  cfg.max_iterations = 1;
  const auto fit = fit_lorentzians(s, cfg, {{2860.0, 20.0, 0.01}});
  CHECK_FALSE(fit.converged);
  CHECK(fit.iterations == 1);
}

TEST_CASE("analytic Jacobian matches finite differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto f = FrequencyGrid{2800.0, 2940.0, 141}.values();
  for (int draw = 0; draw < 20; ++draw) {
    const std::size_t n = 1 + draw % 3;
    const LorentzianModel model(n);
    std::vector<LineShape> lines;
    for (std::size_t k = 0; k < n; ++k)
      lines.push_back({2820.0 + 100.0 * u(rng), 3.0 + 30.0 * u(rng), 0.005 + 0.1 * u(rng)});
    const Eigen::VectorXd p = LorentzianModel::pack(0.9 + 0.2 * u(rng), lines);
    const Eigen::MatrixXd analytic = model.jacobian(f, p);
    const Eigen::MatrixXd numeric = oracle::central_difference_jacobian(
        [&](const Eigen::VectorXd& q) { return model.evaluate(f, q); }, p);
    const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
    CHECK((analytic - numeric).cwiseAbs().maxCoeff() / scale < 1e-5);
  }
}

TEST_CASE("model evaluation matches an independent Lorentzian sum") {
  const LorentzianModel model(2);
  const auto f = FrequencyGrid{2800.0, 2940.0, 29}.values();
  const Eigen::VectorXd p = LorentzianModel::pack(0.95, {{2850.0, 7.0, 0.03}, {2880.0, 12.0, 0.05}});
  const Eigen::VectorXd y = model.evaluate(f, p);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(y(static_cast<Eigen::Index>(i)) ==
          doctest::Approx(oracle::lorentzian_pl(f[i], 0.95, {{2850.0, 7.0, 0.03}, {2880.0, 12.0, 0.05}}))
              .epsilon(1e-14));
  CHECK(model.parameter_names().size() == 7);
  CHECK(model.parameter_names()[0] == "baseline");
}

TEST_CASE("refitting from a converged fit is idempotent") {
  const auto s = make_spectrum({{2850.0, 9.0, 0.02}, {2890.0, 9.0, 0.02}}, 2750.0, 2990.0, 1201,
                               0.002, 7);
  const auto first = fit_spectrum(s, {});
  REQUIRE(first.converged);
  std::vector<LineShape> init;
  for (const auto& l : first.lines) init.push_back(l.shape);
  const auto second = fit_lorentzians(s, {}, init, first.baseline);
  REQUIRE(second.lines.size() == first.lines.size());
  CHECK(std::abs(second.baseline - first.baseline) < 1e-10);
  for (std::size_t k = 0; k < init.size(); ++k) {
    CHECK(std::abs(second.lines[k].shape.center_mhz / first.lines[k].shape.center_mhz - 1.0) < 1e-10);
    CHECK(std::abs(second.lines[k].shape.fwhm_mhz / first.lines[k].shape.fwhm_mhz - 1.0) < 1e-10);
    CHECK(std::abs(second.lines[k].shape.contrast / first.lines[k].shape.contrast - 1.0) < 1e-10);
  }
}

TEST_CASE("standard errors scale with the noise level") {
  const std::vector<LineShape> truth{{2870.0, 10.0, 0.03}};
  const std::vector<LineShape> init{{2870.5, 11.0, 0.028}};
  const std::vector<double> sigmas{1e-4, 1e-3, 1e-2};
  std::vector<double> mean_se(sigmas.size(), 0.0);
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto fit =
          fit_lorentzians(make_spectrum(truth, 2800.0, 2940.0, 701, sigmas[i], seed), {}, init);
      mean_se[i] += fit.lines[0].center_se / 50.0;
    }
  }
  for (std::size_t i = 1; i < sigmas.size(); ++i)
    CHECK(std::abs((mean_se[i] / mean_se[0]) / (sigmas[i] / sigmas[0]) - 1.0) < 0.2);
}

TEST_CASE("baseline error bars cover the truth") {
  const std::vector<LineShape> truth{{2870.0, 10.0, 0.03}};
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto fit = fit_lorentzians(make_spectrum(truth, 2800.0, 2940.0, 701, 0.002, seed), {},
                                     {{2869.0, 12.0, 0.025}});
    if (std::abs(fit.baseline - 1.0) <= 3.0 * fit.baseline_se) ++covered;
  }
  CHECK(covered >= 95);
}

TEST_CASE("fitted width equals the half-depth width") {
  const std::vector<LineShape> truth{{2870.0, 14.0, 0.05}};
  const auto s = make_spectrum(truth, 2770.0, 2970.0, 20001);
  const auto fit = fit_spectrum(s, {});
  REQUIRE(fit.lines.size() == 1);
  CHECK(std::abs(fit.lines[0].shape.fwhm_mhz /
                     oracle::half_depth_width(s.frequencies_mhz, s.pl_normalized, 1.0) -
                 1.0) < 1e-3);
}

TEST_CASE("regression") {
  const auto r = linear_regression({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(r.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.intercept == doctest::Approx(1.0).epsilon(1e-14));
  const auto flat = linear_regression({2, 2, 2}, {1, 2, 3});
  CHECK(flat.slope == 0.0);
  CHECK(flat.intercept == doctest::Approx(2.0));
  CHECK_THROWS_AS(linear_regression({}, {}), InvalidInput);
  CHECK_THROWS_AS(linear_regression({1, 2}, {1}), InvalidInput);
}

TEST_CASE("aligned field sweep recovers 2 gamma") {
  std::vector<std::pair<double, FitResult>> results;
  for (double b = 8.0; b <= 36.0; b += 4.0)
    results.emplace_back(b, fit_field_point(FieldVector::along({1, 1, 1}, b), 4));
  FieldSweepOptions opt;
  opt.alpha_rad = 0.0;
  const auto sweep = analyze_field_sweep(results, opt);
  REQUIRE(sweep.regression);
  CHECK(std::abs(sweep.regression->slope - 5.6) < 1e-6);
  CHECK(*sweep.expected_slope == doctest::Approx(5.6));
  CHECK(sweep.splitting_strictly_increasing);
}

TEST_CASE("[100] field sweep slope follows the projection") {
  std::vector<std::pair<double, FitResult>> results;
  for (double b = 8.0; b <= 36.0; b += 4.0) results.emplace_back(b, fit_field_point({0, 0, b}, 2));
  FieldSweepOptions opt;
  opt.alpha_rad = std::acos(1.0 / std::sqrt(3.0));
  const auto sweep = analyze_field_sweep(results, opt);
  REQUIRE(sweep.regression);
  CHECK(*sweep.expected_slope == doctest::Approx(3.2332).epsilon(1e-4));
  CHECK(std::abs(sweep.regression->slope / *sweep.expected_slope - 1.0) < 0.005);
  CHECK(sweep.splitting_strictly_increasing);
}

TEST_CASE("repeated field values are not strictly increasing") {
  const auto fit = fit_field_point({0, 0, 20.0}, 2);
  const auto sweep = analyze_field_sweep({{20.0, fit}, {20.0, fit}});
  CHECK_FALSE(sweep.splitting_strictly_increasing);
  REQUIRE(sweep.regression);
  CHECK(sweep.regression->slope == 0.0);
  CHECK(sweep.regression->intercept ==
        doctest::Approx(fit.lines[1].shape.center_mhz - fit.lines[0].shape.center_mhz));
}

TEST_CASE("points with fewer than two lines are excluded") {
  FitResult one;
  one.lines.push_back({{2870.0, 8.0, 0.02}, 0.0, 0.0, 0.0});
  const auto sweep = analyze_field_sweep(
      {{8.0, fit_field_point({0, 0, 8.0}, 2)}, {12.0, one}, {16.0, fit_field_point({0, 0, 16.0}, 2)}});
  CHECK(sweep.points[1].excluded);
  CHECK_FALSE(sweep.points[1].note.empty());
  CHECK_FALSE(sweep.points[1].splitting_mhz);
  CHECK(sweep.splitting_strictly_increasing);
  CHECK_THROWS_AS(analyze_field_sweep({{8.0, one}}), InvalidInput);
}

TEST_CASE("power sweep verdicts") {
  std::vector<std::pair<double, FitResult>> results;
  for (double p : {0.0, 3.0, 9.0, 15.0, 21.0, 25.0}) {
    const DriveParameters drive{p, 5.0, 0.12, 8.0};
    const auto s = synthesize_spectrum({}, {0, 0, 11.2}, drive, {2750.0, 2990.0, 1201}, 0.0, 0);
    FitConfig cfg;
    cfg.n_lines = 2;
    results.emplace_back(p, fit_spectrum(s, cfg));
  }
  const auto sweep = analyze_power_sweep(results);
  CHECK(sweep.contrast_non_decreasing);
  CHECK(sweep.fwhm_non_decreasing);
  CHECK(sweep.points.front().max_contrast == doctest::Approx(0.02).epsilon(1e-4));
  CHECK(sweep.points.back().max_contrast > 0.10);

  // a reversed contrast beyond its error bars flips the verdict
  auto broken = results;
  std::swap(broken[0].second, broken[5].second);
  CHECK_FALSE(analyze_power_sweep(broken).contrast_non_decreasing);
}

TEST_CASE("saturation model on explicit inputs") {
  const double c0 = saturation_contrast({0.0, 30.0, 0.12, 8.0});
  CHECK(c0 == doctest::Approx(0.0039).epsilon(0.01));
  CHECK(saturation_contrast({25.0, 5.0, 0.12, 8.0}) == doctest::Approx(0.118).epsilon(0.005));
  CHECK(saturation_contrast({0.0, 5.0, 0.12, 8.0}) == doctest::Approx(0.02).epsilon(1e-12));
}

}  // TEST_SUITE
