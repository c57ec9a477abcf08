#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rfodmr/error.hpp"
#include "rfodmr/spin.hpp"

using namespace rfodmr;
using cd = std::complex<double>;

namespace {

// Plain triple-loop product, independent of Eigen's operator*.
SpinMatrix multiply(const SpinMatrix& a, const SpinMatrix& b) {
  SpinMatrix c = SpinMatrix::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

double max_abs(const SpinMatrix& m) { return m.cwiseAbs().maxCoeff(); }

FieldVector random_field(std::mt19937_64& rng, double max_gauss) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return FieldVector::along(Eigen::Vector3d{n(rng), n(rng), n(rng)}, max_gauss * u(rng));
}

}  // namespace

TEST_SUITE("spin-core") {

TEST_CASE("spin-1 matrices obey the angular momentum algebra") {
  const auto& s = spin_matrices();
  CHECK(s.sz(0, 0).real() == 1.0);
  CHECK(s.sz(1, 1).real() == 0.0);
  CHECK(s.sz(2, 2).real() == -1.0);

  const SpinMatrix comm = multiply(s.sx, s.sy) - multiply(s.sy, s.sx);
  CHECK(max_abs(comm - cd{0, 1} * s.sz) < 1e-14);

  const SpinMatrix casimir = multiply(s.sx, s.sx) + multiply(s.sy, s.sy) + multiply(s.sz, s.sz);
  CHECK(max_abs(casimir - 2.0 * SpinMatrix::Identity()) < 1e-14);

  SpinMatrix expected = SpinMatrix::Zero();
  expected(0, 2) = 1.0;
  expected(2, 0) = 1.0;
  CHECK(max_abs(multiply(s.sx, s.sx) - multiply(s.sy, s.sy) - expected) < 1e-14);
}

TEST_CASE("zero-field Hamiltonian is diag(D, 0, D)") {
  const auto h = build_hamiltonian({}, {});
  CHECK(h.matrix(0, 0).real() == doctest::Approx(2870.0));
  CHECK(h.matrix(1, 1).real() == doctest::Approx(0.0));
  CHECK(h.matrix(2, 2).real() == doctest::Approx(2870.0));
  CHECK(max_abs(h.matrix - h.matrix.diagonal().asDiagonal().toDenseMatrix()) == 0.0);
}

TEST_CASE("strain couples |+1> and |-1>") {
  NVParameters p;
  p.strain_mhz = 5.0;
  const auto h = build_hamiltonian(p, {});
  CHECK(std::abs(h.matrix(0, 2) - cd{5.0, 0.0}) < 1e-12);
  CHECK(std::abs(h.matrix(2, 0) - cd{5.0, 0.0}) < 1e-12);
  const auto ev = energy_levels(h);
  CHECK(ev[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(2865.0).epsilon(1e-12));
  CHECK(ev[2] == doctest::Approx(2875.0).epsilon(1e-12));
}

TEST_CASE("longitudinal field shifts the |+/-1> diagonal by gamma B") {
  const auto h = build_hamiltonian({}, {0, 0, 11.2});
  CHECK(h.matrix(0, 0).real() == doctest::Approx(2870.0 + 31.36).epsilon(1e-14));
  CHECK(h.matrix(2, 2).real() == doctest::Approx(2870.0 - 31.36).epsilon(1e-14));
  CHECK(std::abs(h.matrix.trace() - cd{2 * 2870.0, 0}) == 0.0);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(build_hamiltonian({}, {std::nan(""), 0, 0}), InvalidInput);
  CHECK_THROWS_AS(build_hamiltonian({}, {0, INFINITY, 0}), InvalidInput);
  CHECK_THROWS_AS(build_hamiltonian({-1.0, 0.0, 2.8}, {}), InvalidInput);
  CHECK_THROWS_AS(build_hamiltonian({2870.0, -1.0, 2.8}, {}), InvalidInput);
  CHECK_THROWS_AS(build_hamiltonian({2870.0, 0.0, 0.0}, {}), InvalidInput);
  CHECK_THROWS_AS(transition_frequencies_approx({}, {-1.0, 0.0}), InvalidInput);
  CHECK_THROWS_AS(transition_frequencies_approx({}, {1.0, 4.0}), InvalidInput);
}

TEST_CASE("Hamiltonian is Hermitian with trace 2D") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> strain(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    NVParameters p;
    p.strain_mhz = strain(rng);
    const auto h = build_hamiltonian(p, random_field(rng, 100.0));
    CHECK(max_abs(h.matrix - h.matrix.adjoint()) <= 1e-12 * max_abs(h.matrix));
    CHECK(std::abs(h.matrix.trace().real() - 2.0 * p.zero_field_mhz) < 1e-9);
  }
  // purely longitudinal: exact
  for (double b : {0.0, 3.3, 50.0, 100.0}) {
    const auto h = build_hamiltonian({2870.0, 4.0, 2.8}, {0, 0, b});
    CHECK(h.matrix.trace().real() == 2.0 * 2870.0);
  }
}

TEST_CASE("exact transitions for the reference fields") {
  const auto aligned = transition_frequencies_exact({}, {0, 0, 11.2});
  CHECK(aligned.minus_mhz == doctest::Approx(2838.64).epsilon(1e-13));
  CHECK(aligned.plus_mhz == doctest::Approx(2901.36).epsilon(1e-13));

  const auto zero = transition_frequencies_exact({}, {});
  CHECK(zero.minus_mhz == doctest::Approx(2870.0).epsilon(1e-14));
  CHECK(zero.plus_mhz == doctest::Approx(2870.0).epsilon(1e-14));

  // Transverse field: antisymmetric state stays at D; the symmetric pair and
  // |0> form [[D, b], [b, 0]] with b = gamma Bx.
  const double d = 2870.0, b = 2.8 * 50.0;
  const double root = std::sqrt(d * d + 4.0 * b * b);
  const double ground = 0.5 * (d - root);
  const auto transverse = transition_frequencies_exact({}, {50.0, 0, 0});
  CHECK(ground == doctest::Approx(-6.81).epsilon(1e-3));
  CHECK(transverse.minus_mhz == doctest::Approx(d - ground).epsilon(1e-12));
  CHECK(transverse.plus_mhz == doctest::Approx(0.5 * (d + root) - ground).epsilon(1e-12));
  CHECK(std::abs(transverse.minus_mhz - 2876.8) < 0.1);
  CHECK(std::abs(transverse.plus_mhz - 2883.6) < 0.1);
}

TEST_CASE("eigen-solver agrees with characteristic polynomial roots") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> strain(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    NVParameters p;
    p.strain_mhz = strain(rng);
    const auto h = build_hamiltonian(p, random_field(rng, 100.0));
    const auto solver = energy_levels(h);
    const auto poly = oracle::char_poly_eigenvalues(h.matrix);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(solver[k] - poly[k]) < 1e-9 * p.zero_field_mhz);
  }
}

TEST_CASE("first-order Zeeman approximation") {
  const auto a = transition_frequencies_approx({}, {11.2, 0.0});
  CHECK(a.minus_mhz == doctest::Approx(2838.64).epsilon(1e-14));
  CHECK(a.plus_mhz == doctest::Approx(2901.36).epsilon(1e-14));

  const auto perp = transition_frequencies_approx({}, {73.0, std::numbers::pi / 2});
  CHECK(perp.minus_mhz == doctest::Approx(2870.0).epsilon(1e-14));
  CHECK(perp.plus_mhz == doctest::Approx(2870.0).epsilon(1e-14));

  const auto magic = transition_frequencies_approx({}, {36.0, std::acos(1.0 / std::sqrt(3.0))});
  CHECK(std::abs(magic.splitting() - 116.41) < 0.02);  // 116.394 to three decimals
  CHECK(magic.splitting() == doctest::Approx(2 * 2.8 * 36 / std::sqrt(3.0)).epsilon(1e-14));
}

TEST_CASE("exact and approximate agree for aligned fields with E = 0") {
  for (double b = 8.0; b <= 36.0; b += 1.0) {
    const auto exact = transition_frequencies_exact({}, {0, 0, b});
    const auto approx = transition_frequencies_approx({}, {b, 0.0});
    CHECK(std::abs(exact.minus_mhz - approx.minus_mhz) < 1e-9);
    CHECK(std::abs(exact.plus_mhz - approx.plus_mhz) < 1e-9);
  }
}

TEST_CASE("Zeeman splitting grows with slope 2 gamma cos(alpha)") {
  for (double alpha : {0.0, 0.3, 0.9548, 1.4}) {
    double prev = -1.0;
    for (double b = 0.0; b <= 100.0; b += 5.0) {
      const double split = transition_frequencies_approx({}, {b, alpha}).splitting();
      if (b > 0.0) {
        CHECK(split > prev);
        CHECK((split - prev) / 5.0 == doctest::Approx(2 * 2.8 * std::cos(alpha)).epsilon(1e-12));
      }
      prev = split;
    }
  }
}

TEST_CASE("<111> axes of a <100> plate") {
  const auto& axes = nv_axes();
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(axes[i].norm() - 1.0) < 1e-12);
    for (std::size_t j = i + 1; j < 4; ++j)
      CHECK(std::acos(axes[i].dot(axes[j])) * 180.0 / std::numbers::pi ==
            doctest::Approx(109.4712206).epsilon(1e-9));
  }
}

TEST_CASE("orientation projections") {
  SUBCASE("field along [100] is fully degenerate") {
    const auto proj = orientation_projections({10.0, 0, 0});
    for (const auto& p : proj) {
      CHECK(p.magnitude_gauss == 10.0);
      CHECK(std::cos(p.alpha_rad) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
    }
    const auto groups = group_orientations({10.0, 0, 0});
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].axes.size() == 4);
  }
  SUBCASE("field along [111] singles out one axis") {
    const auto f = FieldVector::along({1, 1, 1}, 10.0);
    const auto proj = orientation_projections(f);
    CHECK(proj[0].alpha_rad == doctest::Approx(0.0));
    for (int k = 1; k < 4; ++k)
      CHECK(std::cos(proj[k].alpha_rad) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    const auto groups = group_orientations(f);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].axes == std::vector<std::size_t>{0});
    CHECK(groups[1].axes.size() == 3);
  }
  SUBCASE("zero field") {
    for (const auto& p : orientation_projections({})) {
      CHECK(p.magnitude_gauss == 0.0);
      CHECK(transition_frequencies_approx({}, p).splitting() == 0.0);
    }
  }
}

TEST_CASE("NV frame rotation keeps magnitude and parallel component") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto lab = random_field(rng, 100.0);
    const auto proj = orientation_projections(lab);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto nv = to_nv_frame(lab, k);
      CHECK(nv.magnitude() == doctest::Approx(lab.magnitude()).epsilon(1e-12));
      CHECK(std::abs(nv.z) == doctest::Approx(proj[k].parallel_gauss()).epsilon(1e-9));
    }
  }
}

TEST_CASE("field estimation inverts the Zeeman relation") {
  const auto e = estimate_field_projection(2838.64, 2901.36, {});
  CHECK(e.zero_field_mhz == doctest::Approx(2870.0).epsilon(1e-14));
  CHECK(e.parallel_gauss == doctest::Approx(11.2).epsilon(1e-12));

  const auto z = estimate_field_projection(2870.0, 2870.0, {});
  CHECK(z.zero_field_mhz == 2870.0);
  CHECK(z.parallel_gauss == 0.0);

  CHECK(estimate_field_projection(2865.0, 2875.0, {}).parallel_gauss ==
        doctest::Approx(1.7857142857).epsilon(1e-9));
  CHECK_THROWS_AS(estimate_field_projection(2901.0, 2838.0, {}), InvalidInput);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0.0, 100.0), ang(0.0, std::numbers::pi / 2);
  for (int trial = 0; trial < 200; ++trial) {
    const FieldProjection proj{mag(rng), ang(rng)};
    const auto t = transition_frequencies_approx({}, proj);
    const auto back = estimate_field_projection(t.minus_mhz, t.plus_mhz, {});
    CHECK(back.zero_field_mhz == doctest::Approx(2870.0).epsilon(1e-15));
    CHECK(std::abs(back.parallel_gauss - proj.parallel_gauss()) < 1e-12 * 100.0);
  }
}

}  // TEST_SUITE
