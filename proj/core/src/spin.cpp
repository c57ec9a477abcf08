#include "rfodmr/spin.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "rfodmr/error.hpp"

namespace rfodmr {

namespace {

using cd = std::complex<double>;

SpinMatrices make_spin_matrices() {
  const double r = 1.0 / std::numbers::sqrt2;
  const cd i{0.0, 1.0};
  SpinMatrices s;
  s.sx << 0, r, 0,
          r, 0, r,
          0, r, 0;
  s.sy << 0, -i * r, 0,
          i * r, 0, -i * r,
          0, i * r, 0;
  s.sz << 1, 0, 0,
          0, 0, 0,
          0, 0, -1;
  return s;
}

OrientationSet make_axes() {
  const double n = 1.0 / std::sqrt(3.0);
  return {Eigen::Vector3d{1, 1, 1} * n, Eigen::Vector3d{1, -1, -1} * n,
          Eigen::Vector3d{-1, 1, -1} * n, Eigen::Vector3d{-1, -1, 1} * n};
}

}  // namespace

void NVParameters::validate() const {
  if (!std::isfinite(zero_field_mhz) || zero_field_mhz <= 0.0)
    throw InvalidInput("zero-field splitting D must be > 0 MHz");
  if (!std::isfinite(strain_mhz) || strain_mhz < 0.0)
    throw InvalidInput("strain splitting E must be >= 0 MHz");
  if (!std::isfinite(gamma_mhz_per_gauss) || gamma_mhz_per_gauss <= 0.0)
    throw InvalidInput("gyromagnetic ratio must be > 0 MHz/G");
}

double FieldVector::magnitude() const { return std::sqrt(x * x + y * y + z * z); }

bool FieldVector::is_finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

FieldVector FieldVector::along(const Eigen::Vector3d& direction, double magnitude_gauss) {
  const double n = direction.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw InvalidInput("field direction must be a non-zero finite vector");
  if (!std::isfinite(magnitude_gauss) || magnitude_gauss < 0.0)
    throw InvalidInput("field magnitude must be finite and >= 0");
  return from(direction / n * magnitude_gauss);
}

double FieldProjection::parallel_gauss() const { return magnitude_gauss * std::cos(alpha_rad); }

void FieldProjection::validate() const {
  if (!std::isfinite(magnitude_gauss) || magnitude_gauss < 0.0)
    throw InvalidInput("field magnitude must be finite and >= 0");
  if (!std::isfinite(alpha_rad) || alpha_rad < 0.0 || alpha_rad > std::numbers::pi)
    throw InvalidInput("field angle alpha must lie in [0, pi]");
}

const SpinMatrices& spin_matrices() {
  static const SpinMatrices s = make_spin_matrices();
  return s;
}

SpinHamiltonian build_hamiltonian(const NVParameters& params, const FieldVector& nv_field) {
  params.validate();
  if (!nv_field.is_finite()) throw InvalidInput("field components must be finite");
  const auto& s = spin_matrices();
  const double g = params.gamma_mhz_per_gauss;
  SpinHamiltonian h;
  h.matrix = params.zero_field_mhz * (s.sz * s.sz) +
             params.strain_mhz * (s.sx * s.sx - s.sy * s.sy) +
             g * (nv_field.x * s.sx + nv_field.y * s.sy + nv_field.z * s.sz);
  return h;
}

std::array<double, 3> energy_levels(const SpinHamiltonian& h) {
  Eigen::SelfAdjointEigenSolver<SpinMatrix> solver(h.matrix, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericalError("Hermitian eigen-solver did not converge on a 3x3 matrix");
  const auto& ev = solver.eigenvalues();  // ascending
  return {ev(0), ev(1), ev(2)};
}

TransitionPair transition_frequencies_exact(const NVParameters& params,
                                            const FieldVector& nv_field) {
  const auto levels = energy_levels(build_hamiltonian(params, nv_field));
  return {levels[1] - levels[0], levels[2] - levels[0]};
}

TransitionPair transition_frequencies_approx(const NVParameters& params,
                                             const FieldProjection& proj) {
  params.validate();
  proj.validate();
  const double shift = params.gamma_mhz_per_gauss * proj.parallel_gauss();
  return {params.zero_field_mhz - shift, params.zero_field_mhz + shift};
}

const OrientationSet& nv_axes() {
  static const OrientationSet axes = make_axes();
  return axes;
}

FieldVector to_nv_frame(const FieldVector& lab_field, std::size_t axis) {
  if (axis >= 4) throw InvalidInput("NV axis index must be 0..3");
  if (!lab_field.is_finite()) throw InvalidInput("field components must be finite");
  const Eigen::Vector3d& n = nv_axes()[axis];
  const Eigen::Vector3d ez{0.0, 0.0, 1.0};
  const Eigen::Vector3d ex = (ez - ez.dot(n) * n).normalized();
  const Eigen::Vector3d ey = n.cross(ex);
  const Eigen::Vector3d b = lab_field.vec();
  return {b.dot(ex), b.dot(ey), b.dot(n)};
}

std::array<FieldProjection, 4> orientation_projections(const FieldVector& lab_field) {
  if (!lab_field.is_finite()) throw InvalidInput("field components must be finite");
  const double mag = lab_field.magnitude();
  std::array<FieldProjection, 4> out{};
  for (std::size_t k = 0; k < 4; ++k) {
    out[k].magnitude_gauss = mag;
    if (mag == 0.0) continue;
    const double c = std::clamp(std::abs(lab_field.vec().dot(nv_axes()[k])) / mag, 0.0, 1.0);
    out[k].alpha_rad = std::acos(c);
  }
  return out;
}

std::vector<OrientationGroup> group_orientations(const FieldVector& lab_field,
                                                 double cos_tolerance) {
  const auto proj = orientation_projections(lab_field);
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::cos(proj[a].alpha_rad) > std::cos(proj[b].alpha_rad);
  });

  std::vector<OrientationGroup> groups;
  for (std::size_t k : order) {
    const double c = std::cos(proj[k].alpha_rad);
    if (!groups.empty() &&
        std::abs(std::cos(groups.back().projection.alpha_rad) - c) <= cos_tolerance) {
      groups.back().axes.push_back(k);
    } else {
      groups.push_back({proj[k], {k}});
    }
  }
  return groups;
}

FieldEstimate estimate_field_projection(double f_minus_mhz, double f_plus_mhz,
                                        const NVParameters& params) {
  params.validate();
  if (!std::isfinite(f_minus_mhz) || !std::isfinite(f_plus_mhz))
    throw InvalidInput("transition frequencies must be finite");
  if (f_plus_mhz < f_minus_mhz)
    throw InvalidInput("f_plus must be >= f_minus");
  return {0.5 * (f_plus_mhz + f_minus_mhz),
          (f_plus_mhz - f_minus_mhz) / (2.0 * params.gamma_mhz_per_gauss)};
}

}  // namespace rfodmr
