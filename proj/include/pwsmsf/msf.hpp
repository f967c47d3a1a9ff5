#pragma once

#include <string>
#include <vector>

#include "pwsmsf/network.hpp"

namespace pwsmsf {

/// Floor applied to log-moduli so a structurally zero multiplier maps to a
/// finite exponent (log of the smallest positive double).
inline constexpr double kLogModulusFloor = -745.0;

/// Coefficient of the reduced variational system at nu = sigma * lambda_i:
/// Df_mode + nu E on free segments, Df_Sigma + nu (E + B) while sliding.
Matrix reduced_coefficient(const AgentModel& model, Mode mode, const Vector& x,
                           double nu, const Matrix& inner_coupling);

/// Z(T) of the n-dimensional reduced system over the skeleton: segment-wise
/// fundamental matrices with the skeleton's saltation matrices applied at
/// events (identity at tangential exits).
Matrix reduced_transition(const AgentModel& model, const OrbitSkeleton& skeleton,
                          double nu, const Matrix& inner_coupling, double step);

/// Eigenvalues sorted by descending modulus.
ComplexVector floquet_multipliers(const Matrix& z);

struct MSFRow {
  double sigma = 0.0;
  std::vector<ComplexVector> multipliers;  // one set per Laplacian eigenvalue
  double msf = 0.0;     // max log-modulus over the transverse blocks i >= 2
  bool stable = false;  // msf < 0
  bool ok = true;
  std::string error;
};

using MSFTable = std::vector<MSFRow>;

/// One MSF evaluation: reduced multipliers for every Laplacian eigenvalue at
/// nu = sigma * lambda_i; the i = 1 block (nu = 0) is reported but excluded
/// from the max.
MSFRow msf_value(const AgentModel& model, const OrbitSkeleton& skeleton,
                 const NetworkTopology& topology, double sigma, double step);

/// Sweep over a sigma grid; rows are independent and may be computed on a
/// worker pool. Per-row failures are recorded in the row and the sweep goes on.
MSFTable msf_sweep(const AgentModel& model, const OrbitSkeleton& skeleton,
                   const NetworkTopology& topology,
                   const std::vector<double>& sigma_grid, double step, int jobs = 1);

struct ValidationReport {
  double sigma = 0.0;
  std::vector<Complex> full_spectrum;   // descending modulus
  std::vector<Complex> reduced_union;   // descending modulus
  double matching_distance = 0.0;       // greedy pairing, relative
  double b_row_residual = 0.0;          // max |grad(h)^T (E+B)| on sliding samples
  double eb_norm = 0.0;                 // max ||E+B|| on sliding samples (diagnostic)
  double saltation_field_residual = 0.0;       // max rel |S f_in - f_out|
  double saltation_projection_residual = 0.0;  // max |grad(h)^T S| at entries
  bool pass = false;
};

inline constexpr double kMatchingTol = 1e-8;
inline constexpr double kIdentityTol = 1e-12;

/// Cross-validate the reduced computation against the full n*N monodromy:
/// the two spectra must agree as multisets. Guarded to n*N <= 64.
ValidationReport validate_against_full(const AgentModel& model,
                                       const OrbitSkeleton& skeleton,
                                       const NetworkTopology& topology, double sigma,
                                       double step);

}  // namespace pwsmsf
