// Local boundedness probes: the BL constant over a ball of perturbed maps.
//
// The size of a perturbation dL = (dL_1, ..., dL_m) is max_j ||dL_j||, the
// operator 2-norm of each block.
#pragma once

#include "blc/gauss_opt.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace blc {

using Perturbation = std::vector<Matrix>;

/// max_j ||dL_j||.
double perturbation_norm(const Perturbation& d);

/// Uniform on {||dL|| <= radius}: entries uniform in [-radius, radius],
/// each block redrawn until its operator norm is <= radius.
Perturbation sample_perturbation(const BLDatum& datum, double radius, Rng& rng);

/// Clips the singular values of every block to `radius`.
Perturbation project_to_ball(const Perturbation& d, double radius);

BLDatum perturbed(const BLDatum& datum, const Perturbation& d);

/// Gradient of log BL with respect to the maps at a converged global
/// extremiser A: d/dL_j = -p_j A_j L_j M^{-1} (the extremiser's own variation
/// vanishes).  Requires a positive-definite M.
Perturbation log_bl_gradient(const BLDatum& datum, const GaussianInput& extremiser);

struct StabilitySample {
  int index = 0;
  double norm = 0.0;
  double value = 0.0;  // +inf unless the run converged or plateaued
  std::string status;
};

struct StabilityReport {
  double base_value = 0.0;
  double radius = 0.0;
  std::vector<StabilitySample> samples;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
  /// Largest value found by projected gradient ascent from the best samples.
  double sup = 0.0;
  Perturbation sup_perturbation;
  int nonfinite = 0;
};

struct StabilityOptions {
  int samples = 200;
  int ascent_starts = 3;
  int ascent_iterations = 400;
};

/// Samples perturbations of a finite datum, recomputes the global constant
/// for each and estimates the supremum over the ball.  Throws
/// std::invalid_argument when the base datum is not finite.
StabilityReport stability_probe(const BLDatum& datum, double radius, std::uint64_t seed,
                                 const NumericPolicy& policy, const StabilityOptions& options = {});

/// Rows e_1 and (sin theta, cos theta) with p = (1, 1); BL = sec theta.
BLDatum rotated_rank_one(double theta);

}  // namespace blc
