#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ringqed/linalg.hpp"

namespace ringqed::fit {

/// A fittable model: evaluator plus analytic Jacobian row. Parameters flagged
/// in `log_scaled` are kept positive by fitting their logarithm internally;
/// params/covariance are always exposed on the linear scale.
struct Model {
  std::string name;
  std::vector<std::string> param_names;
  std::vector<bool> log_scaled;
  std::function<double(double x, std::span<const double> p)> eval;
  /// Fills df/dp_j at x into `row` (size n_params), linear scale.
  std::function<void(double x, std::span<const double> p, std::span<double> row)> jacobian_row;

  std::size_t n_params() const { return param_names.size(); }
};

/// Lorentzian peak, params [amplitude, center, fwhm, baseline]:
/// f(x) = A / (1 + (2(x-c)/w)^2) + b.
Model lorentzian_model();

/// Sum of n Lorentzians with a shared baseline, params
/// [A1, c1, w1, ..., An, cn, wn, baseline].
Model multi_lorentzian_model(int n_peaks);

/// Single exponential, params [amplitude, tau, baseline]:
/// f(t) = A exp(-t/tau) + b.
Model exp_decay_model();

/// Rabi-style damped cosine, params [amplitude, frequency, decay_time,
/// baseline]: f(t) = b - (A/2)(1 - cos(2 pi f t)) exp(-t/T). The fitted
/// amplitude is the t->0 peak-to-trough swing; frequency is in cycles per
/// x-unit.
Model damped_cosine_model();

struct FitOptions {
  double lambda0 = 1e-3;          // initial damping
  double lambda_up = 10.0;        // on rejected step
  double lambda_down = 0.1;       // on accepted step
  double lambda_max = 1e12;       // stall guard
  double chi2_rel_tol = 1e-10;    // relative chi^2 change for convergence
  int max_iterations = 200;
};

struct FitResult {
  std::vector<double> params;
  Matrix covariance;             // symmetric PSD, linear scale
  std::vector<double> sigmas;    // sqrt(diagonal)
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  int n_iterations = 0;
  bool converged = false;
  std::string termination_reason;
  std::vector<double> chi2_trace;  // chi^2 after each accepted step
  std::size_t dof = 0;

  std::string to_json() const;
};

/// Damped (Levenberg-Marquardt) least squares, minimizing
/// sum_i w_i (y_i - f(x_i; theta))^2. Weights empty -> unit weights.
FitResult fit(const Model& model, std::span<const double> x, std::span<const double> y,
              std::span<const double> weights, std::vector<double> init,
              const FitOptions& options = {});

/// Central finite-difference Jacobian on the linear scale,
/// step_j = rel_step * max(|theta_j|, floor).
Matrix numeric_jacobian(const Model& model, std::span<const double> params,
                        std::span<const double> x, double rel_step, double floor = 1.0);

/// Poisson-approximation weights for count data, w_i = 1 / max(y_i, 1).
std::vector<double> poisson_weights(std::span<const double> y);

struct QResult {
  double q = 0.0;
  double sigma = 0.0;
};

/// Q = center/fwhm from a single-Lorentzian fit, uncertainty by first-order
/// propagation of the (center, fwhm) covariance block.
QResult extract_q(const FitResult& lorentzian_fit);

struct FsrResult {
  double fsr = 0.0;
  double sigma = 0.0;  // standard error of the adjacent differences
};

/// Mean adjacent spacing of sorted peak centers; needs at least three.
FsrResult extract_fsr(const std::vector<double>& peak_centers);

struct OdmrPeaks {
  double f1 = 0.0, sigma1 = 0.0;
  double f2 = 0.0, sigma2 = 0.0;
  double contrast1 = 0.0, contrast2 = 0.0;  // fitted heights above baseline
  bool unresolved = false;  // centers closer than half a linewidth
};

/// Ordered peak centers, uncertainties, and contrasts from a two-Lorentzian fit.
OdmrPeaks extract_odmr_peaks(const FitResult& two_lorentzian_fit);

/// Data-driven starting point for any built-in model (peak picking for the
/// Lorentzian kinds, log-linear slope for the decay, first-minimum period for
/// the damped cosine).
std::vector<double> initial_guess(const Model& model, std::span<const double> x,
                                  std::span<const double> y);

}  // namespace ringqed::fit
