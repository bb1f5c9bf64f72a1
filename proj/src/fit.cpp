#include "ringqed/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ringqed/common.hpp"

namespace ringqed::fit {

namespace {

// Internal coordinates: u_j = log(theta_j) for log-scaled parameters.
std::vector<double> to_internal(const Model& model, const std::vector<double>& p) {
  std::vector<double> u(p);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (model.log_scaled[j]) {
      if (!(p[j] > 0.0))
        throw ValidationError("parameter '" + model.param_names[j] +
                              "' must be positive (fitted on a log scale)");
      u[j] = std::log(p[j]);
    }
  }
  return u;
}

std::vector<double> to_linear(const Model& model, const std::vector<double>& u) {
  std::vector<double> p(u);
  for (std::size_t j = 0; j < u.size(); ++j)
    if (model.log_scaled[j]) p[j] = std::exp(u[j]);
  return p;
}

double weighted_chi2(const Model& model, std::span<const double> x, std::span<const double> y,
                     std::span<const double> w, const std::vector<double>& p) {
  double chi2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - model.eval(x[i], p);
    chi2 += w[i] * r * r;
  }
  return chi2;
}

// J^T W J and J^T W r in internal coordinates (chain rule multiplies the
// log-scaled columns by theta_j).
void build_normal_equations(const Model& model, std::span<const double> x,
                            std::span<const double> y, std::span<const double> w,
                            const std::vector<double>& p, Matrix& jtj,
                            std::vector<double>& jtr) {
  const std::size_t n = model.n_params();
  jtj = Matrix(n, n);
  jtr.assign(n, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    model.jacobian_row(x[i], p, row);
    for (std::size_t j = 0; j < n; ++j)
      if (model.log_scaled[j]) row[j] *= p[j];
    const double r = y[i] - model.eval(x[i], p);
    for (std::size_t j = 0; j < n; ++j) {
      jtr[j] += w[i] * row[j] * r;
      for (std::size_t k = j; k < n; ++k) jtj(j, k) += w[i] * row[j] * row[k];
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k) jtj(j, k) = jtj(k, j);
}

Matrix linear_jtj(const Model& model, std::span<const double> x, std::span<const double> w,
                  const std::vector<double>& p) {
  const std::size_t n = model.n_params();
  Matrix jtj(n, n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    model.jacobian_row(x[i], p, row);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) jtj(j, k) += w[i] * row[j] * row[k];
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k) jtj(j, k) = jtj(k, j);
  return jtj;
}

}  // namespace

std::vector<double> poisson_weights(std::span<const double> y) {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = 1.0 / std::max(y[i], 1.0);
  return w;
}

FitResult fit(const Model& model, std::span<const double> x, std::span<const double> y,
              std::span<const double> weights, std::vector<double> init,
              const FitOptions& options) {
  const std::size_t n = model.n_params();
  if (x.size() != y.size()) throw ValidationError("x and y must have equal length");
  if (x.size() < n) throw ValidationError("need at least as many points as parameters");
  if (init.size() != n) throw ValidationError("init has wrong length for model " + model.name);
  for (double v : init)
    if (!std::isfinite(v)) throw ValidationError("init parameters must be finite");

  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(x.size(), 1.0);
  if (w.size() != x.size()) throw ValidationError("weights must match data length");
  for (double v : w)
    if (!(v > 0.0)) throw ValidationError("weights must be positive");

  std::vector<double> u = to_internal(model, init);
  std::vector<double> p = to_linear(model, u);
  double chi2 = weighted_chi2(model, x, y, w, p);
  if (!std::isfinite(chi2)) throw ComputeError("model not finite at the starting point");

  FitResult result;
  result.chi2_trace.push_back(chi2);

  double lambda = options.lambda0;
  Matrix jtj;
  std::vector<double> jtr, step, u_try;
  bool converged = false;
  std::string reason = "iteration cap";
  int iter = 0;

  while (iter < options.max_iterations) {
    ++iter;
    build_normal_equations(model, x, y, w, p, jtj, jtr);

    bool accepted = false;
    while (lambda <= options.lambda_max) {
      Matrix damped = jtj;
      bool has_scale = false;
      for (std::size_t j = 0; j < n; ++j) {
        damped(j, j) += lambda * jtj(j, j);
        if (jtj(j, j) > 0.0) has_scale = true;
      }
      if (!has_scale) throw ComputeError("degenerate fit");
      if (!cholesky_solve(damped, jtr, step)) {
        lambda *= options.lambda_up;
        continue;
      }
      u_try = u;
      for (std::size_t j = 0; j < n; ++j) u_try[j] += step[j];
      const std::vector<double> p_try = to_linear(model, u_try);
      const double chi2_try = weighted_chi2(model, x, y, w, p_try);
      if (std::isfinite(chi2_try) && chi2_try <= chi2) {
        // Accepted steps never increase chi^2.
        const double rel_drop = (chi2 - chi2_try) / std::max(chi2, 1e-300);
        u = u_try;
        p = p_try;
        chi2 = chi2_try;
        result.chi2_trace.push_back(chi2);
        lambda = std::max(lambda * options.lambda_down, 1e-12);
        accepted = true;
        if (rel_drop < options.chi2_rel_tol) {
          converged = true;
          reason = chi2 == 0.0 ? "chi2 zero" : "chi2 tolerance";
        }
        break;
      }
      lambda *= options.lambda_up;
    }
    if (!accepted) {
      reason = "damping saturated";
      break;
    }
    if (converged) break;
  }

  result.params = p;
  result.chi2 = chi2;
  result.n_iterations = iter;
  result.converged = converged;
  result.termination_reason = reason;
  result.dof = x.size() > n ? x.size() - n : 0;
  result.reduced_chi2 = result.dof > 0 ? chi2 / static_cast<double>(result.dof) : 0.0;

  // Covariance on the linear scale at the solution:
  // (J^T W J)^-1 * reduced chi^2 (unscaled when dof == 0).
  Matrix jtj_lin = linear_jtj(model, x, w, p);
  Matrix inv;
  if (!invert_spd(jtj_lin, inv)) throw ComputeError("degenerate fit");
  const double scale = result.dof > 0 ? result.reduced_chi2 : 1.0;
  result.covariance = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) result.covariance(i, j) = inv(i, j) * scale;
  result.sigmas.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    result.sigmas[j] = std::sqrt(std::max(result.covariance(j, j), 0.0));
  return result;
}

Matrix numeric_jacobian(const Model& model, std::span<const double> params,
                        std::span<const double> x, double rel_step, double floor) {
  if (!(rel_step > 0.0)) throw ValidationError("rel_step must be positive");
  const std::size_t n = model.n_params();
  Matrix jac(x.size(), n);
  std::vector<double> plus(params.begin(), params.end());
  std::vector<double> minus(params.begin(), params.end());
  for (std::size_t j = 0; j < n; ++j) {
    const double h = rel_step * std::max(std::abs(params[j]), floor);
    plus[j] = params[j] + h;
    minus[j] = params[j] - h;
    for (std::size_t i = 0; i < x.size(); ++i)
      jac(i, j) = (model.eval(x[i], plus) - model.eval(x[i], minus)) / (2.0 * h);
    plus[j] = params[j];
    minus[j] = params[j];
  }
  return jac;
}

QResult extract_q(const FitResult& lorentzian_fit) {
  const auto& p = lorentzian_fit.params;
  if (p.size() != 4) throw ValidationError("extract_q expects a single-Lorentzian fit");
  const double c = p[1], w = p[2];
  if (!(w > 0.0)) throw ValidationError("fitted fwhm must be positive");
  QResult r;
  r.q = c / w;
  const auto& cov = lorentzian_fit.covariance;
  // First-order propagation: dQ/dc = 1/w, dQ/dw = -c/w^2.
  const double gc = 1.0 / w, gw = -c / (w * w);
  const double var = gc * gc * cov(1, 1) + gw * gw * cov(2, 2) + 2.0 * gc * gw * cov(1, 2);
  r.sigma = std::sqrt(std::max(var, 0.0));
  return r;
}

FsrResult extract_fsr(const std::vector<double>& peak_centers) {
  if (peak_centers.size() < 3) throw ValidationError("insufficient modes");
  if (!std::is_sorted(peak_centers.begin(), peak_centers.end()))
    throw ValidationError("peak centers must be sorted ascending");
  std::vector<double> diffs(peak_centers.size() - 1);
  for (std::size_t i = 0; i + 1 < peak_centers.size(); ++i)
    diffs[i] = peak_centers[i + 1] - peak_centers[i];
  const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / diffs.size();
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  var /= (diffs.size() > 1 ? diffs.size() - 1 : 1);
  FsrResult r;
  r.fsr = mean;
  r.sigma = std::sqrt(var / diffs.size());
  return r;
}

OdmrPeaks extract_odmr_peaks(const FitResult& two_lorentzian_fit) {
  const auto& p = two_lorentzian_fit.params;
  if (p.size() != 7) throw ValidationError("extract_odmr_peaks expects a two-Lorentzian fit");
  const auto& cov = two_lorentzian_fit.covariance;
  struct Peak {
    double a, c, w, sc;
  };
  Peak peaks[2] = {{p[0], p[1], p[2], std::sqrt(std::max(cov(1, 1), 0.0))},
                   {p[3], p[4], p[5], std::sqrt(std::max(cov(4, 4), 0.0))}};
  // Ascending center; ties broken by amplitude (descending) for determinism.
  if (peaks[0].c > peaks[1].c ||
      (peaks[0].c == peaks[1].c && peaks[0].a < peaks[1].a))
    std::swap(peaks[0], peaks[1]);
  OdmrPeaks out;
  out.f1 = peaks[0].c;
  out.sigma1 = peaks[0].sc;
  out.f2 = peaks[1].c;
  out.sigma2 = peaks[1].sc;
  out.contrast1 = peaks[0].a;
  out.contrast2 = peaks[1].a;
  out.unresolved = std::abs(peaks[1].c - peaks[0].c) < 0.25 * (peaks[0].w + peaks[1].w);
  return out;
}

namespace {

struct PickedPeak {
  double height = 0.0;
  double center = 0.0;
  double width = 0.0;
};

// Local maxima ranked by height, with a half-maximum width scan. The
// baseline estimate is a low quantile, which tolerates combs where most
// samples sit on the floor as well as broad overlapping peaks.
std::vector<PickedPeak> pick_peaks(std::span<const double> x, std::span<const double> y,
                                   std::size_t n_peaks, double baseline) {
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] >= y[i - 1] && y[i] > y[i + 1]) maxima.push_back(i);
  std::sort(maxima.begin(), maxima.end(),
            [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });

  const double span = x.back() - x.front();
  const double min_width = 2.0 * span / static_cast<double>(x.size());
  std::vector<PickedPeak> picked;
  for (std::size_t idx : maxima) {
    if (picked.size() >= n_peaks) break;
    const double height = y[idx] - baseline;
    if (!(height > 0.0)) continue;
    const double half = baseline + 0.5 * height;
    std::size_t lo = idx, hi = idx;
    while (lo > 0 && y[lo] > half) --lo;
    while (hi + 1 < y.size() && y[hi] > half) ++hi;
    double width = std::clamp(x[hi] - x[lo], min_width, 0.25 * span);
    // Skip maxima that sit inside an already-picked peak.
    bool shadowed = false;
    for (const auto& pk : picked)
      if (std::abs(x[idx] - pk.center) < std::max(pk.width, width)) shadowed = true;
    if (shadowed) continue;
    picked.push_back({height, x[idx], width});
  }
  // Pad with evenly spread guesses if the data offered too few maxima.
  while (picked.size() < n_peaks) {
    const double frac = (picked.size() + 1.0) / (n_peaks + 1.0);
    picked.push_back({std::max(*std::max_element(y.begin(), y.end()) - baseline, 1e-6),
                      x.front() + frac * span, span / (10.0 * n_peaks)});
  }
  std::sort(picked.begin(), picked.end(),
            [](const PickedPeak& a, const PickedPeak& b) { return a.center < b.center; });
  return picked;
}

std::vector<double> init_exp_decay(std::span<const double> x, std::span<const double> y) {
  // Baseline from the tail, slope of log(y - b) over the bright early bins.
  const std::size_t n = x.size();
  std::size_t tail = std::max<std::size_t>(n / 20, 1);
  double baseline = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) baseline += y[i];
  baseline /= tail;
  const double peak = *std::max_element(y.begin(), y.end());
  double amp = std::max(peak - baseline, 1e-12);

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = y[i] - baseline;
    if (v > 0.05 * amp) {
      const double ly = std::log(v);
      sx += x[i];
      sy += ly;
      sxx += x[i] * x[i];
      sxy += x[i] * ly;
      ++m;
    }
  }
  double tau = (x.back() - x.front()) / 3.0;
  if (m >= 2) {
    const double denom = m * sxx - sx * sx;
    if (std::abs(denom) > 0.0) {
      const double slope = (m * sxy - sx * sy) / denom;
      if (slope < 0.0) {
        tau = -1.0 / slope;
        amp = std::exp((sy - slope * sx) / m);
      }
    }
  }
  return {amp, tau, std::max(baseline, 1e-12 * amp)};
}

std::vector<double> init_damped_cosine(std::span<const double> x, std::span<const double> y) {
  const double ymax = *std::max_element(y.begin(), y.end());
  const double ymin = *std::min_element(y.begin(), y.end());
  const double amp = std::max(ymax - ymin, 1e-12);
  // The signal starts at its bright baseline and bottoms out half a period
  // in; with a slow envelope the global minimum is that first trough.
  const std::size_t i_min =
      std::min_element(y.begin(), y.end()) - y.begin();
  double half_period = i_min > 0 ? (x[i_min] - x.front())
                                 : (x.back() - x.front()) / 4.0;
  if (!(half_period > 0.0)) half_period = (x.back() - x.front()) / 4.0;
  const double freq = 1.0 / (2.0 * half_period);
  const double decay = std::max(x.back() - x.front(), 10.0 * half_period);
  return {amp, freq, decay, ymax};
}

}  // namespace

std::vector<double> initial_guess(const Model& model, std::span<const double> x,
                                  std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3)
    throw ValidationError("initial_guess needs at least three points");
  if (model.name == "lorentzian" || model.name == "multi_lorentzian") {
    const std::size_t n_peaks = (model.n_params() - 1) / 3;
    std::vector<double> sorted(y.begin(), y.end());
    std::sort(sorted.begin(), sorted.end());
    const double baseline = sorted[sorted.size() / 4];  // lower-quartile floor
    const auto picked = pick_peaks(x, y, n_peaks, baseline);
    std::vector<double> init;
    for (const auto& pk : picked) {
      init.push_back(pk.height);
      init.push_back(pk.center);
      init.push_back(pk.width);
    }
    init.push_back(baseline);
    return init;
  }
  if (model.name == "exp_decay") return init_exp_decay(x, y);
  if (model.name == "damped_cosine") return init_damped_cosine(x, y);
  throw ValidationError("no initial-guess rule for model " + model.name);
}

std::string FitResult::to_json() const {
  nlohmann::json j;
  j["params"] = params;
  j["sigmas"] = sigmas;
  j["chi2"] = chi2;
  j["reduced_chi2"] = reduced_chi2;
  j["dof"] = dof;
  j["n_iterations"] = n_iterations;
  j["converged"] = converged;
  j["termination_reason"] = termination_reason;
  std::vector<std::vector<double>> cov(covariance.rows());
  for (std::size_t i = 0; i < covariance.rows(); ++i) {
    cov[i].resize(covariance.cols());
    for (std::size_t k = 0; k < covariance.cols(); ++k) cov[i][k] = covariance(i, k);
  }
  j["covariance"] = cov;
  return j.dump(2);
}

}  // namespace ringqed::fit
