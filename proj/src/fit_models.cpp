#include <cmath>

#include "ringqed/common.hpp"
#include "ringqed/fit.hpp"

namespace ringqed::fit {

namespace {
constexpr double kTwoPi = 6.283185307179586;
}

Model lorentzian_model() {
  Model m;
  m.name = "lorentzian";
  m.param_names = {"amplitude", "center", "fwhm", "baseline"};
  m.log_scaled = {true, false, true, false};
  m.eval = [](double x, std::span<const double> p) {
    const double z = 2.0 * (x - p[1]) / p[2];
    return p[0] / (1.0 + z * z) + p[3];
  };
  m.jacobian_row = [](double x, std::span<const double> p, std::span<double> row) {
    const double z = 2.0 * (x - p[1]) / p[2];
    const double den = 1.0 + z * z;
    row[0] = 1.0 / den;
    row[1] = 4.0 * p[0] * z / (p[2] * den * den);
    row[2] = 2.0 * p[0] * z * z / (p[2] * den * den);
    row[3] = 1.0;
  };
  return m;
}

Model multi_lorentzian_model(int n_peaks) {
  if (n_peaks < 1) throw ValidationError("multi_lorentzian needs at least one peak");
  Model m;
  m.name = "multi_lorentzian";
  for (int k = 0; k < n_peaks; ++k) {
    const std::string idx = std::to_string(k + 1);
    m.param_names.push_back("amplitude" + idx);
    m.param_names.push_back("center" + idx);
    m.param_names.push_back("fwhm" + idx);
    m.log_scaled.push_back(true);
    m.log_scaled.push_back(false);
    m.log_scaled.push_back(true);
  }
  m.param_names.push_back("baseline");
  m.log_scaled.push_back(false);
  m.eval = [n_peaks](double x, std::span<const double> p) {
    double sum = p[3 * n_peaks];
    for (int k = 0; k < n_peaks; ++k) {
      const double z = 2.0 * (x - p[3 * k + 1]) / p[3 * k + 2];
      sum += p[3 * k] / (1.0 + z * z);
    }
    return sum;
  };
  m.jacobian_row = [n_peaks](double x, std::span<const double> p, std::span<double> row) {
    for (int k = 0; k < n_peaks; ++k) {
      const double a = p[3 * k], w = p[3 * k + 2];
      const double z = 2.0 * (x - p[3 * k + 1]) / w;
      const double den = 1.0 + z * z;
      row[3 * k] = 1.0 / den;
      row[3 * k + 1] = 4.0 * a * z / (w * den * den);
      row[3 * k + 2] = 2.0 * a * z * z / (w * den * den);
    }
    row[3 * n_peaks] = 1.0;
  };
  return m;
}

Model exp_decay_model() {
  Model m;
  m.name = "exp_decay";
  m.param_names = {"amplitude", "tau", "baseline"};
  m.log_scaled = {true, true, false};
  m.eval = [](double x, std::span<const double> p) {
    return p[0] * std::exp(-x / p[1]) + p[2];
  };
  m.jacobian_row = [](double x, std::span<const double> p, std::span<double> row) {
    const double e = std::exp(-x / p[1]);
    row[0] = e;
    row[1] = p[0] * e * x / (p[1] * p[1]);
    row[2] = 1.0;
  };
  return m;
}

Model damped_cosine_model() {
  Model m;
  m.name = "damped_cosine";
  m.param_names = {"amplitude", "frequency", "decay_time", "baseline"};
  m.log_scaled = {true, true, true, false};
  m.eval = [](double x, std::span<const double> p) {
    const double env = std::exp(-x / p[2]);
    return p[3] - 0.5 * p[0] * (1.0 - std::cos(kTwoPi * p[1] * x)) * env;
  };
  m.jacobian_row = [](double x, std::span<const double> p, std::span<double> row) {
    const double env = std::exp(-x / p[2]);
    const double theta = kTwoPi * p[1] * x;
    const double dip = (1.0 - std::cos(theta)) * env;
    row[0] = -0.5 * dip;
    row[1] = -0.5 * p[0] * std::sin(theta) * kTwoPi * x * env;
    row[2] = -0.5 * p[0] * (1.0 - std::cos(theta)) * env * x / (p[2] * p[2]);
    row[3] = 1.0;
  };
  return m;
}

}  // namespace ringqed::fit
