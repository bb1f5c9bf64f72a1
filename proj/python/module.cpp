#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ringqed/cavity.hpp"
#include "ringqed/common.hpp"
#include "ringqed/emitter.hpp"
#include "ringqed/fit.hpp"
#include "ringqed/pipeline.hpp"
#include "ringqed/spin.hpp"

namespace py = pybind11;
using namespace ringqed;

namespace {

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows[i].resize(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Micro-ring cavity / PL4 spin-ensemble simulator and least-squares analysis toolkit";
  m.attr("__version__") = kToolkitVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ComputeError>(m, "ComputeError", PyExc_RuntimeError);

  // cavity ---------------------------------------------------------------
  py::class_<cavity::RingGeometry>(m, "RingGeometry")
      .def(py::init<double, double, double, double>(), py::arg("diameter_um"), py::arg("n_eff"),
           py::arg("n_g"), py::arg("reference_wavelength_nm") = 1100.0)
      .def_readonly("diameter_um", &cavity::RingGeometry::diameter_um)
      .def_readonly("n_g", &cavity::RingGeometry::n_g)
      .def("n_eff", &cavity::RingGeometry::n_eff, py::arg("wavelength_nm"))
      .def("circumference_nm", &cavity::RingGeometry::circumference_nm);

  py::class_<cavity::CavityMode>(m, "CavityMode")
      .def(py::init<int, double, double, double>(), py::arg("azimuthal_order"),
           py::arg("center_wavelength_nm"), py::arg("q_factor"), py::arg("tuning_offset_nm") = 0.0)
      .def_readonly("azimuthal_order", &cavity::CavityMode::azimuthal_order)
      .def_readonly("center_wavelength_nm", &cavity::CavityMode::center_wavelength_nm)
      .def_readonly("q_factor", &cavity::CavityMode::q_factor)
      .def_readonly("tuning_offset_nm", &cavity::CavityMode::tuning_offset_nm)
      .def("effective_center_nm", &cavity::CavityMode::effective_center_nm)
      .def("fwhm_nm", &cavity::CavityMode::fwhm_nm);

  py::class_<cavity::TuningState>(m, "TuningState")
      .def(py::init([](double alpha, double saturation) {
             cavity::TuningState s;
             s.alpha_nm_per_pal = alpha;
             s.saturation_shift_nm = saturation;
             return s;
           }),
           py::arg("alpha_nm_per_pal") = 0.4, py::arg("saturation_shift_nm") = 10.0)
      .def_readonly("alpha_nm_per_pal", &cavity::TuningState::alpha_nm_per_pal)
      .def_readonly("saturation_shift_nm", &cavity::TuningState::saturation_shift_nm)
      .def("total_dose_pal", &cavity::TuningState::total_dose_pal)
      .def("cumulative_shift_nm", &cavity::TuningState::cumulative_shift_nm);

  m.def("resonance_wavelengths", &cavity::resonance_wavelengths, py::arg("geometry"),
        py::arg("band_min_nm"), py::arg("band_max_nm"), py::arg("q_factor") = 1000.0);
  m.def("free_spectral_range", &cavity::free_spectral_range, py::arg("geometry"),
        py::arg("wavelength_nm"));
  m.def("mode_lineshape", &cavity::mode_lineshape, py::arg("mode"), py::arg("grid_nm"));
  m.def("apply_injection", &cavity::apply_injection, py::arg("state"), py::arg("mode"),
        py::arg("pressure_pa"), py::arg("volume_l"));
  m.def("reset_tuning", &cavity::reset_tuning, py::arg("state"), py::arg("mode"));
  m.def("detuning", &cavity::detuning, py::arg("mode"), py::arg("target_wavelength_nm"));

  // emitter --------------------------------------------------------------
  py::class_<emitter::EmitterParams>(m, "EmitterParams")
      .def_static("from_lifetime_and_dwf", &emitter::EmitterParams::from_lifetime_and_dwf,
                  py::arg("tau_off_ns"), py::arg("xi_zpl"), py::arg("tau_0_ns"))
      .def_readonly("tau_zpl_ns", &emitter::EmitterParams::tau_zpl_ns)
      .def_readonly("tau_psb_ns", &emitter::EmitterParams::tau_psb_ns)
      .def_readonly("tau_off_ns", &emitter::EmitterParams::tau_off_ns)
      .def_readonly("tau_0_ns", &emitter::EmitterParams::tau_0_ns)
      .def_readonly("xi_zpl", &emitter::EmitterParams::xi_zpl);

  py::class_<emitter::PurcellResult>(m, "PurcellResult")
      .def_readonly("f", &emitter::PurcellResult::f)
      .def_readonly("negative_warning", &emitter::PurcellResult::negative_warning);

  py::class_<emitter::DecayTrace>(m, "DecayTrace")
      .def_readonly("bin_edges_ns", &emitter::DecayTrace::bin_edges_ns)
      .def_readonly("counts", &emitter::DecayTrace::counts)
      .def_readonly("rep_period_ns", &emitter::DecayTrace::rep_period_ns)
      .def_readonly("pileup_warning", &emitter::DecayTrace::pileup_warning)
      .def("bin_centers_ns", &emitter::DecayTrace::bin_centers_ns)
      .def("to_csv", &emitter::DecayTrace::to_csv);

  m.def("rate_off", &emitter::rate_off, py::arg("params"));
  m.def("rate_on", &emitter::rate_on, py::arg("params"), py::arg("f"));
  m.def("purcell_from_lifetime_ratio", &emitter::purcell_from_lifetime_ratio,
        py::arg("tau_off_ns"), py::arg("tau_on_ns"), py::arg("xi_zpl"));
  m.def("purcell_from_reference_lifetime", &emitter::purcell_from_reference_lifetime,
        py::arg("tau_0_ns"), py::arg("dwf"), py::arg("tau_on_ns"), py::arg("tau_off_ns"));
  m.def("dwf_from_spectrum", &emitter::dwf_from_spectrum, py::arg("wavelength_nm"),
        py::arg("intensity"), py::arg("window_min_nm"), py::arg("window_max_nm"),
        py::arg("flat_baseline") = 0.0);
  m.def("purcell_vs_detuning", &emitter::purcell_vs_detuning, py::arg("f_max"), py::arg("mode"),
        py::arg("detuning_nm"));
  m.def("simulate_decay_trace", &emitter::simulate_decay_trace, py::arg("params"), py::arg("f"),
        py::arg("total_counts"), py::arg("n_bins"), py::arg("rep_period_ns"), py::arg("seed"),
        py::arg("background_fraction") = 0.0);
  m.def("zpl_output_enhancement", &emitter::zpl_output_enhancement, py::arg("f"),
        py::arg("eta_ratio"));

  // spin -----------------------------------------------------------------
  py::class_<spin::SpinParams>(m, "SpinParams")
      .def(py::init<double, double, double, double>(), py::arg("d_zfs_mhz"), py::arg("e_zfs_mhz"),
           py::arg("intrinsic_contrast"), py::arg("odmr_linewidth_mhz"))
      .def_readonly("d_zfs_mhz", &spin::SpinParams::d_zfs_mhz)
      .def_readonly("e_zfs_mhz", &spin::SpinParams::e_zfs_mhz)
      .def_readonly("intrinsic_contrast", &spin::SpinParams::intrinsic_contrast)
      .def_readonly("odmr_linewidth_mhz", &spin::SpinParams::odmr_linewidth_mhz);

  py::enum_<spin::CollectionPath>(m, "CollectionPath")
      .value("confocal_off", spin::CollectionPath::confocal_off)
      .value("grating_off", spin::CollectionPath::grating_off)
      .value("grating_on", spin::CollectionPath::grating_on);

  py::class_<spin::OdmrDataset>(m, "OdmrDataset")
      .def_readonly("freq_mhz", &spin::OdmrDataset::freq_mhz)
      .def_readonly("contrast", &spin::OdmrDataset::contrast)
      .def_readonly("collection_path", &spin::OdmrDataset::collection_path)
      .def("to_csv", &spin::OdmrDataset::to_csv);

  py::class_<spin::DEResult>(m, "DEResult")
      .def_readonly("d_mhz", &spin::DEResult::d_mhz)
      .def_readonly("e_mhz", &spin::DEResult::e_mhz)
      .def_readonly("swapped", &spin::DEResult::swapped);

  m.def("zero_field_transitions", &spin::zero_field_transitions, py::arg("params"));
  m.def("d_e_from_transitions", &spin::d_e_from_transitions, py::arg("f1_mhz"), py::arg("f2_mhz"));
  m.def("odmr_spectrum", &spin::odmr_spectrum, py::arg("params"), py::arg("photon_fraction"),
        py::arg("freq_grid_mhz"), py::arg("path") = spin::CollectionPath::confocal_off);
  m.def("contrast_dilution", &spin::contrast_dilution, py::arg("intrinsic_contrast"),
        py::arg("path_fraction"));
  m.def("rabi_trace", &spin::rabi_trace, py::arg("rabi_frequency_mhz"), py::arg("contrast"),
        py::arg("decay_time_ns"), py::arg("t_grid_ns"));

  // fit ------------------------------------------------------------------
  py::class_<fit::Model>(m, "Model")
      .def_readonly("name", &fit::Model::name)
      .def_readonly("param_names", &fit::Model::param_names)
      .def("n_params", &fit::Model::n_params)
      .def("__call__", [](const fit::Model& model, double x, const std::vector<double>& p) {
        return model.eval(x, p);
      });
  m.def("lorentzian_model", &fit::lorentzian_model);
  m.def("multi_lorentzian_model", &fit::multi_lorentzian_model, py::arg("n_peaks"));
  m.def("exp_decay_model", &fit::exp_decay_model);
  m.def("damped_cosine_model", &fit::damped_cosine_model);

  py::class_<fit::FitResult>(m, "FitResult")
      .def_readonly("params", &fit::FitResult::params)
      .def_readonly("sigmas", &fit::FitResult::sigmas)
      .def_readonly("chi2", &fit::FitResult::chi2)
      .def_readonly("reduced_chi2", &fit::FitResult::reduced_chi2)
      .def_readonly("n_iterations", &fit::FitResult::n_iterations)
      .def_readonly("converged", &fit::FitResult::converged)
      .def_readonly("termination_reason", &fit::FitResult::termination_reason)
      .def_property_readonly(
          "covariance",
          [](const fit::FitResult& r) { return matrix_to_rows(r.covariance); })
      .def("to_json", &fit::FitResult::to_json);

  m.def(
      "fit",
      [](const fit::Model& model, const std::vector<double>& x, const std::vector<double>& y,
         const std::vector<double>& weights, std::vector<double> init) {
        return fit::fit(model, x, y, weights, std::move(init));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("weights") = std::vector<double>{},
      py::arg("init") = std::vector<double>{});
  m.def("initial_guess",
        [](const fit::Model& model, const std::vector<double>& x, const std::vector<double>& y) {
          return fit::initial_guess(model, x, y);
        });
  m.def("poisson_weights",
        [](const std::vector<double>& y) { return fit::poisson_weights(y); });
  m.def("numeric_jacobian",
        [](const fit::Model& model, const std::vector<double>& params,
           const std::vector<double>& x, double rel_step, double floor) {
          return matrix_to_rows(fit::numeric_jacobian(model, params, x, rel_step, floor));
        },
        py::arg("model"), py::arg("params"), py::arg("x"), py::arg("rel_step") = 1e-6,
        py::arg("floor") = 1.0);

  py::class_<fit::QResult>(m, "QResult")
      .def_readonly("q", &fit::QResult::q)
      .def_readonly("sigma", &fit::QResult::sigma);
  m.def("extract_q", &fit::extract_q, py::arg("lorentzian_fit"));

  py::class_<fit::FsrResult>(m, "FsrResult")
      .def_readonly("fsr", &fit::FsrResult::fsr)
      .def_readonly("sigma", &fit::FsrResult::sigma);
  m.def("extract_fsr", &fit::extract_fsr, py::arg("peak_centers"));

  py::class_<fit::OdmrPeaks>(m, "OdmrPeaks")
      .def_readonly("f1", &fit::OdmrPeaks::f1)
      .def_readonly("sigma1", &fit::OdmrPeaks::sigma1)
      .def_readonly("f2", &fit::OdmrPeaks::f2)
      .def_readonly("sigma2", &fit::OdmrPeaks::sigma2)
      .def_readonly("contrast1", &fit::OdmrPeaks::contrast1)
      .def_readonly("contrast2", &fit::OdmrPeaks::contrast2)
      .def_readonly("unresolved", &fit::OdmrPeaks::unresolved);
  m.def("extract_odmr_peaks", &fit::extract_odmr_peaks, py::arg("two_lorentzian_fit"));

  // pipeline ---------------------------------------------------------------
  py::class_<pipeline::ReportRecord>(m, "ReportRecord")
      .def_readonly("name", &pipeline::ReportRecord::name)
      .def_readonly("recovered", &pipeline::ReportRecord::recovered)
      .def_readonly("uncertainty", &pipeline::ReportRecord::uncertainty)
      .def_readonly("target", &pipeline::ReportRecord::target)
      .def_readonly("tolerance", &pipeline::ReportRecord::tolerance)
      .def_readonly("target_source", &pipeline::ReportRecord::target_source)
      .def_readonly("pass_", &pipeline::ReportRecord::pass);

  py::class_<pipeline::Report>(m, "Report")
      .def_readonly("records", &pipeline::Report::records)
      .def_readonly("config_hash", &pipeline::Report::config_hash)
      .def_readonly("seed", &pipeline::Report::seed)
      .def("all_pass", &pipeline::Report::all_pass)
      .def("to_json", &pipeline::Report::to_json);

  py::class_<pipeline::Scenario>(m, "Scenario")
      .def_readonly("seed", &pipeline::Scenario::seed)
      .def_readonly("zpl_wavelength_nm", &pipeline::Scenario::zpl_wavelength_nm)
      .def_readwrite("parallel", &pipeline::Scenario::parallel)
      .def_readonly("config_hash", &pipeline::Scenario::config_hash);

  py::class_<pipeline::Target>(m, "Target")
      .def_readonly("value", &pipeline::Target::value)
      .def_readonly("statistical", &pipeline::Target::statistical)
      .def_readonly("source", &pipeline::Target::source);
  m.def("target_tolerance", &pipeline::target_tolerance, py::arg("target"));

  m.def("load_scenario", &pipeline::load_scenario, py::arg("path"));
  m.def("parse_scenario", &pipeline::parse_scenario, py::arg("json_text"));
  m.def("load_targets", &pipeline::load_targets, py::arg("path"));
  m.def("run_scenario", &pipeline::run_scenario, py::arg("scenario"), py::arg("targets"),
        py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());
}
