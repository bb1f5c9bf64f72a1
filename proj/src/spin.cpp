#include "ringqed/spin.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ringqed/common.hpp"
#include "ringqed/csv.hpp"
#include "ringqed/rng.hpp"

namespace ringqed::spin {

namespace {
constexpr double kTwoPi = 6.283185307179586;

double lorentzian_unit_peak(double f, double center, double fwhm) {
  const double z = 2.0 * (f - center) / fwhm;
  return 1.0 / (1.0 + z * z);
}
}  // namespace

SpinParams::SpinParams(double d_mhz, double e_mhz, double contrast, double linewidth_mhz)
    : d_zfs_mhz(d_mhz), e_zfs_mhz(e_mhz), intrinsic_contrast(contrast),
      odmr_linewidth_mhz(linewidth_mhz) {
  if (!(d_zfs_mhz > e_zfs_mhz) || e_zfs_mhz < 0.0)
    throw ValidationError("zero-field splittings require D > E >= 0");
  if (!(intrinsic_contrast > 0.0 && intrinsic_contrast < 1.0))
    throw ValidationError("intrinsic contrast must lie in (0,1)");
  if (!(odmr_linewidth_mhz > 0.0)) throw ValidationError("ODMR linewidth must be positive");
}

const char* to_string(CollectionPath path) {
  switch (path) {
    case CollectionPath::confocal_off: return "confocal_off";
    case CollectionPath::grating_off: return "grating_off";
    case CollectionPath::grating_on: return "grating_on";
  }
  return "unknown";
}

std::string OdmrDataset::to_csv() const {
  return csv_to_string({"freq_MHz", "contrast"}, {freq_mhz, contrast});
}

void PulseSequence::validate() const {
  int n_readout = 0;
  for (const auto& seg : segments) {
    if (!(seg.duration_ns > 0.0)) throw ValidationError("pulse segment durations must be positive");
    if (seg.kind == PulseSegment::Kind::readout) ++n_readout;
  }
  if (n_readout != 1)
    throw ValidationError("pulse sequence must contain exactly one readout segment");
}

const PulseSegment& PulseSequence::readout() const {
  for (const auto& seg : segments)
    if (seg.kind == PulseSegment::Kind::readout) return seg;
  throw ValidationError("pulse sequence must contain exactly one readout segment");
}

const PulseSegment* PulseSequence::microwave() const {
  for (const auto& seg : segments)
    if (seg.kind == PulseSegment::Kind::microwave) return &seg;
  return nullptr;
}

namespace {
const char* segment_kind_name(PulseSegment::Kind k) {
  switch (k) {
    case PulseSegment::Kind::laser: return "laser";
    case PulseSegment::Kind::microwave: return "microwave";
    case PulseSegment::Kind::wait: return "wait";
    case PulseSegment::Kind::readout: return "readout";
  }
  return "unknown";
}

PulseSegment::Kind segment_kind_from_name(const std::string& name) {
  if (name == "laser") return PulseSegment::Kind::laser;
  if (name == "microwave") return PulseSegment::Kind::microwave;
  if (name == "wait") return PulseSegment::Kind::wait;
  if (name == "readout") return PulseSegment::Kind::readout;
  throw ValidationError("unknown pulse segment kind: " + name);
}
}  // namespace

std::string PulseSequence::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& seg : segments) {
    nlohmann::json j;
    j["kind"] = segment_kind_name(seg.kind);
    j["duration_ns"] = seg.duration_ns;
    if (seg.kind == PulseSegment::Kind::microwave) j["mw_frequency_mhz"] = seg.mw_frequency_mhz;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

PulseSequence PulseSequence::from_json(const std::string& text) {
  nlohmann::json arr = nlohmann::json::parse(text);
  PulseSequence seq;
  for (const auto& j : arr) {
    PulseSegment seg;
    seg.kind = segment_kind_from_name(j.at("kind").get<std::string>());
    seg.duration_ns = j.at("duration_ns").get<double>();
    seg.mw_frequency_mhz = j.value("mw_frequency_mhz", 0.0);
    seq.segments.push_back(seg);
  }
  return seq;
}

std::pair<double, double> zero_field_transitions(const SpinParams& p) {
  return {p.d_zfs_mhz - p.e_zfs_mhz, p.d_zfs_mhz + p.e_zfs_mhz};
}

DEResult d_e_from_transitions(double f1_mhz, double f2_mhz) {
  DEResult r;
  if (f2_mhz < f1_mhz) {
    std::swap(f1_mhz, f2_mhz);
    r.swapped = true;
  }
  if (!(f1_mhz > 0.0)) throw ValidationError("transition frequencies must be positive");
  r.d_mhz = 0.5 * (f1_mhz + f2_mhz);
  r.e_mhz = 0.5 * (f2_mhz - f1_mhz);
  return r;
}

OdmrDataset odmr_spectrum(const SpinParams& p, double photon_fraction,
                          const std::vector<double>& freq_grid_mhz, CollectionPath path) {
  if (!(photon_fraction > 0.0 && photon_fraction <= 1.0))
    throw ValidationError("photon fraction must lie in (0,1]");
  for (std::size_t i = 1; i < freq_grid_mhz.size(); ++i)
    if (!(freq_grid_mhz[i] > freq_grid_mhz[i - 1]))
      throw ValidationError("frequency grid must be strictly increasing");
  const auto [f_low, f_high] = zero_field_transitions(p);
  OdmrDataset ds;
  ds.collection_path = path;
  ds.freq_mhz = freq_grid_mhz;
  ds.contrast.resize(freq_grid_mhz.size());
  const double scale = photon_fraction * p.intrinsic_contrast;
  for (std::size_t i = 0; i < freq_grid_mhz.size(); ++i) {
    const double f = freq_grid_mhz[i];
    ds.contrast[i] = scale * (lorentzian_unit_peak(f, f_low, p.odmr_linewidth_mhz) +
                              lorentzian_unit_peak(f, f_high, p.odmr_linewidth_mhz));
  }
  return ds;
}

double contrast_dilution(double intrinsic_contrast, double path_fraction) {
  if (!(path_fraction > 0.0 && path_fraction <= 1.0))
    throw ValidationError("photon fraction must lie in (0,1]");
  return intrinsic_contrast * path_fraction;
}

std::vector<double> rabi_trace(double rabi_frequency_mhz, double contrast, double decay_time_ns,
                               const std::vector<double>& t_grid_ns) {
  if (!(rabi_frequency_mhz > 0.0)) throw ValidationError("Rabi frequency must be positive");
  if (!(decay_time_ns > 0.0)) throw ValidationError("Rabi decay time must be positive");
  std::vector<double> signal(t_grid_ns.size());
  for (std::size_t i = 0; i < t_grid_ns.size(); ++i) {
    const double t = t_grid_ns[i];
    // MHz * ns = 1e-3 cycles
    const double phase = kTwoPi * rabi_frequency_mhz * 1e-3 * t;
    signal[i] =
        1.0 - 0.5 * contrast * (1.0 - std::cos(phase)) * std::exp(-t / decay_time_ns);
  }
  return signal;
}

std::vector<std::uint64_t> simulate_pulse_sequence(const PulseSequence& seq, const SpinParams& p,
                                                   const ReadoutModel& rates,
                                                   const SweepSpec& sweep,
                                                   std::uint64_t repetitions, std::uint64_t seed) {
  seq.validate();
  if (repetitions == 0) throw ValidationError("repetitions must be positive");
  if (!(rates.photon_fraction > 0.0 && rates.photon_fraction <= 1.0))
    throw ValidationError("photon fraction must lie in (0,1]");
  const double t_read = seq.readout().duration_ns;

  const double observed_contrast = contrast_dilution(p.intrinsic_contrast, rates.photon_fraction);
  const auto [f_low, f_high] = zero_field_transitions(p);

  std::vector<std::uint64_t> counts(sweep.values.size());
  for (std::size_t i = 0; i < sweep.values.size(); ++i) {
    double s = 1.0;
    if (sweep.axis == SweepSpec::Axis::mw_duration) {
      const double t = sweep.values[i];
      if (t > 0.0)
        s = rabi_trace(rates.rabi_frequency_mhz, observed_contrast, rates.rabi_decay_ns, {t})[0];
    } else {
      // PL dips at the spin transitions; the plotted contrast is the dip depth.
      const double f = sweep.values[i];
      s = 1.0 - observed_contrast *
                    (lorentzian_unit_peak(f, f_low, p.odmr_linewidth_mhz) +
                     lorentzian_unit_peak(f, f_high, p.odmr_linewidth_mhz));
    }
    const double mean = static_cast<double>(repetitions) * t_read *
                        (rates.bright_rate_per_ns * s + rates.background_rate_per_ns);
    Rng rng(derive_seed(seed, "pulse-sweep", i));
    counts[i] = rng.poisson(mean);
  }
  return counts;
}

}  // namespace ringqed::spin
