#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "core/multisine.hpp"

namespace fblin {

// Period- and realisation-averaged DFT of a periodic record set.
//
// Per realisation r the retained periods are DFT'd individually and averaged
// into Ybar_r. Levels are quoted per realisation: level(q)^2 = mean_r
// |Ybar_r(q)|^2, and the noise floor is the variance of one realisation's
// period-averaged line. Averaging over realisations is deliberately not
// folded into the levels; detection-line content has random phase across
// realisations and a coherent mean would cancel it.
struct SpectralEstimate {
  double fs = 0.0;
  std::size_t period_samples = 0;  // N, DFT length
  std::size_t realisations = 0;    // R
  std::size_t periods_kept = 0;    // P after discard
  std::vector<double> freq;                     // size N/2+1
  std::vector<std::complex<double>> mean;       // grand mean over realisations
  std::vector<double> mean_sq;                  // mean_r |Ybar_r|^2
  std::vector<double> var_periods;              // mean_r sample-var_p / P
  std::vector<double> var_realisations;         // sample variance of Ybar_r
  std::vector<LineRole> roles;                  // inherited from the design

  std::size_t lines() const { return freq.size(); }
  // 20*log10 of the per-realisation RMS level at line q.
  double level_db(std::size_t q) const;
  // 20*log10 of the noise-floor level (std of a period-averaged line).
  double floor_db(std::size_t q) const;
};

SpectralEstimate spectra(const std::vector<std::vector<double>>& records,
                         const ExcitationDesign& design, std::size_t discard_periods);

// FRF at the excited lines: grand-mean output over grand-mean input.
struct FrfEstimate {
  std::vector<std::size_t> lines;
  std::vector<double> freq;
  std::vector<std::complex<double>> frf;
  std::vector<double> var;  // output realisation variance referred through |U|^2
};

FrfEstimate bla(const SpectralEstimate& output, const SpectralEstimate& input);

struct DistortionRow {
  double f = 0.0;
  double output_db = 0.0;  // level at this line, whatever its role
  double odd_db = 0.0;     // NaN unless an odd detection line
  double even_db = 0.0;    // NaN unless an even in-band line (DC included)
  double noise_db = 0.0;
};

struct DistortionReport {
  std::vector<DistortionRow> rows;  // lines from DC through the band edge

  // Band summaries (+-0.5 Hz around the resonance unless stated).
  double resonance_hz = 0.0;          // argmax excited level, or caller hint
  double output_at_resonance_db = 0.0;
  double odd_at_resonance_db = 0.0;   // max detection level in the band
  double even_at_resonance_db = 0.0;  // max even level in the band
  double floor_at_resonance_db = 0.0;
  double odd_rel_db = 0.0;            // odd - output, dB
  double even_rel_db = 0.0;           // even - output, dB
};

// Classify distortion levels per line. resonance_hint_hz, when finite,
// overrides peak detection; linearised runs flatten the output spectrum so
// the pre-linearisation resonance must be carried over by the caller.
DistortionReport distortions(const SpectralEstimate& spec, const ExcitationDesign& design,
                             double resonance_hint_hz = std::numeric_limits<double>::quiet_NaN());

// Max level over lines of the given role within f_center +- half_width.
// Returns NaN when the band holds no such line. Role `unexcited` matches
// even in-band lines only (odd unexcited lines carry no distortion tag).
double band_max_level_db(const SpectralEstimate& spec, LineRole role, double f_center,
                         double half_width_hz);
// Power mean over the same selection; the level of a line cloud.
double band_mean_level_db(const SpectralEstimate& spec, LineRole role, double f_center,
                          double half_width_hz);
double band_max_floor_db(const SpectralEstimate& spec, double f_center, double half_width_hz);

struct ErrorMetrics {
  double rms_signal = 0.0;
  double rms_error = 0.0;
  double ratio_percent = 0.0;  // 100 * rms_error / rms_signal
};

ErrorMetrics error_metrics(const std::vector<double>& signal, const std::vector<double>& error);

double rms(const std::vector<double>& v);

// Delta between two reports taken with identical designs/seeds. Row
// fields hold after - before in dB (NaN where either side is NaN).
struct DistortionDelta {
  std::vector<DistortionRow> rows;
  double output_change_db = 0.0;
  double odd_suppression_db = 0.0;   // before - after at the resonance band
  double even_suppression_db = 0.0;
};

DistortionDelta compare_reports(const DistortionReport& before, const DistortionReport& after);

}  // namespace fblin
