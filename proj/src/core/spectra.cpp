#include "core/spectra.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace fblin {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double to_db(double power) {
  if (!(power > 0.0)) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(power);
}

}  // namespace

double SpectralEstimate::level_db(std::size_t q) const { return to_db(mean_sq.at(q)); }

double SpectralEstimate::floor_db(std::size_t q) const { return to_db(var_periods.at(q)); }

SpectralEstimate spectra(const std::vector<std::vector<double>>& records,
                         const ExcitationDesign& design, std::size_t discard_periods) {
  if (records.empty()) throw ValidationError("spectra: no records");
  const std::size_t n = design.spec.samples;
  const std::size_t len = records.front().size();
  if (len == 0 || len % n != 0)
    throw ValidationError("spectra: record length is not a whole number of periods");
  const std::size_t periods = len / n;
  if (periods <= discard_periods)
    throw ValidationError("spectra: all periods discarded");
  const std::size_t kept = periods - discard_periods;
  if (kept < 2)
    throw ValidationError("spectra: need at least 2 retained periods for a noise estimate");
  for (const auto& rec : records)
    if (rec.size() != len) throw ValidationError("spectra: records differ in length");

  const std::size_t half = n / 2;
  const std::size_t lines = half + 1;
  const std::size_t r_count = records.size();

  SpectralEstimate est;
  est.fs = design.spec.fs;
  est.period_samples = n;
  est.realisations = r_count;
  est.periods_kept = kept;
  est.roles = design.roles;
  est.freq.resize(lines);
  for (std::size_t q = 0; q < lines; ++q)
    est.freq[q] = design.spec.fs * static_cast<double>(q) / static_cast<double>(n);

  est.mean.assign(lines, {0.0, 0.0});
  est.mean_sq.assign(lines, 0.0);
  est.var_periods.assign(lines, 0.0);
  est.var_realisations.assign(lines, 0.0);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> bins(n);
  std::vector<double> period(n);
  std::vector<std::vector<std::complex<double>>> per_real_mean(
      r_count, std::vector<std::complex<double>>(lines));

  for (std::size_t r = 0; r < r_count; ++r) {
    std::vector<std::complex<double>> acc(lines, {0.0, 0.0});
    std::vector<double> acc_sq(lines, 0.0);
    for (std::size_t p = discard_periods; p < periods; ++p) {
      std::copy_n(records[r].begin() + static_cast<std::ptrdiff_t>(p * n), n, period.begin());
      fft.fwd(bins, period);
      for (std::size_t q = 0; q < lines; ++q) {
        const std::complex<double> c = bins[q] / static_cast<double>(n);
        acc[q] += c;
        acc_sq[q] += std::norm(c);
      }
    }
    for (std::size_t q = 0; q < lines; ++q) {
      const std::complex<double> m = acc[q] / static_cast<double>(kept);
      per_real_mean[r][q] = m;
      // Sample variance over periods, then /kept for the variance of the
      // period-averaged line.
      const double var_p =
          std::max(0.0, (acc_sq[q] - static_cast<double>(kept) * std::norm(m)) /
                            static_cast<double>(kept - 1));
      est.var_periods[q] += var_p / static_cast<double>(kept);
      est.mean[q] += m;
      est.mean_sq[q] += std::norm(m);
    }
  }

  for (std::size_t q = 0; q < lines; ++q) {
    est.mean[q] /= static_cast<double>(r_count);
    est.mean_sq[q] /= static_cast<double>(r_count);
    est.var_periods[q] /= static_cast<double>(r_count);
    if (r_count >= 2) {
      double acc = 0.0;
      for (std::size_t r = 0; r < r_count; ++r)
        acc += std::norm(per_real_mean[r][q] - est.mean[q]);
      est.var_realisations[q] = acc / static_cast<double>(r_count - 1);
    }
  }
  return est;
}

FrfEstimate bla(const SpectralEstimate& output, const SpectralEstimate& input) {
  if (output.lines() != input.lines() || output.fs != input.fs)
    throw ValidationError("bla: spectra grids differ");
  FrfEstimate f;
  for (std::size_t q = 0; q < input.lines(); ++q) {
    if (input.roles.size() > q && input.roles[q] != LineRole::excited) continue;
    if (input.roles.size() <= q) continue;
    const std::complex<double> u = input.mean[q];
    if (std::abs(u) == 0.0) throw ValidationError("bla: zero input at an excited line");
    f.lines.push_back(q);
    f.freq.push_back(input.freq[q]);
    f.frf.push_back(output.mean[q] / u);
    const double denom = std::norm(u) * static_cast<double>(output.realisations);
    f.var.push_back(output.var_realisations[q] / denom);
  }
  if (f.lines.empty()) throw ValidationError("bla: no excited lines in input design");
  return f;
}

namespace {

bool is_even_inband(const SpectralEstimate& spec, std::size_t q, double f_max) {
  if (q % 2 != 0) return false;
  if (spec.freq[q] > f_max + 1e-9) return false;
  return q >= spec.roles.size() || spec.roles[q] == LineRole::unexcited;
}

}  // namespace

DistortionReport distortions(const SpectralEstimate& spec, const ExcitationDesign& design,
                             double resonance_hint_hz) {
  if (design.detection_lines.empty())
    throw ValidationError("distortions: design has no detection lines");
  if (spec.roles.size() != spec.lines())
    throw ValidationError("distortions: estimate lacks line roles");
  if (design.roles.size() != spec.roles.size() ||
      design.spec.samples != spec.period_samples)
    throw ValidationError("distortions: design does not match the estimate");

  DistortionReport rep;
  const double f_max = design.spec.f_max;

  std::size_t q_edge = 0;
  for (std::size_t q = 0; q < spec.lines(); ++q)
    if (spec.freq[q] <= f_max + 1e-9) q_edge = q;

  for (std::size_t q = 0; q <= q_edge; ++q) {
    DistortionRow row;
    row.f = spec.freq[q];
    row.output_db = spec.level_db(q);
    row.odd_db = (spec.roles[q] == LineRole::detection) ? spec.level_db(q) : kNaN;
    row.even_db = is_even_inband(spec, q, f_max) ? spec.level_db(q) : kNaN;
    row.noise_db = spec.floor_db(q);
    rep.rows.push_back(row);
  }

  if (std::isfinite(resonance_hint_hz)) {
    rep.resonance_hz = resonance_hint_hz;
  } else {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t q : design.excited_lines) {
      if (spec.level_db(q) > best) {
        best = spec.level_db(q);
        rep.resonance_hz = spec.freq[q];
      }
    }
  }

  // Output reference is the strongest excited line near the resonance;
  // distortion summaries are the power mean of their lines in the same
  // band, i.e. the level of the detection cloud rather than its worst
  // single line.
  constexpr double kHalfBand = 0.5;
  rep.output_at_resonance_db =
      band_max_level_db(spec, LineRole::excited, rep.resonance_hz, kHalfBand);
  rep.odd_at_resonance_db =
      band_mean_level_db(spec, LineRole::detection, rep.resonance_hz, kHalfBand);
  rep.even_at_resonance_db =
      band_mean_level_db(spec, LineRole::unexcited, rep.resonance_hz, kHalfBand);
  rep.floor_at_resonance_db = band_max_floor_db(spec, rep.resonance_hz, kHalfBand);
  rep.odd_rel_db = rep.odd_at_resonance_db - rep.output_at_resonance_db;
  rep.even_rel_db = rep.even_at_resonance_db - rep.output_at_resonance_db;
  return rep;
}

double band_max_level_db(const SpectralEstimate& spec, LineRole role, double f_center,
                         double half_width_hz) {
  double best = kNaN;
  for (std::size_t q = 0; q < spec.lines(); ++q) {
    if (std::abs(spec.freq[q] - f_center) > half_width_hz + 1e-12) continue;
    if (role == LineRole::unexcited) {
      if (!is_even_inband(spec, q, f_center + half_width_hz)) continue;
    } else if (spec.roles[q] != role) {
      continue;
    }
    const double lvl = spec.level_db(q);
    if (std::isnan(best) || lvl > best) best = lvl;
  }
  return best;
}

double band_mean_level_db(const SpectralEstimate& spec, LineRole role, double f_center,
                          double half_width_hz) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t q = 0; q < spec.lines(); ++q) {
    if (std::abs(spec.freq[q] - f_center) > half_width_hz + 1e-12) continue;
    if (role == LineRole::unexcited) {
      if (!is_even_inband(spec, q, f_center + half_width_hz)) continue;
    } else if (spec.roles[q] != role) {
      continue;
    }
    const double lvl = spec.level_db(q);
    acc += std::pow(10.0, lvl / 10.0);
    ++count;
  }
  if (count == 0) return kNaN;
  return 10.0 * std::log10(acc / static_cast<double>(count));
}

double band_max_floor_db(const SpectralEstimate& spec, double f_center, double half_width_hz) {
  double best = kNaN;
  for (std::size_t q = 0; q < spec.lines(); ++q) {
    if (std::abs(spec.freq[q] - f_center) > half_width_hz + 1e-12) continue;
    const double lvl = spec.floor_db(q);
    if (std::isnan(best) || lvl > best) best = lvl;
  }
  return best;
}

double rms(const std::vector<double>& v) {
  if (v.empty()) throw ValidationError("rms: empty signal");
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

ErrorMetrics error_metrics(const std::vector<double>& signal, const std::vector<double>& error) {
  if (signal.empty() || signal.size() != error.size())
    throw ValidationError("error_metrics: signals empty or of different length");
  ErrorMetrics m;
  m.rms_signal = rms(signal);
  m.rms_error = rms(error);
  m.ratio_percent = m.rms_signal > 0.0 ? 100.0 * m.rms_error / m.rms_signal
                                       : std::numeric_limits<double>::infinity();
  return m;
}

DistortionDelta compare_reports(const DistortionReport& before, const DistortionReport& after) {
  if (before.rows.size() != after.rows.size())
    throw ValidationError("compare: reports cover different frequency grids");
  DistortionDelta d;
  d.rows.reserve(before.rows.size());
  for (std::size_t i = 0; i < before.rows.size(); ++i) {
    const DistortionRow& b = before.rows[i];
    const DistortionRow& a = after.rows[i];
    if (std::abs(a.f - b.f) > 1e-9)
      throw ValidationError("compare: reports cover different frequency grids");
    DistortionRow row;
    row.f = b.f;
    row.output_db = a.output_db - b.output_db;
    row.odd_db = a.odd_db - b.odd_db;
    row.even_db = a.even_db - b.even_db;
    row.noise_db = a.noise_db - b.noise_db;
    d.rows.push_back(row);
  }
  d.output_change_db = after.output_at_resonance_db - before.output_at_resonance_db;
  d.odd_suppression_db = before.odd_at_resonance_db - after.odd_at_resonance_db;
  d.even_suppression_db = before.even_at_resonance_db - after.even_at_resonance_db;
  return d;
}

}  // namespace fblin
