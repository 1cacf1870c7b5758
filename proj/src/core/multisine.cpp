#include "core/multisine.hpp"

#include <cmath>
#include <numbers>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace fblin {

namespace {

void check_spec(const MultisineSpec& spec) {
  if (spec.fs <= 0.0) throw ValidationError("multisine: fs must be positive");
  if (spec.samples < 4) throw ValidationError("multisine: need at least 4 samples per period");
  if (spec.samples % 2 != 0) throw ValidationError("multisine: samples per period must be even");
  if (spec.rms < 0.0) throw ValidationError("multisine: rms must be non-negative");
  if (spec.f_min < 0.0 || spec.f_max <= spec.f_min)
    throw ValidationError("multisine: need 0 <= f_min < f_max");
  if (spec.f_max > spec.fs / 2.0)
    throw ValidationError("multisine: f_max beyond Nyquist");
  if (spec.kind == MultisineKind::odd && spec.group_size < 2)
    throw ValidationError("multisine: detection group size must be >= 2");
}

}  // namespace

ExcitationDesign design_multisine(const MultisineSpec& spec, std::uint64_t design_seed) {
  check_spec(spec);

  ExcitationDesign d;
  d.spec = spec;
  d.design_seed = design_seed;

  const std::size_t half = spec.samples / 2;
  d.roles.assign(half + 1, LineRole::unexcited);

  const double df = spec.fs / static_cast<double>(spec.samples);
  // In-band lines, DC excluded. Band edges are inclusive up to a small
  // tolerance so f_max landing exactly on a line keeps that line.
  std::vector<std::size_t> band;
  for (std::size_t q = 1; q <= half; ++q) {
    const double f = static_cast<double>(q) * df;
    if (f >= spec.f_min - 1e-9 * df && f <= spec.f_max + 1e-9 * df) band.push_back(q);
  }
  if (band.empty()) throw ValidationError("multisine: band contains no DFT lines");

  if (spec.kind == MultisineKind::full) {
    for (std::size_t q : band) d.roles[q] = LineRole::excited;
  } else {
    std::vector<std::size_t> odd_lines;
    for (std::size_t q : band)
      if (q % 2 == 1) odd_lines.push_back(q);
    if (odd_lines.empty()) throw ValidationError("multisine: band contains no odd lines");

    rng::Stream pick(rng::derive_seed(design_seed, "detection-lines"));
    for (std::size_t g = 0; g + spec.group_size <= odd_lines.size(); g += spec.group_size) {
      const std::size_t withheld =
          g + pick.uniform_int(static_cast<std::uint32_t>(spec.group_size));
      for (std::size_t i = g; i < g + spec.group_size; ++i)
        d.roles[odd_lines[i]] = (i == withheld) ? LineRole::detection : LineRole::excited;
    }
    // Trailing partial group, if any, is fully excited: withholding from a
    // short group would bias its detection density.
    const std::size_t tail_start = (odd_lines.size() / spec.group_size) * spec.group_size;
    for (std::size_t i = tail_start; i < odd_lines.size(); ++i)
      d.roles[odd_lines[i]] = LineRole::excited;
  }

  for (std::size_t q = 1; q <= half; ++q) {
    if (d.roles[q] == LineRole::excited) d.excited_lines.push_back(q);
    else if (d.roles[q] == LineRole::detection) d.detection_lines.push_back(q);
  }
  if (d.excited_lines.empty()) throw ValidationError("multisine: no excited lines");
  return d;
}

SignalRecord synthesise(const ExcitationDesign& design, std::uint64_t phase_seed) {
  const std::size_t n = design.spec.samples;
  SignalRecord rec;
  rec.seed = phase_seed;
  rec.samples.assign(n, 0.0);
  if (design.spec.rms == 0.0) return rec;

  rng::Stream phases(rng::derive_seed(phase_seed, "phases"));
  const double two_pi = 2.0 * std::numbers::pi;

  // Direct cosine sum; n and line counts are small enough that an FFT
  // buys nothing here and the direct form keeps the definition obvious.
  for (std::size_t q : design.excited_lines) {
    const double phi = phases.uniform() * two_pi;
    const double w = two_pi * static_cast<double>(q) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k)
      rec.samples[k] += std::cos(w * static_cast<double>(k) + phi);
  }

  double sumsq = 0.0;
  for (double v : rec.samples) sumsq += v * v;
  const double rms = std::sqrt(sumsq / static_cast<double>(n));
  if (!(rms > 0.0)) throw ValidationError("multisine: degenerate realisation with zero RMS");
  const double scale = design.spec.rms / rms;
  for (double& v : rec.samples) v *= scale;
  return rec;
}

std::vector<SignalRecord> realisations(const ExcitationDesign& design, std::size_t count) {
  std::vector<SignalRecord> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r)
    out.push_back(synthesise(design, design.design_seed + r));
  return out;
}

}  // namespace fblin
