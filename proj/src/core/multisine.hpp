#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fblin {

// Role of a DFT line in a periodic excitation design.
enum class LineRole : std::uint8_t {
  unexcited,  // outside the design band, or even line of an odd design
  excited,    // carries energy
  detection,  // odd in-band line left silent on purpose
};

enum class MultisineKind : std::uint8_t {
  full,  // every in-band line excited
  odd,   // odd lines only, with detection lines withheld per group
};

struct MultisineSpec {
  double fs = 0.0;           // sample rate of the synthesised signal [Hz]
  std::size_t samples = 0;   // samples per period; line spacing = fs/samples
  double f_min = 0.0;        // band edges [Hz], inclusive
  double f_max = 0.0;
  double rms = 0.0;          // target RMS after rescaling
  MultisineKind kind = MultisineKind::odd;
  std::size_t group_size = 4;  // odd lines per detection group (odd kind only)
};

// Frozen line allocation for one spec + seed. Phases are drawn per
// realisation; the role pattern is drawn once so every realisation of a
// design shares its detection lines.
struct ExcitationDesign {
  MultisineSpec spec;
  std::uint64_t design_seed = 0;
  std::vector<LineRole> roles;  // size samples/2+1, index = line number
  std::vector<std::size_t> excited_lines;
  std::vector<std::size_t> detection_lines;

  double line_spacing_hz() const { return spec.fs / static_cast<double>(spec.samples); }
};

struct SignalRecord {
  std::vector<double> samples;  // one period
  std::uint64_t seed = 0;       // phase seed used for this realisation
};

ExcitationDesign design_multisine(const MultisineSpec& spec, std::uint64_t design_seed);

// One random-phase realisation of a design. Equal amplitude on every
// excited line, uniform phases, zero mean, exact RMS rescale.
SignalRecord synthesise(const ExcitationDesign& design, std::uint64_t phase_seed);

// Batch of realisations with seeds design_seed + r, r = 0..count-1.
std::vector<SignalRecord> realisations(const ExcitationDesign& design, std::size_t count);

}  // namespace fblin
