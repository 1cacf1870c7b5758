#include "core/multisine.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "core/errors.hpp"
#include "doctest.h"

using namespace fblin;

namespace {

MultisineSpec odd_spec() {
  MultisineSpec s;
  s.fs = 100.0;
  s.samples = 400;
  s.f_min = 0.0;
  s.f_max = 10.0;
  s.rms = 0.1;
  s.kind = MultisineKind::odd;
  s.group_size = 4;
  return s;
}

// Single-line DFT at line q, scaled 1/N.
std::complex<double> goertzel(const std::vector<double>& x, std::size_t q) {
  const double w = -2.0 * std::numbers::pi * static_cast<double>(q) /
                   static_cast<double>(x.size());
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = 0; k < x.size(); ++k)
    acc += x[k] * std::polar(1.0, w * static_cast<double>(k));
  return acc / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("odd design excites odd in-band lines and withholds one per group") {
  const ExcitationDesign d = design_multisine(odd_spec(), 99);
  // fs/N = 0.25 Hz; in-band lines run 1..40, odd ones 1,3,...,39 (20 lines).
  CHECK(d.line_spacing_hz() == doctest::Approx(0.25));
  CHECK(d.excited_lines.size() + d.detection_lines.size() == 20);
  CHECK(d.detection_lines.size() == 5);

  for (std::size_t q : d.excited_lines) {
    CHECK(q % 2 == 1);
    CHECK(q >= 1);
    CHECK(q <= 40);
  }
  CHECK(d.roles[0] == LineRole::unexcited);  // DC never excited
  for (std::size_t q = 2; q <= 40; q += 2) CHECK(d.roles[q] == LineRole::unexcited);

  // Exactly one withheld line in each group of four consecutive odd lines.
  std::vector<std::size_t> odd;
  for (std::size_t q = 1; q <= 40; q += 2) odd.push_back(q);
  for (std::size_t g = 0; g + 4 <= odd.size(); g += 4) {
    int withheld = 0;
    for (std::size_t i = g; i < g + 4; ++i)
      if (d.roles[odd[i]] == LineRole::detection) ++withheld;
    CHECK(withheld == 1);
  }
}

TEST_CASE("trailing partial detection group is fully excited") {
  MultisineSpec s = odd_spec();
  s.f_max = 10.5;  // odd lines 1..41: 21 lines, one trailing after 5 groups
  const ExcitationDesign d = design_multisine(s, 99);
  CHECK(d.detection_lines.size() == 5);
  CHECK(d.roles[41] == LineRole::excited);
}

TEST_CASE("full design excites every in-band line including even ones") {
  MultisineSpec s = odd_spec();
  s.kind = MultisineKind::full;
  s.f_min = 1.0;
  const ExcitationDesign d = design_multisine(s, 5);
  CHECK(d.detection_lines.empty());
  CHECK(d.excited_lines.size() == 37);  // lines 4..40
  CHECK(d.excited_lines.front() == 4);
  CHECK(d.excited_lines.back() == 40);
}

TEST_CASE("design role pattern is frozen by the design seed") {
  const ExcitationDesign a = design_multisine(odd_spec(), 1234);
  const ExcitationDesign b = design_multisine(odd_spec(), 1234);
  CHECK(a.detection_lines == b.detection_lines);
  const ExcitationDesign c = design_multisine(odd_spec(), 1235);
  CHECK(a.excited_lines.size() == c.excited_lines.size());
}

TEST_CASE("synthesised realisation hits the requested RMS exactly") {
  const ExcitationDesign d = design_multisine(odd_spec(), 7);
  const SignalRecord rec = synthesise(d, 42);
  REQUIRE(rec.samples.size() == 400);

  double sumsq = 0.0, sum = 0.0;
  for (double v : rec.samples) {
    sumsq += v * v;
    sum += v;
  }
  CHECK(std::sqrt(sumsq / 400.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::abs(sum / 400.0) < 1e-12);  // no DC content
}

TEST_CASE("realisation spectrum is flat on excited lines and empty elsewhere") {
  const ExcitationDesign d = design_multisine(odd_spec(), 7);
  const SignalRecord rec = synthesise(d, 42);

  const double ref = std::abs(goertzel(rec.samples, d.excited_lines[0]));
  CHECK(ref > 0.0);
  for (std::size_t q : d.excited_lines)
    CHECK(std::abs(goertzel(rec.samples, q)) == doctest::Approx(ref).epsilon(1e-9));
  for (std::size_t q : d.detection_lines)
    CHECK(std::abs(goertzel(rec.samples, q)) < 1e-12);
  CHECK(std::abs(goertzel(rec.samples, 2)) < 1e-12);   // even in-band
  CHECK(std::abs(goertzel(rec.samples, 80)) < 1e-12);  // out of band
}

TEST_CASE("realisations differ by phase only and are seed-deterministic") {
  const ExcitationDesign d = design_multisine(odd_spec(), 7);
  const auto batch = realisations(d, 3);
  REQUIRE(batch.size() == 3);
  CHECK(batch[0].seed == 7);
  CHECK(batch[2].seed == 9);

  const SignalRecord again = synthesise(d, 7);
  CHECK(batch[0].samples == again.samples);
  CHECK(batch[0].samples != batch[1].samples);

  // Same excited-line magnitudes in every realisation.
  const double m0 = std::abs(goertzel(batch[0].samples, d.excited_lines[3]));
  const double m1 = std::abs(goertzel(batch[1].samples, d.excited_lines[3]));
  CHECK(m0 == doctest::Approx(m1).epsilon(1e-9));
}

TEST_CASE("multisine specs are validated") {
  MultisineSpec s = odd_spec();
  s.samples = 401;
  CHECK_THROWS_AS(design_multisine(s, 1), ValidationError);

  s = odd_spec();
  s.f_max = 60.0;  // beyond Nyquist
  CHECK_THROWS_AS(design_multisine(s, 1), ValidationError);

  s = odd_spec();
  s.f_min = 10.0;
  s.f_max = 5.0;
  CHECK_THROWS_AS(design_multisine(s, 1), ValidationError);

  s = odd_spec();
  s.fs = 0.0;
  CHECK_THROWS_AS(design_multisine(s, 1), ValidationError);

  s = odd_spec();
  s.group_size = 1;
  CHECK_THROWS_AS(design_multisine(s, 1), ValidationError);

  s = odd_spec();
  s.f_min = 0.26;
  s.f_max = 0.37;  // no line between 0.26 and 0.37 Hz
  CHECK_THROWS_AS(design_multisine(s, 1), ValidationError);
}
