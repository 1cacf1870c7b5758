#include "core/record_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "core/errors.hpp"
#include "core/util.hpp"

namespace fblin {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void append_row(std::string& out, const std::vector<double>& vals) {
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i > 0) out += ',';
    out += format_double(vals[i]);
  }
  out += '\n';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw IoError("bad numeric field '" + s + "' in " + path.string());
  return v;
}

json to_plain_json(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) {
    if (std::isnan(x)) arr.push_back(nullptr);
    else arr.push_back(x);
  }
  return arr;
}

std::vector<double> from_plain_json(const json& arr) {
  std::vector<double> v;
  v.reserve(arr.size());
  for (const auto& x : arr) {
    if (x.is_null()) v.push_back(kNaN);
    else if (x.is_number()) v.push_back(x.get<double>());
    else throw ValidationError("report: array entries must be numbers or null");
  }
  return v;
}

double nan_to_null_safe(const json& v) {
  if (v.is_null()) return kNaN;
  return v.get<double>();
}

}  // namespace

void write_signal_csv(const std::filesystem::path& path, double fs,
                      const std::vector<double>& u) {
  std::string out = "t,u\n";
  for (std::size_t k = 0; k < u.size(); ++k)
    append_row(out, {static_cast<double>(k) / fs, u[k]});
  write_text_file(path, out);
}

void write_open_loop_csv(const std::filesystem::path& path, const OpenLoopRecord& rec) {
  std::string out = "t,u,y_meas,y_true\n";
  for (std::size_t k = 0; k < rec.t.size(); ++k)
    append_row(out, {rec.t[k], rec.u[k], rec.y_meas[k], rec.y_true[k]});
  write_text_file(path, out);
}

std::vector<double> read_measured_channel(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty record file: " + path.string());
  const auto header = split_csv_line(line);
  std::size_t col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == "y_meas") col = i;
  if (col == header.size())
    throw IoError("no y_meas column in " + path.string());

  std::vector<double> y;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() <= col) throw IoError("short row in " + path.string());
    y.push_back(parse_double(fields[col], path));
  }
  return y;
}

OpenLoopRecord read_open_loop_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty record file: " + path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "t" || header[1] != "u" || header[2] != "y_meas" ||
      header[3] != "y_true")
    throw IoError("unexpected open-loop header in " + path.string());

  OpenLoopRecord rec;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 4) throw IoError("short row in " + path.string());
    rec.t.push_back(parse_double(fields[0], path));
    rec.u.push_back(parse_double(fields[1], path));
    rec.y_meas.push_back(parse_double(fields[2], path));
    rec.y_true.push_back(parse_double(fields[3], path));
  }
  if (rec.t.size() < 2) throw IoError("record too short: " + path.string());
  rec.fs = 1.0 / (rec.t[1] - rec.t[0]);
  return rec;
}

void write_closed_loop_csv(const std::filesystem::path& path, const ClosedLoopRecord& rec) {
  std::string out = "t,v,u,y_meas,y_ref,err_mpc,err_ukf,y_true";
  for (Eigen::Index j = 0; j < rec.x_hat.cols(); ++j)
    out += ",x_hat_" + std::to_string(j + 1);
  out += ",horizon\n";
  std::vector<double> row;
  for (std::size_t k = 0; k < rec.t.size(); ++k) {
    row.assign({rec.t[k], rec.v[k], rec.u[k], rec.y_meas[k], rec.y_ref[k], rec.err_mpc[k],
                rec.err_ukf[k], rec.y_true[k]});
    for (Eigen::Index j = 0; j < rec.x_hat.cols(); ++j)
      row.push_back(rec.x_hat(static_cast<Eigen::Index>(k), j));
    row.push_back(static_cast<double>(rec.horizon[k]));
    append_row(out, row);
  }
  write_text_file(path, out);
}

void write_decimated_csv(const std::filesystem::path& path, const ClosedLoopRecord& rec) {
  std::string out = "t,v,y_meas\n";
  const auto t = rec.decimate(rec.t);
  const auto v = rec.decimate(rec.v);
  const auto y = rec.decimate(rec.y_meas);
  for (std::size_t k = 0; k < t.size(); ++k) append_row(out, {t[k], v[k], y[k]});
  write_text_file(path, out);
}

namespace {

const char* role_name(LineRole role) {
  switch (role) {
    case LineRole::excited: return "excited";
    case LineRole::detection: return "detection";
    default: return "unexcited";
  }
}

}  // namespace

void write_spectrum_csv(const std::filesystem::path& path, const SpectralEstimate& est) {
  std::string out = "f,level_db,floor_db,role\n";
  for (std::size_t q = 0; q < est.lines(); ++q) {
    out += format_double(est.freq[q]);
    out += ',';
    out += format_double(est.level_db(q));
    out += ',';
    out += format_double(est.floor_db(q));
    out += ',';
    out += role_name(est.roles[q]);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_distortion_csv(const std::filesystem::path& path, const DistortionReport& rep) {
  std::string out = "f,output_db,odd_db,even_db,noise_db\n";
  for (const DistortionRow& row : rep.rows)
    append_row(out, {row.f, row.output_db, row.odd_db, row.even_db, row.noise_db});
  write_text_file(path, out);
}

void write_frf_csv(const std::filesystem::path& path, const FrfEstimate& frf) {
  std::string out = "f,mag_db,phase_rad,var\n";
  for (std::size_t i = 0; i < frf.freq.size(); ++i)
    append_row(out, {frf.freq[i], 20.0 * std::log10(std::abs(frf.frf[i])),
                     std::arg(frf.frf[i]), frf.var[i]});
  write_text_file(path, out);
}

ordered_json design_to_json(const ExcitationDesign& design) {
  ordered_json j;
  j["schema"] = "excitation-v1";
  j["fs"] = design.spec.fs;
  j["samples"] = design.spec.samples;
  j["f_min"] = design.spec.f_min;
  j["f_max"] = design.spec.f_max;
  j["rms"] = design.spec.rms;
  j["kind"] = design.spec.kind == MultisineKind::full ? "full" : "odd";
  j["group_size"] = design.spec.group_size;
  j["design_seed"] = design.design_seed;
  j["excited_lines"] = design.excited_lines;
  j["detection_lines"] = design.detection_lines;
  return j;
}

ExcitationDesign design_from_json(const json& j) {
  ExcitationDesign d;
  try {
    d.spec.fs = j.at("fs").get<double>();
    d.spec.samples = j.at("samples").get<std::size_t>();
    d.spec.f_min = j.at("f_min").get<double>();
    d.spec.f_max = j.at("f_max").get<double>();
    d.spec.rms = j.at("rms").get<double>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "full") d.spec.kind = MultisineKind::full;
    else if (kind == "odd") d.spec.kind = MultisineKind::odd;
    else throw ValidationError("design: unknown kind '" + kind + "'");
    d.spec.group_size = j.at("group_size").get<std::size_t>();
    d.design_seed = j.at("design_seed").get<std::uint64_t>();
    d.excited_lines = j.at("excited_lines").get<std::vector<std::size_t>>();
    d.detection_lines = j.at("detection_lines").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("design document malformed: ") + e.what());
  }
  d.roles.assign(d.spec.samples / 2 + 1, LineRole::unexcited);
  for (std::size_t q : d.excited_lines) {
    if (q >= d.roles.size()) throw ValidationError("design: excited line beyond Nyquist");
    d.roles[q] = LineRole::excited;
  }
  for (std::size_t q : d.detection_lines) {
    if (q >= d.roles.size()) throw ValidationError("design: detection line beyond Nyquist");
    if (d.roles[q] == LineRole::excited)
      throw ValidationError("design: line both excited and detection");
    d.roles[q] = LineRole::detection;
  }
  if (d.excited_lines.empty()) throw ValidationError("design: no excited lines");
  return d;
}

ordered_json distortion_to_json(const DistortionReport& rep) {
  std::vector<double> f, output, odd, even, noise;
  for (const DistortionRow& row : rep.rows) {
    f.push_back(row.f);
    output.push_back(row.output_db);
    odd.push_back(row.odd_db);
    even.push_back(row.even_db);
    noise.push_back(row.noise_db);
  }
  ordered_json j;
  j["schema"] = "distortion-report-v1";
  j["summary"] = {{"resonance_hz", rep.resonance_hz},
                  {"output_at_resonance_db", rep.output_at_resonance_db},
                  {"odd_at_resonance_db", rep.odd_at_resonance_db},
                  {"even_at_resonance_db", rep.even_at_resonance_db},
                  {"floor_at_resonance_db", rep.floor_at_resonance_db},
                  {"odd_rel_db", rep.odd_rel_db},
                  {"even_rel_db", rep.even_rel_db}};
  j["f"] = to_plain_json(f);
  j["output_db"] = to_plain_json(output);
  j["odd_db"] = to_plain_json(odd);
  j["even_db"] = to_plain_json(even);
  j["noise_db"] = to_plain_json(noise);
  return j;
}

DistortionReport distortion_from_json(const json& j) {
  DistortionReport rep;
  try {
    const auto f = from_plain_json(j.at("f"));
    const auto output = from_plain_json(j.at("output_db"));
    const auto odd = from_plain_json(j.at("odd_db"));
    const auto even = from_plain_json(j.at("even_db"));
    const auto noise = from_plain_json(j.at("noise_db"));
    if (output.size() != f.size() || odd.size() != f.size() || even.size() != f.size() ||
        noise.size() != f.size())
      throw ValidationError("report: per-line arrays differ in length");
    for (std::size_t i = 0; i < f.size(); ++i)
      rep.rows.push_back({f[i], output[i], odd[i], even[i], noise[i]});
    const auto& s = j.at("summary");
    rep.resonance_hz = nan_to_null_safe(s.at("resonance_hz"));
    rep.output_at_resonance_db = nan_to_null_safe(s.at("output_at_resonance_db"));
    rep.odd_at_resonance_db = nan_to_null_safe(s.at("odd_at_resonance_db"));
    rep.even_at_resonance_db = nan_to_null_safe(s.at("even_at_resonance_db"));
    rep.floor_at_resonance_db = nan_to_null_safe(s.at("floor_at_resonance_db"));
    rep.odd_rel_db = nan_to_null_safe(s.at("odd_rel_db"));
    rep.even_rel_db = nan_to_null_safe(s.at("even_rel_db"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report document malformed: ") + e.what());
  }
  return rep;
}

ordered_json delta_to_json(const DistortionDelta& delta) {
  std::vector<double> f, output, odd, even, noise;
  for (const DistortionRow& row : delta.rows) {
    f.push_back(row.f);
    output.push_back(row.output_db);
    odd.push_back(row.odd_db);
    even.push_back(row.even_db);
    noise.push_back(row.noise_db);
  }
  ordered_json j;
  j["schema"] = "distortion-delta-v1";
  j["summary"] = {{"output_change_db", delta.output_change_db},
                  {"odd_suppression_db", delta.odd_suppression_db},
                  {"even_suppression_db", delta.even_suppression_db}};
  j["f"] = to_plain_json(f);
  j["output_db"] = to_plain_json(output);
  j["odd_db"] = to_plain_json(odd);
  j["even_db"] = to_plain_json(even);
  j["noise_db"] = to_plain_json(noise);
  return j;
}

ordered_json metrics_to_json(const ErrorMetrics& m) {
  return ordered_json{{"rms_signal", m.rms_signal},
                      {"rms_error", m.rms_error},
                      {"ratio_percent", m.ratio_percent}};
}

void write_json_file(const std::filesystem::path& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError("invalid JSON document: " + path.string());
  return j;
}

}  // namespace fblin
