#include "ssnt/io.hpp"

#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

namespace ssnt::io {

static_assert(std::endian::native == std::endian::little, "tensor container assumes a little-endian host");

FormatError::FormatError(Kind kind, const std::string& what)
    : std::runtime_error("format error (" + to_string(kind) + "): " + what), kind_(kind) {}

std::string to_string(FormatError::Kind kind) {
  switch (kind) {
    case FormatError::Kind::Magic: return "magic";
    case FormatError::Kind::Version: return "version";
    case FormatError::Kind::Checksum: return "checksum";
    case FormatError::Kind::Dims: return "dims";
    case FormatError::Kind::Syntax: return "syntax";
  }
  return "?";
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const unsigned char> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

void split_line(const std::string& line, std::vector<std::string>& cells) {
  cells.clear();
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) cells.push_back(cell);
}

}  // namespace

std::vector<unsigned char> encode_tensor(const Tensor3& t) {
  std::vector<unsigned char> out;
  out.reserve(kHeaderSize + t.size() * 8 + 8);
  out.insert(out.end(), kMagic, kMagic + 5);
  put<std::uint16_t>(out, kFormatVersion);
  put<std::uint64_t>(out, t.n1());
  put<std::uint64_t>(out, t.n2());
  put<std::uint64_t>(out, t.n3());
  const std::size_t payload_start = out.size();
  for (double v : t.data()) put<double>(out, v);
  const std::uint64_t sum = fnv1a64(std::span(out).subspan(payload_start));
  put<std::uint64_t>(out, sum);
  return out;
}

Tensor3 decode_tensor(std::span<const unsigned char> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 5) != 0) {
    throw FormatError(FormatError::Kind::Magic, "missing SSNT1 magic");
  }
  if (bytes.size() < 7) throw FormatError(FormatError::Kind::Version, "truncated header");
  const auto version = get<std::uint16_t>(bytes, 5);
  if (version != kFormatVersion) {
    throw FormatError(FormatError::Kind::Version, "unsupported version " + std::to_string(version));
  }
  if (bytes.size() < kHeaderSize) throw FormatError(FormatError::Kind::Dims, "truncated header");
  const Dims dims{get<std::uint64_t>(bytes, 7), get<std::uint64_t>(bytes, 15), get<std::uint64_t>(bytes, 23)};
  if (dims.n1 == 0 || dims.n2 == 0 || dims.n3 == 0) throw FormatError(FormatError::Kind::Dims, "zero dimension");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 8;
  if (dims.n1 > limit / dims.n2 || dims.n1 * dims.n2 > limit / dims.n3) {
    throw FormatError(FormatError::Kind::Dims, "dims overflow");
  }
  const std::size_t payload = dims.numel() * 8;
  if (bytes.size() != kHeaderSize + payload + 8) {
    throw FormatError(FormatError::Kind::Dims, "file holds " + std::to_string(bytes.size()) +
                                                   " bytes, dims " + to_string(dims) + " need " +
                                                   std::to_string(kHeaderSize + payload + 8));
  }
  const auto body = bytes.subspan(kHeaderSize, payload);
  if (fnv1a64(body) != get<std::uint64_t>(bytes, kHeaderSize + payload)) {
    throw FormatError(FormatError::Kind::Checksum, "payload checksum mismatch");
  }
  std::vector<double> data(dims.numel());
  std::memcpy(data.data(), body.data(), payload);
  return Tensor3(dims, std::move(data));
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto '" + path.string() + "'");
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

void write_tensor(const std::filesystem::path& path, const Tensor3& t) {
  write_file_atomic(path, encode_tensor(t));
}

Tensor3 read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError(FormatError::Kind::Syntax, "not a number: '" + s + "'");
  }
  return v;
}

std::string diagnostics_csv(const std::vector<Diagnostics>& history) {
  std::string out = std::string(kDiagnosticsHeader) + "\n";
  for (const auto& d : history) {
    out += std::to_string(d.iteration) + "," + format_double(d.rel_err_weights) + "," + format_double(d.rel_err_v) +
           "," + format_double(d.loss.total) + "," + format_double(d.loss.l1_lowrank) + "," +
           format_double(d.loss.l2_fidelity) + "," + format_double(d.loss.tv_penalty) + "\n";
  }
  return out;
}

void export_diagnostics(const std::vector<Diagnostics>& history, const std::filesystem::path& path) {
  if (history.empty()) throw std::invalid_argument("export_diagnostics: empty history");
  write_text_atomic(path, diagnostics_csv(history));
}

std::vector<Diagnostics> parse_diagnostics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kDiagnosticsHeader) {
    throw FormatError(FormatError::Kind::Syntax, "diagnostics csv: unexpected header");
  }
  std::vector<Diagnostics> out;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    split_line(line, cells);
    if (cells.size() != 7) throw FormatError(FormatError::Kind::Syntax, "diagnostics csv: expected 7 columns");
    Diagnostics d;
    d.iteration = static_cast<int>(parse_double(cells[0]));
    d.rel_err_weights = parse_double(cells[1]);
    d.rel_err_v = parse_double(cells[2]);
    d.loss.total = parse_double(cells[3]);
    d.loss.l1_lowrank = parse_double(cells[4]);
    d.loss.l2_fidelity = parse_double(cells[5]);
    d.loss.tv_penalty = parse_double(cells[6]);
    out.push_back(d);
  }
  return out;
}

std::string metrics_csv(const MetricReport& r) {
  return "psnr,ssim,sam,peak\n" + format_double(r.psnr) + "," + format_double(r.ssim) + "," + format_double(r.sam) +
         "," + format_double(r.peak) + "\n";
}

std::string accegy_csv(const AccEgyCurve& c) {
  std::string out = "fraction,energy_ratio\n";
  for (Index k = 0; k < c.fractions.size(); ++k) {
    out += format_double(c.fractions[k]) + "," + format_double(c.energy_ratio[k]) + "\n";
  }
  return out;
}

std::string tensor_to_csv(const Tensor3& t) {
  std::string out;
  for (double v : t.data()) out += format_double(v) + "\n";
  return out;
}

Tensor3 tensor_from_csv(const std::string& text, Dims dims) {
  std::vector<double> values;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    split_line(line, cells);
    for (const auto& c : cells) {
      if (!c.empty()) values.push_back(parse_double(c));
    }
  }
  if (values.size() != dims.numel()) {
    throw FormatError(FormatError::Kind::Dims, "csv holds " + std::to_string(values.size()) + " values, dims " +
                                                   to_string(dims) + " need " + std::to_string(dims.numel()));
  }
  return Tensor3(dims, std::move(values));
}

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double number_from(const nlohmann::json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

}  // namespace

nlohmann::json config_to_json(const SolverConfig& cfg) {
  return {
      {"lambda", cfg.lambda},
      {"tau", cfg.tau},
      {"beta", cfg.beta},
      {"t_max", cfg.t_max},
      {"inner_steps", cfg.inner_steps},
      {"adam", {{"lr", cfg.adam.lr}, {"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}}},
      {"seed", cfg.seed},
      {"transformed_dim", cfg.transformed_dim},
      {"p", cfg.p},
      {"q", cfg.q},
      {"activation", to_string(cfg.activation)},
      {"regularizer", to_string(cfg.regularizer)},
      {"plateau_tol", cfg.plateau_tol},
      {"plateau_window", cfg.plateau_window},
      {"sci_init",
       {{"steps", cfg.sci_init.steps},
        {"tv_threshold", cfg.sci_init.tv_threshold},
        {"tv_step", cfg.sci_init.tv_step}}},
  };
}

SolverConfig config_from_json(const nlohmann::json& j) {
  SolverConfig cfg;
  cfg.lambda = j.at("lambda").get<double>();
  cfg.tau = j.at("tau").get<double>();
  cfg.beta = j.at("beta").get<double>();
  cfg.t_max = j.at("t_max").get<int>();
  cfg.inner_steps = j.at("inner_steps").get<int>();
  const auto& a = j.at("adam");
  cfg.adam = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
              a.at("eps").get<double>()};
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.transformed_dim = j.at("transformed_dim").get<Index>();
  cfg.p = j.at("p").get<Index>();
  cfg.q = j.at("q").get<Index>();
  cfg.activation = parse_activation(j.at("activation").get<std::string>());
  cfg.regularizer = parse_regularizer(j.at("regularizer").get<std::string>());
  cfg.plateau_tol = j.at("plateau_tol").get<double>();
  cfg.plateau_window = j.at("plateau_window").get<int>();
  const auto& s = j.at("sci_init");
  cfg.sci_init = {s.at("steps").get<int>(), s.at("tv_threshold").get<double>(), s.at("tv_step").get<double>()};
  return cfg;
}

nlohmann::json metrics_to_json(const MetricReport& r) {
  nlohmann::json j = {{"psnr", number(r.psnr)}, {"ssim", number(r.ssim)}, {"sam", number(r.sam)}, {"peak", r.peak}};
  if (r.per_slice_psnr) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : *r.per_slice_psnr) arr.push_back(number(v));
    j["per_slice_psnr"] = arr;
  }
  return j;
}

MetricReport metrics_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.psnr = number_from(j.at("psnr"));
  r.ssim = number_from(j.at("ssim"));
  r.sam = number_from(j.at("sam"));
  r.peak = j.at("peak").get<double>();
  if (j.contains("per_slice_psnr")) {
    std::vector<double> v;
    for (const auto& e : j.at("per_slice_psnr")) v.push_back(number_from(e));
    r.per_slice_psnr = std::move(v);
  }
  return r;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j = {
      {"format_version", m.format_version},
      {"command", m.command},
      {"argv", m.argv},
      {"config", m.config},
      {"seed", m.seed},
      {"started_at", m.started_at},
      {"finished_at", m.finished_at},
      {"diagnostics_path", m.diagnostics_path},
      {"warnings", m.warnings},
  };
  j["metrics"] = m.metrics ? metrics_to_json(*m.metrics) : nlohmann::json(nullptr);
  j["normalization"] = m.normalization
                           ? nlohmann::json{{"min", m.normalization->min}, {"max", m.normalization->max}}
                           : nlohmann::json(nullptr);
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.format_version = j.at("format_version").get<int>();
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.config = j.at("config");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  m.diagnostics_path = j.at("diagnostics_path").get<std::string>();
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (!j.at("metrics").is_null()) m.metrics = metrics_from_json(j.at("metrics"));
  if (!j.at("normalization").is_null()) {
    m.normalization = Normalization{j["normalization"].at("min").get<double>(), j["normalization"].at("max").get<double>()};
  }
  return m;
}

std::string serialize_manifest(const RunManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

RunManifest parse_manifest(const std::string& text) {
  try {
    return manifest_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::Syntax, std::string("manifest: ") + e.what());
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace ssnt::io
