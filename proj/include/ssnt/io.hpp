#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssnt/eval.hpp"
#include "ssnt/solvers.hpp"
#include "ssnt/tensor.hpp"

namespace ssnt::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  /// Syntax covers malformed text inputs (CSV, JSON).
  enum class Kind { Magic, Version, Checksum, Dims, Syntax };
  FormatError(Kind kind, const std::string& what);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string to_string(FormatError::Kind kind);

// Tensor container, all integers and reals little-endian:
//   "SSNT1" | u16 version | u64 n1 | u64 n2 | u64 n3 | f64 payload[n1*n2*n3] | u64 fnv1a64(payload)
// The payload follows the in-memory slice-major layout.
inline constexpr char kMagic[5] = {'S', 'S', 'N', 'T', '1'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 5 + 2 + 3 * 8;

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

std::vector<unsigned char> encode_tensor(const Tensor3& t);
Tensor3 decode_tensor(std::span<const unsigned char> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor3& t);
Tensor3 read_tensor(const std::filesystem::path& path);

/// Write to a sibling temporary, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<unsigned char> read_file(const std::filesystem::path& path);

/// Shortest decimal that parses back to the same double; "inf", "-inf", "nan"
/// for non-finite values.
std::string format_double(double v);
double parse_double(const std::string& s);

inline constexpr const char* kDiagnosticsHeader =
    "iteration,rel_err_weights,rel_err_V,loss_total,loss_lowrank,loss_fidelity,tv_penalty";

std::string diagnostics_csv(const std::vector<Diagnostics>& history);
/// Throws std::invalid_argument on an empty history (no file is written).
void export_diagnostics(const std::vector<Diagnostics>& history, const std::filesystem::path& path);
std::vector<Diagnostics> parse_diagnostics_csv(const std::string& text);

std::string metrics_csv(const MetricReport& r);
std::string accegy_csv(const AccEgyCurve& c);

/// Flat CSV of values in the slice-major layout, one value per line.
std::string tensor_to_csv(const Tensor3& t);
Tensor3 tensor_from_csv(const std::string& text, Dims dims);

nlohmann::json config_to_json(const SolverConfig& cfg);
SolverConfig config_from_json(const nlohmann::json& j);
nlohmann::json metrics_to_json(const MetricReport& r);
MetricReport metrics_from_json(const nlohmann::json& j);

struct Normalization {
  double min = 0.0;
  double max = 1.0;
  bool operator==(const Normalization&) const = default;
};

struct RunManifest {
  int format_version = 1;
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;  // command-specific snapshot
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::string diagnostics_path;
  std::optional<MetricReport> metrics;
  std::optional<Normalization> normalization;
  std::vector<std::string> warnings;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
std::string serialize_manifest(const RunManifest& m);
RunManifest parse_manifest(const std::string& text);

/// UTC time as ISO-8601.
std::string utc_timestamp();

}  // namespace ssnt::io
