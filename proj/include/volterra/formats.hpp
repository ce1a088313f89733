#pragma once

// On-disk formats. Plans, datasets and archives are versioned JSON documents
// carrying a config hash; bulk numbers travel as base64 little-endian f64.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "volterra/extractor.hpp"
#include "volterra/kernel_store.hpp"
#include "volterra/probing.hpp"
#include "volterra/sweep_planner.hpp"

namespace volterra {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFormatVersion = "1.0";

std::string sha256_hex(const std::string& data);

std::string encode_f64(const std::vector<double>& v);
std::vector<double> decode_f64(const std::string& b64);
std::string encode_complex(const std::vector<std::complex<double>>& v);
std::vector<std::complex<double>> decode_complex(const std::string& b64);
std::string encode_i64(const std::vector<std::int64_t>& v);
std::vector<std::int64_t> decode_i64(const std::string& b64);

/// Adds format/format_version/config_hash header fields.
Json envelope(const std::string& format, const std::string& config_hash);
/// Throws InputError on a wrong format name or an unknown major version.
void check_envelope(const Json& j, const std::string& format);

Json plan_to_json(const SweepPlan& plan, const std::string& config_hash);
SweepPlan plan_from_json(const Json& j);

Json dataset_to_json(const SpectralDataset& ds, const std::string& config_hash);
SpectralDataset dataset_from_json(const Json& j);

Json archive_to_json(const KernelSetArchive& archive, const std::string& config_hash);
KernelSetArchive archive_from_json(const Json& j);

Json settings_json(const ExtractionSettings& s);
std::string settings_to_json(const ExtractionSettings& s);
ExtractionSettings settings_from_json(const Json& j);

Json report_to_json(const CompletenessReport& r, std::size_t max_failures = 50);

/// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

/// Columns t, y1, y2, y3, y_total (missing orders written as 0).
std::string waveforms_csv(const std::vector<Waveform>& orders, const Waveform& total);

}  // namespace volterra
