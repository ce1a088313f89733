#include "volterra/formats.hpp"

#include <openssl/evp.h>

#include <bit>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

namespace bai = boost::archive::iterators;
using ToBase64 = bai::base64_from_binary<bai::transform_width<std::string::const_iterator, 6, 8>>;
using FromBase64 = bai::transform_width<bai::binary_from_base64<std::string::const_iterator>, 8, 6>;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
std::string pack(const std::vector<T>& v) {
  std::string bytes(v.size() * sizeof(T), '\0');
  std::memcpy(bytes.data(), v.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += sizeof(T)) std::reverse(bytes.begin() + i, bytes.begin() + i + sizeof(T));
  }
  return bytes;
}

template <typename T>
std::vector<T> unpack(std::string bytes) {
  if (bytes.size() % sizeof(T) != 0) throw InputError("base64 payload length is not a multiple of 8 bytes");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += sizeof(T)) std::reverse(bytes.begin() + i, bytes.begin() + i + sizeof(T));
  }
  std::vector<T> v(bytes.size() / sizeof(T));
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

std::string to_base64(const std::string& bytes) {
  std::string out(ToBase64(bytes.begin()), ToBase64(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::string from_base64(std::string text) {
  const auto pad = static_cast<std::size_t>(std::count(text.begin(), text.end(), '='));
  if (pad > 2 || (pad > 0 && text.find('=') != text.size() - pad)) throw InputError("malformed base64 padding");
  std::replace(text.begin(), text.end(), '=', 'A');
  try {
    std::string out(FromBase64(text.begin()), FromBase64(text.end()));
    out.erase(out.size() - std::min(out.size(), pad));
    return out;
  } catch (const std::exception&) {
    throw InputError("malformed base64 data");
  }
}

Json axis_json(const LatticeAxis& a) { return Json{{"start", a.start}, {"step", a.step}, {"count", a.count}}; }

LatticeAxis axis_from(const Json& j) {
  return {j.at("start").get<std::int64_t>(), j.at("step").get<std::int64_t>(), j.at("count").get<std::int64_t>()};
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string encode_f64(const std::vector<double>& v) { return to_base64(pack(v)); }
std::vector<double> decode_f64(const std::string& b64) { return unpack<double>(from_base64(b64)); }
std::string encode_i64(const std::vector<std::int64_t>& v) { return to_base64(pack(v)); }
std::vector<std::int64_t> decode_i64(const std::string& b64) { return unpack<std::int64_t>(from_base64(b64)); }

std::string encode_complex(const std::vector<std::complex<double>>& v) {
  std::vector<double> flat;
  flat.reserve(v.size() * 2);
  for (const auto& z : v) {
    flat.push_back(z.real());
    flat.push_back(z.imag());
  }
  return encode_f64(flat);
}

std::vector<std::complex<double>> decode_complex(const std::string& b64) {
  const auto flat = decode_f64(b64);
  if (flat.size() % 2 != 0) throw InputError("complex payload has an odd number of values");
  std::vector<std::complex<double>> v(flat.size() / 2);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = {flat[2 * i], flat[2 * i + 1]};
  return v;
}

Json envelope(const std::string& format, const std::string& config_hash) {
  return Json{{"format", format}, {"format_version", kFormatVersion}, {"config_hash", config_hash}};
}

void check_envelope(const Json& j, const std::string& format) {
  if (!j.is_object() || !j.contains("format") || !j.contains("format_version")) {
    throw InputError("file has no format header (expected " + format + ")");
  }
  if (j.at("format").get<std::string>() != format) {
    throw InputError("expected a " + format + " file, found " + j.at("format").get<std::string>());
  }
  const auto version = j.at("format_version").get<std::string>();
  if (version.substr(0, version.find('.')) != "1") {
    throw InputError("unsupported " + format + " format version " + version);
  }
}

Json plan_to_json(const SweepPlan& plan, const std::string& config_hash) {
  Json j = envelope("volterra-plan", config_hash);
  j["id"] = plan.id;
  j["delta_f_hz"] = plan.delta_f_hz;
  j["max_mixing_order"] = plan.max_mixing_order;
  Json axes = Json::array();
  for (const auto& a : plan.axes) axes.push_back(axis_json(a));
  j["axes"] = axes;
  j["levels_dbm"] = plan.levels_dbm;
  j["z0"] = plan.z0;
  j["n_extra"] = plan.n_extra;
  j["seed"] = plan.seed;
  j["V"] = plan.amplitudes;
  return j;
}

SweepPlan plan_from_json(const Json& j) {
  check_envelope(j, "volterra-plan");
  return guarded("plan", [&] {
    SweepPlan p;
    p.id = j.at("id").get<std::string>();
    p.delta_f_hz = j.at("delta_f_hz").get<double>();
    p.max_mixing_order = j.at("max_mixing_order").get<int>();
    for (const auto& a : j.at("axes")) p.axes.push_back(axis_from(a));
    p.levels_dbm = j.at("levels_dbm").get<std::vector<double>>();
    p.z0 = j.at("z0").get<double>();
    p.n_extra = j.at("n_extra").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.amplitudes = j.at("V").get<std::vector<std::vector<double>>>();
    return p;
  });
}

Json dataset_to_json(const SpectralDataset& ds, const std::string& config_hash) {
  Json j = envelope("volterra-spectral-dataset", config_hash);
  j["plan_id"] = ds.plan_id();
  j["tones"] = ds.tones();
  j["max_mixing_order"] = ds.max_mixing_order();
  j["delta_f_hz"] = ds.delta_f_hz;
  j["capture"] = {{"source", ds.capture.source},
                  {"sample_rate_hz", ds.capture.sample_rate_hz},
                  {"record_s", ds.capture.record_s},
                  {"settle_s", ds.capture.settle_s},
                  {"truncation", ds.capture.truncation}};
  Json k = Json::array();
  for (const auto& idx : ds.indices()) k.push_back(std::vector<int>(idx.values().begin(), idx.values().end()));
  j["k"] = k;
  j["V"] = ds.amplitudes;
  j["triplets"] = ds.triplets;
  Json blocks = Json::array();
  for (const auto& [key, b] : ds.blocks()) {
    blocks.push_back({{"triplet", key.first}, {"amplitude", key.second}, {"B", encode_complex(b)}});
  }
  j["lsop"] = blocks;
  return j;
}

SpectralDataset dataset_from_json(const Json& j) {
  check_envelope(j, "volterra-spectral-dataset");
  return guarded("dataset", [&] {
    SpectralDataset ds(j.at("plan_id").get<std::string>(), j.at("tones").get<int>(), j.at("max_mixing_order").get<int>());
    // Index lists from other producers may be ordered differently; remap by value.
    std::vector<std::size_t> map;
    for (const auto& k : j.at("k")) {
      const FrequencyIndex idx(k.get<std::vector<int>>());
      const CanonicalIndex c = canonicalize_index(idx);
      const auto pos = ds.position(c.index);
      if (!pos || c.conjugate) throw InputError("dataset index " + idx.to_string() + " is not a canonical index of the plan");
      map.push_back(*pos);
    }
    ds.delta_f_hz = j.at("delta_f_hz").get<double>();
    const auto& cap = j.at("capture");
    ds.capture = {cap.at("source").get<std::string>(), cap.at("sample_rate_hz").get<double>(),
                  cap.at("record_s").get<double>(), cap.at("settle_s").get<double>(), cap.at("truncation").get<int>()};
    ds.amplitudes = j.at("V").get<std::vector<std::vector<double>>>();
    ds.triplets = j.at("triplets").get<std::vector<std::vector<std::int64_t>>>();
    for (const auto& blk : j.at("lsop")) {
      const auto values = decode_complex(blk.at("B").get<std::string>());
      if (values.size() != map.size()) throw InputError("phasor block length does not match the index list");
      SpectralDataset::Block b(ds.indices().size(), std::complex<double>{});
      std::vector<bool> seen(b.size(), false);
      for (std::size_t i = 0; i < map.size(); ++i) {
        b[map[i]] = values[i];
        seen[map[i]] = true;
      }
      if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw InputError("phasor block does not cover every index of the plan");
      }
      ds.set_block(blk.at("triplet").get<std::size_t>(), blk.at("amplitude").get<std::size_t>(), std::move(b));
    }
    return ds;
  });
}

Json archive_to_json(const KernelSetArchive& archive, const std::string& config_hash) {
  Json j = envelope("volterra-kernel-archive", config_hash);
  const auto& m = archive.metadata();
  j["metadata"] = {{"system_id", m.system_id},
                   {"plan_id", m.plan_id},
                   {"truncation_order", m.truncation_order},
                   {"extraction_settings", m.extraction_settings.empty() ? Json::object() : Json::parse(m.extraction_settings)}};
  Json grids = Json::array();
  for (const auto& g : archive.grids()) {
    Json axes = Json::array();
    for (const auto& a : g.axes()) axes.push_back(axis_json(a));
    std::vector<std::int64_t> keys, counts;
    std::vector<std::complex<double>> sums;
    for (const auto& [key, acc] : g.samples()) {
      keys.insert(keys.end(), key.begin(), key.end());
      counts.push_back(acc.count);
      sums.push_back(acc.sum);
    }
    grids.push_back({{"order", g.order()},
                     {"delta_f_hz", g.delta_f_hz()},
                     {"axes", axes},
                     {"points", g.size()},
                     {"keys", encode_i64(keys)},
                     {"counts", encode_i64(counts)},
                     {"sums", encode_complex(sums)}});
  }
  j["grids"] = grids;
  return j;
}

KernelSetArchive archive_from_json(const Json& j) {
  check_envelope(j, "volterra-kernel-archive");
  return guarded("kernel archive", [&] {
    const auto& m = j.at("metadata");
    ArchiveMetadata meta{m.at("system_id").get<std::string>(), m.at("plan_id").get<std::string>(),
                         m.at("truncation_order").get<int>(), m.at("extraction_settings").dump()};
    if (meta.extraction_settings == "{}") meta.extraction_settings.clear();
    std::vector<KernelGrid> grids;
    for (const auto& gj : j.at("grids")) {
      std::vector<LatticeAxis> axes;
      for (const auto& a : gj.at("axes")) axes.push_back(axis_from(a));
      const int order = gj.at("order").get<int>();
      KernelGrid g(order, gj.at("delta_f_hz").get<double>(), axes);
      const auto keys = decode_i64(gj.at("keys").get<std::string>());
      const auto counts = decode_i64(gj.at("counts").get<std::string>());
      const auto sums = decode_complex(gj.at("sums").get<std::string>());
      const std::size_t points = gj.at("points").get<std::size_t>();
      if (counts.size() != points || sums.size() != points || keys.size() != points * static_cast<std::size_t>(order)) {
        throw InputError("kernel grid payload sizes disagree");
      }
      for (std::size_t p = 0; p < points; ++p) {
        Coordinate key(keys.begin() + static_cast<std::ptrdiff_t>(p * order),
                       keys.begin() + static_cast<std::ptrdiff_t>((p + 1) * order));
        g.restore(std::move(key), {sums[p], counts[p]});
      }
      g.freeze();
      grids.push_back(std::move(g));
    }
    return KernelSetArchive(std::move(meta), std::move(grids));
  });
}

Json settings_json(const ExtractionSettings& s) {
  return Json{{"truncation_order", s.truncation_order},
              {"two_stage", s.two_stage},
              {"stage1_max_order", s.stage1_max_order},
              {"stage1_window_db", s.stage1_window_db},
              {"column_scaling", s.column_scaling},
              {"residual_tolerance", s.residual_tolerance},
              {"success_threshold", s.success_threshold}};
}

std::string settings_to_json(const ExtractionSettings& s) { return settings_json(s).dump(); }

ExtractionSettings settings_from_json(const Json& j) {
  return guarded("extraction settings", [&] {
    ExtractionSettings s;
    s.truncation_order = j.value("truncation_order", s.truncation_order);
    s.two_stage = j.value("two_stage", s.two_stage);
    s.stage1_max_order = j.value("stage1_max_order", s.stage1_max_order);
    s.stage1_window_db = j.value("stage1_window_db", s.stage1_window_db);
    s.column_scaling = j.value("column_scaling", s.column_scaling);
    s.residual_tolerance = j.value("residual_tolerance", s.residual_tolerance);
    s.success_threshold = j.value("success_threshold", s.success_threshold);
    return s;
  });
}

Json report_to_json(const CompletenessReport& r, std::size_t max_failures) {
  Json failures = Json::array();
  for (std::size_t i = 0; i < std::min(max_failures, r.failures.size()); ++i) {
    const auto& f = r.failures[i];
    failures.push_back({{"triplet", f.triplet}, {"k", std::vector<int>(f.k.values().begin(), f.k.values().end())}, {"reason", f.reason}});
  }
  return Json{{"systems", r.systems},
              {"solved", r.solved},
              {"warnings", r.warnings},
              {"failed", r.failures.size()},
              {"resolved_fraction", r.resolved_fraction()},
              {"max_relative_residual", r.max_relative_residual},
              {"max_condition", r.max_condition},
              {"points_per_order", r.points_per_order},
              {"success", r.success},
              {"failures", failures}};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::string waveforms_csv(const std::vector<Waveform>& orders, const Waveform& total) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t,y1,y2,y3,y_total\n";
  for (std::size_t i = 0; i < total.size(); ++i) {
    os << total.time(i);
    for (std::size_t n = 0; n < 3; ++n) os << ',' << (n < orders.size() ? orders[n].samples[i] : 0.0);
    os << ',' << total.samples[i] << '\n';
  }
  return os.str();
}

}  // namespace volterra
