#pragma once

// Config loading, result files and the run manifest.

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "dsj/errors.hpp"
#include "dsj/format.hpp"
#include "dsj/kinematics.hpp"
#include "dsj/model.hpp"
#include "dsj/sim.hpp"

namespace dsj {

inline constexpr const char* kToolName = "dsj";
inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Hashing

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw NumericalError("cannot allocate a digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw NumericalError("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return text;
}

// ---------------------------------------------------------------------------
// Configuration

/// Parses configuration text and rejects keys the schema does not know.
inline nlohmann::json parse_config(const std::string& text) {
  nlohmann::json raw;
  try {
    raw = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what());
  }
  const auto offenders = unknown_config_keys(raw);
  if (!offenders.empty()) {
    std::string list;
    for (const auto& o : offenders) list += (list.empty() ? "" : ", ") + o;
    throw UnknownKeyError(list);
  }
  return raw;
}

inline nlohmann::json load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file " + path.string() + " does not exist");
  return parse_config(read_file(path));
}

/// Applies one `dotted.key=value` override. The key must already exist; the value
/// is read as JSON when it parses, else as a string.
inline void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("--set", "expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  nlohmann::json* node = &config;
  std::stringstream path(key);
  std::string part;
  while (std::getline(path, part, '.')) {
    if (node->is_object() && node->contains(part)) {
      node = &(*node)[part];
    } else if (node->is_array() && !part.empty() &&
               std::all_of(part.begin(), part.end(), [](unsigned char c) { return std::isdigit(c); }) &&
               std::stoul(part) < node->size()) {
      node = &(*node)[std::stoul(part)];
    } else {
      throw UnknownKeyError("override names a key that is not in the config: " + key);
    }
  }
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  *node = std::move(value);
}

// ---------------------------------------------------------------------------
// CSV builders (SI units)

struct EllipseRecord {
  double alpha = 0.0;
  double q_s = 0.0;
  EllipseResult result;
  StiffnessMatrix analytic;
};

inline std::string ellipse_csv(const std::vector<EllipseRecord>& rows) {
  std::ostringstream os;
  os << "alpha,q_s_rad,deviation_radius_rad,K11_Nm_per_rad,K12_Nm_per_rad,K22_Nm_per_rad,"
        "semi_axis_major_Nm_per_rad,semi_axis_minor_Nm_per_rad,orientation_rad,"
        "analytic_K11_Nm_per_rad,analytic_K12_Nm_per_rad,analytic_K22_Nm_per_rad,rel_frobenius_error\n";
  for (const auto& r : rows) {
    const auto& K = r.result.K_regressed;
    const auto& A = r.analytic;
    os << format_double(r.alpha) << ',' << format_double(r.q_s) << ',' << format_double(r.result.deviation_radius)
       << ',' << format_double(K(0, 0)) << ',' << format_double(K(0, 1)) << ',' << format_double(K(1, 1)) << ','
       << format_double(r.result.semi_axes(0)) << ',' << format_double(r.result.semi_axes(1)) << ','
       << format_double(r.result.orientation) << ',' << format_double(A(0, 0)) << ',' << format_double(A(0, 1))
       << ',' << format_double(A(1, 1)) << ','
       << format_double(linalg::relative_frobenius(K.matrix(), A.matrix())) << '\n';
  }
  return os.str();
}

inline std::string step_csv(const std::vector<std::pair<double, TimeSeries>>& runs) {
  std::ostringstream os;
  const Eigen::Index n = runs.empty() ? 0 : runs.front().second.q.cols();
  os << "alpha,t_s";
  for (Eigen::Index j = 1; j <= n; ++j) os << ",q" << j << "_rad";
  for (Eigen::Index j = 1; j <= n; ++j) os << ",qdot" << j << "_rad_per_s";
  for (Eigen::Index j = 1; j <= n; ++j) os << ",tau" << j << "_Nm";
  os << '\n';
  for (const auto& [alpha, ts] : runs) {
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      os << format_double(alpha) << ',' << format_double(ts.t[k]);
      for (Eigen::Index j = 0; j < n; ++j) os << ',' << format_double(ts.q(row, j));
      for (Eigen::Index j = 0; j < n; ++j) os << ',' << format_double(ts.qdot(row, j));
      for (Eigen::Index j = 0; j < n; ++j) os << ',' << format_double(ts.tau(row, j));
      os << '\n';
    }
  }
  return os.str();
}

inline std::string grasp_csv(const std::vector<std::pair<double, std::vector<GraspPoint>>>& curves) {
  std::ostringstream os;
  os << "alpha,delta_p_m,F_p_N,K_p_N_per_m,iterations\n";
  for (const auto& [alpha, curve] : curves)
    for (const auto& p : curve)
      os << format_double(alpha) << ',' << format_double(p.delta_p) << ',' << format_double(p.F_p) << ','
         << format_double(p.K_p) << ',' << p.iterations << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Results and manifest

struct Artifact {
  std::string name;  // file name inside the output directory
  std::string content;
};

struct OutputRecord {
  std::string path;
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunManifest {
  std::string config_sha256;
  std::string tool_version = kToolVersion;
  std::string subcommand;
  std::vector<std::string> arguments;
  std::vector<OutputRecord> outputs;
  std::string timestamp;
  nlohmann::json summary = nlohmann::json::object();
  std::filesystem::path manifest_path;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = kToolName;
    j["tool_version"] = tool_version;
    j["config_sha256"] = config_sha256;
    j["command"] = {{"subcommand", subcommand}, {"arguments", arguments}};
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& o : outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
    j["outputs"] = std::move(outs);
    j["timestamp"] = timestamp;
    j["summary"] = summary;
    return j;
  }
};

/// UTC time in ISO-8601; honours SOURCE_DATE_EPOCH for reproducible manifests.
inline std::string run_timestamp() {
  std::time_t now = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') now = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

/// Writes via a temporary sibling and a rename so readers never see partial files.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace detail

/// Writes every artifact into out_dir, then the manifest (last, atomically).
inline RunManifest write_results(const std::vector<Artifact>& artifacts, const std::filesystem::path& out_dir,
                                 RunManifest manifest) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory " + out_dir.string() + (ec ? ": " + ec.message() : ""));

  manifest.outputs.clear();
  for (const auto& a : artifacts) {
    const auto path = out_dir / a.name;
    detail::write_atomically(path, a.content);
    const std::string written = read_file(path);
    manifest.outputs.push_back({a.name, sha256_hex(written), written.size()});
  }
  if (manifest.timestamp.empty()) manifest.timestamp = run_timestamp();
  manifest.manifest_path = out_dir / "manifest.json";
  detail::write_atomically(manifest.manifest_path, manifest.to_json().dump(2) + "\n");
  return manifest;
}

}  // namespace dsj
