#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>

#include "json.hpp"

#include "defclust/config.hpp"
#include "defclust/version.hpp"

namespace defclust {

/// 64-bit FNV-1a digest as 16 lowercase hex digits.
inline std::string fnv1a64_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Writes to a sibling temporary file, then renames it over the target.
inline void write_file_atomic(const std::filesystem::path& target, std::string_view content) {
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + ": " + ec.message());
  }
}

/// Describes one invocation. Everything except wall time determines the outputs.
struct Manifest {
  std::string subcommand;
  nlohmann::json config;
  nlohmann::json options;
  SeedSpec seed;
  std::string tool_version;
  std::string config_hash;
  double wall_time_seconds = 0.0;

  nlohmann::json to_json() const {
    return {{"subcommand", subcommand},
            {"config", config},
            {"options", options},
            {"seed", {{"master", seed.master_seed}, {"run", seed.run}}},
            {"tool_version", tool_version},
            {"config_hash", config_hash},
            {"wall_time_seconds", wall_time_seconds}};
  }
};

/// The hash covers the resolved configuration, subcommand, options and version.
inline Manifest make_manifest(const std::string& subcommand, const RunConfig& cfg, nlohmann::json options) {
  Manifest m;
  m.subcommand = subcommand;
  m.config = cfg.resolved();
  m.options = std::move(options);
  m.seed = cfg.seed;
  m.tool_version = kToolVersion;
  const nlohmann::json canonical = {
      {"subcommand", m.subcommand}, {"config", m.config}, {"options", m.options}, {"tool_version", m.tool_version}};
  m.config_hash = fnv1a64_hex(canonical.dump());
  return m;
}

/// Wall-clock stopwatch for the manifest's wall time field.
class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace defclust
