#include "scs/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "scs/common.hpp"

namespace scs {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot read input file '" + path + "'");
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return hex64(fnv1a64(bytes.str()));
}

void add_input_digest(RunManifest& manifest, const std::string& path) {
  manifest.inputs.emplace_back(path, digest_file(path));
}

std::string now_utc() {
  std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json manifest_json(const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["version"] = manifest.version;
  j["config"] = manifest.config;
  if (manifest.has_seed) j["seed"] = manifest.seed;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [path, digest] : manifest.inputs) {
    inputs.push_back({{"path", path}, {"fnv1a64", digest}});
  }
  j["inputs"] = inputs;
  if (!manifest.timestamp.empty()) j["timestamp"] = manifest.timestamp;
  return j;
}

std::vector<std::string> manifest_comments(const RunManifest& manifest) {
  std::vector<std::string> lines;
  lines.push_back("command: " + manifest.command);
  lines.push_back("version: " + manifest.version);
  if (manifest.has_seed) lines.push_back("seed: " + std::to_string(manifest.seed));
  if (!manifest.config.empty()) {
    lines.push_back("config: " + manifest.config.dump());
  }
  for (const auto& [path, digest] : manifest.inputs) {
    lines.push_back("input " + path + ": fnv1a64 " + digest);
  }
  return lines;
}

}  // namespace scs
