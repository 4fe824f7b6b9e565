#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace scs {

inline constexpr const char* kVersion = "0.1.0";

/**
 * Provenance block attached to every CLI result: the subcommand, the fully
 * resolved options it ran with, the RNG seed (when one applies) and an
 * FNV-1a digest of each input file. The timestamp is reported in the JSON
 * output only, so CSV mirrors stay byte-identical across reruns.
 */
struct RunManifest {
  std::string command;
  std::string version = kVersion;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::string timestamp;  // UTC, filled by now_utc()
};

/** 16-digit lowercase hex form of a 64-bit digest. */
std::string hex64(std::uint64_t v);

/** Digest of a file's raw bytes; throws validation_error if unreadable. */
std::string digest_file(const std::string& path);

void add_input_digest(RunManifest& manifest, const std::string& path);

/** Current time as UTC RFC 3339, e.g. 2024-05-01T12:00:00Z. */
std::string now_utc();

/** The manifest as a JSON object (includes the timestamp when set). */
nlohmann::json manifest_json(const RunManifest& manifest);

/** Deterministic comment lines for CSV mirrors (never the timestamp). */
std::vector<std::string> manifest_comments(const RunManifest& manifest);

}  // namespace scs
