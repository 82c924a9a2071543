#pragma once

// Run manifests: which inputs a command consumed and which artifacts it
// produced, each with a content digest. A manifest sits next to the primary
// artifact as "<artifact>.manifest.json".

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "contratopic/error.hpp"
#include "contratopic/hash.hpp"

namespace contratopic {

inline constexpr const char* tool_version = "0.1.0";

struct ArtifactEntry {
  std::string role;
  std::string path;
  std::string digest;
};

struct RunManifest {
  std::string tool_version = contratopic::tool_version;
  std::string command;
  /// Named config hashes, e.g. {"train", <hash>}.
  std::vector<std::pair<std::string, std::string>> config_hashes;
  std::string vocab_hash;
  std::vector<ArtifactEntry> inputs;
  std::vector<ArtifactEntry> outputs;
  std::string started;
  std::string finished;

  void add_input(const std::string& role, const std::string& path) { inputs.push_back({role, path, digest_file(path)}); }
  void add_output(const std::string& role, const std::string& path) { outputs.push_back({role, path, digest_file(path)}); }

  const ArtifactEntry* output(const std::string& role) const {
    for (const auto& o : outputs)
      if (o.role == role) return &o;
    return nullptr;
  }
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string manifest_path_for(const std::string& artifact) { return artifact + ".manifest.json"; }

inline nlohmann::json to_json(const RunManifest& m) {
  auto entries = [](const std::vector<ArtifactEntry>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : v) a.push_back({{"role", e.role}, {"path", e.path}, {"digest", e.digest}});
    return a;
  };
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& [k, v] : m.config_hashes) hashes[k] = v;
  return {{"tool_version", m.tool_version}, {"command", m.command},   {"config_hashes", hashes},
          {"vocab_hash", m.vocab_hash},     {"inputs", entries(m.inputs)}, {"outputs", entries(m.outputs)},
          {"started", m.started},           {"finished", m.finished}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j, const std::string& name) {
  RunManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    for (const auto& [k, v] : j.at("config_hashes").items()) m.config_hashes.emplace_back(k, v.get<std::string>());
    m.vocab_hash = j.at("vocab_hash").get<std::string>();
    for (const auto* key : {"inputs", "outputs"}) {
      auto& dst = std::string(key) == "inputs" ? m.inputs : m.outputs;
      for (const auto& e : j.at(key)) dst.push_back({e.at("role"), e.at("path"), e.at("digest")});
    }
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(name + ": malformed manifest: " + e.what());
  }
  return m;
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write manifest: " + path);
  out << to_json(m).dump(2) << "\n";
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed manifest: " + e.what());
  }
  return manifest_from_json(j, path);
}

/// Manifest of the command that produced `artifact`, if present. Throws
/// ArtifactMismatch when the artifact no longer matches its recorded digest.
inline std::optional<RunManifest> verified_manifest(const std::string& artifact) {
  const auto mpath = manifest_path_for(artifact);
  if (!std::filesystem::exists(mpath)) return std::nullopt;
  auto m = read_manifest(mpath);
  const auto name = std::filesystem::path(artifact).filename().string();
  for (const auto& o : m.outputs) {
    if (std::filesystem::path(o.path).filename().string() != name) continue;
    const auto now = digest_file(artifact);
    if (now != o.digest)
      throw ArtifactMismatch(artifact + " has digest " + now + " but " + mpath + " records " + o.digest + " (stale or modified artifact)");
    return m;
  }
  throw ArtifactMismatch(mpath + " does not list " + artifact + " among its outputs");
}

}  // namespace contratopic
