#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/hash.hpp"
#include "ftsbench/version.hpp"

namespace ftsbench::pipeline {

enum class TaskStatus { Ok, Failed, Blocked };

inline const char* to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Ok: return "ok";
    case TaskStatus::Failed: return "failed";
    case TaskStatus::Blocked: return "blocked";
  }
  return "";
}

inline TaskStatus parse_status(const std::string& s) {
  if (s == "ok") return TaskStatus::Ok;
  if (s == "failed") return TaskStatus::Failed;
  if (s == "blocked") return TaskStatus::Blocked;
  throw IoError("manifest: unknown task status '" + s + "'");
}

struct Artifact {
  std::string path;  // relative to the run directory
  std::string sha256;
};

struct TaskRecord {
  std::string id;
  std::string stage;
  std::string inputs_hash;
  std::vector<Artifact> artifacts;
  double seconds = 0.0;
  TaskStatus status = TaskStatus::Ok;
  std::string error;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::vector<TaskRecord> tasks;  // in scheduling order

  const TaskRecord* find(const std::string& id) const {
    for (const auto& t : tasks)
      if (t.id == id) return &t;
    return nullptr;
  }
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : m.tasks) {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : t.artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}});
    nlohmann::json j = {{"id", t.id},           {"stage", t.stage},   {"inputs_hash", t.inputs_hash},
                        {"artifacts", arts},    {"seconds", t.seconds}, {"status", to_string(t.status)}};
    if (!t.error.empty()) j["error"] = t.error;
    tasks.push_back(std::move(j));
  }
  return {{"tool_version", m.tool_version}, {"config_hash", m.config_hash}, {"tasks", tasks}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& t : j.at("tasks")) {
      TaskRecord r;
      r.id = t.at("id").get<std::string>();
      r.stage = t.at("stage").get<std::string>();
      r.inputs_hash = t.at("inputs_hash").get<std::string>();
      for (const auto& a : t.at("artifacts")) r.artifacts.push_back({a.at("path"), a.at("sha256")});
      r.seconds = t.at("seconds").get<double>();
      r.status = parse_status(t.at("status").get<std::string>());
      r.error = t.value("error", "");
      m.tasks.push_back(std::move(r));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
}

inline constexpr const char* kManifestName = "manifest.json";

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  write_file((dir / kManifestName).string(), to_json(m).dump(2) + "\n");
}

inline std::optional<RunManifest> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return manifest_from_json(nlohmann::json::parse(read_file(path.string())));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest " + path.string() + ": " + e.what());
  }
}

/// True when every artifact of the record exists with the recorded hash.
inline bool artifacts_intact(const std::filesystem::path& dir, const TaskRecord& t) {
  for (const auto& a : t.artifacts) {
    const auto p = dir / a.path;
    if (!std::filesystem::exists(p) || sha256_file(p.string()) != a.sha256) return false;
  }
  return true;
}

/// Problems found when re-hashing the artifacts of successful tasks; empty when intact.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  std::vector<std::string> problems;
  for (const auto& t : m.tasks) {
    if (t.status != TaskStatus::Ok) continue;
    for (const auto& a : t.artifacts) {
      const auto p = dir / a.path;
      if (!std::filesystem::exists(p)) problems.push_back(t.id + ": missing " + a.path);
      else if (sha256_file(p.string()) != a.sha256) problems.push_back(t.id + ": modified " + a.path);
    }
  }
  return problems;
}

}  // namespace ftsbench::pipeline
