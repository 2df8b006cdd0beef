#include "dance/manifest.hpp"

#include <chrono>
#include <filesystem>

#include "dance/util.hpp"

namespace dance {

nlohmann::json RunManifest::to_json() const {
  return nlohmann::json{{"tool_version", tool_version}, {"command", command},
                        {"config", config_snapshot},   {"seed", seed},
                        {"input_hashes", input_hashes}, {"timings_sec", timings_sec}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.config_snapshot = j.at("config");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
  m.timings_sec = j.at("timings_sec").get<std::map<std::string, double>>();
  return m;
}

std::string RunManifest::fingerprint() const {
  nlohmann::json j = to_json();
  j.erase("timings_sec");
  return fnv1a_hex(j.dump());
}

void RunManifest::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  write_text_file((std::filesystem::path(dir) / "manifest.json").string(),
                  to_json().dump(2) + "\n");
}

std::optional<RunManifest> RunManifest::read(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "manifest.json";
  if (!std::filesystem::exists(path)) return std::nullopt;
  return from_json(nlohmann::json::parse(read_text_file(path.string())));
}

PhaseTimer::PhaseTimer() : start_(std::chrono::steady_clock::now()) {}

double PhaseTimer::seconds() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

}  // namespace dance
