#ifndef DANCE_MANIFEST_HPP
#define DANCE_MANIFEST_HPP

#include <chrono>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

namespace dance {

inline constexpr const char* kToolVersion = "0.1.0";

// Every output directory carries exactly one manifest: what ran, with which
// configuration and seeds, over which inputs, and how long each phase took.
// Timings are informational; everything else is covered by fingerprint().
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  nlohmann::json config_snapshot;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;
  std::map<std::string, double> timings_sec;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);

  // hash over everything except timings; equal fingerprints mean a re-run
  // would reproduce the outputs bit-exactly at thread count 1
  std::string fingerprint() const;

  void write(const std::string& dir) const;
  static std::optional<RunManifest> read(const std::string& dir);
};

// Wall-clock helper for manifest timings.
class PhaseTimer {
 public:
  PhaseTimer();
  double seconds() const;

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace dance

#endif
