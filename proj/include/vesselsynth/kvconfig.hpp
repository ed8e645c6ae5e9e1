#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "vesselsynth/noisegen.hpp"
#include "vesselsynth/synthgen.hpp"

namespace vesselsynth::io {

/// Flat `key = value` text config. `#` starts a comment; blank lines are
/// ignored. Serialization sorts keys, so write -> read -> write is byte-stable.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig read_file(const std::filesystem::path& path);

  std::string to_string() const;
  void write_file(const std::filesystem::path& path) const;

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, std::uint64_t value);
  void erase(const std::string& key) { values_.erase(key); }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;

  /// Values from `other` replace ours.
  void merge(const KeyValueConfig& other);

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

void store(KeyValueConfig& kv, const synth::GeneratorConfig& cfg, const std::string& prefix = "");
void store(KeyValueConfig& kv, const noise::NoiseConfig& cfg, const std::string& prefix = "");

/// Reads keys under `prefix`, starting from `defaults`; validates the result.
synth::GeneratorConfig load_generator_config(const KeyValueConfig& kv, const std::string& prefix,
                                             synth::GeneratorConfig defaults);
noise::NoiseConfig load_noise_config(const KeyValueConfig& kv, const std::string& prefix,
                                     noise::NoiseConfig defaults, int image_size);

}  // namespace vesselsynth::io
