#include "vesselsynth/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace vesselsynth::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  return value;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ConfigError("cannot format value");
  return std::string(buf, ptr);
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    kv.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KeyValueConfig::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void KeyValueConfig::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write config file " + path.string());
  out << to_string();
  if (!out) throw DataError("failed writing config file " + path.string());
}

void KeyValueConfig::set(const std::string& key, double value) { values_[key] = format_double(value); }
void KeyValueConfig::set(const std::string& key, std::int64_t value) { values_[key] = std::to_string(value); }
void KeyValueConfig::set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? parse_number<double>(key, *v) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto v = get(key);
  return v ? parse_number<std::int64_t>(key, *v) : fallback;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

void store(KeyValueConfig& kv, const synth::GeneratorConfig& c, const std::string& p) {
  kv.set(p + "image_size", c.image_size);
  kv.set(p + "circle_center_x", c.circle_center.x);
  kv.set(p + "circle_center_y", c.circle_center.y);
  kv.set(p + "circle_radius", c.circle_radius);
  kv.set(p + "max_nodes", c.max_nodes);
  kv.set(p + "max_children", c.max_children);
  kv.set(p + "mean_length", c.mean_length);
  kv.set(p + "sigma_length", c.sigma_length);
  kv.set(p + "branch_angle", c.branch_angle);
  kv.set(p + "sigma_angle", c.sigma_angle);
  kv.set(p + "line_width", c.line_width);
  kv.set(p + "gray_lo", c.gray_lo);
  kv.set(p + "gray_hi", c.gray_hi);
  kv.set(p + "seed", c.seed);
}

void store(KeyValueConfig& kv, const noise::NoiseConfig& c, const std::string& p) {
  kv.set(p + "noise_mean", c.noise_mean);
  kv.set(p + "noise_sigma", c.noise_sigma);
  kv.set(p + "max_patches", c.max_patches);
  kv.set(p + "patch_size", c.patch_size);
  kv.set(p + "frequency", c.frequency);
  kv.set(p + "amplitude", c.amplitude);
  kv.set(p + "bias_lo", c.bias_lo);
  kv.set(p + "bias_hi", c.bias_hi);
  kv.set(p + "seed", c.seed);
}

synth::GeneratorConfig load_generator_config(const KeyValueConfig& kv, const std::string& p,
                                             synth::GeneratorConfig c) {
  c.image_size = static_cast<int>(kv.get_int(p + "image_size", c.image_size));
  c.circle_center.x = static_cast<int>(kv.get_int(p + "circle_center_x", c.circle_center.x));
  c.circle_center.y = static_cast<int>(kv.get_int(p + "circle_center_y", c.circle_center.y));
  c.circle_radius = kv.get_double(p + "circle_radius", c.circle_radius);
  c.max_nodes = static_cast<int>(kv.get_int(p + "max_nodes", c.max_nodes));
  c.max_children = static_cast<int>(kv.get_int(p + "max_children", c.max_children));
  c.mean_length = kv.get_double(p + "mean_length", c.mean_length);
  c.sigma_length = kv.get_double(p + "sigma_length", c.sigma_length);
  c.branch_angle = kv.get_double(p + "branch_angle", c.branch_angle);
  c.sigma_angle = kv.get_double(p + "sigma_angle", c.sigma_angle);
  c.line_width = static_cast<int>(kv.get_int(p + "line_width", c.line_width));
  c.gray_lo = kv.get_double(p + "gray_lo", c.gray_lo);
  c.gray_hi = kv.get_double(p + "gray_hi", c.gray_hi);
  c.seed = kv.get_uint(p + "seed", c.seed);
  c.validate();
  return c;
}

noise::NoiseConfig load_noise_config(const KeyValueConfig& kv, const std::string& p, noise::NoiseConfig c,
                                     int image_size) {
  c.noise_mean = kv.get_double(p + "noise_mean", c.noise_mean);
  c.noise_sigma = kv.get_double(p + "noise_sigma", c.noise_sigma);
  c.max_patches = static_cast<int>(kv.get_int(p + "max_patches", c.max_patches));
  c.patch_size = static_cast<int>(kv.get_int(p + "patch_size", c.patch_size));
  c.frequency = kv.get_double(p + "frequency", c.frequency);
  c.amplitude = kv.get_double(p + "amplitude", c.amplitude);
  c.bias_lo = kv.get_double(p + "bias_lo", c.bias_lo);
  c.bias_hi = kv.get_double(p + "bias_hi", c.bias_hi);
  c.seed = kv.get_uint(p + "seed", c.seed);
  c.validate(image_size);
  return c;
}

}  // namespace vesselsynth::io
