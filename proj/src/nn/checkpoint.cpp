#include "vesselsynth/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace vesselsynth::nn {

namespace {

constexpr char kMagic[8] = {'V', 'S', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '\0'};

enum class Kind : std::uint8_t { conv = 0, batchnorm = 1, relu = 2, maxpool = 3, upsample = 4, concat = 5 };

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void floats(std::span<const float> v) {
    for (float f : v) u32(std::bit_cast<std::uint32_t>(f));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  void floats(std::span<float> v) {
    for (float& f : v) f = std::bit_cast<float>(u32());
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("checkpoint is truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net, const TrainingState& state) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  const auto& layers = net.spec().layers;
  const auto& states = net.layer_states();
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const auto* c = std::get_if<layer::Conv>(&layers[i])) {
      w.u8(static_cast<std::uint8_t>(Kind::conv));
      for (int v : {c->kernel, c->in_channels, c->out_channels, c->stride, c->pad}) w.i32(v);
    } else if (const auto* b = std::get_if<layer::BatchNorm>(&layers[i])) {
      w.u8(static_cast<std::uint8_t>(Kind::batchnorm));
      w.i32(b->channels);
      w.u8(states[i].bn.stats_initialized ? 1 : 0);
    } else if (std::holds_alternative<layer::Relu>(layers[i])) {
      w.u8(static_cast<std::uint8_t>(Kind::relu));
    } else if (std::holds_alternative<layer::MaxPool>(layers[i])) {
      w.u8(static_cast<std::uint8_t>(Kind::maxpool));
    } else if (std::holds_alternative<layer::Upsample>(layers[i])) {
      w.u8(static_cast<std::uint8_t>(Kind::upsample));
    } else if (const auto* cc = std::get_if<layer::CropConcat>(&layers[i])) {
      w.u8(static_cast<std::uint8_t>(Kind::concat));
      w.i32(cc->source);
    }
  }
  w.u64(state.iteration);
  std::ostringstream rng_text;
  rng_text << state.rng;
  const std::string rng_state = rng_text.str();
  w.u32(static_cast<std::uint32_t>(rng_state.size()));
  w.bytes(rng_state.data(), rng_state.size());

  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerState<float>& s = states[i];
    if (std::holds_alternative<layer::Conv>(layers[i])) {
      w.floats(s.conv.weights.values());
      w.floats(s.conv.bias);
      w.floats(s.conv_velocity.weights.values());
      w.floats(s.conv_velocity.bias);
    } else if (std::holds_alternative<layer::BatchNorm>(layers[i])) {
      w.floats(s.bn.gamma);
      w.floats(s.bn.beta);
      w.floats(s.bn.running_mean);
      w.floats(s.bn.running_var);
      w.floats(s.bn_velocity_gamma);
      w.floats(s.bn_velocity_beta);
    }
  }
  w.bytes(kTrailer, sizeof kTrailer);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));

  const std::uint32_t count = r.u32();
  if (count > 4096) throw DataError("checkpoint layer count is implausible");
  NetworkSpec spec;
  std::vector<bool> stats_ready(count, false);
  for (std::uint32_t i = 0; i < count; ++i) {
    switch (static_cast<Kind>(r.u8())) {
      case Kind::conv: {
        layer::Conv c;
        c.kernel = r.i32();
        c.in_channels = r.i32();
        c.out_channels = r.i32();
        c.stride = r.i32();
        c.pad = r.i32();
        spec.layers.emplace_back(c);
        break;
      }
      case Kind::batchnorm:
        spec.layers.emplace_back(layer::BatchNorm{r.i32()});
        stats_ready[i] = r.u8() != 0;
        break;
      case Kind::relu:
        spec.layers.emplace_back(layer::Relu{});
        break;
      case Kind::maxpool:
        spec.layers.emplace_back(layer::MaxPool{});
        break;
      case Kind::upsample:
        spec.layers.emplace_back(layer::Upsample{});
        break;
      case Kind::concat:
        spec.layers.emplace_back(layer::CropConcat{r.i32()});
        break;
      default:
        throw DataError("checkpoint contains an unknown layer kind");
    }
  }

  Checkpoint ck{Network<float>(spec), {}};
  ck.state.iteration = r.u64();
  const std::uint32_t rng_len = r.u32();
  if (rng_len > (1u << 20)) throw DataError("checkpoint RNG state is implausibly long");
  std::string rng_state(rng_len, '\0');
  r.bytes(rng_state.data(), rng_len);
  std::istringstream rng_text(rng_state);
  rng_text >> ck.state.rng;
  if (!rng_text) throw DataError("checkpoint RNG state is corrupt");

  auto& states = ck.network.layer_states();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    LayerState<float>& s = states[i];
    if (std::holds_alternative<layer::Conv>(spec.layers[i])) {
      r.floats(s.conv.weights.values());
      r.floats(s.conv.bias);
      r.floats(s.conv_velocity.weights.values());
      r.floats(s.conv_velocity.bias);
    } else if (std::holds_alternative<layer::BatchNorm>(spec.layers[i])) {
      r.floats(s.bn.gamma);
      r.floats(s.bn.beta);
      r.floats(s.bn.running_mean);
      r.floats(s.bn.running_var);
      r.floats(s.bn_velocity_gamma);
      r.floats(s.bn_velocity_beta);
      s.bn.stats_initialized = stats_ready[i];
    }
  }
  char trailer[4];
  r.bytes(trailer, sizeof trailer);
  if (std::memcmp(trailer, kTrailer, sizeof kTrailer) != 0 || !r.at_end())
    throw DataError("checkpoint trailer is missing or the file has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net, const TrainingState& state) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(net, state);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace vesselsynth::nn
