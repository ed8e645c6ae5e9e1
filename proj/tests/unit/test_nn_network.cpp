#include <cmath>
#include <sstream>
#include <variant>

#include <doctest.h>

#include "support.hpp"
#include "vesselsynth/errors.hpp"
#include "vesselsynth/nn/checkpoint.hpp"
#include "vesselsynth/nn/gradcheck.hpp"
#include "vesselsynth/nn/network.hpp"
#include "vesselsynth/nn/trainer.hpp"
#include "vesselsynth/presets.hpp"

using namespace vesselsynth;
using namespace vesselsynth::nn;

namespace {

Tensor<float> random_input(int n, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(Shape{n, 1, h, w});
  for (auto& v : t.values()) v = static_cast<float>(uniform_real(rng, 0.0, 1.0));
  return t;
}

/// Runs one train-mode pass so batchnorm has running statistics.
Network<float> warmed_network(std::uint64_t seed) {
  Network<float> net(NetworkSpec::default_segmenter());
  net.initialize(seed);
  net.forward(random_input(2, 40, 40, seed + 1), Mode::train);
  return net;
}

std::vector<float> all_weights(Network<float>& net) {
  std::vector<float> w;
  for (const auto& p : net.parameters()) w.insert(w.end(), p.value.begin(), p.value.end());
  return w;
}

class FixedStream final : public SampleStream {
 public:
  explicit FixedStream(synth::Sample s) : sample_(std::move(s)) {}
  synth::Sample next(Rng&) override { return sample_; }

 private:
  synth::Sample sample_;
};

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("default spec is valid and fully convolutional") {
  const NetworkSpec spec = NetworkSpec::default_segmenter();
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.input_channels() == 1);
  CHECK(spec.output_channels().back() == 2);
  CHECK(spec.layers.size() == 16);
}

TEST_CASE("layer vocabulary has no dense layer") {
  // Every alternative of the closed variant is spatial; none has an
  // input-size-dependent weight shape.
  static_assert(std::variant_size_v<LayerSpec> == 6);
  static_assert(std::is_same_v<std::variant_alternative_t<0, LayerSpec>, layer::Conv>);
  static_assert(std::is_same_v<std::variant_alternative_t<1, LayerSpec>, layer::BatchNorm>);
  static_assert(std::is_same_v<std::variant_alternative_t<2, LayerSpec>, layer::Relu>);
  static_assert(std::is_same_v<std::variant_alternative_t<3, LayerSpec>, layer::MaxPool>);
  static_assert(std::is_same_v<std::variant_alternative_t<4, LayerSpec>, layer::Upsample>);
  static_assert(std::is_same_v<std::variant_alternative_t<5, LayerSpec>, layer::CropConcat>);
  for (const char* text : {"fc 16 2", "dense 16 2", "linear 16 2", "conv 3 1 2; fc 4 2"})
    CHECK_THROWS_AS(NetworkSpec::parse(text), ConfigError);
  // A constructed net accepts two input sizes with the same parameters.
  Network<float> net(NetworkSpec::default_segmenter());
  net.initialize(1);
  CHECK_NOTHROW(net.forward(random_input(1, 30, 30, 1), Mode::train));
  CHECK_NOTHROW(net.forward(random_input(1, 44, 36, 1), Mode::train));
}

TEST_CASE("spec text round trip and validation errors") {
  const NetworkSpec spec = NetworkSpec::default_segmenter();
  CHECK(NetworkSpec::parse(spec.to_string()) == spec);
  CHECK_THROWS_AS(NetworkSpec::parse("conv 3 1 8; relu; conv 1 8 3").validate(), ConfigError);
  CHECK_THROWS_AS(NetworkSpec::parse("conv 3 1 8; bn 4; conv 1 8 2").validate(), ConfigError);
  CHECK_THROWS_AS(NetworkSpec::parse("conv 3 1 8; concat 5; conv 1 16 2").validate(), ConfigError);
  CHECK_NOTHROW(NetworkSpec::parse("conv 3 1 4 1 1; relu; conv 1 4 2").validate());
}

TEST_CASE("published size function") {
  // 128: conv 126, conv 124, pool 62, conv 60, up 120, concat, conv 118, conv1 118.
  const NetworkSpec spec = NetworkSpec::default_segmenter();
  CHECK(spec.output_extent(128) == 118);
  CHECK(spec.output_extent(256) == 246);
  CHECK(spec.min_input_extent() == 12);
  CHECK(spec.output_extent(12) == 2);
  CHECK_FALSE(spec.output_extent(11).has_value());
  Network<float> net = warmed_network(3);
  for (int size : {128, 256}) {
    const auto out = net.predict(random_input(1, size, size, 4));
    CHECK(out.shape() == Shape{1, 1, *spec.output_extent(size), *spec.output_extent(size)});
    // output_shape describes the two-class logits; predict keeps the vessel plane.
    CHECK(net.output_shape(Shape{1, 1, size, size}) == Shape{1, 2, out.shape().h, out.shape().w});
  }
}

TEST_CASE("undersized input names the minimum") {
  Network<float> net = warmed_network(5);
  try {
    net.predict(random_input(1, 11, 11, 6));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("12") != std::string::npos);
  }
  Tensor<float> two_channels(Shape{1, 2, 40, 40});
  CHECK_THROWS_AS(net.predict(two_channels), ShapeError);
}

TEST_CASE("constant input gives a spatially constant output") {
  Network<float> net = warmed_network(7);
  const auto out = net.predict(Tensor<float>(Shape{1, 1, 64, 64}, 0.4f));
  const float first = out[0];
  for (float v : out.values()) CHECK(std::abs(v - first) < 1e-6f);
}

TEST_CASE("inference is deterministic and batch-independent") {
  Network<float> net = warmed_network(8);
  const auto in = random_input(3, 50, 50, 9);
  const auto a = net.predict(in);
  const auto b = net.predict(in);
  CHECK(a == b);
  Tensor<float> single(Shape{1, 1, 50, 50});
  std::copy(in.plane(2, 0), in.plane(2, 0) + 2500, single.data());
  const auto c = net.predict(single);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(a.plane(2, 0)[i]).epsilon(1e-5));
}

TEST_CASE("initialization is seeded") {
  Network<float> a(NetworkSpec::default_segmenter()), b(NetworkSpec::default_segmenter()),
      c(NetworkSpec::default_segmenter());
  a.initialize(42);
  b.initialize(42);
  c.initialize(43);
  CHECK(all_weights(a) == all_weights(b));
  CHECK_FALSE(all_weights(a) == all_weights(c));
}

TEST_CASE("whole-network gradient check") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const GradCheckResult r = check_network(seed);
    INFO("seed " << seed << " err " << r.max_relative_error << " skipped " << r.skipped);
    CHECK(r.checked > 0);
    CHECK(r.passed());
  }
}

TEST_CASE("checkpoint round trip is bit-identical") {
  Network<float> net = warmed_network(10);
  TrainingState state{17, Rng(99)};
  const auto bytes = encode_checkpoint(net, state);
  Checkpoint loaded = decode_checkpoint(bytes);
  CHECK(loaded.state.iteration == 17);
  CHECK(loaded.state.rng == state.rng);
  CHECK(loaded.network.spec() == net.spec());
  CHECK(encode_checkpoint(loaded.network, loaded.state) == bytes);
  for (std::uint64_t i = 0; i < 3; ++i) {
    const auto in = random_input(1, 40, 40, 100 + i);
    CHECK(loaded.network.predict(in) == net.predict(in));
  }
}

TEST_CASE("checkpoint file round trip and corruption") {
  testsupport::TempDir dir;
  Network<float> net = warmed_network(11);
  const auto path = dir / "m.vsck";
  save_checkpoint(path, net, TrainingState{});
  CHECK(load_checkpoint(path).network.predict(random_input(1, 30, 30, 1)) ==
        net.predict(random_input(1, 30, 30, 1)));

  auto bytes = testsupport::read_bytes(path);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "VSNNCKPT");
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_checkpoint(truncated), DataError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), DataError);
  auto version = bytes;
  version[8] = 99;
  CHECK_THROWS_AS(decode_checkpoint(version), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.vsck"), DataError);
}

TEST_CASE("zero learning rate keeps weights bit-identical") {
  const auto preset = dataset_preset(2);
  Network<float> net(NetworkSpec::default_segmenter());
  net.initialize(12);
  const auto before = all_weights(net);
  GeneratedStream stream(preset.generator, preset.noise);
  TrainingState state{0, Rng(13)};
  TrainOptions opt;
  opt.iterations = 3;
  opt.learning_rate = 0.0;
  train(net, state, stream, opt);
  CHECK(state.iteration == 3);
  CHECK(all_weights(net) == before);
}

TEST_CASE("resume from a checkpoint continues bit-identically") {
  const auto preset = dataset_preset(2);
  GeneratedStream stream(preset.generator, preset.noise);
  TrainOptions opt;
  opt.iterations = 4;

  Network<float> straight(NetworkSpec::default_segmenter());
  straight.initialize(14);
  TrainingState s_state{0, Rng(15)};
  const auto full = train(straight, s_state, stream, opt);

  testsupport::TempDir dir;
  Network<float> first(NetworkSpec::default_segmenter());
  first.initialize(14);
  TrainingState f_state{0, Rng(15)};
  TrainOptions half = opt;
  half.iterations = 2;
  half.checkpoint_every = 2;
  half.checkpoint_dir = dir.path();
  const auto part1 = train(first, f_state, stream, half);
  REQUIRE(part1.checkpoints.size() == 1);
  CHECK(part1.checkpoints[0] == checkpoint_path(dir.path(), 2));

  Checkpoint resumed = load_checkpoint(part1.checkpoints[0]);
  half.checkpoint_every = 0;
  const auto part2 = train(resumed.network, resumed.state, stream, half);

  CHECK(resumed.state.iteration == 4);
  CHECK(all_weights(resumed.network) == all_weights(straight));
  CHECK(encode_checkpoint(resumed.network, resumed.state) == encode_checkpoint(straight, s_state));
  CHECK(part2.losses[1] == full.losses[3]);
}

TEST_CASE("loss csv rows") {
  const auto preset = dataset_preset(1);
  GeneratedStream stream(preset.generator, preset.noise);
  Network<float> net(NetworkSpec::default_segmenter());
  net.initialize(16);
  TrainingState state{0, Rng(17)};
  std::ostringstream csv;
  TrainOptions opt;
  opt.iterations = 2;
  opt.loss_csv = &csv;
  train(net, state, stream, opt);
  const std::string text = csv.str();
  CHECK(text.rfind("1,", 0) == 0);
  CHECK(text.find("\n2,") != std::string::npos);
}

TEST_CASE("non-finite loss aborts with iteration and activation norms") {
  const auto preset = dataset_preset(2);
  auto sample = noise::make_sample(preset.generator, preset.noise, 1);
  sample.image(60, 60) = std::nanf("");
  const std::vector<synth::Sample> samples{sample, sample};
  const Batch batch = make_batch(samples);
  Network<float> net(NetworkSpec::default_segmenter());
  net.initialize(18);
  try {
    train_step(net, batch, 0.01, 0.9, 41);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("iteration 41") != std::string::npos);
    CHECK(msg.find("layer0=") != std::string::npos);
  }
}

TEST_CASE("a few steps on one sample lower the loss") {
  const auto preset = dataset_preset(1);
  FixedStream stream(noise::make_sample(preset.generator, preset.noise, 5));
  Network<float> net(NetworkSpec::default_segmenter());
  net.initialize(19);
  TrainingState state{0, Rng(20)};
  TrainOptions opt;
  opt.iterations = 20;
  const auto report = train(net, state, stream, opt);
  CHECK(report.losses.back() < report.losses.front());
}

TEST_CASE("batch assembly") {
  const auto preset = dataset_preset(2);
  const std::vector<synth::Sample> samples{noise::make_sample(preset.generator, preset.noise, 1),
                                           noise::make_sample(preset.generator, preset.noise, 2)};
  const Batch b = make_batch(samples);
  CHECK(b.images.shape() == Shape{2, 1, 128, 128});
  CHECK(b.labels.at(1, 0, 64, 64) == static_cast<float>(samples[1].label(64, 64)));
  CHECK(b.images.at(0, 0, 3, 7) == samples[0].image(7, 3));
  CHECK_THROWS_AS(make_batch(std::vector<synth::Sample>{}), ShapeError);
}

}
