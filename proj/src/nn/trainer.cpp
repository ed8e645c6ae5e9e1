#include "vesselsynth/nn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "vesselsynth/kvconfig.hpp"

namespace vesselsynth::nn {

GeneratedStream::GeneratedStream(synth::GeneratorConfig gen, noise::NoiseConfig noise)
    : gen_(std::move(gen)), noise_(std::move(noise)) {
  gen_.validate();
  noise_.validate(gen_.image_size);
}

synth::Sample GeneratedStream::next(Rng& rng) { return noise::make_sample(gen_, noise_, rng()); }

Batch make_batch(std::span<const synth::Sample> samples) {
  if (samples.empty()) throw ShapeError("make_batch: no samples");
  const int w = samples.front().image.width;
  const int h = samples.front().image.height;
  const Shape shape{static_cast<int>(samples.size()), 1, h, w};
  Batch b{Tensor<float>(shape), Tensor<float>(shape)};
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const synth::Sample& s = samples[n];
    if (!s.image.same_shape(w, h) || !s.label.same_shape(w, h))
      throw ShapeError("make_batch: samples in a batch must share one size");
    float* img = b.images.plane(static_cast<int>(n), 0);
    float* lbl = b.labels.plane(static_cast<int>(n), 0);
    for (std::size_t i = 0; i < s.image.size(); ++i) {
      img[i] = s.image.pixels[i];
      lbl[i] = s.label.pixels[i] ? 1.0f : 0.0f;
    }
  }
  return b;
}

void sgd_momentum_step(Network<float>& net, double learning_rate, double momentum) {
  const auto lr = static_cast<float>(learning_rate);
  const auto mu = static_cast<float>(momentum);
  for (ParamRef<float>& p : net.parameters()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.velocity[i] = mu * p.velocity[i] - lr * p.grad[i];
      p.value[i] += p.velocity[i];
    }
  }
}

double train_step(Network<float>& net, const Batch& batch, double learning_rate, double momentum,
                  std::uint64_t iteration) {
  net.zero_grad();
  const Tensor<float> logits = net.forward(batch.images, Mode::train);
  const LossResult<float> loss = pixelwise_softmax_ce(logits, batch.labels);
  if (!std::isfinite(loss.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss at iteration " << iteration << "; activation norms:";
    const std::vector<double> norms = net.activation_norms();
    for (std::size_t i = 0; i < norms.size(); ++i) msg << " layer" << i << '=' << norms[i];
    throw NumericalError(msg.str());
  }
  net.backward(loss.d_logits);
  sgd_momentum_step(net, learning_rate, momentum);
  return loss.loss;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t iteration) {
  char name[48];
  std::snprintf(name, sizeof name, "checkpoint_%08llu.vsck", static_cast<unsigned long long>(iteration));
  return dir / name;
}

TrainReport train(Network<float>& net, TrainingState& state, SampleStream& stream, const TrainOptions& options) {
  if (options.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  TrainReport report;
  report.losses.reserve(options.iterations);
  std::vector<synth::Sample> samples(static_cast<std::size_t>(options.batch_size));
  for (std::uint64_t k = 0; k < options.iterations; ++k) {
    for (synth::Sample& s : samples) s = stream.next(state.rng);
    const Batch batch = make_batch(samples);
    const double loss = train_step(net, batch, options.learning_rate, options.momentum, state.iteration);
    ++state.iteration;
    report.losses.push_back(loss);
    if (options.loss_csv) *options.loss_csv << state.iteration << ',' << io::format_double(loss) << '\n';
    if (options.checkpoint_every > 0 && state.iteration % options.checkpoint_every == 0 &&
        !options.checkpoint_dir.empty()) {
      const auto path = checkpoint_path(options.checkpoint_dir, state.iteration);
      save_checkpoint(path, net, state);
      report.checkpoints.push_back(path);
    }
  }
  return report;
}

}  // namespace vesselsynth::nn
