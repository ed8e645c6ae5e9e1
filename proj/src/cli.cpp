#include "vesselsynth/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "vesselsynth/dataio.hpp"
#include "vesselsynth/eval.hpp"
#include "vesselsynth/nn/checkpoint.hpp"
#include "vesselsynth/nn/gradcheck.hpp"
#include "vesselsynth/nn/trainer.hpp"
#include "vesselsynth/pipeline.hpp"
#include "vesselsynth/presets.hpp"
#include "vesselsynth/random.hpp"

namespace vesselsynth::cli {

namespace fs = std::filesystem;

namespace {

// Flags shared by every subcommand.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "key = value run configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override one run-config key (key=value); repeatable");
  cmd->add_option("--seed", c.seed, "global seed");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--threads", c.threads, "worker threads for sample generation")->check(CLI::PositiveNumber);
  cmd->add_flag("--deterministic", c.deterministic, "force one worker thread");
}

io::KeyValueConfig parse_sets(const std::vector<std::string>& sets) {
  io::KeyValueConfig kv;
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    std::string key = s.substr(0, eq);
    std::string value = s.substr(eq + 1);
    const auto trim = [](std::string& t) {
      t.erase(0, t.find_first_not_of(" \t"));
      t.erase(t.find_last_not_of(" \t") + 1);
    };
    trim(key);
    trim(value);
    kv.set(key, value);
  }
  return kv;
}

struct Resolved {
  io::KeyValueConfig kv;
  DatasetPreset preset;
};

// file < command flags < --set < --seed
Resolved resolve(const Common& common, const io::KeyValueConfig& flags) {
  io::KeyValueConfig file;
  if (!common.config.empty()) file = io::KeyValueConfig::read_file(common.config);
  io::KeyValueConfig overrides = flags;
  overrides.merge(parse_sets(common.sets));
  if (common.seed) overrides.set("seed", *common.seed);

  Resolved r;
  r.kv = resolve_run_config(file, overrides);
  const int variant = static_cast<int>(r.kv.get_int("dataset.variant", 2));
  const DatasetPreset base = dataset_preset(variant);
  r.preset.variant = variant;
  r.preset.generator = io::load_generator_config(r.kv, "generator.", base.generator);
  r.preset.noise = io::load_noise_config(r.kv, "noise.", base.noise, r.preset.generator.image_size);
  return r;
}

void write_provenance(const fs::path& out, const io::KeyValueConfig& kv) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
  kv.write_file(out / "run_config.txt");
  std::ofstream v(out / "VERSION", std::ios::binary);
  v << VESSELSYNTH_VERSION << '\n';
  if (!v) throw DataError("cannot write " + (out / "VERSION").string());
}

pipeline::PredictMode parse_mode(const std::string& s) {
  if (s == "valid") return pipeline::PredictMode::valid;
  if (s == "mirror") return pipeline::PredictMode::mirror;
  throw ConfigError("unknown prediction mode '" + s + "' (valid|mirror)");
}

io::GrayMode parse_gray(const std::string& s) {
  if (s == "luma") return io::GrayMode::luma;
  if (s == "green") return io::GrayMode::green;
  throw ConfigError("unknown grayscale mode '" + s + "' (luma|green)");
}

bool parse_bool(const io::KeyValueConfig& kv, const std::string& key) {
  const std::string v = kv.get_string(key, "");
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string opt(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::optional<std::uint64_t> count;
  std::optional<int> variant;
};

int cmd_gen(const Common& common, const GenArgs& args, std::ostream& out) {
  io::KeyValueConfig flags;
  if (args.count) flags.set("gen.count", *args.count);
  if (args.variant) flags.set("dataset.variant", *args.variant);
  const Resolved r = resolve(common, flags);
  const fs::path dir = common.out;
  write_provenance(dir, r.kv);

  const std::uint64_t seed = r.kv.get_uint("seed", 0);
  const std::uint64_t count = r.kv.get_uint("gen.count", 0);
  const int threads = common.deterministic ? 1 : std::max(1, common.threads);
  const std::string format = r.kv.get_string("gen.format", "png");
  if (format != "png" && format != "pgm") throw ConfigError("gen.format must be png or pgm, got '" + format + "'");
  const std::string ext = "." + format;
  const int bit_depth = static_cast<int>(r.kv.get_int("gen.bit_depth", 8));
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("gen.bit_depth must be 8 or 16");

  std::vector<io::ManifestEntry> entries(count);
  std::atomic<std::uint64_t> next{0};
  std::vector<std::string> failures(static_cast<std::size_t>(threads));
  const auto worker = [&](int t) {
    try {
      for (std::uint64_t i = next++; i < count; i = next++) {
        const std::uint64_t s = derive_seed(seed, i);
        const synth::Sample sample = noise::make_sample(r.preset.generator, r.preset.noise, s);
        const std::string stem = std::to_string(s);
        io::save_image(dir / (stem + "_img" + ext), sample.image, bit_depth);
        io::save_mask(dir / (stem + "_lbl" + ext), sample.label);
        entries[i] = {s, stem + "_img" + ext, stem + "_lbl" + ext, noise::label_fraction(sample.label)};
      }
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(t)] = e.what();
      next = count;
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& th : pool) th.join();
  for (const std::string& f : failures)
    if (!f.empty()) throw DataError(f);

  io::write_manifest(dir / "manifest.csv", entries);
  out << "wrote " << count << " samples (dataset#" << r.preset.variant << ") to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::optional<std::uint64_t> iterations;
  std::optional<int> variant;
  std::string manifest;
  std::string resume;
};

int cmd_train(const Common& common, const TrainArgs& args, std::ostream& out, std::ostream& err) {
  io::KeyValueConfig flags;
  if (args.iterations) flags.set("train.iterations", *args.iterations);
  if (args.variant) flags.set("dataset.variant", *args.variant);
  if (!args.manifest.empty()) {
    flags.set("train.source", std::string("manifest"));
    flags.set("train.manifest", args.manifest);
  }
  const Resolved r = resolve(common, flags);
  const fs::path dir = common.out;
  write_provenance(dir, r.kv);

  const std::uint64_t seed = r.kv.get_uint("seed", 0);
  const std::uint64_t target = r.kv.get_uint("train.iterations", 0);
  nn::TrainOptions opts;
  opts.batch_size = static_cast<int>(r.kv.get_int("train.batch_size", 2));
  opts.learning_rate = r.kv.get_double("train.learning_rate", 0.01);
  opts.momentum = r.kv.get_double("train.momentum", 0.9);
  opts.checkpoint_every = r.kv.get_uint("train.checkpoint_every", 0);
  opts.checkpoint_dir = dir;

  std::unique_ptr<nn::SampleStream> stream;
  const std::string source = r.kv.get_string("train.source", "generated");
  if (source == "generated") {
    stream = std::make_unique<nn::GeneratedStream>(r.preset.generator, r.preset.noise);
  } else if (source == "manifest") {
    const std::string m = r.kv.get_string("train.manifest", "");
    if (m.empty()) throw ConfigError("train.source = manifest needs train.manifest");
    stream = std::make_unique<io::ManifestStream>(m);
  } else {
    throw ConfigError("train.source must be generated or manifest, got '" + source + "'");
  }

  std::optional<nn::Checkpoint> ckpt;
  if (!args.resume.empty()) {
    ckpt.emplace(nn::load_checkpoint(args.resume));
    if (ckpt->network.spec().to_string() != nn::NetworkSpec::parse(r.kv.get_string("net.layers", "")).to_string())
      err << "note: continuing with the layer spec stored in " << args.resume << '\n';
  } else {
    nn::Network<float> net(nn::NetworkSpec::parse(r.kv.get_string("net.layers", "")));
    net.initialize(derive_seed(seed, 1));
    ckpt.emplace(nn::Checkpoint{std::move(net), nn::TrainingState{0, Rng(derive_seed(seed, 2))}});
  }
  nn::Network<float>& net = ckpt->network;
  nn::TrainingState& state = ckpt->state;
  if (state.iteration > target)
    throw ConfigError("checkpoint is at iteration " + std::to_string(state.iteration) +
                      ", past train.iterations = " + std::to_string(target));
  opts.iterations = target - state.iteration;

  // Loss rows up to the resume point are kept so the file reads as one run.
  const fs::path loss_path = dir / "loss.csv";
  std::string kept = "iteration,loss\n";
  if (state.iteration > 0 && fs::exists(loss_path)) {
    std::ifstream old(loss_path);
    std::string line;
    std::getline(old, line);
    while (std::getline(old, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      std::uint64_t it = 0;
      std::from_chars(line.data(), line.data() + comma, it);
      if (it >= 1 && it <= state.iteration) kept += line + '\n';
    }
  }
  std::ofstream loss(loss_path, std::ios::binary | std::ios::trunc);
  if (!loss) throw DataError("cannot write " + loss_path.string());
  loss << kept;
  opts.loss_csv = &loss;

  const nn::TrainReport report = nn::train(net, state, *stream, opts);
  loss.flush();
  const fs::path final_path = dir / "model.vsck";
  nn::save_checkpoint(final_path, net, state);
  out << "trained to iteration " << state.iteration;
  if (!report.losses.empty()) out << ", last loss " << io::format_double(report.losses.back());
  out << "\ncheckpoint: " << final_path.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint;
  std::vector<std::string> images;
  std::optional<std::string> mode;
};

int cmd_predict(const Common& common, const PredictArgs& args, std::ostream& out) {
  io::KeyValueConfig flags;
  if (args.mode) flags.set("predict.mode", *args.mode);
  const Resolved r = resolve(common, flags);
  const fs::path dir = common.out;
  write_provenance(dir, r.kv);

  nn::Checkpoint ckpt = nn::load_checkpoint(args.checkpoint);
  const pipeline::PredictMode mode = parse_mode(r.kv.get_string("predict.mode", "valid"));
  const io::GrayMode gray = parse_gray(r.kv.get_string("predict.grayscale", "luma"));
  const bool invert = parse_bool(r.kv, "predict.invert");
  for (const std::string& path : args.images) {
    GrayImage input = io::to_gray(io::read_rgb(path), gray);
    if (invert) input = pipeline::preprocess(input);
    const GrayImage prob = pipeline::predict(ckpt.network, input, mode);
    const fs::path target = dir / (fs::path(path).stem().string() + "_prob.png");
    io::save_prob_map(target, prob);
    out << path << " -> " << target.string() << " (" << prob.width << "x" << prob.height << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string kind;
};

int cmd_eval(const Common& common, const EvalArgs& args, std::ostream& out, std::ostream& err) {
  const Resolved r = resolve(common, {});
  const fs::path dir = common.out;
  write_provenance(dir, r.kv);

  nn::Checkpoint ckpt = nn::load_checkpoint(args.checkpoint);
  const io::GrayMode gray = parse_gray(r.kv.get_string("eval.grayscale", "luma"));
  const io::DatasetLoad load = args.kind == "drive"
                                   ? io::load_drive(args.dataset, gray)
                                   : io::load_stare(args.dataset, gray, r.kv.get_double("eval.fov_threshold", 0.07));
  for (const std::string& w : load.warnings) err << "warning: " << w << '\n';
  for (const io::CaseError& e : load.errors) {
    err << "error: case " << e.id << ": " << e.message << '\n';
    for (const fs::path& p : e.missing) err << "  missing " << p.string() << '\n';
  }
  if (load.cases.empty()) {
    err << "no loadable cases in " << args.dataset << '\n';
    return kExitData;
  }

  const pipeline::PredictMode mode = parse_mode(r.kv.get_string("eval.mode", "valid"));
  const double threshold = r.kv.get_double("eval.threshold", 0.5);
  const int grid = static_cast<int>(r.kv.get_int("eval.roc_grid", 0));
  const eval::ThresholdStrategy strategy =
      grid > 0 ? eval::ThresholdStrategy::uniform_grid(grid) : eval::ThresholdStrategy::all_distinct();

  std::vector<eval::ImageMetrics> rows;
  fs::create_directories(dir / "roc");
  fs::create_directories(dir / "prob");
  out << "image     AUC     Acc     Sn      Sp\n";
  for (const io::FundusCase& c : load.cases) {
    err << c.id << ": grayscale(" << r.kv.get_string("eval.grayscale", "luma") << ") -> invert -> predict("
        << r.kv.get_string("eval.mode", "valid") << ")\n";
    const pipeline::CaseResult res = pipeline::evaluate_case(ckpt.network, c, mode, threshold, strategy);
    io::save_prob_map(dir / "prob" / (c.id + ".png"), res.prob);
    if (res.roc) {
      std::ofstream roc(dir / "roc" / (c.id + ".csv"), std::ios::binary);
      eval::write_roc_csv(roc, *res.roc);
    }
    out << c.id << std::string(c.id.size() < 10 ? 10 - c.id.size() : 1, ' ') << opt(res.metrics.auc) << "  "
        << opt(res.metrics.acc) << "  " << opt(res.metrics.sn) << "  " << opt(res.metrics.sp) << '\n';
    rows.push_back(res.metrics);
  }
  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  eval::write_report_csv(csv, rows);
  if (!csv) throw DataError("cannot write " + (dir / "metrics.csv").string());
  out << "metrics: " << (dir / "metrics.csv").string() << '\n';
  return load.errors.empty() ? kExitOk : kExitData;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const Common& common, std::ostream& out) {
  const Resolved r = resolve(common, {});
  if (!common.out.empty()) write_provenance(common.out, r.kv);
  const auto results = nn::run_gradient_checks(r.kv.get_uint("seed", 0));
  std::ostringstream report;
  bool ok = true;
  for (const nn::GradCheckResult& g : results) {
    char line[192];
    std::snprintf(line, sizeof line, "%-22s max_rel_err=%.3e tol=%.0e entries=%zu skipped=%zu %s\n",
                  g.name.c_str(), g.max_relative_error, g.tolerance, g.checked, g.skipped,
                  g.passed() ? "PASS" : "FAIL");
    report << line;
    ok = ok && g.passed();
  }
  out << report.str();
  if (!common.out.empty()) {
    std::ofstream f(fs::path(common.out) / "gradcheck.txt", std::ios::binary);
    f << report.str();
  }
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

io::KeyValueConfig default_run_config(int variant) {
  const DatasetPreset p = dataset_preset(variant);
  io::KeyValueConfig kv;
  kv.set("seed", std::uint64_t{0});
  kv.set("dataset.variant", variant);
  io::store(kv, p.generator, "generator.");
  io::store(kv, p.noise, "noise.");
  kv.erase("generator.seed");
  kv.erase("noise.seed");
  kv.set("net.layers", nn::NetworkSpec::default_segmenter().to_string());
  kv.set("gen.count", std::uint64_t{0});
  kv.set("gen.format", std::string("png"));
  kv.set("gen.bit_depth", 8);
  kv.set("train.iterations", std::uint64_t{5000});
  kv.set("train.batch_size", 2);
  kv.set("train.learning_rate", 0.01);
  kv.set("train.momentum", 0.9);
  kv.set("train.checkpoint_every", std::uint64_t{0});
  kv.set("train.source", std::string("generated"));
  kv.set("train.manifest", std::string(""));
  kv.set("predict.mode", std::string("valid"));
  kv.set("predict.grayscale", std::string("luma"));
  kv.set("predict.invert", std::string("true"));
  kv.set("eval.mode", std::string("valid"));
  kv.set("eval.grayscale", std::string("luma"));
  kv.set("eval.threshold", 0.5);
  kv.set("eval.fov_threshold", 0.07);
  kv.set("eval.roc_grid", 0);
  return kv;
}

io::KeyValueConfig resolve_run_config(const io::KeyValueConfig& file, const io::KeyValueConfig& overrides) {
  io::KeyValueConfig user = file;
  user.merge(overrides);
  io::KeyValueConfig kv = default_run_config(static_cast<int>(user.get_int("dataset.variant", 2)));
  for (const auto& [key, value] : user.entries())
    if (!kv.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
  kv.merge(user);
  return kv;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic retinal-vessel data, a fully convolutional segmenter, and evaluation", "vesselsynth"};
  app.set_version_flag("--version", std::string(VESSELSYNTH_VERSION));
  app.require_subcommand(1);

  Common common;
  GenArgs gen_args;
  TrainArgs train_args;
  PredictArgs predict_args;
  EvalArgs eval_args;

  CLI::App* gen = app.add_subcommand("gen", "write noisy samples, labels and a manifest");
  add_common(gen, common, true);
  gen->add_option("--count", gen_args.count, "number of samples");
  gen->add_option("--variant", gen_args.variant, "dataset variant (1 or 2)");

  CLI::App* train = app.add_subcommand("train", "train the segmenter");
  add_common(train, common, true);
  train->add_option("--iterations", train_args.iterations, "total iterations to reach");
  train->add_option("--variant", train_args.variant, "dataset variant for on-the-fly samples");
  train->add_option("--manifest", train_args.manifest, "train on a materialized manifest instead")
      ->check(CLI::ExistingFile);
  train->add_option("--resume", train_args.resume, "continue from a checkpoint")->check(CLI::ExistingFile);

  CLI::App* predict = app.add_subcommand("predict", "write 16-bit probability maps");
  add_common(predict, common, true);
  predict->add_option("--checkpoint", predict_args.checkpoint)->required()->check(CLI::ExistingFile);
  predict->add_option("--mode", predict_args.mode, "valid or mirror");
  predict->add_option("images", predict_args.images)->required()->check(CLI::ExistingFile);

  CLI::App* evaluate = app.add_subcommand("eval", "evaluate on DRIVE or STARE");
  add_common(evaluate, common, true);
  evaluate->add_option("--checkpoint", eval_args.checkpoint)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--dataset", eval_args.dataset)->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--kind", eval_args.kind)->required()->check(CLI::IsMember({"drive", "stare"}));

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every layer");
  add_common(gradcheck, common, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(common, gen_args, out);
    if (*train) return cmd_train(common, train_args, out, err);
    if (*predict) return cmd_predict(common, predict_args, out);
    if (*evaluate) return cmd_eval(common, eval_args, out, err);
    if (*gradcheck) return cmd_gradcheck(common, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace vesselsynth::cli
