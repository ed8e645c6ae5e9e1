#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vesselsynth/kvconfig.hpp"

namespace vesselsynth::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,      ///< bad flags or configuration
  kExitData = 2,       ///< unreadable or malformed inputs, I/O failures
  kExitNumerical = 3,  ///< non-finite training loss or failed gradient check
};

/// Built-in defaults for every run-config key, using the given dataset
/// variant's generator and noise blocks.
///
///   seed, dataset.variant, generator.*, noise.*, net.layers,
///   gen.*, train.*, predict.*, eval.*
io::KeyValueConfig default_run_config(int variant);

/// Layers the config file, command-specific flags and `--set key=value`
/// overrides (later wins) on top of the defaults of the selected variant.
io::KeyValueConfig resolve_run_config(const io::KeyValueConfig& file, const io::KeyValueConfig& overrides);

/// Entry point used by the `vesselsynth` binary. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vesselsynth::cli
