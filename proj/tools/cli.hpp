#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "scaledrift/evaluation.hpp"
#include "scaledrift/scene_model.hpp"
#include "scaledrift/synthetic_world.hpp"

namespace scaledrift::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

/// Entry point of the `scaledrift` executable. Diagnostics go to `err`,
/// data only to files.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `car=1.5:0.1` -> Gaussian prior for class `car`. Throws ConfigError.
HeightPrior parse_prior(const std::string& text);

/// `100..800` (step = first value), `100..800:50`, or `100,200,400`.
/// Throws ConfigError.
std::vector<double> parse_lengths(const std::string& text);

/// `constant:2`, `linear:1:2`, `random-walk:0.01`, `rotation:0.005[:0.0012]`.
/// Throws ConfigError.
DriftProfile parse_drift(const std::string& text);

}  // namespace scaledrift::cli
