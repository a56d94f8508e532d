#ifndef CMJ_CONFIG_HPP
#define CMJ_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cmj/harness.hpp"

namespace cmj {

/// Malformed or out-of-schema configuration. The message starts with the
/// key path (or line and column for syntax errors).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One run: the command, its experiment parameters and where to write.
///
/// JSON schema (every key optional unless marked):
///
///   command            "analyze" | "limits" | "simulate" | "verify" | "predict"
///   law (required)     { atoms: [ { prob, births: {"<age>": count}, char: [phi(0), ...] } ],
///                        characteristic: { name, description } }
///   horizon            14
///   replicates         10000
///   seed               0
///   lags               [1]
///   ells               []
///   predictor_order    0
///   quadrature_points  4096
///   cap                2^62
///   threads            0 (hardware concurrency)
///   output_dir         "."
///   tolerances         { variance, variance_regime2, skew, kurtosis, correlation,
///                        oscillation, alternation, predictor, se_multiple }
struct RunConfig {
  std::string command;
  ExperimentConfig experiment;
  std::optional<std::string> characteristic_name;
  std::optional<std::string> characteristic_description;
  std::string output_dir = ".";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Canonical JSON; parse_config(serialize(c)) == c.
std::string serialize(const RunConfig& config);

/// FNV-1a of the canonical serialization.
std::uint64_t config_hash(const RunConfig& config);

/// Runs the command and writes its artifacts under config.output_dir.
/// Exit codes: 0 success, 2 refusal, 3 internal fault, 4 verification failed.
int dispatch(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace cmj

#endif  // CMJ_CONFIG_HPP
