#pragma once

#include "momalign/correlation_stats.hpp"
#include "momalign/pair_amplitude.hpp"
#include "momalign/quadrature.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace momalign {

/// Problem with the configuration file or the command line; exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SingleConfig {
  double sigma0 = 1.0;
  double k = 1.0;
  double m = 1.0;
  double r0 = 0.0;
  std::vector<double> times{0.0, 1.0, 10.0, 100.0};
  int points = 4096;
};

struct ScanConfig {
  std::string variable = "radius";  // radius | deltaP0 | crossover
  std::vector<double> values;       // radii or deltaP0 values; empty means default
  double radius = 4000.0;           // fixed radius of a deltaP0 scan
  int points = 9;                   // crossover scan radii when values is empty
};

struct ValidateConfig {
  double t = 10.0;
  int configurations = 5;
  std::vector<double> normTimes{500.0, 1000.0, 2000.0};
  double normTolerance = 0.01;
  double sigmaLimit = 3.0;
};

struct RunConfig {
  double m1 = 1.0;
  double m2 = 1.0;
  double E0 = 1.0;
  double deltaP0 = kDefaultDeltaP0;
  std::optional<double> deltaE;  // default kDefaultDeltaEFraction * E0
  double scale = 1.0;
  double t = 1000.0;
  std::optional<double> r1;  // default v1 t
  std::optional<double> r2;  // default v2 t
  int gammaCells = 512;
  int radialPoints = 401;
  std::int64_t sampleCount = 100000;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  QuadratureSpec quadrature;
  MCOracleSpec mcOracle;
  TableOptions table;
  BootstrapOptions bootstrap;
  SingleConfig single;
  ScanConfig scan;
  ValidateConfig validate;

  double resolved_delta_e() const { return deltaE.value_or(kDefaultDeltaEFraction * E0); }
};

/// Parses a JSON document. Errors carry `source:line:` prefixes; unknown keys
/// name the closest allowed key.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Throws ConfigError naming the offending field.
void validate_config(const RunConfig& config);

/// Every field with defaults filled in. The output directory is left out.
std::string config_to_json(const RunConfig& config);

struct RunOptions {
  std::string outDir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;  // 0 means available parallelism
  bool gnuplotHints = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitResource = 3;
inline constexpr int kExitValidate = 4;

/// Runs one command and writes its files into options.outDir. Returns the
/// exit status; diagnostics go to stderr.
int run(const std::string& command, RunConfig config, const RunOptions& options);

/// Full command line entry point.
int cli_main(int argc, char** argv);

/// Writes `content` to `path` through a temporary file and a rename.
void write_atomic(const std::string& path, const std::string& content);

/// %.17g
std::string format_double(double x);

}  // namespace momalign
