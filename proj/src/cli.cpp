#include "momalign/cli.hpp"

#include "momalign/errors.hpp"
#include "momalign/parallel.hpp"
#include "momalign/single_particle.hpp"
#include "momalign/stationary_phase.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

namespace momalign {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Constraint violation on a single field; parse_config adds the line.
class FieldError : public ConfigError {
 public:
  FieldError(std::string field, const std::string& msg)
      : ConfigError(msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw FieldError(field, field + " " + what);
}

// Optimal string alignment distance.
std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
      }
    }
  }
  return d[a.size()][b.size()];
}

int line_at(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Records the line of every object key by dotted path ("quadrature.relTolerance").
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::vector<std::string> stack;
  std::string lastKey;
  auto path_of = [&](const std::string& key) {
    std::string p;
    for (const std::string& s : stack) {
      if (s.empty()) continue;
      p += s + ".";
    }
    return p + key;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '"') {
      std::string s;
      std::size_t j = i + 1;
      for (; j < text.size() && text[j] != '"'; ++j) {
        if (text[j] == '\\' && j + 1 < text.size()) ++j;
        s += text[j];
      }
      std::size_t k = j + 1;
      while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
      if (k < text.size() && text[k] == ':') {
        lastKey = s;
        lines.emplace(path_of(s), line_at(text, i));
      }
      i = j;
      continue;
    }
    if (c == '{') {
      stack.push_back(lastKey);
      lastKey.clear();
    } else if (c == '[') {
      stack.emplace_back();
      lastKey.clear();
    } else if ((c == '}' || c == ']') && !stack.empty()) {
      stack.pop_back();
    } else if (c == ',') {
      lastKey.clear();
    }
  }
  return lines;
}

class Reader {
 public:
  Reader(const Json& obj, std::string path, std::vector<std::string> allowed)
      : obj_(obj), path_(std::move(path)), allowed_(std::move(allowed)) {
    if (!obj_.is_object()) throw FieldError(path_, (path_.empty() ? "config" : path_) + " must be an object");
    for (const auto& item : obj_.items()) {
      if (std::find(allowed_.begin(), allowed_.end(), item.key()) != allowed_.end()) continue;
      std::string best;
      std::size_t bestD = std::string::npos;
      for (const std::string& a : allowed_) {
        const std::size_t d = edit_distance(item.key(), a);
        if (d < bestD) {
          bestD = d;
          best = a;
        }
      }
      std::string msg = "unknown key \"" + full(item.key()) + "\"";
      if (bestD <= std::max<std::size_t>(2, best.size() / 3)) msg += "; did you mean \"" + best + "\"?";
      throw FieldError(full(item.key()), msg);
    }
  }

  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* find(const std::string& key) const {
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) const {
    if (const Json* v = find(key)) {
      if (!v->is_number()) field_error(full(key), "must be a number");
      out = v->get<double>();
    }
  }
  void optional_number(const std::string& key, std::optional<double>& out) const {
    if (const Json* v = find(key)) {
      if (v->is_null()) return;
      if (!v->is_number()) field_error(full(key), "must be a number");
      out = v->get<double>();
    }
  }
  template <class Int>
  void integer(const std::string& key, Int& out) const {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer()) field_error(full(key), "must be an integer");
      if (v->is_number_unsigned()) {
        out = static_cast<Int>(v->get<std::uint64_t>());
      } else {
        out = static_cast<Int>(v->get<std::int64_t>());
      }
    }
  }
  void seed(const std::string& key, std::optional<std::uint64_t>& out) const {
    if (const Json* v = find(key)) {
      if (v->is_null()) return;
      if (!v->is_number_unsigned()) field_error(full(key), "must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void seed(const std::string& key, std::uint64_t& out) const {
    std::optional<std::uint64_t> s;
    seed(key, s);
    if (s) out = *s;
  }
  void string(const std::string& key, std::string& out) const {
    if (const Json* v = find(key)) {
      if (!v->is_string()) field_error(full(key), "must be a string");
      out = v->get<std::string>();
    }
  }
  void numbers(const std::string& key, std::vector<double>& out) const {
    if (const Json* v = find(key)) {
      if (!v->is_array()) field_error(full(key), "must be an array of numbers");
      out.clear();
      for (const Json& x : *v) {
        if (!x.is_number()) field_error(full(key), "must be an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  const Json* object(const std::string& key) const {
    const Json* v = find(key);
    if (v && !v->is_object()) field_error(full(key), "must be an object");
    return v;
  }

 private:
  const Json& obj_;
  std::string path_;
  std::vector<std::string> allowed_;
};

void require_positive(const std::string& field, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) field_error(field, "must be positive and finite");
}

void require_increasing(const std::string& field, const std::vector<double>& v, bool allowZero) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || v[i] < 0.0 || (!allowZero && v[i] == 0.0)) {
      field_error(field, allowZero ? "entries must be non-negative" : "entries must be positive");
    }
    if (i > 0 && !(v[i] > v[i - 1])) field_error(field, "must be strictly increasing");
  }
}

void fill(RunConfig& c, const Json& root) {
  const Reader r(root, "",
                 {"m1", "m2", "E0", "deltaP0", "deltaE", "scale", "t", "r1", "r2", "gammaCells",
                  "radialPoints", "sampleCount", "seed", "out", "quadrature", "mcOracle", "table",
                  "bootstrap", "single", "scan", "validate"});
  r.number("m1", c.m1);
  r.number("m2", c.m2);
  r.number("E0", c.E0);
  r.number("deltaP0", c.deltaP0);
  r.optional_number("deltaE", c.deltaE);
  r.number("scale", c.scale);
  r.number("t", c.t);
  r.optional_number("r1", c.r1);
  r.optional_number("r2", c.r2);
  r.integer("gammaCells", c.gammaCells);
  r.integer("radialPoints", c.radialPoints);
  r.integer("sampleCount", c.sampleCount);
  r.seed("seed", c.seed);
  r.string("out", c.out);
  if (const Json* q = r.object("quadrature")) {
    const Reader s(*q, "quadrature", {"pointsPerOscillation", "truncationSigmas", "maxGridPoints", "relTolerance"});
    s.integer("pointsPerOscillation", c.quadrature.pointsPerOscillation);
    s.number("truncationSigmas", c.quadrature.truncationSigmas);
    s.integer("maxGridPoints", c.quadrature.maxGridPoints);
    s.number("relTolerance", c.quadrature.relTolerance);
  }
  if (const Json* q = r.object("mcOracle")) {
    const Reader s(*q, "mcOracle", {"sampleCount", "batches"});
    s.integer("sampleCount", c.mcOracle.sampleCount);
    s.integer("batches", c.mcOracle.batches);
  }
  if (const Json* q = r.object("table")) {
    const Reader s(*q, "table", {"rwCells", "rhoCells", "rwHi", "rhoLo", "rhoHi"});
    s.integer("rwCells", c.table.rwCells);
    s.integer("rhoCells", c.table.rhoCells);
    s.optional_number("rwHi", c.table.rwHi);
    s.optional_number("rhoLo", c.table.rhoLo);
    s.optional_number("rhoHi", c.table.rhoHi);
  }
  if (const Json* q = r.object("bootstrap")) {
    const Reader s(*q, "bootstrap", {"resamples", "seed"});
    s.integer("resamples", c.bootstrap.resamples);
    s.seed("seed", c.bootstrap.seed);
  }
  if (const Json* q = r.object("single")) {
    const Reader s(*q, "single", {"sigma0", "k", "m", "r0", "times", "points"});
    s.number("sigma0", c.single.sigma0);
    s.number("k", c.single.k);
    s.number("m", c.single.m);
    s.number("r0", c.single.r0);
    s.numbers("times", c.single.times);
    s.integer("points", c.single.points);
  }
  if (const Json* q = r.object("scan")) {
    const Reader s(*q, "scan", {"variable", "values", "radius", "points"});
    s.string("variable", c.scan.variable);
    s.numbers("values", c.scan.values);
    s.number("radius", c.scan.radius);
    s.integer("points", c.scan.points);
  }
  if (const Json* q = r.object("validate")) {
    const Reader s(*q, "validate", {"t", "configurations", "normTimes", "normTolerance", "sigmaLimit"});
    s.number("t", c.validate.t);
    s.integer("configurations", c.validate.configurations);
    s.numbers("normTimes", c.validate.normTimes);
    s.number("normTolerance", c.validate.normTolerance);
    s.number("sigmaLimit", c.validate.sigmaLimit);
  }
}

}  // namespace

void validate_config(const RunConfig& c) {
  require_positive("m1", c.m1);
  require_positive("m2", c.m2);
  require_positive("E0", c.E0);
  require_positive("deltaP0", c.deltaP0);
  if (c.deltaE) require_positive("deltaE", *c.deltaE);
  require_positive("scale", c.scale);
  require_positive("t", c.t);
  if (c.r1) require_positive("r1", *c.r1);
  if (c.r2) require_positive("r2", *c.r2);
  if (c.gammaCells < 8) field_error("gammaCells", "must be >= 8");
  if (c.radialPoints < 16) field_error("radialPoints", "must be >= 16");
  if (c.sampleCount < 1000) field_error("sampleCount", "must be >= 1000");

  if (c.quadrature.pointsPerOscillation < 4) field_error("quadrature.pointsPerOscillation", "must be >= 4");
  if (!(c.quadrature.truncationSigmas >= 3.0)) field_error("quadrature.truncationSigmas", "must be >= 3");
  if (c.quadrature.maxGridPoints < 1) field_error("quadrature.maxGridPoints", "must be positive");
  require_positive("quadrature.relTolerance", c.quadrature.relTolerance);
  if (c.mcOracle.sampleCount < 1000) field_error("mcOracle.sampleCount", "must be >= 1000");
  if (c.mcOracle.batches < 10) field_error("mcOracle.batches", "must be >= 10");

  if (c.table.rwCells < 8) field_error("table.rwCells", "must be >= 8");
  if (c.table.rhoCells < 8) field_error("table.rhoCells", "must be >= 8");
  if (c.table.rwHi) require_positive("table.rwHi", *c.table.rwHi);
  if (c.table.rhoLo && (!(*c.table.rhoLo >= 0.0) || !std::isfinite(*c.table.rhoLo))) {
    field_error("table.rhoLo", "must be non-negative");
  }
  if (c.table.rhoHi) require_positive("table.rhoHi", *c.table.rhoHi);
  if (c.table.rhoLo && c.table.rhoHi && !(*c.table.rhoHi > *c.table.rhoLo)) {
    field_error("table.rhoHi", "must exceed table.rhoLo");
  }
  if (c.bootstrap.resamples < 100) field_error("bootstrap.resamples", "must be >= 100");

  require_positive("single.sigma0", c.single.sigma0);
  require_positive("single.m", c.single.m);
  if (!std::isfinite(c.single.k)) field_error("single.k", "must be finite");
  if (!std::isfinite(c.single.r0)) field_error("single.r0", "must be finite");
  if (c.single.times.empty()) field_error("single.times", "must not be empty");
  require_increasing("single.times", c.single.times, true);
  if (c.single.points < 16) field_error("single.points", "must be >= 16");

  if (c.scan.variable != "radius" && c.scan.variable != "deltaP0" && c.scan.variable != "crossover") {
    field_error("scan.variable", "must be one of radius, deltaP0, crossover");
  }
  require_increasing("scan.values", c.scan.values, false);
  require_positive("scan.radius", c.scan.radius);
  if (c.scan.points < 3) field_error("scan.points", "must be >= 3");

  require_positive("validate.t", c.validate.t);
  if (c.validate.configurations < 1) field_error("validate.configurations", "must be >= 1");
  if (c.validate.normTimes.empty()) field_error("validate.normTimes", "must not be empty");
  require_increasing("validate.normTimes", c.validate.normTimes, false);
  require_positive("validate.normTolerance", c.validate.normTolerance);
  require_positive("validate.sigmaLimit", c.validate.sigmaLimit);
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto line = e.byte > 0 ? line_at(text, e.byte - 1) : 1;
    throw ConfigError(source + ":" + std::to_string(line) + ": parse error: " + e.what());
  }
  RunConfig c;
  try {
    fill(c, root);
    validate_config(c);
  } catch (const FieldError& e) {
    const auto lines = key_lines(text);
    auto it = lines.find(e.field());
    const std::string where = it != lines.end() ? std::to_string(it->second) + ":" : "";
    throw ConfigError(source + ":" + where + " " + e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

namespace {

Json to_json(const RunConfig& c) {
  Json j;
  j["m1"] = c.m1;
  j["m2"] = c.m2;
  j["E0"] = c.E0;
  j["deltaP0"] = c.deltaP0;
  j["deltaE"] = c.resolved_delta_e();
  j["scale"] = c.scale;
  j["t"] = c.t;
  if (c.r1) j["r1"] = *c.r1;
  if (c.r2) j["r2"] = *c.r2;
  j["gammaCells"] = c.gammaCells;
  j["radialPoints"] = c.radialPoints;
  j["sampleCount"] = c.sampleCount;
  if (c.seed) j["seed"] = *c.seed;
  j["quadrature"] = {{"pointsPerOscillation", c.quadrature.pointsPerOscillation},
                     {"truncationSigmas", c.quadrature.truncationSigmas},
                     {"maxGridPoints", c.quadrature.maxGridPoints},
                     {"relTolerance", c.quadrature.relTolerance}};
  j["mcOracle"] = {{"sampleCount", c.mcOracle.sampleCount}, {"batches", c.mcOracle.batches}};
  Json table = {{"rwCells", c.table.rwCells}, {"rhoCells", c.table.rhoCells}};
  if (c.table.rwHi) table["rwHi"] = *c.table.rwHi;
  if (c.table.rhoLo) table["rhoLo"] = *c.table.rhoLo;
  if (c.table.rhoHi) table["rhoHi"] = *c.table.rhoHi;
  j["table"] = table;
  j["bootstrap"] = {{"resamples", c.bootstrap.resamples}, {"seed", c.bootstrap.seed}};
  j["single"] = {{"sigma0", c.single.sigma0}, {"k", c.single.k},         {"m", c.single.m},
                 {"r0", c.single.r0},         {"times", c.single.times}, {"points", c.single.points}};
  j["scan"] = {{"variable", c.scan.variable},
               {"values", c.scan.values},
               {"radius", c.scan.radius},
               {"points", c.scan.points}};
  j["validate"] = {{"t", c.validate.t},
                   {"configurations", c.validate.configurations},
                   {"normTimes", c.validate.normTimes},
                   {"normTolerance", c.validate.normTolerance},
                   {"sigmaLimit", c.validate.sigmaLimit}};
  return j;
}

}  // namespace

std::string config_to_json(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

namespace {

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) s_ += ',';
      s_ += h;
      first = false;
    }
    s_ += '\n';
  }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((cell(v, first)), ...);
    s_ += '\n';
  }
  const std::string& str() const { return s_; }

 private:
  void cell(double v, bool& first) {
    if (!first) s_ += ',';
    s_ += format_double(v);
    first = false;
  }
  void cell(const std::string& v, bool& first) {
    if (!first) s_ += ',';
    s_ += v;
    first = false;
  }
  std::string s_;
};

struct Context {
  RunConfig config;
  fs::path out;
  unsigned threads = 1;
  bool hints = false;
};

PairKinematics kinematics(const RunConfig& c) { return make_kinematics(c.m1, c.m2, c.E0); }

SourceSpectrum spectrum(const RunConfig& c, double deltaP0) {
  return make_spectrum(deltaP0, c.E0, c.resolved_delta_e(), c.scale);
}

void write_summary(const Context& ctx, const std::string& command, const Json& results) {
  Json s;
  s["command"] = command;
  s["config"] = to_json(ctx.config);
  s["results"] = results;
  write_atomic((ctx.out / "summary.json").string(), s.dump(2) + "\n");
}

void write_hints(const Context& ctx, const std::string& command, const std::string& recipe) {
  if (!ctx.hints) return;
  const std::string path = (ctx.out / (command + ".gp")).string();
  write_atomic(path, recipe);
  std::cout << "gnuplot recipe: " << path << "\n";
}

SamplingOptions sampling(const RunConfig& c, std::uint64_t seed) {
  SamplingOptions o;
  o.count = c.sampleCount;
  o.seed = seed;
  o.table = c.table;
  o.bootstrap = c.bootstrap;
  return o;
}

int cmd_predict(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const PairKinematics kin = kinematics(c);
  const SourceSpectrum sp = spectrum(c, c.deltaP0);
  const StationaryPrediction p = predict(kin, c.t);
  const DeviationBudget b = deviation_budget(kin, sp, p.r1Peak);
  Json r;
  r["t"] = c.t;
  r["r1Peak"] = p.r1Peak;
  r["r2Peak"] = p.r2Peak;
  r["gammaPeak"] = p.gammaPeak;
  r["xi1"] = p.xi1;
  r["xi2"] = p.xi2;
  r["p1Mag"] = p.p1Mag;
  r["p2Mag"] = p.p2Mag;
  r["mu"] = kin.mu;
  r["v1"] = kin.v1;
  r["v2"] = kin.v2;
  r["wavelength"] = de_broglie_wavelength(kin.p0);
  r["diffractionAngle"] = b.diffractionAngle;
  r["momentumAngle"] = b.momentumAngle;
  r["crossoverRadius"] = b.crossoverRadius;
  r["dominant"] = to_string(b.dominant);
  r["sqlWidth1"] = sql_width(kin.m1, c.t);
  r["sqlWidth2"] = sql_width(kin.m2, c.t);
  write_summary(ctx, "predict", r);
  write_hints(ctx, "predict",
              "# predict writes only summary.json; nothing to plot.\n"
              "# r1Peak and r2Peak grow linearly with t: rerun with several t to plot them.\n");
  return kExitOk;
}

int cmd_single(const Context& ctx) {
  const SingleConfig& s = ctx.config.single;
  GaussianPacket1D packet{s.sigma0, s.k, s.m, s.r0};
  packet.validate();
  Csv csv({"t", "x", "psi_re", "psi_im", "density", "abs_error"});
  Json rows = Json::array();
  std::vector<double> ts;
  std::vector<double> means;
  for (double t : s.times) {
    const auto grid = auto_grid(packet, t, static_cast<std::size_t>(s.points));
    const auto psi = propagate_numeric(packet, grid, t, ctx.config.quadrature);
    double maxErr = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double err = std::abs(psi[i] - gaussian_closed_form(packet, grid[i], t));
      maxErr = std::max(maxErr, err);
      csv.row(t, grid[i], psi[i].real(), psi[i].imag(), std::norm(psi[i]), err);
    }
    const CentroidWidth cw = track_centroid_width(grid, psi);
    rows.push_back({{"t", t},
                    {"centroid", cw.mean},
                    {"width", cw.width},
                    {"expectedWidth", packet.width(t)},
                    {"mass", cw.mass},
                    {"maxAbsError", maxErr}});
    ts.push_back(t);
    means.push_back(cw.mean);
  }
  Json r;
  r["velocity"] = packet.velocity();
  r["times"] = rows;
  if (ts.size() >= 2) {
    double mt = 0.0, mm = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      mt += ts[i];
      mm += means[i];
    }
    mt /= static_cast<double>(ts.size());
    mm /= static_cast<double>(ts.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      sxy += (ts[i] - mt) * (means[i] - mm);
      sxx += (ts[i] - mt) * (ts[i] - mt);
    }
    r["centroidSlope"] = sxy / sxx;
  }
  write_atomic((ctx.out / "single.csv").string(), csv.str());
  write_summary(ctx, "single", r);
  write_hints(ctx, "single",
              "set datafile separator ','\n"
              "set xlabel 'x'\nset ylabel '|psi|^2'\n"
              "plot for [i=0:*] 'single.csv' skip 1 using 2:($1==column(1) ? $5 : 1/0) with lines notitle\n");
  return kExitOk;
}

int cmd_pair_density(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const PairKinematics kin = kinematics(c);
  const PairAmplitudeField field(spectrum(c, c.deltaP0), kin, c.quadrature);
  const double r1 = c.r1.value_or(kin.v1 * c.t);
  const double r2 = c.r2.value_or(kin.v2 * c.t);
  const auto grid = uniform_gamma_grid(c.gammaCells);
  const GammaDensityTable g = gamma_density(field, r1, r2, c.t, grid, ctx.threads);
  const RadialProfile rp =
      radial_profile(field, c.t, default_radial_grid(field, c.t, c.radialPoints), ctx.threads);

  Csv gcsv({"gamma", "density"});
  for (std::size_t i = 0; i < g.gamma.size(); ++i) gcsv.row(g.gamma[i], g.density[i]);
  Csv rcsv({"r", "density"});
  for (std::size_t i = 0; i < rp.r.size(); ++i) rcsv.row(rp.r[i], rp.density[i]);

  const double peak = *std::max_element(g.psiSq.begin(), g.psiSq.end());
  std::size_t half = 0;
  for (std::size_t i = 0; i < g.gamma.size(); ++i) {
    if (std::abs(g.gamma[i] - kPi / 2) < std::abs(g.gamma[half] - kPi / 2)) half = i;
  }
  Json r;
  r["r1"] = r1;
  r["r2"] = r2;
  r["modeGamma"] = g.modeGamma;
  r["gammaCellWidth"] = kPi / c.gammaCells;
  r["halfPiRatio"] = peak > 0.0 ? g.psiSq[half] / peak : 0.0;
  r["secondMomentAboutPi"] = g.secondMomentAboutPi;
  r["gammaNormalization"] = g.normalization;
  r["radialPeak"] = rp.peakR;
  r["radialPeakDensity"] = rp.peakDensity;
  r["v1t"] = kin.v1 * c.t;
  r["v2t"] = kin.v2 * c.t;
  write_atomic((ctx.out / "gamma-density.csv").string(), gcsv.str());
  write_atomic((ctx.out / "radial.csv").string(), rcsv.str());
  write_summary(ctx, "pair-density", r);
  write_hints(ctx, "pair-density",
              "set datafile separator ','\n"
              "set multiplot layout 1,2\n"
              "set xlabel 'gamma'\nset ylabel 'density'\n"
              "plot 'gamma-density.csv' skip 1 using 1:2 with lines notitle\n"
              "set xlabel 'r'\nset ylabel '|psi|^2 r^4'\n"
              "plot 'radial.csv' skip 1 using 1:2 with lines notitle\n"
              "unset multiplot\n");
  return kExitOk;
}

Json report_json(const AlignmentReport& rep) {
  Json j;
  j["sigmaEpsilon"] = rep.sigmaEpsilon;
  j["sigmaErr"] = rep.sigmaErr;
  j["radialPeak1"] = rep.radialPeak1;
  j["radialPeak1Err"] = rep.radialPeak1Err;
  j["radialPeak2"] = rep.radialPeak2;
  j["radialPeak2Err"] = rep.radialPeak2Err;
  j["meanCosGamma"] = rep.meanCosGamma;
  j["eventCount"] = rep.eventCount;
  j["bootstrapResamples"] = rep.bootstrapResamples;
  return j;
}

int cmd_sample(const Context& ctx, std::uint64_t seed) {
  const RunConfig& c = ctx.config;
  const PairKinematics kin = kinematics(c);
  const PairAmplitudeField field(spectrum(c, c.deltaP0), kin, c.quadrature);
  const AmplitudeTable tab = tabulate_reduced(field, c.t, c.table, ctx.threads);
  const auto events = sample_events_from_table(tab, kin, c.sampleCount, seed, ctx.threads);
  const AlignmentReport rep = alignment_report(events, c.bootstrap, ctx.threads);

  Csv csv({"r1", "theta1", "phi1", "r2", "theta2", "phi2", "gamma"});
  for (const DetectionEvent& e : events) {
    csv.row(e.r1, e.dir1.theta, e.dir1.phi, e.r2, e.dir2.theta, e.dir2.phi, e.gamma);
  }
  const DeviationBudget b = deviation_budget(kin, field.spectrum(), kin.v1 * c.t);
  Json r = report_json(rep);
  r["tableMass"] = tab.totalMass;
  r["tableQuadratureError"] = tab.quadratureError;
  r["tableAccuracyWarning"] = tab.accuracyWarning;
  r["r1Peak"] = kin.v1 * c.t;
  r["r2Peak"] = kin.v2 * c.t;
  r["diffractionAngle"] = b.diffractionAngle;
  r["momentumAngle"] = b.momentumAngle;
  r["dominant"] = to_string(b.dominant);
  if (events.size() >= 10000) r["uncertaintyProduct"] = uncertainty_product(field, events);
  write_atomic((ctx.out / "events.csv").string(), csv.str());
  write_summary(ctx, "sample", r);
  write_hints(ctx, "sample",
              "set datafile separator ','\n"
              "set xlabel 'pi - gamma'\nset ylabel 'events'\n"
              "binw = 0.002\n"
              "plot 'events.csv' skip 1 using (binw*floor((pi-$7)/binw)):(1) smooth frequency with boxes notitle\n");
  return kExitOk;
}

int cmd_scan(const Context& ctx, std::uint64_t seed) {
  const RunConfig& c = ctx.config;
  const PairKinematics kin = kinematics(c);
  const SamplingOptions base = sampling(c, seed);
  Json r;
  r["variable"] = c.scan.variable;
  Csv csv({"abscissa", "sigma_epsilon", "sigma_err"});
  int status = kExitOk;

  if (c.scan.variable == "crossover") {
    const PairAmplitudeField field(spectrum(c, c.deltaP0), kin, c.quadrature);
    const double predicted = deviation_budget(kin, field.spectrum(), 1.0).crossoverRadius;
    const auto radii = c.scan.values.empty() ? crossover_radii(predicted, c.scan.points) : c.scan.values;
    const CrossoverScan scan = crossover_scan(field, radii, base, ctx.threads);
    Csv rows({"r", "t", "sigma_epsilon", "sigma_err", "diffraction_angle", "momentum_angle", "dominant"});
    for (const CrossoverRow& row : scan.rows) {
      csv.row(row.r, row.sigmaEpsilon, row.sigmaErr);
      rows.row(row.r, row.t, row.sigmaEpsilon, row.sigmaErr, row.diffractionAngle, row.momentumAngle,
               to_string(row.dominant));
    }
    write_atomic((ctx.out / "crossover.csv").string(), rows.str());
    const CrossoverAnalysis& a = scan.analysis;
    r["predictedCrossover"] = a.predictedCrossover;
    r["empiricalCrossover"] = std::isnan(a.empiricalCrossover) ? Json(nullptr) : Json(a.empiricalCrossover);
    r["slopeAtLow"] = a.slopeAtLow;
    r["slopeAtHigh"] = a.slopeAtHigh;
    r["segmentMidpoints"] = a.segmentMidpoints;
    r["segmentSlopes"] = a.segmentSlopes;
  } else {
    const bool byRadius = c.scan.variable == "radius";
    std::vector<double> values = c.scan.values;
    if (values.empty()) {
      values = byRadius ? std::vector<double>{50.0, 100.0, 200.0, 400.0}
                        : std::vector<double>{0.05, 0.1, 0.2, 0.4};
    }
    std::vector<ScanPoint> points;
    Json rows = Json::array();
    std::optional<PairAmplitudeField> fixed;
    if (byRadius) fixed.emplace(spectrum(c, c.deltaP0), kin, c.quadrature);
    for (std::size_t i = 0; i < values.size(); ++i) {
      SamplingOptions o = base;
      o.seed = scan_seed(seed, i);
      const double radius = byRadius ? values[i] : c.scan.radius;
      AlignmentReport rep;
      DeviationBudget b;
      if (byRadius) {
        rep = measure_alignment(*fixed, radius, o, ctx.threads);
        b = deviation_budget(kin, fixed->spectrum(), radius);
      } else {
        const PairAmplitudeField field(spectrum(c, values[i]), kin, c.quadrature);
        rep = measure_alignment(field, radius, o, ctx.threads);
        b = deviation_budget(kin, field.spectrum(), radius);
      }
      points.push_back({values[i], rep.sigmaEpsilon, rep.sigmaErr});
      csv.row(values[i], rep.sigmaEpsilon, rep.sigmaErr);
      Json row = report_json(rep);
      row["abscissa"] = values[i];
      row["radius"] = radius;
      row["t"] = radius / kin.v1;
      row["diffractionAngle"] = b.diffractionAngle;
      row["momentumAngle"] = b.momentumAngle;
      row["dominant"] = to_string(b.dominant);
      rows.push_back(row);
    }
    r["points"] = rows;
    try {
      const ScalingFit fit = fit_scaling(points, byRadius ? ScanVariable::Radius : ScanVariable::DeltaP0,
                                         ScanContext{kin, c.deltaP0, c.scan.radius});
      r["exponent"] = fit.exponent;
      r["exponentErr"] = fit.exponentErr;
      r["logPrefactor"] = fit.logPrefactor;
    } catch (const DomainError& e) {
      r["exponent"] = nullptr;
      r["fitError"] = e.what();
      std::cerr << "error: " << e.what() << "\n";
      status = kExitConfig;
    }
  }
  write_atomic((ctx.out / "scan.csv").string(), csv.str());
  write_summary(ctx, "scan", r);
  write_hints(ctx, "scan",
              "set datafile separator ','\n"
              "set logscale xy\n"
              "set xlabel '" + c.scan.variable + "'\nset ylabel 'sigma_epsilon'\n"
              "f(x) = a * x**b\n"
              "fit f(x) 'scan.csv' skip 1 using 1:2:3 yerrors via a, b\n"
              "plot 'scan.csv' skip 1 using 1:2:3 with yerrorbars title 'sampled', f(x) title 'power law'\n");
  return status;
}

int cmd_validate(const Context& ctx, std::uint64_t seed) {
  const RunConfig& c = ctx.config;
  const ValidateConfig& v = c.validate;
  const PairKinematics kin = kinematics(c);
  const PairAmplitudeField field(spectrum(c, c.deltaP0), kin, c.quadrature);
  const SixDIntegrand six = field.six_d_integrand();

  Csv csv({"index", "x1", "y1", "z1", "x2", "y2", "z2", "t", "quad_re", "quad_im", "quad_err",
           "mc_re", "mc_im", "mc_err", "z"});
  bool oraclePass = true;
  double worstZ = 0.0;
  for (int i = 0; i < v.configurations; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    Vec3 n(rng.normal(), rng.normal(), rng.normal());
    n.normalize();
    Vec3 n2 = -n + 0.3 * Vec3(rng.normal(), rng.normal(), rng.normal());
    n2.normalize();
    const Vec3 r1 = kin.v1 * v.t * (0.8 + 0.4 * rng.uniform()) * n;
    const Vec3 r2 = kin.v2 * v.t * (0.8 + 0.4 * rng.uniform()) * n2;
    const QuadratureResult q = evaluate_amplitude(field, r1, r2, v.t);
    MCOracleSpec ms = c.mcOracle;
    ms.seed = scan_seed(seed, static_cast<std::size_t>(i));
    const MCResult mc = mc_oracle_6d(six, ms, r1, r2, v.t, ctx.threads);
    const double combined = std::hypot(mc.stdErr(), q.error);
    const double z = std::abs(q.value - mc.value) / combined;
    worstZ = std::max(worstZ, z);
    if (!(z <= v.sigmaLimit)) oraclePass = false;
    csv.row(static_cast<double>(i), r1.x(), r1.y(), r1.z(), r2.x(), r2.y(), r2.z(), v.t, q.value.real(),
            q.value.imag(), q.error, mc.value.real(), mc.value.imag(), mc.stdErr(), z);
  }

  Csv ncsv({"t", "norm"});
  std::vector<double> norms;
  for (double t : v.normTimes) {
    norms.push_back(norm_on_shells(field, t, TableOptions{}, ctx.threads));
    ncsv.row(t, norms.back());
  }
  const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
  const double drift = *hi / *lo - 1.0;
  const bool normPass = drift <= v.normTolerance;

  Json r;
  r["oracleWorstZ"] = worstZ;
  r["oraclePass"] = oraclePass;
  r["norms"] = norms;
  r["normDrift"] = drift;
  r["normPass"] = normPass;
  r["pass"] = oraclePass && normPass;
  write_atomic((ctx.out / "validate.csv").string(), csv.str());
  write_atomic((ctx.out / "norm.csv").string(), ncsv.str());
  write_summary(ctx, "validate", r);
  write_hints(ctx, "validate",
              "set datafile separator ','\n"
              "set xlabel 'configuration'\nset ylabel 'z'\n"
              "plot 'validate.csv' skip 1 using 1:15 with points notitle\n");
  if (!oraclePass) std::cerr << "validate: oracle mismatch, worst z = " << worstZ << "\n";
  if (!normPass) std::cerr << "validate: norm drift " << drift << " exceeds " << v.normTolerance << "\n";
  return oraclePass && normPass ? kExitOk : kExitValidate;
}

const std::set<std::string> kCommands{"predict", "single", "pair-density", "sample", "scan", "validate"};

}  // namespace

int run(const std::string& command, RunConfig config, const RunOptions& options) {
  try {
    if (!kCommands.count(command)) throw ConfigError("unknown command \"" + command + "\"");
    validate_config(config);
    if (options.seed) config.seed = options.seed;
    const bool sampling = command == "sample" || command == "scan" || command == "validate";
    if (sampling && !config.seed) throw ConfigError("seed is required for " + command);

    Context ctx;
    ctx.config = config;
    ctx.out = options.outDir.empty() ? fs::path(config.out) : fs::path(options.outDir);
    ctx.threads = options.threads ? options.threads : default_threads();
    ctx.hints = options.gnuplotHints;
    fs::create_directories(ctx.out);

    if (command == "predict") return cmd_predict(ctx);
    if (command == "single") return cmd_single(ctx);
    if (command == "pair-density") return cmd_pair_density(ctx);
    if (command == "sample") return cmd_sample(ctx, *config.seed);
    if (command == "scan") return cmd_scan(ctx, *config.seed);
    return cmd_validate(ctx, *config.seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return kExitResource;
  } catch (const std::bad_alloc&) {
    std::cerr << "resource error: out of memory\n";
    return kExitResource;
  } catch (const DomainError& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Anti-alignment of two-fragment decay wavepackets"};
  std::string command;
  std::string configPath;
  RunOptions options;
  std::uint64_t seed = 0;
  app.add_option("command", command, "predict | single | pair-density | sample | scan | validate")
      ->required()
      ->check(CLI::IsMember(kCommands));
  app.add_option("--config", configPath, "JSON configuration file")->required();
  app.add_option("--out", options.outDir, "output directory (default: config \"out\")");
  auto* seedOpt = app.add_option("--seed", seed, "RNG seed, overrides the config");
  app.add_option("--threads", options.threads, "worker threads (default: available parallelism)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--gnuplot-hints", options.gnuplotHints, "write a gnuplot recipe next to the outputs");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (*seedOpt) options.seed = seed;
  RunConfig config;
  try {
    config = load_config(configPath);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return run(command, config, options);
}

}  // namespace momalign
