// Acceptance checks. One line per criterion; exit status 1 if any fails.

#include "momalign/cli.hpp"
#include "momalign/correlation_stats.hpp"
#include "momalign/errors.hpp"
#include "momalign/pair_amplitude.hpp"
#include "momalign/parallel.hpp"
#include "momalign/single_particle.hpp"
#include "momalign/stationary_phase.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace momalign;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limitSeconds;
  std::function<Outcome()> body;
};

unsigned threads = 1;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PairAmplitudeField field(double deltaP0, double m1 = 1.0, double m2 = 1.0, double E0 = 1.0) {
  return PairAmplitudeField(make_spectrum(deltaP0, E0), make_kinematics(m1, m2, E0));
}

SamplingOptions sampling(std::uint64_t seed) {
  SamplingOptions o;
  o.count = 100000;
  o.seed = seed;
  return o;
}

Outcome oracle_equivalence() {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n;
  bool pass = true;
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double m1 = 0.5 + 1.5 * u(gen);
    const double m2 = 0.5 + 1.5 * u(gen);
    const double dp = 0.1 + 0.2 * u(gen);
    const double t = 10.0 + 30.0 * u(gen);
    const PairAmplitudeField f = field(dp, m1, m2);
    const PairKinematics& k = f.kinematics();
    const Vec3 n1 = Vec3(n(gen), n(gen), n(gen)).normalized();
    const Vec3 n2 = (-n1 + 0.3 * Vec3(n(gen), n(gen), n(gen)).normalized()).normalized();
    const Vec3 r1 = k.v1 * t * (0.9 + 0.2 * u(gen)) * n1;
    const Vec3 r2 = k.v2 * t * (0.9 + 0.2 * u(gen)) * n2;
    const QuadratureResult q = evaluate_amplitude(f, r1, r2, t);
    MCOracleSpec spec;
    spec.sampleCount = 1000000;
    spec.seed = 1000 + static_cast<std::uint64_t>(i);
    const MCResult mc = mc_oracle_6d(f.six_d_integrand(), spec, r1, r2, t, threads);
    const double z = std::abs(q.value - mc.value) / std::hypot(mc.stdErr(), q.error);
    worst = std::max(worst, z);
    pass = pass && z <= 3.0;
  }
  return {pass, fmt("worst |quad - mc| = %.3f combined standard errors (limit 3)", worst)};
}

Outcome single_particle_oracle() {
  const GaussianPacket1D p{1.0, 1.0, 1.0, 0.0};
  double worst = 0.0;
  std::vector<double> ts{0.0, 1.0, 10.0, 100.0}, means;
  for (double t : ts) {
    const auto x = auto_grid(p, t, 4096);
    const auto psi = propagate_numeric(p, x, t, QuadratureSpec{});
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, std::abs(psi[i] - gaussian_closed_form(p, x[i], t)));
    }
    means.push_back(track_centroid_width(x, psi).mean);
  }
  double mt = 0, mm = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    mm += means[i];
  }
  mt /= ts.size();
  mm /= ts.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - mt) * (means[i] - mm);
    sxx += (ts[i] - mt) * (ts[i] - mt);
  }
  const double slope = sxy / sxx;
  const bool pass = worst < 1e-6 && std::abs(slope - 1.0) <= 1e-3;
  return {pass, fmt("max abs error %.3e (limit 1e-6), centroid slope %.7f (1 +- 0.001)", worst, slope)};
}

Outcome anti_alignment() {
  const PairAmplitudeField f = field(0.05);
  const GammaDensityTable g = gamma_density(f, 1000.0, 1000.0, 1000.0, uniform_gamma_grid(512), threads);
  const double peak = *std::max_element(g.density.begin(), g.density.end());
  std::size_t half = 0;
  for (std::size_t i = 0; i < g.gamma.size(); ++i) {
    if (std::abs(g.gamma[i] - kPi / 2) < std::abs(g.gamma[half] - kPi / 2)) half = i;
  }
  const double offset = std::abs(g.modeGamma - kPi);
  const double ratio = g.density[half] / peak;
  const bool pass = offset <= 0.007 && ratio <= 1e-3;
  return {pass, fmt("mode at pi - %.5f rad (limit 0.007), density(pi/2)/peak = %.3e (limit 1e-3)", offset, ratio)};
}

Outcome shell_radius() {
  const PairAmplitudeField f = field(0.05);
  bool pass = true;
  std::string d;
  for (double t : {500.0, 1000.0}) {
    const RadialProfile rp = radial_profile(f, t, default_radial_grid(f, t, 401), threads);
    const double rel = rp.peakR / (f.kinematics().v1 * t) - 1.0;
    pass = pass && std::abs(rel) <= 0.02;
    d += fmt("t=%g peak %.3f (rel %+.2e) ", t, rp.peakR, rel);
  }
  return {pass, d + "(limit 2%)"};
}

Outcome diffraction_scaling() {
  const PairAmplitudeField f = field(0.02);
  std::vector<ScanPoint> pts;
  const std::vector<double> radii{50.0, 100.0, 200.0, 400.0};
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const AlignmentReport r = measure_alignment(f, radii[i], sampling(scan_seed(51, i)), threads);
    pts.push_back({radii[i], r.sigmaEpsilon, r.sigmaErr});
  }
  const ScalingFit fit = fit_scaling(pts, ScanVariable::Radius, {f.kinematics(), 0.02, 0.0});
  std::string s;
  for (const ScanPoint& p : pts) s += fmt("%g:%.4f ", p.abscissa, p.sigmaEpsilon);
  return {std::abs(fit.exponent + 0.5) <= 0.1,
          fmt("exponent %.3f +- %.3f (target -0.5 +- 0.1); sigma ", fit.exponent, fit.exponentErr) + s};
}

Outcome momentum_scaling() {
  const PairKinematics kin = make_kinematics(1, 1, 1);
  std::vector<ScanPoint> pts;
  const std::vector<double> dps{0.05, 0.1, 0.2, 0.4};
  double at02 = 0.0;
  for (std::size_t i = 0; i < dps.size(); ++i) {
    const AlignmentReport r = measure_alignment(field(dps[i]), 4000.0, sampling(scan_seed(61, i)), threads);
    pts.push_back({dps[i], r.sigmaEpsilon, r.sigmaErr});
    if (dps[i] == 0.2) at02 = r.sigmaEpsilon;
  }
  const ScalingFit fit = fit_scaling(pts, ScanVariable::DeltaP0, {kin, 0.0, 4000.0});
  const bool pass = std::abs(fit.exponent - 1.0) <= 0.2 && at02 >= 0.1 && at02 <= 0.4;
  std::string s;
  for (const ScanPoint& p : pts) s += fmt("%g:%.4f ", p.abscissa, p.sigmaEpsilon);
  return {pass, fmt("exponent %.3f +- %.3f (target 1 +- 0.2), sigma(0.2) = %.4f (0.1..0.4); sigma ", fit.exponent,
                    fit.exponentErr, at02) +
                    s};
}

Outcome crossover() {
  const PairAmplitudeField f = field(0.2);
  const double predicted = deviation_budget(f.kinematics(), f.spectrum(), 1.0).crossoverRadius;
  const auto radii = crossover_radii(predicted, 13);
  const CrossoverScan scan = crossover_scan(f, radii, sampling(71), threads);
  const CrossoverAnalysis& a = scan.analysis;
  const double ratio = a.empiricalCrossover / predicted;
  const bool inRange = std::isfinite(ratio) && ratio >= 1.0 / 3.0 && ratio <= 3.0;
  const bool pass = inRange && a.slopeAtLow <= -0.35 && a.slopeAtHigh >= -0.15;
  return {pass, fmt("empirical %.1f vs predicted %.1f (factor 3), slope at r*/10 %.3f (<= -0.35), at 10 r* %.3f "
                    "(>= -0.15)",
                    a.empiricalCrossover, predicted, a.slopeAtLow, a.slopeAtHigh)};
}

Outcome conservation() {
  const PairAmplitudeField f = field(0.05);
  std::vector<double> norms;
  for (double t : {500.0, 1000.0, 2000.0}) norms.push_back(norm_on_shells(f, t, {}, threads));
  const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
  const double drift = *hi / *lo - 1.0;
  const auto ev = sample_events(f, 1000.0, 100000, 81, threads);
  const double u = uncertainty_product(f, ev);
  const bool pass = drift <= 0.01 && u >= 0.95;
  return {pass, fmt("norms %.6f %.6f %.6f (drift %.2e, limit 1%%), uncertainty product %.4f (>= 0.95)", norms[0],
                    norms[1], norms[2], drift, u)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "momalign_acceptance_determinism";
  fs::remove_all(root);
  const RunConfig c = parse_config(R"({
    "seed": 90210, "sampleCount": 20000, "deltaP0": 0.02,
    "mcOracle": {"sampleCount": 20000},
    "validate": {"configurations": 2, "normTimes": [500, 1000]},
    "scan": {"variable": "radius", "values": [50, 100, 200, 400]}
  })");
  bool pass = true;
  std::string d;
  for (const char* cmd : {"sample", "scan", "validate"}) {
    const fs::path a = root / (std::string(cmd) + "_1");
    const fs::path b = root / (std::string(cmd) + "_n");
    const int sa = run(cmd, c, {a.string(), std::nullopt, 1, false});
    const int sb = run(cmd, c, {b.string(), std::nullopt, 4, false});
    bool same = sa == kExitOk && sb == kExitOk;
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      same = same && slurp(e.path()) == slurp(b / e.path().filename());
      ++files;
    }
    pass = pass && same && files > 0;
    d += fmt("%s %s (%d files) ", cmd, same ? "identical" : "DIFFERENT", files);
  }
  fs::remove_all(root);
  return {pass, d + "for --threads 1 vs 4"};
}

}  // namespace

// Optional arguments pick criteria by number.
int main(int argc, char** argv) {
  threads = default_threads();
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<Criterion> criteria{
      {1, "oracle equivalence", 300, oracle_equivalence},
      {2, "single-particle oracle", 60, single_particle_oracle},
      {3, "anti-alignment", 600, anti_alignment},
      {4, "shell radius", 600, shell_radius},
      {5, "diffraction scaling", 1800, diffraction_scaling},
      {6, "momentum-spread scaling", 1800, momentum_scaling},
      {7, "crossover", 2700, crossover},
      {8, "conservation and uncertainty", 900, conservation},
      {9, "determinism", 60, determinism},
  };
  int failed = 0;
  std::size_t ran = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool inTime = secs <= c.limitSeconds;
    const bool pass = o.pass && inTime;
    if (!pass) ++failed;
    std::printf("criterion %d %s %s: %s [%.1f s, limit %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), secs, c.limitSeconds, inTime ? "" : ", too slow");
    std::fflush(stdout);
  }
  std::printf("acceptance: %zu of %zu criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
