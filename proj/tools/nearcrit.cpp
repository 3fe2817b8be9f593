// Batch front end. Every command writes manifest.json, CSV tables and optional
// SVG plots into --out; data files depend only on the resolved configuration.
// Exit status: 0 success, 2 validation error, 3 failed check under --check.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nearcrit/analysis.hpp"
#include "nearcrit/arms.hpp"
#include "nearcrit/dynamics.hpp"
#include "nearcrit/error.hpp"
#include "nearcrit/loewner.hpp"
#include "nearcrit/network.hpp"
#include "nearcrit/pivotal.hpp"
#include "nearcrit/ppp.hpp"
#include "nearcrit/quad.hpp"
#include "nearcrit/render.hpp"

#ifndef NEARCRIT_VERSION
#define NEARCRIT_VERSION "0.0.0"
#endif

using namespace nearcrit;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 2;
constexpr int kCheckFailure = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void need(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> dyadic(double from, double to) {
  std::vector<double> out;
  for (double v = from; v <= to * (1 + 1e-12); v *= 2) out.push_back(v);
  return out;
}

// Options of one subcommand, recorded so the resolved values can be echoed and
// filled from a configuration file.
class Params {
 public:
  Params(CLI::App* app, std::string name) : app_(app), name_(std::move(name)) {
    app_->add_option("--config", config_, "JSON configuration file; flags take precedence");
  }

  template <class T>
  CLI::Option* add(const std::string& key, T& value, const std::string& help) {
    emit_.push_back([key, &value](json& j) { j[key] = value; });
    return app_->add_option("--" + key, value, help)->capture_default_str();
  }

  CLI::Option* flag(const std::string& key, bool& value, const std::string& help) {
    emit_.push_back([key, &value](json& j) { j[key] = value; });
    return app_->add_flag("--" + key + ",!--no-" + key, value, help);
  }

  // Fills options not given on the command line. Top-level keys apply to every
  // command; an object named after this command overrides them.
  void apply_config() {
    if (config_.empty()) return;
    std::ifstream in(config_);
    need(in.good(), "cannot read configuration file " + config_);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw UsageError("configuration file " + config_ + " is not valid JSON: " + e.what());
    }
    need(j.is_object(), "configuration file must hold a JSON object");
    if (j.contains(name_)) {
      need(j[name_].is_object(), "section '" + name_ + "' must be an object");
      for (auto& [k, v] : j[name_].items()) set(k, v);
    }
    for (auto& [k, v] : j.items())
      if (!v.is_object()) set(k, v);
  }

  json resolved() const {
    json j = json::object();
    for (const auto& e : emit_) e(j);
    return j;
  }

 private:
  void set(const std::string& key, const json& v) {
    CLI::Option* opt = app_->get_option_no_throw("--" + key);
    need(opt != nullptr && key != "config", "unknown configuration key '" + key + "' for " + name_);
    if (opt->count() > 0) return;
    std::vector<std::string> parts;
    auto text = [](const json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
    if (v.is_array())
      for (const auto& x : v) parts.push_back(text(x));
    else
      parts.push_back(text(v));
    try {
      opt->add_result(parts);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("configuration key '" + key + "': " + e.what());
    }
  }

  CLI::App* app_;
  std::string name_;
  std::string config_;
  std::vector<std::function<void(json&)>> emit_;
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Output directory, manifest and check bookkeeping of one command run.
class Run {
 public:
  Run(std::string command, const std::string& out, uint64_t seed, uint64_t stream)
      : command_(std::move(command)), dir_(out), rng_{seed, stream} {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    need(!ec && fs::is_directory(dir_), "cannot create output directory " + out);
    manifest_["command"] = command_;
    manifest_["version"] = NEARCRIT_VERSION;
    manifest_["rng"] = {{"algorithm", kRngAlgorithm}, {"seed", seed}, {"stream", stream}};
  }

  RngSpec rng(uint64_t part) const { return rng_.substream(part); }
  json& manifest() { return manifest_; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir_ / name, std::ios::binary);
    f << content;
    need(f.good(), "cannot write " + (dir_ / name).string());
    files_.push_back(name);
  }

  void fit(const std::string& name, const ExponentFit& f) { manifest_["fits"][name] = json::parse(fit_to_json(f)); }

  void check(const std::string& name, bool pass, const std::string& detail) { checks_.push_back({name, pass, detail}); }

  void note(const std::string& line) {
    std::cout << line << "\n";
    manifest_["diagnostics"].push_back(line);
  }

  int finish(const json& config, bool check_mode) {
    manifest_["config"] = config;
    bool ok = true;
    for (const Check& c : checks_) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
      manifest_["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
      ok = ok && c.pass;
    }
    std::sort(files_.begin(), files_.end());
    files_.push_back("manifest.json");
    manifest_["files"] = files_;
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    f << manifest_.dump(2) << "\n";
    need(f.good(), "cannot write manifest");
    std::cout << "wrote " << files_.size() << " files to " << dir_.string() << "\n";
    return check_mode && !ok ? kCheckFailure : 0;
  }

 private:
  std::string command_;
  fs::path dir_;
  RngSpec rng_;
  json manifest_ = json::object();
  std::vector<std::string> files_;
  std::vector<Check> checks_;
};

Alpha4Table load_alpha4(const std::string& path, Run& run) {
  std::ifstream in(path);
  need(in.good(), "alpha4 table not found at " + path + "; run `nearcrit exponents` first or pass --alpha4");
  std::stringstream ss;
  ss << in.rdbuf();
  Alpha4Table t;
  try {
    t = alpha4_from_json(ss.str());
  } catch (const std::exception& e) {
    throw UsageError("alpha4 table " + path + " is unreadable: " + e.what());
  }
  run.manifest()["alpha4"] = json::parse(alpha4_to_json(t));
  run.manifest()["alpha4_path"] = path;
  return t;
}

std::string within(double value, double target, double tol) {
  return fixed("%.4f", value) + " (target " + fixed("%.4f", target) + " +- " + fixed("%.3g", tol) + ")";
}

std::string estimate_cells(const Estimate& e) {
  return num(e.value) + "," + num(e.ci_low) + "," + num(e.ci_high) + "," + std::to_string(e.successes) + "," +
         std::to_string(e.samples);
}

void positive(const std::vector<double>& v, const std::string& what) {
  need(!v.empty(), what + " must not be empty");
  for (double x : v) need(x > 0 && std::isfinite(x), what + " must be positive");
}

void mesh(double eta) { need(eta > 0 && eta <= 1, "--eta must lie in (0, 1]"); }

// Options shared by all commands.
struct Common {
  uint64_t seed = 1;
  std::string out;
  int threads = 0;
  bool check = false;
  bool plot = true;

  void add(Params& p, const std::string& command) {
    out = "out/" + command;
    p.add("seed", seed, "master seed");
    p.add("out", out, "output directory");
    p.add("threads", threads, "worker threads (0 = available cores)");
    p.flag("check", check, "exit with status 3 when an acceptance check fails");
    p.flag("plot", plot, "write SVG plots");
  }

  void validate() const {
    need(threads >= 0, "--threads must be nonnegative");
    need(!out.empty(), "--out must not be empty");
    if (threads > 0) set_default_threads(threads);
  }
};

// ---------------------------------------------------------------------------

struct ExponentsCmd {
  Common common;
  int64_t samples = 10000;
  std::vector<double> R = dyadic(8, 256);
  std::vector<double> alpha4_n = dyadic(8, 512);
  int64_t alpha4_samples = 10000;

  void add(Params& p) {
    common.add(p, "exponents");
    p.add("samples", samples, "replicas per arm profile");
    p.add("R", R, "one-arm radii in lattice units");
    p.add("alpha4-n", alpha4_n, "lattice radii of the alpha4 table");
    p.add("alpha4-samples", alpha4_samples, "replicas of the alpha4 table");
  }

  int run(const json& config) {
    common.validate();
    need(samples > 0 && alpha4_samples > 0, "sample counts must be positive");
    positive(R, "--R");
    positive(alpha4_n, "--alpha4-n");
    std::sort(R.begin(), R.end());
    Run out("exponents", common.out, common.seed, 1);
    struct Job {
      std::string name;
      ArmPattern pattern;
      double r;
      std::vector<double> R;
    };
    const std::vector<Job> jobs{{"one_arm", ArmPattern::monochromatic(1), 0, R},
                                {"four_arm", ArmPattern::alternating(4), 0, {16, 32, 64, 128, 256}},
                                {"three_arm_half_plane", ArmPattern::half_plane_alternating(3), 0, dyadic(4, 64)},
                                {"six_arm", ArmPattern::alternating(6), 2, dyadic(4, 32)}};
    std::string csv = arm_csv_header() + "\n";
    std::vector<ArmProfile> prof;
    for (size_t k = 0; k < jobs.size(); ++k) {
      prof.push_back(arm_profile(1.0, jobs[k].r, jobs[k].R, jobs[k].pattern, samples, out.rng(k + 1), 0));
      for (size_t i = 0; i < jobs[k].R.size(); ++i)
        csv += arm_csv_row(1.0, jobs[k].r, jobs[k].R[i], jobs[k].pattern, prof[k].estimates[i]) + "\n";
      out.fit(jobs[k].name, prof[k].fit);
      if (common.plot)
        out.write(jobs[k].name + ".svg",
                  render_loglog_svg(prof[k].fit, jobs[k].pattern.name() + " arm probability", "R (lattice units)",
                                    "probability"));
    }
    out.write("arms.csv", csv);
    const Alpha4Table a4 = estimate_alpha4(alpha4_n, alpha4_samples, out.rng(10), 0);
    std::string acsv = "n,value,ci_low,ci_high,successes,samples\n";
    for (size_t i = 0; i < a4.n.size(); ++i) acsv += num(a4.n[i]) + "," + estimate_cells(a4.estimates[i]) + "\n";
    out.write("alpha4.csv", acsv);
    out.write("alpha4.json", alpha4_to_json(a4));
    out.fit("alpha4", a4.fit);
    if (common.plot) out.write("alpha4.svg", render_loglog_svg(a4.fit, "alpha4(n)", "n", "probability"));

    const double e1 = prof[0].exponent(), e4 = prof[1].exponent(), e3 = prof[2].exponent(),
                 e6 = prof[3].exponent();
    out.check("one-arm exponent", std::abs(e1 - 5.0 / 48) <= 0.03, within(e1, 5.0 / 48, 0.03));
    out.check("four-arm exponent", std::abs(e4 - 1.25) <= 0.15, within(e4, 1.25, 0.15) + ", R/8 in {2..32}");
    out.check("half-plane three-arm exponent", std::abs(e3 - 2) <= 0.25, within(e3, 2, 0.25));
    out.check("six-arm exponent", e6 >= 2, fixed("%.4f", e6) + " (target >= 2), r = 2");
    return out.finish(config, common.check);
  }
};

struct DynamicsCmd {
  Common common;
  double eta = 1.0 / 64;
  double T = 1;
  std::string alpha4 = "out/exponents/alpha4.json";
  std::vector<double> R{2, 4, 8};
  double exc_eta = 0.5;
  int64_t samples = 20;

  void add(Params& p) {
    common.add(p, "dynamics");
    p.add("eta", eta, "mesh of the trajectory on the unit square");
    p.add("T", T, "time horizon");
    p.add("alpha4", alpha4, "alpha4 table written by `nearcrit exponents`");
    p.add("R", R, "radii of the exceptional-time moments");
    p.add("exc-eta", exc_eta, "mesh of the exceptional-time moments");
    p.add("samples", samples, "replicas of the exceptional-time moments");
  }

  int run(const json& config) {
    common.validate();
    mesh(eta);
    need(exc_eta > 0 && exc_eta < 1, "--exc-eta must lie in (0, 1)");
    need(T > 0, "--T must be positive");
    need(samples > 0, "--samples must be positive");
    positive(R, "--R");
    for (double r : R) need(r > 1, "--R must exceed 1");
    Run out("dynamics", common.out, common.seed, 2);
    const Alpha4Table a4 = load_alpha4(alpha4, out);
    const GridPtr g = build_grid({0, 0, 1, 1}, eta);
    const RateSpec rate = RateSpec::make(eta, a4.at(eta));
    const Trajectory tr = run_dynamical(sample_critical(g, out.rng(1)), T, rate, out.rng(2));
    std::ostringstream bin;
    write_trajectory(bin, tr);
    out.write("trajectory.bin", bin.str());
    out.write("crossings.csv", crossing_csv(tr, {Quad::rectangle({0, 0, 1, 1}, true),
                                                  Quad::rectangle({0, 0, 1, 1}, false)}));
    out.manifest()["trajectory"] = {{"rate", rate.rate}, {"events", tr.events().size()}, {"flips", tr.flips()}};
    const ExceptionalMoments m = exceptional_moments(exc_eta, a4.at(exc_eta), R, samples, out.rng(3), 0);
    std::string csv = "R,first,first_se,second,second_se,ratio,one_arm\n";
    const auto ratio = m.ratio();
    for (size_t i = 0; i < m.R.size(); ++i)
      csv += num(m.R[i]) + "," + num(m.first[i].mean) + "," + num(m.first[i].se) + "," + num(m.second[i].mean) + "," +
             num(m.second[i].se) + "," + num(ratio[i]) + "," + num(m.one_arm[i].value) + "\n";
    out.write("exceptional.csv", csv);
    for (size_t i = 0; i < m.R.size(); ++i)
      out.note("exceptional times: R = " + num(m.R[i]) + ", E[X^2]/E[X]^2 = " + fixed("%.3f", ratio[i]));
    if (common.plot) out.write("final.svg", render_config_svg(tr.config_at(tr.end()), ConfigStyle{}));
    return out.finish(config, common.check);
  }
};

struct NearcriticalCmd {
  Common common;
  double eta = 1.0 / 64;
  std::vector<double> lambda{0.5, 1, 2, 4};
  int64_t samples = 400;
  std::string alpha4 = "out/exponents/alpha4.json";
  double threshold = 0.01;
  double r_max = 20;
  std::vector<double> u{1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2};
  double bias_lambda = 1;
  std::vector<double> eps{1.0 / 4, 1.0 / 8, 1.0 / 16};
  int64_t pivotal_samples = 10;

  void add(Params& p) {
    common.add(p, "nearcritical");
    p.add("eta", eta, "mesh");
    p.add("lambda", lambda, "near-critical parameters");
    p.add("samples", samples, "replicas for crossings, correlation length and bias");
    p.add("alpha4", alpha4, "alpha4 table written by `nearcrit exponents`");
    p.add("threshold", threshold, "crossing defect defining the correlation length");
    p.add("r-max", r_max, "largest scale searched for the correlation length");
    p.add("u", u, "square sides of the crossing bias");
    p.add("bias-lambda", bias_lambda, "parameter of the crossing bias");
    p.add("eps", eps, "pivotal-measure cell sides");
    p.add("pivotal-samples", pivotal_samples, "replicas of the pivotal first moment (0 skips it)");
  }

  int run(const json& config) {
    common.validate();
    mesh(eta);
    need(samples > 0 && pivotal_samples >= 0, "sample counts must be positive");
    positive(lambda, "--lambda");
    positive(u, "--u");
    positive(eps, "--eps");
    need(threshold > 0 && threshold < 1, "--threshold must lie in (0, 1)");
    need(r_max > 2 * eta, "--r-max must exceed 2 eta");
    Run out("nearcritical", common.out, common.seed, 3);
    const Alpha4Table a4 = load_alpha4(alpha4, out);
    const double a = a4.at(eta);
    const double rate = eta * eta / a;

    const std::vector<double> thr = crossing_thresholds(eta, Quad::rectangle({0, 0, 1, 1}), samples, out.rng(1), 0);
    auto fraction = [&](double p) {
      return binomial_estimate(std::count_if(thr.begin(), thr.end(), [&](double v) { return v <= p; }), samples);
    };
    std::string csv = "lambda,p,value,ci_low,ci_high,successes,samples\n";
    std::vector<double> ls{0};
    ls.insert(ls.end(), lambda.begin(), lambda.end());
    for (double l : ls) {
      const double p = nearcritical_p(l, rate);
      csv += num(l) + "," + num(p) + "," + estimate_cells(fraction(p)) + "\n";
    }
    out.write("crossing.csv", csv);
    const Estimate crit = fraction(0.5);
    out.check("critical square crossing", std::abs(crit.value - 0.5) <= 0.02, within(crit.value, 0.5, 0.02));

    const CorrelationReport c =
        correlation_length(lambda, eta, a, threshold, 2 * eta, r_max, samples, out.rng(2), 0);
    csv = "lambda,L,censored\n";
    bool censored = false;
    for (const auto& l : c.lengths) {
      csv += num(l.lambda) + "," + num(l.L) + "," + (l.censored ? "1" : "0") + "\n";
      censored = censored || l.censored;
    }
    out.write("correlation.csv", csv);
    out.fit("correlation_length", c.fit);
    out.check("correlation-length exponent", !censored && std::abs(c.fit.slope + 4.0 / 3) <= 0.2,
              within(c.fit.slope, -4.0 / 3, 0.2) + (censored ? ", censored" : ""));

    const SquareBias b = square_bias(eta, a, bias_lambda, u, samples, out.rng(3), 0);
    csv = "u,bias,se\n";
    for (size_t i = 0; i < b.u.size(); ++i) csv += num(b.u[i]) + "," + num(b.bias[i].mean) + "," + num(b.bias[i].se) + "\n";
    out.write("bias.csv", csv);
    out.fit("square_bias", b.fit);
    out.check("near-critical square bias", std::abs(b.fit.slope - 0.75) <= 0.2 && b.coefficient() > 0,
              within(b.fit.slope, 0.75, 0.2) + ", coefficient " + fixed("%.4f", b.coefficient()));

    if (pivotal_samples > 0) {
      const PivotalMoments m = pivotal_first_moment(eta, a, eps, pivotal_samples, out.rng(4), 0);
      csv = "eps,mean,se\n";
      for (size_t i = 0; i < m.scale.size(); ++i)
        csv += num(m.scale[i]) + "," + num(m.moment[i].mean) + "," + num(m.moment[i].se) + "\n";
      out.write("pivotal.csv", csv);
      out.fit("pivotal_first_moment", m.fit);
      out.check("pivotal first moment", std::abs(m.fit.slope + 1.25) <= 0.2, within(m.fit.slope, -1.25, 0.2));
      if (common.plot) out.write("pivotal.svg", render_loglog_svg(m.fit, "E[mu(unit square)]", "eps", "mean mass"));
    }
    if (common.plot) {
      out.write("correlation.svg", render_loglog_svg(c.fit, "correlation length", "lambda", "L"));
      out.write("bias.svg", render_loglog_svg(b.fit, "crossing bias", "u", "bias"));
    }
    return out.finish(config, common.check);
  }
};

struct StabilityCmd {
  Common common;
  double eta = 1.0 / 128;
  std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  double T = 1;
  int k = 3;
  int64_t samples = 100;
  int64_t budget = 16;
  std::string alpha4 = "out/exponents/alpha4.json";

  void add(Params& p) {
    common.add(p, "stability");
    p.add("eta", eta, "mesh");
    p.add("eps", eps, "cut-off scales");
    p.add("T", T, "time horizon");
    p.add("k", k, "quad family level");
    p.add("samples", samples, "trajectory pairs per eps");
    p.add("budget", budget, "largest quad family size");
    p.add("alpha4", alpha4, "alpha4 table written by `nearcrit exponents`");
  }

  int run(const json& config) {
    common.validate();
    mesh(eta);
    positive(eps, "--eps");
    need(T > 0 && k >= 0 && samples > 0 && budget > 0, "--T, --samples and --budget must be positive, --k nonnegative");
    Run out("stability", common.out, common.seed, 4);
    const Alpha4Table a4 = load_alpha4(alpha4, out);
    const StabilityProfile s = stability_profile(eta, a4.at(eta), eps, T, k, samples, out.rng(1), 0, budget);
    std::string csv = "eps,disagreement,ci_low,ci_high,successes,samples,mean_important\n";
    for (const auto& pt : s.points)
      csv += num(pt.eps) + "," + estimate_cells(pt.disagreement) + "," + num(pt.mean_important) + "\n";
    out.write("stability.csv", csv);
    out.fit("disagreement", s.fit);
    const double rev = s.worst_reversal();
    out.note(std::string("monotone trend: ") + (rev <= 1.96 ? "yes" : "no") + " (worst reversal " +
             fixed("%.2f", rev) + " SE, " + std::to_string(s.quads) + " quads)");
    out.check("cut-off stability", rev <= 1.96 && std::abs(s.fit.slope - 0.75) <= 0.3,
              within(s.fit.slope, 0.75, 0.3) + ", worst reversal " + fixed("%.2f", rev) + " SE");
    if (common.plot) out.write("stability.svg", render_loglog_svg(s.fit, "cut-off disagreement", "eps", "frequency"));
    return out.finish(config, common.check);
  }
};

struct NoiseCmd {
  Common common;
  double eta = 1.0 / 64;
  std::vector<double> t{0, 0.5, 1, 2, 4, 8, 16};
  int64_t samples = 5000;
  double fit_from = 1;
  double fit_to = 16;
  std::string alpha4 = "out/exponents/alpha4.json";

  void add(Params& p) {
    common.add(p, "noise");
    p.add("eta", eta, "mesh");
    p.add("t", t, "time lags");
    p.add("samples", samples, "replica pairs per lag");
    p.add("fit-from", fit_from, "smallest lag of the fit");
    p.add("fit-to", fit_to, "largest lag of the fit");
    p.add("alpha4", alpha4, "alpha4 table written by `nearcrit exponents`");
  }

  int run(const json& config) {
    common.validate();
    mesh(eta);
    need(!t.empty() && samples > 1 && fit_from > 0 && fit_to >= fit_from, "invalid lags, samples or fit range");
    for (double x : t) need(x >= 0, "--t must be nonnegative");
    Run out("noise", common.out, common.seed, 5);
    const Alpha4Table a4 = load_alpha4(alpha4, out);
    const NoiseCurve c =
        noise_covariance(eta, a4.at(eta), Quad::rectangle({0, 0, 1, 1}), t, samples, out.rng(1), 0, fit_from, fit_to);
    std::string csv = "t,covariance,se\n";
    for (size_t i = 0; i < c.t.size(); ++i)
      csv += num(c.t[i]) + "," + num(c.covariance[i].mean) + "," + num(c.covariance[i].se) + "\n";
    out.write("noise.csv", csv);
    out.fit("covariance", c.fit);
    out.manifest()["crossing_probability"] = c.probability;
    out.check("noise-sensitivity decay", std::abs(-c.fit.slope - 2.0 / 3) <= 0.2, within(-c.fit.slope, 2.0 / 3, 0.2));
    if (common.plot) out.write("noise.svg", render_loglog_svg(c.fit, "crossing covariance", "t", "covariance"));
    return out.finish(config, common.check);
  }
};

struct GradientCmd {
  Common common;
  std::vector<double> n{64, 128, 256};
  int64_t samples = 100;
  double h = 0.25;

  void add(Params& p) {
    common.add(p, "gradient");
    p.add("n", n, "inverse meshes");
    p.add("samples", samples, "replicas per mesh");
    p.add("half-height", h, "half-height of the strip");
  }

  int run(const json& config) {
    common.validate();
    positive(n, "--n");
    need(samples > 0 && h > 0 && h <= 0.5, "--samples must be positive and --half-height in (0, 1/2]");
    Run out("gradient", common.out, common.seed, 6);
    const FrontWidth f = front_width(n, samples, out.rng(1), 0, h);
    std::string csv = "n,width,se\n";
    for (size_t i = 0; i < f.n.size(); ++i) csv += num(f.n[i]) + "," + num(f.width[i].mean) + "," + num(f.width[i].se) + "\n";
    out.write("front.csv", csv);
    out.fit("front_width", f.fit);
    out.check("gradient front width", std::abs(f.fit.slope - 4.0 / 7) <= 0.08, within(f.fit.slope, 4.0 / 7, 0.08));
    if (common.plot) {
      const double eta = 1.0 / *std::min_element(n.begin(), n.end());
      RateSpec rate;
      rate.eta = eta;
      rate.rate = 1;
      const SiteConfig c = gradient_config(build_grid({0, -h, 1, h}, eta), rate, out.rng(2));
      ConfigStyle style;
      std::vector<Point> line;
      for (int32_t s : front_hull(c)) line.push_back(c.grid().position(s));
      std::sort(line.begin(), line.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
      style.polylines.push_back(line);
      out.write("front.svg", render_config_svg(c, style));
      out.write("front_width.svg", render_loglog_svg(f.fit, "front width", "n", "width (lattice units)"));
    }
    return out.finish(config, common.check);
  }
};

struct NetworkCmd {
  Common common;
  double eta = 1.0 / 32;
  double r = 1.0 / 1024;
  int64_t samples = 200;
  int max_points = 5;
  int64_t trials = 32;

  void add(Params& p) {
    common.add(p, "network");
    p.add("eta", eta, "mesh");
    p.add("r", r, "dyadic network scale");
    p.add("samples", samples, "non-skipped instances");
    p.add("max-points", max_points, "largest number of marked points");
    p.add("trials", trials, "assignments per instance");
  }

  int run(const json& config) {
    common.validate();
    mesh(eta);
    need(is_dyadic(r), "--r must be a dyadic scale 2^-k");
    need(samples > 0 && trials > 0 && max_points >= 1 && max_points <= 16, "invalid sample, trial or point counts");
    Run out("network", common.out, common.seed, 7);
    const GridPtr g = build_grid({0, 0, 1, 1}, eta);
    const std::vector<Quad> quads{Quad::rectangle({0.1, 0.1, 0.9, 0.7}), Quad::rectangle({0.2, 0.1, 0.8, 0.9}, false),
                                  Quad({{0.1, 0.1}, {0.9, 0.1}, {0.9, 0.5}, {0.5, 0.5}, {0.5, 0.9}, {0.1, 0.9}},
                                       {0, 1, 3, 5})};
    Rng rng(out.rng(1));
    std::string csv = "instance,quad,points,boolean,trials,agree\n";
    int64_t instances = 0, exact = 0, boolean = 0, agree = 0, total = 0;
    for (uint64_t k = 0; instances < samples; ++k) {
      need(k < static_cast<uint64_t>(samples) * 100, "too many instances skipped; decrease --r");
      const size_t qi = k % quads.size();
      const Quad& q = quads[qi];
      const SiteConfig c = sample_critical(g, out.rng(2).substream(k));
      const int want = 1 + static_cast<int>(rng.below(max_points));
      std::vector<Point> X;
      for (int tries = 0; static_cast<int>(X.size()) < want && tries < 100000; ++tries) {
        const Point p = g->position(static_cast<int32_t>(rng.below(g->size())));
        if (!q.contains(p) || q.boundary_distance(p) < 2 * eta) continue;
        bool ok = true;
        for (const Point& x : X) ok = ok && dist(x, p) > 2.5 * eta;
        if (ok) X.push_back(p);
      }
      need(static_cast<int>(X.size()) == want, "cannot place marked points; decrease --eta");
      const OracleReport rep = network_oracle_test(c, q, X, r, trials, out.rng(3).substream(k));
      if (rep.skipped) continue;
      if (instances == 0) {
        const Network net = extract_network(c, q, X, r);
        out.write("network.json", network_to_json(net));
        out.write("network.dot", network_to_dot(net));
      }
      csv += std::to_string(instances) + "," + std::to_string(qi) + "," + std::to_string(X.size()) + "," +
             (rep.boolean ? "1" : "0") + "," + std::to_string(rep.trials) + "," + std::to_string(rep.agree) + "\n";
      ++instances;
      exact += rep.agree == rep.trials;
      boolean += rep.boolean;
      agree += rep.agree;
      total += rep.trials;
    }
    out.write("network.csv", csv);
    out.note("oracle agreement: " + std::to_string(agree) + "/" + std::to_string(total) + " assignments (" +
             fixed("%.4f", static_cast<double>(agree) / total) + ")");
    out.check("network oracle equivalence", exact == instances && boolean == instances,
              std::to_string(exact) + "/" + std::to_string(instances) + " instances exact, " +
                  std::to_string(boolean) + " Boolean");
    return out.finish(config, common.check);
  }
};

struct DriftCmd {
  Common common;
  std::vector<double> lambda{2};
  double rate = 0.01;
  double L = 100;
  double t_max = 200;
  double step = 0;
  int grid = 16;
  int64_t samples = 400;

  void add(Params& p) {
    common.add(p, "drift");
    p.add("lambda", lambda, "near-critical parameter (first value used)");
    p.add("rate", rate, "near-critical rate");
    p.add("L", L, "box half-width in lattice units");
    p.add("t-max", t_max, "capacity horizon");
    p.add("step", step, "capacity step of the zipper (0 keeps every vertex)");
    p.add("grid", grid, "time grid points");
    p.add("samples", samples, "interfaces per ensemble");
  }

  int run(const json& config) {
    common.validate();
    need(!lambda.empty() && std::isfinite(lambda[0]), "--lambda must hold a finite value");
    need(rate > 0 && L > 1 && t_max > 0 && step >= 0 && grid > 1 && samples > 1, "invalid drift parameters");
    Run out("drift", common.out, common.seed, 8);
    const DriftReport r = drift_conjecture_test(lambda[0], rate, L, t_max, step, grid, samples, out.rng(1), 0);
    std::string csv = "t,control_second,perturbed_second\n";
    for (size_t i = 0; i < r.control.t.size(); ++i)
      csv += num(r.control.t[i]) + "," + num(r.control.second[i]) + "," + num(r.perturbed.second[i]) + "\n";
    out.write("drift.csv", csv);
    auto ensemble = [](const DriftEnsemble& e) {
      return json{{"lambda", e.lambda},         {"samples", e.samples},
                  {"censored", e.censored},     {"variance_slope", e.variance_slope},
                  {"drift", e.drift},           {"drift_se", e.drift_se},
                  {"mean_W", e.mean_W},         {"mean_A", e.mean_A},
                  {"quadratic_variation", e.quadratic_variation},
                  {"excess_kurtosis", e.excess_kurtosis}, {"refinement", e.refinement}};
    };
    out.manifest()["ensembles"] = {{"control", ensemble(r.control)}, {"perturbed", ensemble(r.perturbed)}};
    out.manifest()["c_hat"] = r.c_hat;
    const bool zero = std::abs(r.control.drift) <= 1.96 * r.control.drift_se;
    out.note(std::string("control (lambda = 0): drift ") + fixed("%.4g", r.control.drift) + " +- " +
             fixed("%.2g", r.control.drift_se) + (zero ? ", drift ~ 0" : ", drift differs from 0"));
    out.note("perturbed: drift " + fixed("%.4g", r.perturbed.drift) + " +- " + fixed("%.2g", r.perturbed.drift_se) +
             ", c_hat " + fixed("%.4g", r.c_hat) + " (diagnostic only)");
    const bool ids = ExponentPair{3, 4, 4}.quadratic_identity() && ExponentPair{3, 4, 4}.linear_identity() &&
                     ExponentPair{7, 0, 4}.quadratic_identity() && ExponentPair{7, 0, 4}.linear_identity();
    out.check("Loewner variance slope", std::abs(r.control.variance_slope - 6) <= 0.9 && ids,
              within(r.control.variance_slope, 6, 0.9) + ", exponent-pair identities " + (ids ? "exact" : "violated"));
    return out.finish(config, common.check);
  }
};

struct RenderCmd {
  Common common;
  std::string input;
  double time = -1;
  double eta = 1.0 / 32;
  double pivotal = 0;
  bool witness = false;
  bool front = false;
  double width = 800;

  void add(Params& p) {
    common.add(p, "render");
    p.add("input", input, "configuration (.json or binary) or trajectory file; empty samples one");
    p.add("time", time, "trajectory time (negative = end)");
    p.add("eta", eta, "mesh of the sampled configuration when no input is given");
    p.add("pivotal", pivotal, "mark eps-important points at this eps (0 = none)");
    p.flag("witness", witness, "outline one open cluster crossing the domain");
    p.flag("front", front, "draw the front hull");
    p.add("width", width, "image width in pixels");
  }

  SiteConfig load() const {
    std::ifstream in(input, std::ios::binary);
    need(in.good(), "cannot read " + input);
    std::string head(4, '\0');
    in.read(head.data(), 4);
    in.seekg(0);
    if (head == "NCCF") return read_config(in);
    if (head == "NCTR") {
      const Trajectory tr = read_trajectory(in);
      return tr.config_at(time < 0 ? tr.end() : time);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
  }

  int run(const json& config) {
    common.validate();
    need(width > 0 && pivotal >= 0, "--width must be positive and --pivotal nonnegative");
    Run out("render", common.out, common.seed, 9);
    SiteConfig c;
    if (input.empty()) {
      mesh(eta);
      c = sample_critical(build_grid({0, 0, 1, 1}, eta), out.rng(1));
    } else {
      c = load();
    }
    ConfigStyle style;
    style.width = width;
    if (pivotal > 0) style.pivotal = epsilon_important(c, pivotal).sites;
    if (witness) {
      const Rect d = c.grid().domain();
      style.highlight = CrossingEvaluator(c.grid_ptr(), Quad::rectangle(d)).witness(c);
      out.note(style.highlight.empty() ? "no open crossing" : "crossing witness with " +
                                                                  std::to_string(style.highlight.size()) + " sites");
    }
    if (front) {
      std::vector<Point> line;
      for (int32_t s : front_hull(c)) line.push_back(c.grid().position(s));
      std::sort(line.begin(), line.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
      style.polylines.push_back(line);
    }
    out.write("config.svg", render_config_svg(c, style));
    return out.finish(config, common.check);
  }
};

struct SelftestCmd {
  Common common;

  void add(Params& p) { common.add(p, "selftest"); }

  int run(const json& config) {
    common.validate();
    Run out("selftest", common.out, common.seed, 10);
    const GridPtr g = build_grid({0, 0, 1, 1}, 1.0 / 16);
    const Quad square = Quad::rectangle({0, 0, 1, 1});
    int64_t bad = 0;
    for (uint64_t k = 0; k < 500; ++k) {
      const SiteConfig c = sample_critical(g, out.rng(1).substream(k));
      bad += crosses(c, square) == dual_crosses(c, square);
    }
    out.check("crossing duality", bad == 0, std::to_string(500 - bad) + "/500 configurations");

    const Estimate e = crossing_probability(1.0 / 32, square, 0.5, 4000, out.rng(2), 0);
    out.check("square crossing symmetry", std::abs(e.value - 0.5) <= 0.03, within(e.value, 0.5, 0.03));

    const MonotoneLabels labels = sample_labels(g, out.rng(3));
    const RateSpec rate = RateSpec::make(1.0 / 16, 1.0 / 64);
    const Trajectory path = run_nearcritical(labels, -8, 8, rate);
    bad = 0;
    for (double l : {-4.0, 0.0, 1.5, 6.0}) {
      const SiteConfig a = path.config_at(l), b = threshold(labels, nearcritical_p(l, rate.rate));
      for (int32_t s = 0; s < g->size(); ++s) bad += a.open(s) != b.open(s);
    }
    out.check("near-critical slices", bad == 0, std::to_string(bad) + " mismatched sites");

    const Trajectory tr = run_dynamical(sample_critical(g, out.rng(4)), 1.0, rate, out.rng(5));
    std::stringstream ss;
    write_trajectory(ss, tr);
    const Trajectory back = read_trajectory(ss);
    bool same = back.events().size() == tr.events().size();
    for (size_t i = 0; same && i < tr.events().size(); ++i)
      same = back.events()[i].time == tr.events()[i].time && back.events()[i].site == tr.events()[i].site;
    out.check("trajectory round trip", same, std::to_string(tr.events().size()) + " events");

    int64_t exact = 0, tried = 0;
    Rng rng(out.rng(6));
    const Quad q = Quad::rectangle({0.1, 0.1, 0.9, 0.9});
    for (uint64_t k = 0; tried < 40; ++k) {
      const SiteConfig c = sample_critical(g, out.rng(7).substream(k));
      std::vector<Point> X;
      while (X.size() < 2) {
        const Point p = g->position(static_cast<int32_t>(rng.below(g->size())));
        if (q.contains(p) && q.boundary_distance(p) >= 2.0 / 16 && (X.empty() || dist(X[0], p) > 2.5 / 16))
          X.push_back(p);
      }
      const OracleReport rep = network_oracle_test(c, q, X, 1.0 / 1024, 8, out.rng(8).substream(k));
      if (rep.skipped) continue;
      ++tried;
      exact += rep.agree == rep.trials && rep.boolean;
    }
    out.check("network oracle", exact == tried, std::to_string(exact) + "/" + std::to_string(tried) + " instances");

    AtomicMeasure mu;
    mu.atoms = {{0.3, 0.3}, {0.7, 0.6}};
    mu.weights = {0.4, 0.6};
    const PPPCoupling cp = couple_ppp(mu, mu, 20.0, 1e-30, out.rng(9));
    out.check("PPP self-coupling", cp.success && cp.first_counts == cp.second_counts,
              std::to_string(cp.first.size()) + " points");
    const int code = out.finish(config, true);
    return code;
  }
};

template <class Cmd>
struct Registered {
  Cmd cmd;
  CLI::App* app = nullptr;
  std::unique_ptr<Params> params;

  void attach(CLI::App& root, const std::string& name, const std::string& help) {
    app = root.add_subcommand(name, help);
    params = std::make_unique<Params>(app, name);
    cmd.add(*params);
  }

  bool chosen() const { return app->parsed(); }

  int run() {
    params->apply_config();
    return cmd.run(params->resolved());
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App root{"Monte Carlo experiments on near-critical and dynamical percolation"};
  root.set_version_flag("--version", NEARCRIT_VERSION);
  root.require_subcommand(1);
  Registered<ExponentsCmd> exponents;
  Registered<DynamicsCmd> dynamics;
  Registered<NearcriticalCmd> nearcritical;
  Registered<StabilityCmd> stability;
  Registered<NoiseCmd> noise;
  Registered<GradientCmd> gradient;
  Registered<NetworkCmd> network;
  Registered<DriftCmd> drift;
  Registered<RenderCmd> render;
  Registered<SelftestCmd> selftest;
  exponents.attach(root, "exponents", "arm exponents and the alpha4 table");
  dynamics.attach(root, "dynamics", "dynamical trajectory and exceptional-time moments");
  nearcritical.attach(root, "nearcritical", "crossings, correlation length, bias and pivotal mass");
  stability.attach(root, "stability", "cut-off dynamics disagreement against eps");
  noise.attach(root, "noise", "crossing covariance decay under the dynamics");
  gradient.attach(root, "gradient", "gradient percolation front width");
  network.attach(root, "network", "network evaluation against direct crossings");
  drift.attach(root, "drift", "Loewner driving-function diagnostics");
  render.attach(root, "render", "SVG of a configuration");
  selftest.attach(root, "selftest", "fast internal consistency checks");
  try {
    root.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = root.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  try {
    if (exponents.chosen()) return exponents.run();
    if (dynamics.chosen()) return dynamics.run();
    if (nearcritical.chosen()) return nearcritical.run();
    if (stability.chosen()) return stability.run();
    if (noise.chosen()) return noise.run();
    if (gradient.chosen()) return gradient.run();
    if (network.chosen()) return network.run();
    if (drift.chosen()) return drift.run();
    if (render.chosen()) return render.run();
    if (selftest.chosen()) return selftest.run();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsageError;
}
