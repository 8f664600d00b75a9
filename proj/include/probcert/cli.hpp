#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "probcert/analytic.hpp"
#include "probcert/certifier.hpp"
#include "probcert/io.hpp"
#include "probcert/radius_search.hpp"

namespace probcert::cli {

using io::json;

/// Process exit codes.
enum ExitCode : int { kSuccess = 0, kNotCertified = 1, kUsageError = 2 };

struct CommandOutcome {
  int exit_code = kUsageError;
  std::optional<json> report;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Executed {
  json result;
  int exit_code = kSuccess;
  std::string summary;
};

/// Runs a validated configuration. Pure apart from the optional trace file.
inline Executed execute(const io::RunConfig& cfg, const Network& net, Parallelism par,
                        const std::optional<std::string>& trace_path = std::nullopt) {
  Executed ex;
  if (cfg.command == "certify") {
    const CertificationSpec spec{cfg.epsilon, cfg.delta_confidence, cfg.margin};
    const Certificate cert = certify(net, io::noise_model(cfg), spec, cfg.seed, cfg.n, par);
    ex.result = io::to_json(cert);
    ex.exit_code = cert.certified ? kSuccess : kNotCertified;
    ex.summary = std::string(cert.certified ? "CERTIFIED" : "NOT CERTIFIED") +
                 " r_hat=" + fmt_double(cert.r_hat) + " N=" + std::to_string(cert.sample_count) +
                 " eps=" + fmt_double(cert.epsilon) + " delta=" + fmt_double(cert.delta_confidence);
  } else if (cfg.command == "max-radius") {
    RadiusSearchSpec spec;
    spec.alpha_lo = cfg.alpha_lo;
    spec.alpha_hi = cfg.alpha_hi;
    spec.tolerance = cfg.tolerance;
    spec.max_iterations = cfg.max_iterations;
    spec.p = std::get<BallNoise>(cfg.noise).p;
    spec.cert = {cfg.epsilon, cfg.delta_confidence, cfg.margin};
    spec.clamp = cfg.clamp;
    const RadiusSearchResult r = max_radius(net, cfg.nominal, spec, cfg.seed, par);
    ex.result = io::to_json(r, cfg.tolerance);
    ex.exit_code = r.status == SearchStatus::certified ? kSuccess : kNotCertified;
    ex.summary = std::string(to_string(r.status)) +
                 (r.alpha ? " alpha=" + fmt_double(*r.alpha) : std::string()) +
                 " iterations=" + std::to_string(r.trace.size() - 1) + " p=" +
                 std::string(to_string(spec.p));
    if (trace_path) {
      std::ofstream csv(*trace_path);
      if (!csv) throw Error("cannot write " + *trace_path);
      write_trace_csv(csv, r.trace);
    }
  } else {
    const EstimateResult e = estimate_success_probability(
        net, io::noise_model(cfg), cfg.margin, cfg.samples, cfg.seed, par, cfg.confidence);
    ex.result = io::to_json(e);
    ex.result["meets_level"] = e.point_estimate >= 1.0 - cfg.epsilon;
    ex.exit_code = kSuccess;
    ex.summary = "estimate P(g>=0)=" + fmt_double(e.point_estimate) + " lower(" +
                 fmt_double(e.confidence) + ")=" + fmt_double(e.lower_confidence_bound) +
                 " m=" + std::to_string(e.samples);
  }
  return ex;
}

inline Vector parse_vector_text(const std::string& text, const std::string& what) {
  return io::vector_from_json(io::parse_json(text, what), what);
}

inline std::string model_path_for_report(const std::string& model,
                                         const std::optional<std::string>& out) {
  namespace fs = std::filesystem;
  if (!out) return model;
  const fs::path base = fs::absolute(fs::path(*out)).parent_path();
  return fs::absolute(fs::path(model)).lexically_normal().lexically_relative(base).generic_string();
}

inline std::filesystem::path resolve_model_path(const std::string& recorded,
                                                const std::filesystem::path& report_path) {
  const std::filesystem::path p(recorded);
  if (p.is_absolute()) return p;
  return std::filesystem::absolute(report_path).parent_path() / p;
}

/// Flags shared by certify, max-radius and estimate.
struct RunFlags {
  std::string model;
  std::optional<std::string> input_path;
  std::optional<std::string> input_inline;
  std::size_t true_class = 0;
  std::string target_class;
  std::string noise_kind = "uniform_ball";
  std::string p = "inf";
  std::optional<double> alpha;
  std::optional<double> sigma;
  std::optional<std::string> noise_file;
  std::optional<double> clamp_lo;
  std::optional<double> clamp_hi;
  double eps = 0.0;
  double delta = 1e-5;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n;
  std::optional<double> alpha_lo;
  std::optional<double> alpha_hi;
  std::optional<double> tol;
  std::size_t max_iter = 64;
  std::optional<std::string> trace;
  std::size_t samples = 48000;
  double confidence = 0.999;
  unsigned threads = 0;
  std::optional<std::string> out;
};

inline void add_run_flags(CLI::App* cmd, RunFlags& f, const std::string& name) {
  cmd->add_option("--model", f.model, "Model file (JSON)")->required();
  auto* in_path = cmd->add_option("--input", f.input_path, "Nominal input file (JSON array)");
  auto* in_inline = cmd->add_option("--input-inline", f.input_inline, "Nominal input as a JSON array");
  in_path->excludes(in_inline);
  cmd->add_option("--true-class", f.true_class, "True class index (0-based)")->required();
  cmd->add_option("--target-class", f.target_class, "Target class index (0-based) or 'all'")
      ->required();
  cmd->add_option("--noise", f.noise_kind, "uniform_ball | gaussian | empirical")
      ->check(CLI::IsMember({"uniform_ball", "gaussian", "empirical"}));
  cmd->add_option("--p", f.p, "Ball norm order: 1, 2 or inf")
      ->check(CLI::IsMember({"1", "2", "inf"}));
  if (name != "max-radius") cmd->add_option("--alpha", f.alpha, "Ball radius");
  cmd->add_option("--sigma", f.sigma, "Gaussian standard deviation");
  cmd->add_option("--noise-file", f.noise_file, "Empirical noise draws (JSON array of arrays)");
  cmd->add_option("--clamp-lo", f.clamp_lo, "Clamp perturbed inputs from below (changes the distribution)");
  cmd->add_option("--clamp-hi", f.clamp_hi, "Clamp perturbed inputs from above (changes the distribution)");
  cmd->add_option("--eps", f.eps, "Permissible misclassification probability")->required();
  cmd->add_option("--delta", f.delta, "Certificate failure probability")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Root seed")->required();
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "Report file to write");
  if (name == "certify") cmd->add_option("--n", f.n, "Sample count (>= required bound)");
  if (name == "max-radius") {
    cmd->add_option("--alpha-lo", f.alpha_lo, "Lower radius endpoint")->required();
    cmd->add_option("--alpha-hi", f.alpha_hi, "Upper radius endpoint")->required();
    cmd->add_option("--tol", f.tol, "Bisection tolerance on the radius")->required();
    cmd->add_option("--max-iter", f.max_iter, "Bisection iteration cap")->capture_default_str();
    cmd->add_option("--trace", f.trace, "Write the bisection trace as CSV");
  }
  if (name == "estimate") {
    cmd->add_option("--samples", f.samples, "Monte Carlo sample count")->capture_default_str();
    cmd->add_option("--confidence", f.confidence, "Clopper-Pearson confidence level")
        ->capture_default_str();
  }
}

inline io::RunConfig config_from_flags(const RunFlags& f, const std::string& command) {
  io::RunConfig c;
  c.command = command;
  c.model_path = model_path_for_report(f.model, f.out);
  if (f.input_inline)
    c.nominal = parse_vector_text(*f.input_inline, "--input-inline");
  else if (f.input_path)
    c.nominal = parse_vector_text(io::read_file(*f.input_path), *f.input_path);
  else
    throw InvalidArgument("one of --input or --input-inline is required");

  c.margin.true_class = f.true_class;
  if (f.target_class == "all") {
    c.margin.target = AllTargets{};
  } else {
    std::size_t pos = 0;
    unsigned long long k = 0;
    try {
      k = std::stoull(f.target_class, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != f.target_class.size())
      throw InvalidArgument("--target-class must be a class index or 'all'");
    c.margin.target = static_cast<std::size_t>(k);
  }

  if (f.noise_kind == "uniform_ball") {
    if (command != "max-radius" && !f.alpha) throw InvalidArgument("uniform_ball noise needs --alpha");
    c.noise = BallNoise{*parse_norm_order(f.p), f.alpha.value_or(0.0)};
  } else if (f.noise_kind == "gaussian") {
    if (!f.sigma) throw InvalidArgument("gaussian noise needs --sigma");
    c.noise = GaussianNoise{*f.sigma};
  } else {
    if (!f.noise_file) throw InvalidArgument("empirical noise needs --noise-file");
    const json draws = io::parse_json(io::read_file(*f.noise_file), *f.noise_file);
    EmpiricalNoise e;
    if (!draws.is_array()) throw FormatError(*f.noise_file + ": expected an array of arrays");
    for (const auto& d : draws) e.draws.push_back(io::vector_from_json(d, "empirical draw"));
    c.noise = std::move(e);
  }
  if (f.clamp_lo.has_value() != f.clamp_hi.has_value())
    throw InvalidArgument("--clamp-lo and --clamp-hi must be given together");
  if (f.clamp_lo) c.clamp = BoxClamp{*f.clamp_lo, *f.clamp_hi};

  c.epsilon = f.eps;
  c.delta_confidence = f.delta;
  c.seed = {f.seed, 0};
  c.n = f.n;
  c.alpha_lo = f.alpha_lo.value_or(0.0);
  c.alpha_hi = f.alpha_hi.value_or(0.0);
  c.tolerance = f.tol.value_or(0.0);
  c.max_iterations = f.max_iter;
  c.samples = f.samples;
  c.confidence = f.confidence;
  return c;
}

inline json make_report(const io::RunConfig& cfg, const std::string& model_digest,
                        const Executed& ex, double seconds) {
  const json config = io::to_json(cfg);
  return {{"report_format", io::kReportFormatVersion},
          {"tool", "probcert"},
          {"tool_version", io::kToolVersion},
          {"command", cfg.command},
          {"config", config},
          {"config_digest", io::digest_bytes(config.dump())},
          {"model_digest", model_digest},
          {"result", ex.result},
          {"timestamp", utc_timestamp()},
          {"duration_seconds", seconds}};
}

inline CommandOutcome run_pipeline(const RunFlags& f, const std::string& command, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const io::RunConfig cfg = config_from_flags(f, command);
  io::validate_scalars(cfg);

  const std::string model_bytes = io::read_file(f.model);
  const Network net = io::model_from_json(io::parse_json(model_bytes, f.model));
  io::validate_against(cfg, net);

  const Executed ex = execute(cfg, net, Parallelism{f.threads}, f.trace);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json report = make_report(cfg, io::digest_bytes(model_bytes), ex, seconds);
  if (f.out) io::write_file(*f.out, report.dump(1) + "\n");
  out << command << ": " << ex.summary << "\n";
  return {ex.exit_code, std::move(report)};
}

inline CommandOutcome run_replay(const std::string& report_path, unsigned threads, std::ostream& out,
                                 std::ostream& err) {
  const json report = io::parse_json(io::read_file(report_path), report_path);
  if (!report.is_object() || !report.contains("config") || !report.contains("result"))
    throw FormatError(report_path + ": not a report file");
  const io::RunConfig cfg = io::run_config_from_json(report["config"]);
  io::validate_scalars(cfg);

  const auto model_path = resolve_model_path(cfg.model_path, report_path);
  const std::string model_bytes = io::read_file(model_path);
  if (report.contains("model_digest") && report["model_digest"] != io::digest_bytes(model_bytes))
    throw Error("model file " + model_path.string() + " does not match the recorded digest");
  const Network net = io::model_from_json(io::parse_json(model_bytes, model_path.string()));
  io::validate_against(cfg, net);

  const Executed ex = execute(cfg, net, Parallelism{threads});
  const json expected = io::comparable_result(report["result"]);
  const json actual = io::comparable_result(ex.result);
  json replayed = report;
  replayed["result"] = ex.result;
  if (expected == actual) {
    out << "replay: identical (" << cfg.command << ": " << ex.summary << ")\n";
    return {kSuccess, std::move(replayed)};
  }
  err << "replay: results differ\n"
      << json::diff(expected, actual).dump(1) << "\n";
  return {kNotCertified, std::move(replayed)};
}

}  // namespace detail

/// Entry point shared by the probcert executable and the tests. `args`
/// excludes the program name.
///
/// Exit codes: 0 ran and certified (or completed), 1 ran and not certified,
/// 2 usage or validation error.
inline CommandOutcome run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                                  std::ostream& err = std::cerr) {
  CLI::App app{"Sample-based probabilistic robustness certification", "probcert"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kToolVersion);

  detail::RunFlags certify_flags, radius_flags, estimate_flags;
  auto* certify_cmd = app.add_subcommand("certify", "Certify P(margin >= 0) >= 1 - eps w.p. 1 - delta");
  detail::add_run_flags(certify_cmd, certify_flags, "certify");
  auto* radius_cmd = app.add_subcommand("max-radius", "Bisect for the largest certifiable ball radius");
  detail::add_run_flags(radius_cmd, radius_flags, "max-radius");
  auto* estimate_cmd = app.add_subcommand("estimate", "Monte Carlo estimate of P(margin >= 0)");
  detail::add_run_flags(estimate_cmd, estimate_flags, "estimate");

  Eigen::Index nx = 0, ny = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-linear", "Random linear classifier with U[0,1] entries");
  gen_cmd->add_option("--nx", nx, "Input dimension")->required();
  gen_cmd->add_option("--ny", ny, "Number of classes")->required();
  gen_cmd->add_option("--seed", gen_seed, "Root seed")->required();
  gen_cmd->add_option("--out", gen_out, "Model file to write")->required();

  std::string replay_report;
  unsigned replay_threads = 0;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a report and compare its results");
  replay_cmd->add_option("--report", replay_report, "Report file")->required();
  replay_cmd->add_option("--threads", replay_threads, "Worker threads (0 = all cores)");

  std::vector<const char*> argv{"probcert"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return {code == 0 ? kSuccess : kUsageError, std::nullopt};
  }

  try {
    if (certify_cmd->parsed()) return detail::run_pipeline(certify_flags, "certify", out);
    if (radius_cmd->parsed()) return detail::run_pipeline(radius_flags, "max-radius", out);
    if (estimate_cmd->parsed()) return detail::run_pipeline(estimate_flags, "estimate", out);
    if (gen_cmd->parsed()) {
      const Network net = generate_linear_classifier(nx, ny, {gen_seed, 0});
      io::save_model(gen_out, net,
                     {{"generator", "gen-linear"}, {"nx", nx}, {"ny", ny}, {"seed", gen_seed}});
      out << "gen-linear: wrote " << nx << "x" << ny << " linear classifier to " << gen_out << "\n";
      return {kSuccess, std::nullopt};
    }
    return detail::run_replay(replay_report, replay_threads, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return {kUsageError, std::nullopt};
  }
}

}  // namespace probcert::cli
