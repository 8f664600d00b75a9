#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "probcert/analytic.hpp"
#include "probcert/certifier.hpp"
#include "probcert/errors.hpp"
#include "probcert/network.hpp"
#include "probcert/radius_search.hpp"
#include "probcert/sampler.hpp"

namespace probcert::io {

using json = nlohmann::json;

inline constexpr const char* kModelFormatVersion = "1.0";
inline constexpr const char* kReportFormatVersion = "1.0";

#ifdef PROBCERT_VERSION
inline constexpr const char* kToolVersion = PROBCERT_VERSION;
#else
inline constexpr const char* kToolVersion = "0.1.0";
#endif

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

inline std::string digest_bytes(std::string_view bytes) {
  detail::Fnv1a h;
  h.bytes(bytes.data(), bytes.size());
  return h.hex();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": JSON parse error at byte " + std::to_string(e.byte) + ": " +
                          e.what(),
                      std::nullopt, e.byte);
  }
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw FormatError(what + " entry " + std::to_string(k) + " is not a number");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Model files

inline json model_to_json(const Network& net, json metadata = json::object()) {
  json layers = json::array();
  for (const Layer& layer : net.layers()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) row.push_back(layer.weights(r, c));
      rows.push_back(std::move(row));
    }
    layers.push_back({{"weights", std::move(rows)},
                      {"bias", vector_to_json(layer.bias)},
                      {"activation", std::string(to_string(layer.activation))}});
  }
  return {{"format_version", kModelFormatVersion},
          {"input_dim", net.input_dim()},
          {"output_dim", net.output_dim()},
          {"layers", std::move(layers)},
          {"metadata", std::move(metadata)}};
}

/// Builds a Network from the model schema. Every failure names the layer.
inline Network model_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("model must be a JSON object");
  if (!j.contains("format_version") || !j["format_version"].is_string())
    throw FormatError("model is missing string field format_version");
  if (j["format_version"].get<std::string>() != kModelFormatVersion)
    throw FormatError("unsupported model format_version " + j["format_version"].get<std::string>());
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw FormatError("model needs a non-empty layers array");

  const json& jl = j["layers"];
  std::vector<Layer> layers;
  layers.reserve(jl.size());
  for (std::size_t k = 0; k < jl.size(); ++k) {
    const json& entry = jl[k];
    const std::string where = "layer " + std::to_string(k) + ": ";
    auto fail = [&](const std::string& why) { return FormatError(where + why, k); };
    if (!entry.is_object()) throw fail("not an object");
    if (!entry.contains("weights") || !entry["weights"].is_array() || entry["weights"].empty())
      throw fail("weights must be a non-empty 2-D array");
    const json& rows = entry["weights"];
    const std::size_t cols = rows[0].is_array() ? rows[0].size() : 0;
    if (cols == 0) throw fail("weights rows must be non-empty arrays");
    Layer layer;
    layer.weights.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].is_array() || rows[r].size() != cols)
        throw fail("weights row " + std::to_string(r) + " has inconsistent length");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!rows[r][c].is_number())
          throw fail("weight (" + std::to_string(r) + ", " + std::to_string(c) + ") is not a number");
        layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            rows[r][c].get<double>();
      }
    }
    if (!entry.contains("bias")) throw fail("missing bias");
    try {
      layer.bias = vector_from_json(entry["bias"], "bias");
    } catch (const FormatError& e) {
      throw fail(e.what());
    }
    if (layer.bias.size() != layer.weights.rows())
      throw fail("bias length " + std::to_string(layer.bias.size()) + " does not match weight rows " +
                 std::to_string(layer.weights.rows()));
    if (!entry.contains("activation") || !entry["activation"].is_string())
      throw fail("missing activation name");
    const auto act = parse_activation(entry["activation"].get<std::string>());
    if (!act) throw fail("unknown activation '" + entry["activation"].get<std::string>() + "'");
    layer.activation = *act;
    if (k > 0 && layer.weights.cols() != layers.back().weights.rows())
      throw fail("input width " + std::to_string(layer.weights.cols()) +
                 " does not match previous output width " +
                 std::to_string(layers.back().weights.rows()));
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) throw fail("non-finite parameter");
    layers.push_back(std::move(layer));
  }
  if (layers.back().activation != Activation::identity)
    throw FormatError("layer " + std::to_string(layers.size() - 1) +
                          ": final activation must be identity",
                      layers.size() - 1);

  try {
    Network net(std::move(layers));
    if (j.contains("input_dim") && j["input_dim"] != net.input_dim())
      throw FormatError("input_dim does not match the first layer");
    if (j.contains("output_dim") && j["output_dim"] != net.output_dim())
      throw FormatError("output_dim does not match the last layer");
    return net;
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(e.what(), jl.size() - 1);
  }
}

inline Network load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return model_from_json(parse_json(text, path.string()));
}

inline void save_model(const std::filesystem::path& path, const Network& net,
                       json metadata = json::object()) {
  write_file(path, model_to_json(net, std::move(metadata)).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Run configuration

/// Everything needed to replay one certify / max-radius / estimate run.
/// For max-radius the ball radius is the search variable, so the noise must
/// be a uniform ball and its alpha is ignored.
struct RunConfig {
  std::string command;
  std::string model_path;
  Vector nominal;
  MarginSpec margin;
  NoiseSpec noise = BallNoise{};
  std::optional<BoxClamp> clamp;
  double epsilon = 0.01;
  double delta_confidence = 1e-5;
  SampleSeed seed;
  std::optional<std::size_t> n;
  double alpha_lo = 0.0;
  double alpha_hi = 0.0;
  double tolerance = 0.0;
  std::size_t max_iterations = 64;
  std::size_t samples = 48000;
  double confidence = 0.999;
};

inline json noise_to_json(const NoiseSpec& noise, bool with_alpha) {
  return std::visit(
      [&](const auto& spec) -> json {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, BallNoise>) {
          json j = {{"kind", "uniform_ball"}, {"p", std::string(to_string(spec.p))}};
          if (with_alpha) j["alpha"] = spec.alpha;
          return j;
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          return {{"kind", "gaussian"}, {"sigma", spec.sigma}};
        } else {
          json draws = json::array();
          for (const auto& d : spec.draws) draws.push_back(vector_to_json(d));
          return {{"kind", "empirical"}, {"draws", std::move(draws)}};
        }
      },
      noise);
}

inline NormOrder norm_from_json(const json& j) {
  std::string text;
  if (j.is_string())
    text = j.get<std::string>();
  else if (j.is_number_integer())
    text = std::to_string(j.get<long long>());
  else
    throw FormatError("norm order must be 1, 2 or \"inf\"");
  const auto p = parse_norm_order(text);
  if (!p) throw FormatError("unsupported norm order '" + text + "'; use 1, 2 or inf");
  return *p;
}

inline NoiseSpec noise_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw FormatError("noise needs a kind");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "uniform_ball")
    return BallNoise{j.contains("p") ? norm_from_json(j["p"]) : NormOrder::inf,
                     j.value("alpha", 0.0)};
  if (kind == "gaussian") return GaussianNoise{j.at("sigma").get<double>()};
  if (kind == "empirical") {
    EmpiricalNoise e;
    for (const auto& d : j.at("draws")) e.draws.push_back(vector_from_json(d, "empirical draw"));
    return e;
  }
  throw FormatError("unknown noise kind '" + kind + "'");
}

inline json seed_to_json(const SampleSeed& s) {
  return {{"root_seed", s.root_seed}, {"stream_id", s.stream_id}};
}

inline SampleSeed seed_from_json(const json& j) {
  return {j.at("root_seed").get<std::uint64_t>(), j.at("stream_id").get<std::uint64_t>()};
}

inline json to_json(const RunConfig& c) {
  json j = {{"command", c.command},
            {"model", c.model_path},
            {"input", vector_to_json(c.nominal)},
            {"true_class", c.margin.true_class},
            {"noise", noise_to_json(c.noise, c.command != "max-radius")},
            {"epsilon", c.epsilon},
            {"delta_confidence", c.delta_confidence},
            {"seed", seed_to_json(c.seed)}};
  if (c.margin.all_targets())
    j["target_class"] = "all";
  else
    j["target_class"] = c.margin.target_class();
  if (c.clamp) j["clamp"] = {c.clamp->lo, c.clamp->hi};
  if (c.command == "certify" && c.n) j["n"] = *c.n;
  if (c.command == "max-radius") {
    j["alpha_lo"] = c.alpha_lo;
    j["alpha_hi"] = c.alpha_hi;
    j["tolerance"] = c.tolerance;
    j["max_iterations"] = c.max_iterations;
  }
  if (c.command == "estimate") {
    j["samples"] = c.samples;
    j["confidence"] = c.confidence;
  }
  return j;
}

inline RunConfig run_config_from_json(const json& j) {
  try {
    RunConfig c;
    c.command = j.at("command").get<std::string>();
    c.model_path = j.at("model").get<std::string>();
    c.nominal = vector_from_json(j.at("input"), "input");
    c.margin.true_class = j.at("true_class").get<std::size_t>();
    const json& target = j.at("target_class");
    if (target.is_string() && target.get<std::string>() == "all")
      c.margin.target = AllTargets{};
    else
      c.margin.target = target.get<std::size_t>();
    c.noise = noise_from_json(j.at("noise"));
    if (j.contains("clamp")) c.clamp = BoxClamp{j["clamp"].at(0).get<double>(), j["clamp"].at(1).get<double>()};
    c.epsilon = j.at("epsilon").get<double>();
    c.delta_confidence = j.at("delta_confidence").get<double>();
    c.seed = seed_from_json(j.at("seed"));
    if (j.contains("n")) c.n = j["n"].get<std::size_t>();
    c.alpha_lo = j.value("alpha_lo", 0.0);
    c.alpha_hi = j.value("alpha_hi", 0.0);
    c.tolerance = j.value("tolerance", 0.0);
    c.max_iterations = j.value("max_iterations", std::size_t{64});
    c.samples = j.value("samples", std::size_t{48000});
    c.confidence = j.value("confidence", 0.999);
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed run config: ") + e.what());
  }
}

/// Range checks that need no model; run before anything is loaded.
inline void validate_scalars(const RunConfig& c) {
  if (c.command != "certify" && c.command != "max-radius" && c.command != "estimate")
    throw InvalidArgument("unknown command '" + c.command + "'");
  validate_probability_levels(c.epsilon, c.delta_confidence);
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, BallNoise>) {
          if (c.command != "max-radius" && (!(spec.alpha >= 0.0) || !std::isfinite(spec.alpha)))
            throw InvalidArgument("--alpha must be finite and >= 0");
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma))
            throw InvalidArgument("--sigma must be finite and > 0");
        } else {
          if (spec.draws.empty()) throw InvalidArgument("empirical noise list is empty");
        }
      },
      c.noise);
  if (c.clamp && !(c.clamp->lo < c.clamp->hi)) throw InvalidArgument("clamp requires lo < hi");
  if (!c.margin.all_targets() && c.margin.target_class() == c.margin.true_class)
    throw InvalidArgument("target class must differ from the true class");
  if (c.command == "certify" && c.n &&
      *c.n < required_sample_count(c.epsilon, c.delta_confidence))
    throw InvalidArgument("--n " + std::to_string(*c.n) + " is below the required " +
                          std::to_string(required_sample_count(c.epsilon, c.delta_confidence)));
  if (c.command == "max-radius") {
    if (!std::holds_alternative<BallNoise>(c.noise))
      throw InvalidArgument("max-radius requires uniform_ball noise");
    if (!(c.alpha_lo > 0.0) || !(c.alpha_lo < c.alpha_hi) || !std::isfinite(c.alpha_hi))
      throw InvalidArgument("radius interval must satisfy 0 < alpha-lo < alpha-hi");
    if (!(c.tolerance > 0.0 && c.tolerance < c.alpha_hi - c.alpha_lo))
      throw InvalidArgument("--tol must lie strictly inside (0, alpha-hi - alpha-lo)");
    if (c.max_iterations == 0) throw InvalidArgument("--max-iter must be positive");
  }
  if (c.command == "estimate") {
    if (c.samples == 0) throw InvalidArgument("--samples must be positive");
    if (!(c.confidence > 0.0 && c.confidence < 1.0))
      throw InvalidArgument("--confidence must lie strictly inside (0, 1)");
  }
}

/// Checks that need the model: input width and class indices.
inline void validate_against(const RunConfig& c, const Network& net) {
  if (c.nominal.size() != net.input_dim())
    throw DimensionError("input has length " + std::to_string(c.nominal.size()) +
                         ", model expects " + std::to_string(net.input_dim()));
  if (!c.nominal.allFinite()) throw NumericError("input has non-finite entries");
  validate(c.margin, net);
  if (const auto* e = std::get_if<EmpiricalNoise>(&c.noise))
    for (std::size_t k = 0; k < e->draws.size(); ++k)
      if (e->draws[k].size() != net.input_dim())
        throw DimensionError("empirical noise vector " + std::to_string(k) + " has wrong length");
}

inline NoiseModel noise_model(const RunConfig& c) { return {c.nominal, c.noise, c.clamp}; }

// ---------------------------------------------------------------------------
// Results

inline json to_json(const Certificate& cert) {
  return {{"sample_count", cert.sample_count},
          {"r_hat", cert.r_hat},
          {"certified", cert.certified},
          {"epsilon", cert.epsilon},
          {"delta_confidence", cert.delta_confidence},
          {"seed", seed_to_json(cert.seed)},
          {"noise_model_digest", cert.noise_model_digest},
          {"timestamp", cert.timestamp}};
}

inline json to_json(const RadiusSearchResult& r, double tolerance) {
  json trace = json::array();
  for (const auto& e : r.trace)
    trace.push_back({{"iteration", e.iteration}, {"alpha", e.alpha}, {"r_hat", e.r_hat}, {"N", e.sample_count}});
  return {{"status", std::string(to_string(r.status))},
          {"alpha", r.alpha ? json(*r.alpha) : json(nullptr)},
          {"final_interval", {r.final_lo, r.final_hi}},
          {"tolerance", tolerance},
          {"trace", std::move(trace)}};
}

inline json to_json(const EstimateResult& e) {
  return {{"samples", e.samples},
          {"successes", e.successes},
          {"point_estimate", e.point_estimate},
          {"lower_confidence_bound", e.lower_confidence_bound},
          {"confidence", e.confidence}};
}

/// Result object with volatile fields removed, for replay comparison.
inline json comparable_result(json result) {
  if (result.is_object()) result.erase("timestamp");
  return result;
}

}  // namespace probcert::io
