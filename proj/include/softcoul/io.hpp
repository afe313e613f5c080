#pragma once

// CSV emission, sweep-list parsing, and JSON loading of trajectories and
// propagation runs. All quantities are atomic units.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "softcoul/error.hpp"
#include "softcoul/potentials.hpp"
#include "softcoul/propagator.hpp"

namespace softcoul::io {

using json = nlohmann::json;

/// Fixed 17 significant digits, independent of locale.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

using Cell = std::variant<double, long long, std::string>;

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> header) : os_(os), width_(header.size()) {
    write_line(header);
  }

  void row(const std::vector<Cell>& cells) {
    if (cells.size() != width_) throw Error("CsvWriter: row width does not match header");
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (const Cell& c : cells) {
      if (auto d = std::get_if<double>(&c))
        text.push_back(format_double(*d));
      else if (auto i = std::get_if<long long>(&c))
        text.push_back(std::to_string(*i));
      else
        text.push_back(std::get<std::string>(c));
    }
    write_line(text);
  }

 private:
  void write_line(const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os_ << (i ? "," : "") << v[i];
    os_ << '\n';
  }

  std::ostream& os_;
  std::size_t width_;
};

// ---------------------------------------------------------------------------
// Sweep lists: "0.1,0.5,1" or "a:b:linN" / "a:b:logN" (N points, inclusive).

inline double parse_number(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto* b = s.data();
  const auto* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e || b == e)
    throw ConfigError(what + ": not a number: '" + std::string(s) + "'", what);
  return v;
}

inline std::vector<double> parse_sweep(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ConfigError(what + ": range must be a:b:linN or a:b:logN", what);
    const double a = parse_number(parts[0], what), b = parse_number(parts[1], what);
    const std::string& mode = parts[2];
    const bool log = mode.rfind("log", 0) == 0;
    if (!log && mode.rfind("lin", 0) != 0)
      throw ConfigError(what + ": range spacing must be lin or log", what);
    const double nd = parse_number(std::string_view(mode).substr(3), what);
    const long n = std::lround(nd);
    if (n < 1 || double(n) != nd) throw ConfigError(what + ": point count must be a positive integer", what);
    if (log && !(a > 0.0 && b > 0.0)) throw ConfigError(what + ": log range needs positive ends", what);
    for (long i = 0; i < n; ++i) {
      const double f = n == 1 ? 0.0 : double(i) / double(n - 1);
      out.push_back(log ? std::exp(std::log(a) + f * (std::log(b) - std::log(a))) : a + f * (b - a));
    }
    if (n > 1) out.back() = b;
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(parse_number(p, what));
  }
  if (out.empty()) throw ConfigError(what + ": empty list", what);
  for (double v : out)
    if (!std::isfinite(v)) throw ConfigError(what + ": non-finite value", what);
  return out;
}

// ---------------------------------------------------------------------------
// JSON inputs

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string(), path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what(), path.string());
  }
}

/// [{"t": number, "r": [x, y, z]}, ...] with strictly increasing t.
inline NucleusTrajectory trajectory_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": trajectory must be a non-empty array", where);
  std::vector<NucleusTrajectory::Knot> knots;
  for (const auto& k : j) {
    if (!k.is_object() || !k.contains("t") || !k.contains("r") || !k["t"].is_number() ||
        !k["r"].is_array() || k["r"].size() != 3)
      throw ConfigError(where + ": each knot needs \"t\" and a 3-vector \"r\"", where);
    Vec3 r{};
    for (int i = 0; i < 3; ++i) {
      if (!k["r"][i].is_number()) throw ConfigError(where + ": non-numeric position", where);
      r[i] = k["r"][i].get<double>();
    }
    knots.push_back({k["t"].get<double>(), r});
  }
  try {
    return NucleusTrajectory(std::move(knots));
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what(), where);
  }
}

inline NucleusTrajectory load_trajectory(const std::filesystem::path& path) {
  return trajectory_from_json(read_json_file(path), path.string());
}

enum class InitialState { HydrogenTrue, HydrogenExp, Relaxed };

struct RunConfig {
  propagator::PropagationConfig propagation;
  InitialState initial = InitialState::Relaxed;
  std::filesystem::path trajectory_file;  // empty: stationary nucleus at the origin
  json raw;
};

namespace detail {

inline double number_field(const json& j, const char* key, const std::string& where) {
  if (!j[key].is_number()) throw ConfigError(std::string(key) + " must be a number", where + ":" + key);
  return j[key].get<double>();
}

inline int int_field(const json& j, const char* key, const std::string& where) {
  if (!j[key].is_number_integer())
    throw ConfigError(std::string(key) + " must be an integer", where + ":" + key);
  return j[key].get<int>();
}

}  // namespace detail

/// Run configuration
///   {grid: {n, box}, dt, t_final, C, dyson_order, trajectory_file,
///    diagnostics_stride, [scheme, quadrature_nodes, quadrature_panel,
///    initial_state, Z, truncation_ceiling]}
/// C may be null (V_P off). trajectory_file is relative to the config file.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string where = path.string();
  const json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError("run config must be a JSON object", where);
  static const std::set<std::string> known = {
      "grid", "dt", "t_final", "C", "dyson_order", "trajectory_file", "diagnostics_stride",
      "scheme", "quadrature_nodes", "quadrature_panel", "initial_state", "Z", "truncation_ceiling"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown field '" + k + "'", where + ":" + k);

  RunConfig rc;
  rc.raw = j;
  auto& p = rc.propagation;
  for (const char* key : {"grid", "dt", "t_final"})
    if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'", where + ":" + key);

  const json& g = j["grid"];
  if (!g.is_object() || !g.contains("n") || !g.contains("box"))
    throw ConfigError("grid needs n and box", where + ":grid");
  const int n = detail::int_field(g, "n", where + ":grid");
  const double box = detail::number_field(g, "box", where + ":grid");
  if (n < 8 || !(box > 0.0)) throw ConfigError("grid needs n >= 8 and box > 0", where + ":grid");
  p.grid = propagator::Grid3D::cube(n, box);

  p.dt = detail::number_field(j, "dt", where);
  p.t_final = detail::number_field(j, "t_final", where);
  if (j.contains("C") && !j["C"].is_null()) p.C = detail::number_field(j, "C", where);
  if (j.contains("dyson_order")) p.dyson_order = detail::int_field(j, "dyson_order", where);
  else p.dyson_order = 0;
  if (j.contains("diagnostics_stride"))
    p.diagnostics_stride = detail::int_field(j, "diagnostics_stride", where);
  if (j.contains("quadrature_nodes")) p.quadrature_nodes = detail::int_field(j, "quadrature_nodes", where);
  if (j.contains("quadrature_panel")) p.quadrature_panel = detail::number_field(j, "quadrature_panel", where);
  if (j.contains("Z")) p.Z = detail::number_field(j, "Z", where);
  if (j.contains("truncation_ceiling"))
    p.truncation_ceiling = detail::number_field(j, "truncation_ceiling", where);
  if (j.contains("scheme")) {
    const auto s = j["scheme"].is_string() ? j["scheme"].get<std::string>() : "";
    if (s == "strang") p.scheme = propagator::Scheme::Strang;
    else if (s == "crank_nicolson") p.scheme = propagator::Scheme::CrankNicolson;
    else throw ConfigError("scheme must be \"strang\" or \"crank_nicolson\"", where + ":scheme");
  }
  if (j.contains("initial_state")) {
    const auto s = j["initial_state"].is_string() ? j["initial_state"].get<std::string>() : "";
    if (s == "hydrogen_true") rc.initial = InitialState::HydrogenTrue;
    else if (s == "hydrogen_exp") rc.initial = InitialState::HydrogenExp;
    else if (s == "relaxed") rc.initial = InitialState::Relaxed;
    else
      throw ConfigError("initial_state must be hydrogen_true, hydrogen_exp or relaxed",
                        where + ":initial_state");
  }
  if (j.contains("trajectory_file") && !j["trajectory_file"].is_null()) {
    if (!j["trajectory_file"].is_string())
      throw ConfigError("trajectory_file must be a string", where + ":trajectory_file");
    std::filesystem::path tf = j["trajectory_file"].get<std::string>();
    if (tf.is_relative()) tf = path.parent_path() / tf;
    if (!std::filesystem::exists(tf)) throw ConfigError("trajectory file not found: " + tf.string(), tf.string());
    rc.trajectory_file = tf;
    p.trajectory = load_trajectory(tf);
  }
  p.validate();
  if (p.C && !p.trajectory.is_stationary() &&
      !(p.trajectory.covers(0.0) && p.trajectory.covers(p.t_final)))
    throw ConfigError("trajectory does not span [0, t_final]", rc.trajectory_file.string());
  return rc;
}

}  // namespace softcoul::io
