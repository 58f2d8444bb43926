#pragma once

// Run configs, CSV output and run manifests for the command-line driver.

#include "core.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace crlab::io {

inline constexpr const char* version = "0.1.0";

// Shortest round-trip representation, independent of the C locale.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  Csv& row(const std::vector<std::string>& cells) {
    require(cells.size() == header_.size(), "CSV row has the wrong number of cells");
    rows_.push_back(cells);
    return *this;
  }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string cell(double x) { return format_double(x); }
inline std::string cell(int x) { return std::to_string(x); }
inline std::string cell(long x) { return std::to_string(x); }
inline std::string cell(std::size_t x) { return std::to_string(x); }
inline std::string cell(const std::string& s) { return s; }

// Write to a sibling temporary, then rename over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(bool(f), "cannot open " + tmp.string() + " for writing");
    f << content;
    require(bool(f), "write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  require(bool(f), "cannot open config '" + path + "'", ErrorKind::usage);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::usage, "malformed JSON in '" + path + "': " + e.what());
  }
}

// ----------------------------------------------------------------- config

struct RunConfig {
  std::string command;
  nlohmann::json params = nlohmann::json::object();
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> N;
  nlohmann::json raw;
};

inline RunConfig parse_config(const nlohmann::json& j) {
  require(j.is_object(), "config must be a JSON object", ErrorKind::usage);
  for (const auto& [k, v] : j.items())
    require(k == "command" || k == "params" || k == "output_dir" || k == "seed" || k == "N",
            "unknown key '" + k + "' in config", ErrorKind::usage);
  RunConfig c;
  c.raw = j;
  require(j.contains("command") && j["command"].is_string(), "config needs a string 'command'", ErrorKind::usage);
  c.command = j["command"].get<std::string>();
  if (j.contains("params")) {
    require(j["params"].is_object(), "'params' must be an object", ErrorKind::usage);
    c.params = j["params"];
  }
  if (j.contains("output_dir")) {
    require(j["output_dir"].is_string(), "'output_dir' must be a string", ErrorKind::usage);
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("seed")) {
    require(j["seed"].is_number_unsigned(), "'seed' must be a non-negative integer", ErrorKind::usage);
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("N")) {
    require(j["N"].is_number_integer() && j["N"].get<int>() > 0, "'N' must be a positive integer",
            ErrorKind::usage);
    c.N = j["N"].get<int>();
  }
  return c;
}

// Rejects keys outside `allowed` in a params object.
inline void check_keys(const nlohmann::json& params, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& [k, v] : params.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    require(ok, "unknown key '" + k + "' in " + where, ErrorKind::usage);
  }
}

// CRLAB_SEED overrides the configured seed.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> configured, std::uint64_t fallback = 0) {
  if (const char* env = std::getenv("CRLAB_SEED"); env && *env) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    require(end && *end == '\0', "CRLAB_SEED must be a non-negative integer", ErrorKind::usage);
    return v;
  }
  return configured.value_or(fallback);
}

// --------------------------------------------------------------- manifest

class Manifest {
 public:
  Manifest(std::string command, std::filesystem::path dir)
      : command_(std::move(command)), dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {}

  void set_config(nlohmann::json c) { config_ = std::move(c); }
  void set_seed(std::uint64_t s) { seed_ = s; }

  const std::filesystem::path& dir() const { return dir_; }

  // Writes a data file and records it.
  void output(const std::string& name, const std::string& content) {
    write_atomic(dir_ / name, content);
    if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
  }

  void assertion(const std::string& name, bool pass, const nlohmann::json& detail = nullptr) {
    nlohmann::json a{{"name", name}, {"pass", pass}};
    if (!detail.is_null()) a["detail"] = detail;
    assertions_.push_back(a);
  }

  void set_result(nlohmann::json r) { result_ = std::move(r); }

  void finish(int exit_code, const std::string& reason = {}) {
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    nlohmann::json m{
        {"command", command_},
        {"config", config_},
        {"versions",
         {{"crlab", version},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
        {"outputs", outputs_},
        {"assertions", assertions_},
        {"status", exit_code == 0 ? "ok" : "failed"},
        {"exit_code", exit_code},
        {"timing", {{"wall_clock_s", wall}, {"timestamp", stamp}}}};
    if (seed_) m["seed"] = *seed_;
    if (!reason.empty()) m["reason"] = reason;
    if (!result_.is_null()) m["result"] = result_;
    write_atomic(dir_ / "manifest.json", dump(m));
  }

 private:
  std::string command_;
  std::filesystem::path dir_;
  std::chrono::steady_clock::time_point start_;
  nlohmann::json config_ = nullptr;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> outputs_;
  nlohmann::json assertions_ = nlohmann::json::array();
  nlohmann::json result_ = nullptr;
};

}  // namespace crlab::io
