#pragma once

// Sidecar configuration: `key = value` lines grouped in `[section]`s, `#`
// comments, whitespace-separated vectors. The `[schedule]` section holds
// comma-separated rows `t, channel, setpoint[, ramp]`.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amdyn/common.hpp"
#include "amdyn/control.hpp"
#include "amdyn/model.hpp"
#include "amdyn/quat.hpp"

namespace amdyn {

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct ScheduleEntry {
  double t = 0.0;
  std::string channel;
  double value = 0.0;
  bool ramp = false;  // reach `value` at `t` linearly from the previous setpoint
};

/// Piecewise-constant setpoints per channel.
class Schedule {
 public:
  void add(ScheduleEntry e) {
    auto& v = rows_[e.channel];
    v.push_back(std::move(e));
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  }

  /// Latest setpoint with timestamp ≤ t, or `fallback` before the first one. Inside a ramp
  /// segment the value is interpolated linearly.
  double value(const std::string& channel, double t, double fallback) const {
    return sample(channel, t, fallback).first;
  }

  /// Slope of the active ramp segment, zero elsewhere.
  double rate(const std::string& channel, double t) const { return sample(channel, t, 0.0).second; }

  bool has(const std::string& channel) const { return rows_.count(channel) > 0; }

  /// Rows of one channel in time order.
  const std::vector<ScheduleEntry>& rows(const std::string& channel) const {
    auto it = rows_.find(channel);
    if (it == rows_.end()) throw LookupError("no schedule channel '" + channel + "'");
    return it->second;
  }

  std::pair<double, double> sample(const std::string& channel, double t, double fallback) const {
    auto it = rows_.find(channel);
    if (it == rows_.end()) return {fallback, 0.0};
    double v = fallback, t_prev = 0.0;
    for (const auto& e : it->second) {
      if (e.t > t + 1e-12) {
        if (e.ramp && e.t > t_prev) {
          const double slope = (e.value - v) / (e.t - t_prev);
          return {v + slope * (t - t_prev), slope};
        }
        break;
      }
      v = e.value;
      t_prev = e.t;
    }
    return {v, 0.0};
  }
  bool empty() const { return rows_.empty(); }
  std::vector<std::string> channels() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : rows_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, std::vector<ScheduleEntry>> rows_;
};

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline double to_double(const std::string& tok, std::size_t line) {
  const auto slash = tok.find('/');
  if (slash != std::string::npos && slash > 0)  // rational literal such as 1/240
    return to_double(tok.substr(0, slash), line) / to_double(tok.substr(slash + 1), line);
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + tok + "'", line);
  }
}
}  // namespace detail

/// Parsed config file: ordered sections of entries plus schedule rows.
class ConfigDoc {
 public:
  static ConfigDoc parse(const std::string& text, const std::string& origin = "") {
    ConfigDoc doc;
    doc.origin_ = origin;
    std::istringstream is(text);
    std::string raw, section;
    std::size_t line = 0;
    while (std::getline(is, raw)) {
      ++line;
      const auto hash = raw.find('#');
      const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ParseError("unterminated section header", line);
        section = detail::trim(s.substr(1, s.size() - 2));
        if (section.empty()) throw ParseError("empty section name", line);
        doc.sections_[section];
        continue;
      }
      if (section == "schedule") {
        doc.schedule_.add(parse_schedule_row(s, line));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
      ConfigEntry e{detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)), line};
      if (e.key.empty()) throw ParseError("empty key", line);
      auto& entries = doc.sections_[section];
      for (const auto& prev : entries)
        if (prev.key == e.key) throw ParseError("duplicate key '" + e.key + "'", line);
      entries.push_back(std::move(e));
    }
    return doc;
  }

  static ConfigDoc load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  static ScheduleEntry parse_schedule_row(const std::string& s, std::size_t line) {
    std::vector<std::string> cols;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) cols.push_back(detail::trim(tok));
    if (cols.size() != 3 && cols.size() != 4) throw ParseError("schedule row needs 't, channel, setpoint[, ramp]'", line);
    if (cols.size() == 4 && cols[3] != "ramp" && cols[3] != "step")
      throw ParseError("schedule mode must be 'ramp' or 'step'", line);
    ScheduleEntry e{detail::to_double(cols[0], line), cols[1], detail::to_double(cols[2], line),
                    cols.size() == 4 && cols[3] == "ramp"};
    if (e.t < 0.0) throw ParseError("negative schedule time", line);
    return e;
  }

  const std::string& origin() const { return origin_; }
  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  std::vector<std::string> sections() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : sections_) out.push_back(k);
    return out;
  }

  const ConfigEntry* find(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return nullptr;
    for (const auto& e : it->second)
      if (e.key == key) return &e;
    return nullptr;
  }

  std::optional<std::string> get_string(const std::string& section, const std::string& key) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::optional<double> get_double(const std::string& section, const std::string& key) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    return detail::to_double(e->value, e->line);
  }

  std::optional<bool> get_bool(const std::string& section, const std::string& key) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    throw ParseError("expected a boolean for '" + key + "'", e->line);
  }

  /// Whitespace-separated numbers; `expected` < 0 accepts any count.
  std::optional<VecXd> get_vector(const std::string& section, const std::string& key, int expected = -1) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    std::istringstream is(e->value);
    std::vector<double> vals;
    std::string tok;
    while (is >> tok) vals.push_back(detail::to_double(tok, e->line));
    if (expected >= 0 && static_cast<int>(vals.size()) != expected)
      throw ParseError("'" + key + "' needs " + std::to_string(expected) + " numbers", e->line);
    return Eigen::Map<VecXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }

  std::optional<Vec3d> get_vec3(const std::string& section, const std::string& key) const {
    auto v = get_vector(section, key, 3);
    if (!v) return std::nullopt;
    return Vec3d(*v);
  }

  const Schedule& schedule() const { return schedule_; }
  Schedule& schedule() { return schedule_; }

 private:
  std::string origin_;
  std::map<std::string, std::vector<ConfigEntry>> sections_;
  Schedule schedule_;
};

/// Overlays the model keys present in `doc` onto `params`. Motor sections replace the motor list.
inline void apply_model_params(const ConfigDoc& doc, ModelParams& params) {
  if (auto g = doc.get_vec3("", "gravity")) params.gravity = *g;
  if (auto nu = doc.get_double("", "nu")) params.nu = *nu;
  auto& a = params.actuators;
  if (auto v = doc.get_double("actuators", "prop_time_constant")) a.prop_time_constant = *v;
  if (auto v = doc.get_double("actuators", "prop_peak")) a.prop_peak = *v;
  if (auto v = doc.get_double("actuators", "joint_time_constant")) a.joint_time_constant = *v;
  if (auto v = doc.get_double("actuators", "joint_peak")) a.joint_peak = *v;

  std::vector<std::pair<int, std::string>> motor_sections;
  for (const auto& s : doc.sections()) {
    if (s.rfind("motor.", 0) != 0) continue;
    try {
      motor_sections.emplace_back(std::stoi(s.substr(6)), s);
    } catch (const std::exception&) {
      throw ParseError("motor section '" + s + "' needs a numeric index");
    }
  }
  if (motor_sections.empty()) return;
  std::sort(motor_sections.begin(), motor_sections.end());
  params.motors.clear();
  for (std::size_t i = 0; i < motor_sections.size(); ++i) {
    const auto& [idx, s] = motor_sections[i];
    if (idx != static_cast<int>(i) + 1) throw ParseError("motor sections must be numbered 1..N without gaps");
    Motor m;
    auto req = [&](std::optional<double> v, const char* key) {
      if (!v) throw ParseError("[" + s + "] is missing '" + key + "'");
      return *v;
    };
    m.position = doc.get_vec3(s, "position").value_or(Vec3d::Zero());
    m.axis = doc.get_vec3(s, "axis").value_or(Vec3d::UnitZ());
    m.spin = static_cast<int>(req(doc.get_double(s, "spin"), "spin"));
    m.k_t = req(doc.get_double(s, "k_t"), "k_t");
    m.k_p = req(doc.get_double(s, "k_p"), "k_p");
    params.motors.push_back(m);
  }
}

inline ModelParams load_model_params(const std::string& path) {
  ModelParams p;
  apply_model_params(ConfigDoc::load(path), p);
  p.validate();
  return p;
}

inline Model load_model(const std::string& urdf_path, const std::string& config_path) {
  Model m{load_urdf(urdf_path), {}};
  if (!config_path.empty()) m.params = load_model_params(config_path);
  return m;
}

/// Orientation from `q = w x y z` or `rpy = roll pitch yaw` (radians).
inline std::optional<UnitQuaternion> get_orientation(const ConfigDoc& doc, const std::string& section) {
  if (auto q = doc.get_vector(section, "q", 4)) return UnitQuaternion((*q)[0], (*q)[1], (*q)[2], (*q)[3]);
  if (auto r = doc.get_vec3(section, "rpy")) return from_roll_pitch_yaw((*r)[0], (*r)[1], (*r)[2]);
  return std::nullopt;
}

inline std::optional<Gains> get_gains(const ConfigDoc& doc, int num_joints) {
  auto kv = doc.get_vector("controller", "kv");
  auto kp = doc.get_vector("controller", "kp");
  if (!kv && !kp) return std::nullopt;
  Gains g = default_gains(num_joints);
  if (kv) g.kv = *kv;
  if (kp) g.kp = *kp;
  g.validate(num_joints);
  return g;
}

/// Resolves `value` relative to the directory of the file the doc came from.
inline std::string resolve_path(const ConfigDoc& doc, const std::string& value) {
  namespace fs = std::filesystem;
  const fs::path p(value);
  if (p.is_absolute() || doc.origin().empty()) return value;
  return (fs::path(doc.origin()).parent_path() / p).lexically_normal().string();
}

}  // namespace amdyn
