#include "hcbf/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hcbf {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += '\n';
    out += s;
  }
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Reads typed fields from one JSON object and records problems with their
// field path instead of throwing at the first one.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& issues)
      : obj_(obj), path_(std::move(path)), issues_(issues) {
    if (!obj_.is_object()) issue(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.is_object() && obj_.contains(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_number()) {
      issue(at(key), "expected a number");
      return fallback;
    }
    return v.get<double>();
  }

  double required_number(const std::string& key) {
    if (!has(key)) {
      issue(at(key), "missing required field");
      return 0;
    }
    return number(key, 0);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) {
      issue(at(key), "expected true or false");
      return fallback;
    }
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_string()) {
      issue(at(key), "expected a string");
      return fallback;
    }
    return v.get<std::string>();
  }

  Vec2d vec2(const std::string& key, const Vec2d& fallback, bool required = false) {
    if (!has(key)) {
      if (required) issue(at(key), "missing required field");
      return fallback;
    }
    const json& v = obj_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      issue(at(key), "expected [x, y]");
      return fallback;
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  const json* child(const std::string& key) {
    if (!has(key)) return nullptr;
    return &obj_.at(key);
  }

  void issue(const std::string& path, const std::string& msg) { issues_.push_back(path + ": " + msg); }

  /// Flags keys that were never asked for.
  void finish() {
    if (!obj_.is_object()) return;
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) issue(at(k), "unknown field");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> seen_;
};

AgentLimits read_limits(Reader& r, const AgentLimits& base) {
  AgentLimits l;
  l.r_max = r.number("r_max", base.r_max);
  l.a_max = r.number("a_max", base.a_max);
  l.u_min = r.number("u_min", base.u_min);
  l.u_max = r.number("u_max", base.u_max);
  return l;
}

json limits_json(const AgentLimits& l) {
  return {{"r_max", l.r_max}, {"a_max", l.a_max}, {"u_min", l.u_min}, {"u_max", l.u_max}};
}

json vec_json(const Vec2d& v) { return json::array({v.x(), v.y()}); }

ConstraintMode parse_mode(const std::string& s, Reader& r) {
  if (s == "pairwise-obstacle") return ConstraintMode::PairwiseObstacle;
  if (s == "barycenter-obstacle") return ConstraintMode::BarycenterObstacle;
  if (s == "both") return ConstraintMode::Both;
  r.issue(r.at("constraint_mode"), "expected pairwise-obstacle, barycenter-obstacle or both");
  return ConstraintMode::PairwiseObstacle;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t k = 0; k < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') ++line;
    }
    throw ConfigError({"line " + std::to_string(line) + ": " + e.what()});
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string() + ": cannot open file"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join_lines(issues)), issues_(std::move(issues)) {}

ScenarioConfig parse_scenario_text(const std::string& text) {
  const json doc = parse_json(text);
  std::vector<std::string> issues;
  ScenarioConfig c;
  Reader top(doc, "", issues);

  c.name = top.string("name", "");
  c.dt = top.number("dt", c.dt);
  c.t_end = top.number("t_end", c.t_end);
  const double seed = top.number("seed", 0);
  if (seed < 0 || seed != std::floor(seed)) top.issue("seed", "expected a nonnegative integer");
  c.seed = static_cast<std::uint64_t>(std::max(0.0, seed));
  c.initial_jitter = top.number("initial_jitter", 0);
  c.safety_filter = top.boolean("safety_filter", true);
  c.safety_tolerance = top.number("safety_tolerance", c.safety_tolerance);
  c.agent_d_min = top.number("agent_d_min", c.agent_d_min);
  c.mode = parse_mode(top.string("constraint_mode", "pairwise-obstacle"), top);

  AgentLimits base;
  if (const json* l = top.child("limits")) {
    Reader lr(*l, "limits", issues);
    base = read_limits(lr, base);
    lr.finish();
  }

  if (const json* agents = top.child("agents")) {
    if (!agents->is_array()) {
      top.issue("agents", "expected an array");
    } else {
      for (std::size_t i = 0; i < agents->size(); ++i) {
        Reader ar((*agents)[i], "agents[" + std::to_string(i) + "]", issues);
        AgentState s;
        s.p = ar.vec2("position", Vec2d::Zero(), true);
        if (ar.has("psi_deg")) {
          s.psi = ar.number("psi_deg", 0) * std::numbers::pi / 180.0;
          if (ar.has("psi")) ar.issue(ar.at("psi"), "give psi or psi_deg, not both");
        } else {
          s.psi = ar.number("psi", 0);
        }
        s.psi = wrap_angle(s.psi);
        AgentLimits lim = base;
        if (const json* l = ar.child("limits")) {
          Reader lr(*l, ar.at("limits"), issues);
          lim = read_limits(lr, base);
          lr.finish();
        }
        s.u = ar.number("u", 0.5 * (lim.u_min + lim.u_max));
        c.agents.push_back(s);
        c.limits.push_back(lim);
        c.formation.offsets.push_back(ar.vec2("offset", Vec2d::Zero()));
        ar.finish();
      }
    }
  } else {
    top.issue("agents", "missing required field");
  }

  if (const json* obstacles = top.child("obstacles")) {
    if (!obstacles->is_array()) {
      top.issue("obstacles", "expected an array");
    } else {
      for (std::size_t j = 0; j < obstacles->size(); ++j) {
        Reader orr((*obstacles)[j], "obstacles[" + std::to_string(j) + "]", issues);
        ObstacleSpec o;
        o.d_min = orr.required_number("d_min");
        o.script.p0 = orr.vec2("position", Vec2d::Zero(), true);
        const bool has_v = orr.has("velocity");
        const json* segs = orr.child("segments");
        if (has_v && segs) orr.issue(orr.at("segments"), "give velocity or segments, not both");
        if (has_v) {
          o.script.segments.push_back({0.0, orr.vec2("velocity", Vec2d::Zero())});
        } else if (segs) {
          if (!segs->is_array()) {
            orr.issue(orr.at("segments"), "expected an array");
          } else {
            for (std::size_t k = 0; k < segs->size(); ++k) {
              Reader sr((*segs)[k], orr.at("segments") + "[" + std::to_string(k) + "]", issues);
              ObstacleScript::Segment seg;
              seg.t_start = sr.required_number("t_start");
              seg.velocity = sr.vec2("velocity", Vec2d::Zero(), true);
              o.script.segments.push_back(seg);
              sr.finish();
            }
          }
        } else {
          orr.issue(orr.at("velocity"), "missing velocity (or segments)");
        }
        c.obstacles.push_back(o);
        orr.finish();
      }
    }
  }

  if (const json* s = top.child("scbf")) {
    Reader sr(*s, "scbf", issues);
    c.scbf.vartheta = sr.number("vartheta", c.scbf.vartheta);
    c.scbf.gamma0 = sr.number("gamma0", c.scbf.gamma0);
    c.scbf.gamma2 = sr.number("gamma2", c.scbf.gamma2);
    c.scbf.excluded_ball = sr.number("excluded_ball", c.scbf.excluded_ball);
    const std::string reg = sr.string("barycenter_regressor", "exact");
    if (reg == "exact") {
      c.scbf.barycenter_regressor = BarycenterRegressor::Exact;
    } else if (reg == "rotation") {
      c.scbf.barycenter_regressor = BarycenterRegressor::Rotation;
    } else {
      sr.issue("scbf.barycenter_regressor", "expected exact or rotation");
    }
    if (const json* h = sr.child("hysteresis")) {
      if (h->is_string() && h->get<std::string>() == "product") {
        c.scbf.hysteresis = {HysteresisKind::Product, 0.0};
      } else if (h->is_object()) {
        Reader hr(*h, "scbf.hysteresis", issues);
        c.scbf.hysteresis = {HysteresisKind::Constant, hr.required_number("constant")};
        hr.finish();
      } else {
        sr.issue("scbf.hysteresis", "expected \"product\" or {\"constant\": width}");
      }
    }
    sr.finish();
  }

  if (const json* g = top.child("gains")) {
    Reader gr(*g, "gains", issues);
    c.gains.k_path = gr.number("k_path", c.gains.k_path);
    c.gains.k_form = gr.number("k_form", c.gains.k_form);
    c.gains.k_psi = gr.number("k_psi", c.gains.k_psi);
    c.gains.k_u = gr.number("k_u", c.gains.k_u);
    c.gains.u_ref = gr.number("u_ref", c.gains.u_ref);
    c.gains.lookahead = gr.number("lookahead", c.gains.lookahead);
    gr.finish();
  }
  top.finish();

  if (!issues.empty()) throw ConfigError(issues);
  std::vector<std::string> semantic = validate(c);
  if (!semantic.empty()) throw ConfigError(semantic);
  return c;
}

ScenarioConfig parse_scenario(const std::filesystem::path& path) { return parse_scenario_text(read_file(path)); }

std::string serialize_scenario(const ScenarioConfig& c) {
  json doc;
  doc["name"] = c.name;
  doc["dt"] = c.dt;
  doc["t_end"] = c.t_end;
  doc["seed"] = c.seed;
  doc["initial_jitter"] = c.initial_jitter;
  doc["safety_filter"] = c.safety_filter;
  doc["safety_tolerance"] = c.safety_tolerance;
  doc["agent_d_min"] = c.agent_d_min;
  doc["constraint_mode"] = to_string(c.mode);
  json agents = json::array();
  for (std::size_t i = 0; i < c.agents.size(); ++i) {
    json a;
    a["position"] = vec_json(c.agents[i].p);
    a["psi"] = c.agents[i].psi;
    a["u"] = c.agents[i].u;
    a["offset"] = vec_json(i < c.formation.offsets.size() ? c.formation.offsets[i] : Vec2d::Zero());
    if (i < c.limits.size()) a["limits"] = limits_json(c.limits[i]);
    agents.push_back(a);
  }
  doc["agents"] = agents;
  json obstacles = json::array();
  for (const auto& o : c.obstacles) {
    json oj;
    oj["position"] = vec_json(o.script.p0);
    oj["d_min"] = o.d_min;
    json segs = json::array();
    for (const auto& s : o.script.segments) segs.push_back({{"t_start", s.t_start}, {"velocity", vec_json(s.velocity)}});
    oj["segments"] = segs;
    obstacles.push_back(oj);
  }
  doc["obstacles"] = obstacles;
  json scbf;
  scbf["vartheta"] = c.scbf.vartheta;
  scbf["gamma0"] = c.scbf.gamma0;
  scbf["gamma2"] = c.scbf.gamma2;
  scbf["excluded_ball"] = c.scbf.excluded_ball;
  scbf["barycenter_regressor"] = to_string(c.scbf.barycenter_regressor);
  if (c.scbf.hysteresis.kind == HysteresisKind::Product) {
    scbf["hysteresis"] = "product";
  } else {
    scbf["hysteresis"] = {{"constant", c.scbf.hysteresis.value}};
  }
  doc["scbf"] = scbf;
  doc["gains"] = {{"k_path", c.gains.k_path}, {"k_form", c.gains.k_form}, {"k_psi", c.gains.k_psi},
                  {"k_u", c.gains.k_u},       {"u_ref", c.gains.u_ref},   {"lookahead", c.gains.lookahead}};
  return doc.dump(2);
}

std::string scenario_hash(const ScenarioConfig& c) {
  const std::string text = serialize_scenario(c);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

LimitsFile parse_limits_text(const std::string& text) {
  const json doc = parse_json(text);
  std::vector<std::string> issues;
  Reader r(doc, "", issues);
  LimitsFile f;
  f.limits.r_max = r.required_number("r_max");
  f.limits.a_max = r.number("a_max", f.limits.a_max);
  f.limits.u_min = r.number("u_min", f.limits.u_min);
  f.limits.u_max = r.number("u_max", f.limits.u_max);
  f.d_min = r.number("d_min", f.d_min);
  f.u_omax = r.number("u_omax", f.u_omax);
  f.a_omax = r.number("a_omax", f.a_omax);
  f.gamma = r.number("gamma", f.gamma);
  r.finish();
  if (issues.empty()) {
    if (!(f.limits.r_max > 0)) issues.push_back("r_max: must be positive");
    if (!(f.limits.a_max >= 0)) issues.push_back("a_max: must be nonnegative");
    if (!(f.limits.u_min > 0)) issues.push_back("u_min: must be positive");
    if (!(f.limits.u_max >= f.limits.u_min)) issues.push_back("u_max: must be >= u_min");
    if (!(f.d_min > 0)) issues.push_back("d_min: must be positive");
    if (!(f.u_omax >= 0)) issues.push_back("u_omax: must be nonnegative");
    if (!(f.a_omax >= 0)) issues.push_back("a_omax: must be nonnegative");
    if (!(f.gamma > 0)) issues.push_back("gamma: must be positive");
  }
  if (!issues.empty()) throw ConfigError(issues);
  return f;
}

LimitsFile parse_limits(const std::filesystem::path& path) { return parse_limits_text(read_file(path)); }

std::string feasibility_report(const FeasibilityMargin& m, const LimitsFile& in, bool joint) {
  std::ostringstream os;
  os.precision(10);
  os << "sweep: " << (joint ? "vartheta-gamma" : "vartheta") << '\n';
  os << "r_max: " << in.limits.r_max << '\n';
  os << "a_max: " << in.limits.a_max << '\n';
  os << "u_min: " << in.limits.u_min << '\n';
  os << "u_max: " << in.limits.u_max << '\n';
  os << "d_min: " << in.d_min << '\n';
  os << "u_omax: " << in.u_omax << '\n';
  os << "a_omax: " << in.a_omax << '\n';
  os << "gamma: " << m.gamma << '\n';
  os << "beta1: " << m.params.beta1 << '\n';
  os << "beta2: " << m.params.beta2 << '\n';
  os << "beta3: " << m.params.beta3 << '\n';
  os << "margin: " << m.margin << '\n';
  os << "argmax_vartheta: " << m.vartheta << '\n';
  os << "certified: " << (m.certified() ? "yes" : "no") << '\n';
  return os.str();
}

std::vector<TraceColumn> trace_columns(const SimTrace& trace) {
  const auto& c = trace.config;
  const int n = static_cast<int>(c.agents.size());
  std::vector<TraceColumn> cols;
  cols.push_back({"t", "s"});
  for (int i = 0; i < n; ++i) {
    const std::string a = "a" + std::to_string(i + 1);
    cols.push_back({a + ".x", "m"});
    cols.push_back({a + ".y", "m"});
    cols.push_back({a + ".psi", "rad"});
    cols.push_back({a + ".u", "m/s"});
    cols.push_back({a + ".r_d", "rad/s"});
    cols.push_back({a + ".a_d", "m/s^2"});
    cols.push_back({a + ".r", "rad/s"});
    cols.push_back({a + ".a", "m/s^2"});
  }
  for (std::size_t j = 0; j < c.obstacles.size(); ++j) {
    const std::string o = "o" + std::to_string(n + static_cast<int>(j) + 1);
    cols.push_back({o + ".x", "m"});
    cols.push_back({o + ".y", "m"});
    cols.push_back({o + ".vx", "m/s"});
    cols.push_back({o + ".vy", "m/s"});
  }
  for (const auto& l : trace.pair_labels) {
    cols.push_back({l + ".h0", "m^2"});
    cols.push_back({l + ".h1", "m^2/s"});
    cols.push_back({l + ".h2", "m^2/s"});
    cols.push_back({l + ".q", "-"});
    cols.push_back({l + ".headroom", "m^2/s"});
    cols.push_back({l + ".delta", "m^2/s"});
    cols.push_back({l + ".d_min", "m"});
  }
  for (const auto& l : trace.distance_labels) cols.push_back({"dist." + l, "m"});
  cols.push_back({"qp_status", "-"});
  cols.push_back({"qp_slack", "m^2/s^2"});
  cols.push_back({"qp_active", "-"});
  cols.push_back({"qp_kkt", "-"});
  cols.push_back({"qp_rows", "-"});
  cols.push_back({"y_b", "m"});
  cols.push_back({"sigma_sum", "m"});
  cols.push_back({"d_f", "m"});
  cols.push_back({"encounter", "-"});
  return cols;
}

namespace {

void write_row(std::ostream& os, const TraceRow& row) {
  std::string line = fmt17(row.t);
  auto add = [&](double v) {
    line += ',';
    line += fmt17(v);
  };
  for (std::size_t i = 0; i < row.agents.size(); ++i) {
    const auto& a = row.agents[i];
    add(a.p.x());
    add(a.p.y());
    add(a.psi);
    add(a.u);
    add(row.desired[i].r);
    add(row.desired[i].a);
    add(row.filtered[i].r);
    add(row.filtered[i].a);
  }
  for (const auto& o : row.obstacles) {
    add(o.p.x());
    add(o.p.y());
    add(o.v.x());
    add(o.v.y());
  }
  for (std::size_t k = 0; k < row.h2.size(); ++k) {
    add(row.h0[k]);
    add(row.h1[k]);
    add(row.h2[k]);
    line += ',' + std::to_string(row.q[k]);
    add(row.headroom[k]);
    add(row.delta[k]);
    add(row.d_min[k]);
  }
  for (double d : row.distances) add(d);
  line += ',';
  line += to_string(row.qp_status);
  add(row.slack);
  line += ',';
  for (std::size_t k = 0; k < row.active_set.size(); ++k) {
    if (k) line += ';';
    line += std::to_string(row.active_set[k]);
  }
  add(row.kkt_residual);
  line += ',' + std::to_string(row.n_rows);
  add(row.y_b);
  add(row.sigma_sum);
  add(row.d_f);
  line += row.encounter ? ",1" : ",0";
  line += '\n';
  os << line;
}

}  // namespace

std::string summary_json(const SimTrace& trace, const Metrics& m, int every) {
  json doc;
  doc["format_version"] = kTraceFormatVersion;
  doc["scenario"] = trace.config.name;
  doc["scenario_hash"] = scenario_hash(trace.config);
  doc["decimation"] = every;
  json cols = json::array();
  for (const auto& c : trace_columns(trace)) cols.push_back({{"name", c.name}, {"unit", c.unit}});
  doc["columns"] = cols;

  json mj;
  json pairs = json::array();
  for (const auto& p : m.pairs) {
    pairs.push_back({{"pair", p.label}, {"d_min", p.d_min}, {"min_distance", p.min_distance}, {"min_margin", p.min_margin}});
  }
  mj["pairs"] = pairs;
  mj["min_distance_ratio"] = m.min_distance_ratio;
  mj["max_abs_y_b"] = m.max_abs_y_b;
  mj["final_sigma_sum"] = m.final_sigma_sum;
  json jc = json::object();
  for (std::size_t k = 0; k < m.jump_counts.size(); ++k) jc[trace.pair_labels[k]] = m.jump_counts[k];
  mj["jump_counts"] = jc;
  mj["max_jumps_in_window"] = m.max_jumps_in_window;
  mj["max_abs_r"] = m.max_abs_r;
  mj["u_range"] = json::array({m.u_lo, m.u_hi});
  mj["relaxed_steps"] = m.relaxed_steps;
  mj["total_slack"] = m.total_slack;
  mj["max_slack"] = m.max_slack;
  mj["max_d_f"] = m.max_d_f;
  mj["max_d_f_encounter"] = m.max_d_f_encounter;
  mj["d_f_d"] = m.d_f_d;
  mj["rows"] = m.n_rows;
  mj["safe"] = m.safe;
  doc["metrics"] = mj;

  json jumps = json::array();
  for (const auto& j : trace.jumps) {
    jumps.push_back({{"t", j.t},
                     {"pair", trace.pair_labels[static_cast<std::size_t>(j.pair)]},
                     {"q_before", j.q_before},
                     {"q_after", j.q_after},
                     {"h2_before", j.h2_before},
                     {"h2_after", j.h2_after},
                     {"delta", j.delta}});
  }
  doc["jumps"] = jumps;
  doc["warnings"] = trace.warnings;
  return doc.dump(2);
}

void write_trace(const SimTrace& trace, const std::filesystem::path& dir, int every) {
  if (every < 1) throw std::invalid_argument("write_trace: decimation must be >= 1");
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "trace.csv", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / "trace.csv").string());
    const auto cols = trace_columns(trace);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (k) os << ',';
      os << cols[k].name << " [" << cols[k].unit << ']';
    }
    os << '\n';
    for (std::size_t k = 0; k < trace.rows.size(); ++k) {
      if (k % static_cast<std::size_t>(every) == 0 || k + 1 == trace.rows.size()) write_row(os, trace.rows[k]);
    }
    if (!os) throw std::runtime_error("I/O error writing " + (dir / "trace.csv").string());
  }
  {
    std::ofstream os(dir / "summary.json", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
    os << summary_json(trace, metrics(trace), every) << '\n';
    if (!os) throw std::runtime_error("I/O error writing " + (dir / "summary.json").string());
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    const std::string& h = header[k];
    const auto sp = h.find(" [");
    if (h.substr(0, sp) == name) return k;
  }
  throw std::out_of_range("no column " + name);
}

double CsvTable::number(std::size_t row, std::size_t col) const { return std::stod(rows.at(row).at(col)); }

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

}  // namespace hcbf
