#include "hcbf/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcbf/io.hpp"

namespace hcbf {

namespace {

std::filesystem::path default_out() {
  const char* env = std::getenv("HCBF_OUT_DIR");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("out");
}

void print_metrics(const Metrics& m, std::ostream& os) {
  os << "rows: " << m.n_rows << '\n';
  os << "min_distance_ratio: " << m.min_distance_ratio << '\n';
  os << "max_abs_y_b: " << m.max_abs_y_b << '\n';
  os << "final_sigma_sum: " << m.final_sigma_sum << '\n';
  os << "max_jumps_in_window: " << m.max_jumps_in_window << '\n';
  os << "relaxed_steps: " << m.relaxed_steps << '\n';
  os << "safe: " << (m.safe ? "yes" : "no") << '\n';
}

// Sets a dotted path (numeric parts index arrays) inside a JSON document.
void set_path(nlohmann::json& doc, const std::string& path, double value) {
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError({path + ": empty path component"});
    nlohmann::json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        throw ConfigError({path + ": expected an array index at '" + key + "'"});
      }
      if (idx >= node->size()) throw ConfigError({path + ": index " + key + " out of range"});
      next = &(*node)[idx];
    } else if (node->is_object()) {
      if (!node->contains(key)) throw ConfigError({path + ": no field '" + key + "'"});
      next = &(*node)[key];
    } else {
      throw ConfigError({path + ": '" + key + "' is not inside an object or array"});
    }
    if (dot == std::string::npos) {
      if (!next->is_number()) throw ConfigError({path + ": not a numeric field"});
      *next = value;
      return;
    }
    node = next;
    start = dot + 1;
  }
}

struct Outcome {
  int code = kExitOk;
  std::string text;
};

Outcome simulate_to(const ScenarioConfig& config, const std::filesystem::path& out, int every) {
  Outcome o;
  try {
    const SimTrace trace = run(config);
    write_trace(trace, out, every);
    const Metrics m = metrics(trace);
    std::ostringstream os;
    print_metrics(m, os);
    os << "output: " << out.string() << '\n';
    o.text = os.str();
    o.code = m.safe ? kExitOk : kExitUnsafe;
  } catch (const SimulationAbort& e) {
    o.text = std::string("simulation aborted: ") + e.what() + '\n';
    o.code = kExitAbort;
  }
  return o;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"hybrid synergistic CBF safety filter for unicycle formations", "hcbf"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir;
  double dt = 0;
  double t_end = -1;
  int every = 1;
  auto* sim = app.add_subcommand("simulate", "run a scenario and write trace.csv and summary.json");
  sim->add_option("--scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "output directory (default $HCBF_OUT_DIR or ./out)");
  sim->add_option("--dt", dt, "override the step size, s")->check(CLI::PositiveNumber);
  sim->add_option("--t-end", t_end, "override the horizon, s")->check(CLI::NonNegativeNumber);
  sim->add_option("--every", every, "write every n-th row")->check(CLI::PositiveNumber);

  std::string limits_path;
  double gamma = 0;
  bool sweep_gamma = false;
  auto* feas = app.add_subcommand("feasibility", "print the feasibility margin for a limits file");
  feas->add_option("--limits", limits_path, "limits JSON file")->required()->check(CLI::ExistingFile);
  feas->add_option("--gamma", gamma, "override gamma")->check(CLI::PositiveNumber);
  feas->add_flag("--sweep-gamma", sweep_gamma, "maximize jointly over vartheta and gamma");

  auto* val = app.add_subcommand("validate", "parse and validate a scenario");
  val->add_option("--scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);

  std::string param;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "run variants of a scenario concurrently");
  sweep->add_option("--scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "dotted field path, e.g. scbf.gamma2 or agents.0.u")->required();
  sweep->add_option("--values", values, "values to try")->required()->delimiter(',');
  sweep->add_option("--out", out_dir, "output directory (default $HCBF_OUT_DIR or ./out)");
  sweep->add_option("--every", every, "write every n-th row")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  const std::filesystem::path out = out_dir.empty() ? default_out() : std::filesystem::path(out_dir);
  try {
    if (*val) {
      const ScenarioConfig c = parse_scenario(scenario);
      std::cout << "ok: " << c.name << " (" << c.agents.size() << " agents, " << c.obstacles.size()
                << " obstacles, hash " << scenario_hash(c) << ")\n";
      return kExitOk;
    }
    if (*feas) {
      LimitsFile lf = parse_limits(limits_path);
      if (gamma > 0) lf.gamma = gamma;
      const FeasibilityMargin m =
          sweep_gamma ? feasibility_margin_joint(lf.limits, lf.d_min, lf.u_omax, lf.a_omax)
                      : feasibility_margin(lf.limits, lf.d_min, lf.gamma, lf.u_omax, lf.a_omax);
      std::cout << feasibility_report(m, lf, sweep_gamma);
      return kExitOk;
    }
    if (*sim) {
      ScenarioConfig c = parse_scenario(scenario);
      if (dt > 0) c.dt = dt;
      if (t_end >= 0) c.t_end = t_end;
      if (auto issues = validate(c); !issues.empty()) throw ConfigError(issues);
      const Outcome o = simulate_to(c, out, every);
      (o.code == kExitAbort ? std::cerr : std::cout) << o.text;
      return o.code;
    }
    if (*sweep) {
      const ScenarioConfig base = parse_scenario(scenario);
      const auto doc = nlohmann::json::parse(serialize_scenario(base));
      std::vector<ScenarioConfig> variants;
      for (double v : values) {
        auto d = doc;
        set_path(d, param, v);
        variants.push_back(parse_scenario_text(d.dump()));
      }
      std::vector<std::future<Outcome>> jobs;
      for (std::size_t k = 0; k < variants.size(); ++k) {
        // Shortest form that reads back to the same double.
        char tag[64];
        for (int prec = 6; prec <= 17; ++prec) {
          std::snprintf(tag, sizeof tag, "%.*g", prec, values[k]);
          if (std::strtod(tag, nullptr) == values[k]) break;
        }
        const auto dir = out / (param + "=" + tag);
        jobs.push_back(std::async(std::launch::async, simulate_to, variants[k], dir, every));
      }
      int worst = kExitOk;
      for (std::size_t k = 0; k < jobs.size(); ++k) {
        const Outcome o = jobs[k].get();
        std::cout << "[" << param << " = " << values[k] << "] exit " << o.code << '\n' << o.text;
        worst = std::max(worst, o.code);
      }
      return worst;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << '\n';
    return kExitUsage;
  } catch (const SimulationAbort& e) {
    std::cerr << "simulation aborted at t = " << e.t << ": " << e.what() << '\n';
    return kExitAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAbort;
  }
  std::cerr << app.help();
  return kExitUsage;
}

}  // namespace hcbf
