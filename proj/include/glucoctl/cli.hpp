#pragma once

// Command-line front end. `run_command` never calls exit(); it returns the
// process exit code so it can be driven from tests.
//
//   0 success
//   1 configuration or usage error
//   2 infeasible certificate (synth) or nonpositive margin (check)
//   3 integration failure

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glucoctl/contraction.hpp"
#include "glucoctl/io.hpp"
#include "glucoctl/metrics.hpp"
#include "glucoctl/scenarios.hpp"
#include "glucoctl/sim.hpp"

namespace glucoctl::cli {

enum ExitCode : int { ok = 0, config_error = 1, infeasible = 2, integration_error = 3 };

inline Interval parse_interval(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("expected lo:hi, got '" + s + "'");
  try {
    std::size_t a = 0, b = 0;
    const double lo = std::stod(s.substr(0, colon), &a);
    const double hi = std::stod(s.substr(colon + 1), &b);
    if (a != colon || b != s.size() - colon - 1) throw std::invalid_argument(s);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ConfigError("expected lo:hi, got '" + s + "'");
  }
}

// Applies `a.b.c=value` to a JSON object. The value is parsed as JSON when
// possible and kept as a string otherwise.
inline void apply_override(json& j, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must be key=value, got '" + kv + "'");
  }
  const std::string key = kv.substr(0, eq);
  const std::string text = kv.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("bad override key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline json to_json(const GainSynthesisSpec& s) {
  return {{"observer_box", glucoctl::to_json(s.observer_box)},
          {"controller_box", glucoctl::to_json(s.controller_box)},
          {"kind", to_string(s.kind)},
          {"mode", to_string(s.mode)},
          {"observer_margin", s.observer_margin},
          {"controller_margin", s.controller_margin}};
}

inline GainSynthesisSpec synthesis_spec_from_json(const json& j, GainSynthesisSpec s = {}) {
  try {
    if (j.contains("observer_box")) s.observer_box = box_from_json(j["observer_box"]);
    if (j.contains("controller_box")) s.controller_box = box_from_json(j["controller_box"]);
    if (j.contains("kind")) s.kind = measure_kind_from_string(j["kind"].get<std::string>());
    if (j.contains("mode")) s.mode = jacobian_mode_from_string(j["mode"].get<std::string>());
    s.observer_margin = j.value("observer_margin", s.observer_margin);
    s.controller_margin = j.value("controller_margin", s.controller_margin);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthesis config: ") + e.what());
  }
}

struct Options {
  std::string subject;
  std::string scenario;
  std::string gains;
  std::string config;
  std::string out;
  std::string mode;
  std::string norm;
  std::string box;
  std::string insulin_box;
  std::string theta;
  std::string trajectory;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<double> margin;
  std::optional<double> observer_margin;
  std::optional<double> controller_margin;
  int workers = 1;
};

inline std::filesystem::path output_dir(const Options& o) {
  std::filesystem::path dir = o.out.empty() ? "." : o.out;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

inline json load_config_json(const Options& o) {
  json j = o.config.empty() ? json::object() : read_json_file(o.config);
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  return j;
}

// ---- synth ----------------------------------------------------------------

inline int cmd_synth(const Options& o, std::ostream& out, std::ostream& err) {
  json cfg = load_config_json(o);
  for (const auto& kv : o.overrides) apply_override(cfg, kv);
  const std::string subject = !o.subject.empty() ? o.subject : cfg.value("subject", std::string("1"));
  GainSynthesisSpec spec = synthesis_spec_from_json(cfg);
  if (!o.box.empty()) {
    const Interval g = parse_interval(o.box);
    spec.observer_box.glucose = g;
    spec.controller_box.glucose = g;
  }
  if (!o.insulin_box.empty()) spec.controller_box.insulin = parse_interval(o.insulin_box);
  if (o.margin) spec.observer_margin = spec.controller_margin = *o.margin;
  if (o.observer_margin) spec.observer_margin = *o.observer_margin;
  if (o.controller_margin) spec.controller_margin = *o.controller_margin;
  if (!o.norm.empty()) spec.kind = measure_kind_from_string(o.norm);
  if (!o.mode.empty()) spec.mode = jacobian_mode_from_string(o.mode);
  spec.observer_box.validate();
  spec.controller_box.validate();

  const PatientParams p = reference_subject(subject);
  json config = to_json(spec);
  config["subject"] = subject;

  const auto path = output_dir(o) / ("gains_subject" + subject + ".json");
  try {
    json j = glucoctl::to_json(synthesize_gain_set(p, spec));
    j["config"] = config;
    write_text_file(path.string(), dump(j));
    out << dump(j);
    return ok;
  } catch (const Infeasible& e) {
    json j = glucoctl::to_json(e.best());
    j["config"] = config;
    err << "infeasible: " << e.what() << "\n";
    out << dump(j);
    return infeasible;
  }
}

// ---- check ----------------------------------------------------------------

inline json check_certificate(const PatientParams& p, const Certificate& c) {
  const Eigen::VectorXd slack =
      c.target == CertificateTarget::observer
          ? observer_slack(p, ObserverGain(c.gains), c.box, c.theta, c.kind)
          : controller_slack(p, ControllerGain(c.gains), c.box, c.theta, c.kind, c.mode);
  json s = json::array();
  for (Eigen::Index i = 0; i < slack.size(); ++i) s.push_back(slack[i]);
  return {{"certificate", glucoctl::to_json(c)},
          {"margin", slack.minCoeff()},
          {"slack", s}};
}

inline int cmd_check(const Options& o, std::ostream& out, std::ostream&) {
  if (o.gains.empty()) throw ConfigError("check requires --gains");
  GainSet g = load_gain_set(o.gains);
  const std::string subject = !o.subject.empty() ? o.subject : g.observer.subject;
  const PatientParams p = reference_subject(subject);
  for (Certificate* c : {&g.observer, &g.controller}) {
    if (o.theta == "identity") c->theta = Vec4::Ones();
    else if (!o.theta.empty()) throw ConfigError("--theta accepts only 'identity'");
    if (!o.norm.empty()) c->kind = measure_kind_from_string(o.norm);
    if (!o.mode.empty()) c->mode = jacobian_mode_from_string(o.mode);
    if (!o.box.empty()) c->box.glucose = parse_interval(o.box);
    c->box.validate();
  }
  if (!o.insulin_box.empty()) g.controller.box.insulin = parse_interval(o.insulin_box);

  const json obs = check_certificate(p, g.observer);
  const json ctl = check_certificate(p, g.controller);
  const double margin = std::min(obs["margin"].get<double>(), ctl["margin"].get<double>());
  json j = {{"config",
             {{"subject", subject},
              {"gains", o.gains},
              {"theta", o.theta.empty() ? "certificate" : o.theta}}},
            {"margin", margin},
            {"observer", obs},
            {"controller", ctl}};
  if (!o.out.empty()) write_text_file((output_dir(o) / "check.json").string(), dump(j));
  out << dump(j);
  return margin > 0.0 ? ok : infeasible;
}

// ---- simulate / montecarlo ------------------------------------------------

inline MonteCarloConfig resolve_run_config(const Options& o) {
  json j = load_config_json(o);
  if (!o.subject.empty()) j["subject"] = o.subject;
  if (!o.scenario.empty()) j["scenario"] = o.scenario;
  if (!o.gains.empty()) j["gains"] = o.gains;
  if (o.seed) j["master_seed"] = *o.seed;
  if (o.trials) j["trial_count"] = *o.trials;
  for (const auto& kv : o.overrides) apply_override(j, kv);
  return monte_carlo_config_from_json(j);
}

inline GainSet resolve_gains(const MonteCarloConfig& cfg) {
  if (!cfg.gains_path.empty()) return load_gain_set(cfg.gains_path);
  return synthesize_gain_set(reference_subject(cfg.subject));
}

inline json run_header(const MonteCarloConfig& cfg, const GainSet& g) {
  return {{"config", glucoctl::to_json(cfg)}, {"gains", glucoctl::to_json(g)}};
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream&) {
  const MonteCarloConfig cfg = resolve_run_config(o);
  const GainSet g = resolve_gains(cfg);
  const PatientParams p = reference_subject(cfg.subject);
  const EquilibriumPoint eq = equilibrium_for_setpoint(p, cfg.setpoint);
  const PlantState x0 = cfg.init.nominal();
  const Trajectory tr =
      simulate_closed_loop(p, eq, g.observer_gain(), g.controller_gain(), cfg.limits,
                           cfg.meals, cfg.meal_params, x0, x0, cfg.sim);

  const auto dir = output_dir(o);
  std::ostringstream csv;
  write_trajectory_csv(csv, tr);
  write_text_file((dir / "trajectory.csv").string(), csv.str());

  json j = run_header(cfg, g);
  j["summary"] = glucoctl::to_json(summarize(tr));
  j["report"] = glucoctl::to_json(glycemic_report(tr.glucose()));
  write_text_file((dir / "report.json").string(), dump(j));
  out << dump(j["report"]);
  return ok;
}

inline int cmd_montecarlo(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.workers < 1) throw ConfigError("--workers must be >= 1");
  const MonteCarloConfig cfg = resolve_run_config(o);
  const GainSet g = resolve_gains(cfg);
  const MonteCarloResult res = run_monte_carlo(cfg, g, o.workers);

  const auto dir = output_dir(o);
  json trials = run_header(cfg, g);
  trials["trials"] = json::array();
  for (const auto& t : res.trials) trials["trials"].push_back(glucoctl::to_json(t));
  write_text_file((dir / "trials.json").string(), dump(trials));

  json agg = run_header(cfg, g);
  agg["aggregate"] = glucoctl::to_json(res.aggregate);
  write_text_file((dir / "aggregate.json").string(), dump(agg));

  write_text_file((dir / "summary.csv").string(),
                  summary_csv_header() + summary_csv_row(cfg.subject, cfg.scenario, res.aggregate));
  out << dump(agg["aggregate"]);
  if (res.aggregate.failed > 0) {
    err << res.aggregate.failed << " of " << res.aggregate.trials << " trials failed\n";
    return integration_error;
  }
  return ok;
}

// ---- report ---------------------------------------------------------------

inline int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  if (o.trajectory.empty()) throw ConfigError("report requires --trajectory");
  const Trajectory tr = load_trajectory_csv(o.trajectory);
  json j = {{"config", {{"trajectory", o.trajectory}}},
            {"summary", glucoctl::to_json(summarize(tr))},
            {"report", glucoctl::to_json(glycemic_report(tr.glucose()))}};
  if (!o.out.empty()) write_text_file((output_dir(o) / "report.json").string(), dump(j));
  out << dump(j);
  return ok;
}

// ---- dispatch -------------------------------------------------------------

inline int run_command(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
  CLI::App app{"Contraction-certified observer-based glucose control"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--subject", o.subject, "Subject label (1, 3 or 5)");
    c->add_option("--config", o.config, "JSON configuration file");
    c->add_option("--out", o.out, "Output directory");
    c->add_option("--set", o.overrides, "Override a config key: key=value");
  };
  auto add_cert = [&](CLI::App* c) {
    c->add_option("--mode", o.mode, "Jacobian mode: corrected | uncorrected");
    c->add_option("--norm", o.norm, "Matrix measure: one | two | inf");
    c->add_option("--box", o.box, "Glucose box lo:hi [mg/dl]");
    c->add_option("--insulin-box", o.insulin_box, "Controller insulin box lo:hi");
  };
  auto add_run = [&](CLI::App* c) {
    c->add_option("--scenario", o.scenario, "Scenario: 1, 2A, 2B, 2C or 2D");
    c->add_option("--gains", o.gains, "Gain file written by synth");
    c->add_option("--seed", o.seed, "Master seed");
  };

  auto* synth = app.add_subcommand("synth", "Synthesize certified observer and controller gains");
  add_common(synth);
  add_cert(synth);
  synth->add_option("--margin", o.margin, "Required margin for both certificates");
  synth->add_option("--observer-margin", o.observer_margin, "Required observer margin");
  synth->add_option("--controller-margin", o.controller_margin, "Required controller margin");

  auto* check = app.add_subcommand("check", "Re-evaluate the certificates in a gain file");
  check->add_option("--gains", o.gains, "Gain file")->required();
  check->add_option("--subject", o.subject, "Subject label");
  check->add_option("--theta", o.theta, "Replace the metric: identity");
  check->add_option("--out", o.out, "Output directory");
  add_cert(check);

  auto* simulate = app.add_subcommand("simulate", "Nominal closed-loop run");
  add_common(simulate);
  add_run(simulate);

  auto* mc = app.add_subcommand("montecarlo", "Batch of perturbed closed-loop trials");
  add_common(mc);
  add_run(mc);
  mc->add_option("--trials", o.trials, "Number of trials");
  mc->add_option("--workers", o.workers, "Worker threads");

  auto* report = app.add_subcommand("report", "Metrics from a trajectory CSV");
  report->add_option("--trajectory", o.trajectory, "Trajectory CSV")->required();
  report->add_option("--out", o.out, "Output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return ok;
    }
    err << e.what() << "\n" << app.help();
    return config_error;
  }

  try {
    if (*synth) return cmd_synth(o, out, err);
    if (*check) return cmd_check(o, out, err);
    if (*simulate) return cmd_simulate(o, out, err);
    if (*mc) return cmd_montecarlo(o, out, err);
    return cmd_report(o, out, err);
  } catch (const Infeasible& e) {
    err << "infeasible: " << e.what() << "\n";
    return infeasible;
  } catch (const IntegrationError& e) {
    err << "integration error at t=" << e.time() << ": " << e.what() << "\n";
    return integration_error;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << "\n";
    return config_error;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return config_error;
  }
}

inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args, out, err);
}

}  // namespace glucoctl::cli
