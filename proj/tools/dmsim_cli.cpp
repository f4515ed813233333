#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "dmsim/control_api.hpp"
#include "dmsim/deployer.hpp"
#include "dmsim/detection.hpp"
#include "dmsim/scenario.hpp"
#include "dmsim/timeline.hpp"

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dmsim::Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw dmsim::Error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for dead man's switch PLC extortion"};
  app.require_subcommand(1);

  std::string scenario_path, trace_out, flows_out;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run a scenario and evaluate its assertions");
  run->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--trace-out", trace_out, "Write the trace here");
  run->add_option("--flows-out", flows_out, "Write the flow log CSV here");

  std::string trace_path;
  auto* replay = app.add_subcommand("replay", "Evaluate a scenario's assertions against a recorded trace");
  replay->add_option("trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  replay->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);

  std::string devices;
  auto* timeline = app.add_subcommand("timeline", "Per-second poll/alert grid from a trace");
  timeline->add_option("trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  timeline->add_option("--devices", devices, "Comma-separated device ids");

  auto* detect = app.add_subcommand("detect", "Passive flow baseline and anomaly scan");
  detect->require_subcommand(1);
  std::string flows_path, baseline_path, alerts_out;
  std::int64_t from_ms = 0, to_ms = 0;
  auto* learn = detect->add_subcommand("learn", "Learn a baseline from a flow log window");
  learn->add_option("flows", flows_path, "Flow log CSV")->required()->check(CLI::ExistingFile);
  learn->add_option("--from", from_ms, "Window start (ms)");
  learn->add_option("--to", to_ms, "Window end (ms, exclusive)")->required();
  learn->add_option("--out", baseline_path, "Baseline JSON")->required();
  double factor = 3.0;
  auto* scan = detect->add_subcommand("scan", "Scan a flow log against a baseline");
  scan->add_option("flows", flows_path, "Flow log CSV")->required()->check(CLI::ExistingFile);
  scan->add_option("--baseline", baseline_path, "Baseline JSON")->required()->check(CLI::ExistingFile);
  scan->add_option("--factor", factor, "Period anomaly factor")->check(CLI::PositiveNumber);
  scan->add_option("--out", alerts_out, "Alert CSV (stdout when omitted)");

  std::string project_path;
  std::optional<std::string> credential;
  auto* check = app.add_subcommand("deploy-check", "Validate a pristine fleet against its project");
  check->add_option("project", project_path, "Project file")->required()->check(CLI::ExistingFile);
  check->add_option("--credential", credential, "PLC configuration password");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the /v1 control API");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto script = dmsim::load_scenario(scenario_path);
      const auto report = dmsim::run_scenario(script, seed);
      if (!trace_out.empty()) spill(trace_out, dmsim::trace_to_string(report.trace));
      if (!flows_out.empty()) {
        std::ofstream out(flows_out);
        dmsim::write_flows(out, report.flows);
      }
      std::cout << report.to_text();
      return report.passed() ? 0 : 1;
    }
    if (*replay) {
      const auto script = dmsim::load_scenario(scenario_path);
      const auto report = dmsim::replay_trace(dmsim::read_trace_file(trace_path), script);
      std::cout << report.to_text();
      return report.passed() ? 0 : 1;
    }
    if (*timeline) {
      const auto tl = dmsim::emit_timeline(dmsim::read_trace_file(trace_path), split(devices, ','));
      dmsim::write_timeline(std::cout, tl);
      return 0;
    }
    if (*learn) {
      const auto b = dmsim::learn_baseline(dmsim::read_flows_file(flows_path), dmsim::SimTime{from_ms},
                                           dmsim::SimTime{to_ms});
      spill(baseline_path, dmsim::baseline_to_json(b));
      std::cout << "learned " << b.learned.size() << " flow keys\n";
      return 0;
    }
    if (*scan) {
      const auto b = dmsim::baseline_from_json(slurp(baseline_path));
      const auto alerts = dmsim::detect(b, dmsim::read_flows_file(flows_path), dmsim::DetectOptions{factor});
      if (alerts_out.empty()) {
        dmsim::write_alerts(std::cout, alerts);
      } else {
        std::ofstream out(alerts_out);
        dmsim::write_alerts(out, alerts);
      }
      return alerts.empty() ? 0 : 2;
    }
    if (*check) {
      const auto project = dmsim::load_project(project_path);
      dmsim::Fleet fleet(project, dmsim::FleetOptions{});
      const auto rep = dmsim::validate_online(fleet, project, credential);
      for (const auto& p : rep.plcs) {
        std::cout << p.device << ' ' << dmsim::to_string(p.match) << '\n';
        for (const auto& d : p.diffs) std::cout << "  " << dmsim::to_string(d.change) << ' ' << d.artifact << '\n';
      }
      return rep.all_full_match() ? 0 : 1;
    }
    if (*serve) {
      dmsim::ControlServer server;
      std::cout << "listening on " << host << ':' << port << std::endl;
      server.listen(host, port);
      return 0;
    }
  } catch (const dmsim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
