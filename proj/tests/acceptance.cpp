// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include "corpus.hpp"

namespace {

using namespace dmsim;
using namespace dmsim::testing;

struct Criterion {
  bool ok = true;
  std::string note;

  void fail(const std::string& why) {
    if (ok) note = why;
    ok = false;
  }
  void check(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
};

std::size_t audit_count = 0;
std::size_t audit_traces = 0;
std::vector<std::string> audit_failures;

void audit(const TraceLog& t, const std::string& what) {
  ++audit_traces;
  for (const auto& v : audit_trace(t)) {
    ++audit_count;
    if (audit_failures.size() < 5) {
      audit_failures.push_back(what + ": " + v.invariant + " " + v.device + " at " + std::to_string(v.t.ms));
    }
  }
}

ScenarioScript fixture_scenario(int n) {
  return load_scenario(fixture("scenarios/scenario" + std::to_string(n) + ".json"));
}

std::pair<ScenarioReport, double> timed_run(const ScenarioScript& s) {
  const auto start = std::chrono::steady_clock::now();
  auto rep = run_scenario(s);
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
  return {std::move(rep), wall.count()};
}

std::string secs(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f s", s);
  return buf;
}

Criterion scenario_one() {
  Criterion v;
  const auto [rep, wall] = timed_run(fixture_scenario(1));
  audit(rep.trace, "scenario1");
  std::optional<SimTime> last_ok;
  for (const auto* r : records_of(rep.trace, kind::poll_sent, "EW")) {
    if (*r->field("target") == "PLC3") last_ok = r->t;
  }
  v.check(last_ok == SimTime{24000}, "last successful poll to PLC3 not at 24000 ms");
  bool failed_25 = false;
  for (const auto* r : records_of(rep.trace, kind::poll_failed, "EW")) {
    failed_25 |= r->t == SimTime{25000} && *r->field("target") == "PLC3";
  }
  v.check(failed_25, "no failed poll to PLC3 at 25000 ms");
  for (const auto& d : rep.trace.header.devices) {
    const auto a = first_time(rep.trace, kind::alert_raised, d.id);
    v.check(a && *a <= SimTime{26100}, d.id + " did not alert by 26100 ms");
    if (d.kind == "plc") {
      const auto o = first_time(rep.trace, kind::outputs_on, d.id);
      v.check(o && *o <= SimTime{26100}, d.id + " outputs not on by 26100 ms");
    }
  }
  v.check(rep.passed(), "fixture assertions failed");
  v.check(wall < 5.0, "wall time " + secs(wall));
  if (v.ok) v.note = "wall " + secs(wall);
  return v;
}

Criterion scenario_two() {
  Criterion v;
  const auto [rep, wall] = timed_run(fixture_scenario(2));
  audit(rep.trace, "scenario2");
  for (const auto& d : rep.trace.header.devices) {
    if (d.kind != "plc") continue;
    const auto a = first_time(rep.trace, kind::alert_raised, d.id);
    v.check(a && *a >= SimTime{15000} - d.scan_interval && *a <= SimTime{15000} + d.scan_interval,
            d.id + " alert not at 15000 ms +- one scan");
    v.check(first_time(rep.trace, kind::outputs_on, d.id).has_value(), d.id + " has no outputs_on");
  }
  v.check(first_time(rep.trace, kind::polling_ceased, "EW") == SimTime{15000}, "workstation polling not ceased at 15000 ms");
  for (const auto* r : records_of(rep.trace, kind::poll_sent)) {
    v.check(r->t < SimTime{15000}, r->device + " polled at " + std::to_string(r->t.ms) + " ms");
  }
  v.check(rep.passed(), "fixture assertions failed");
  v.check(wall < 5.0, "wall time " + secs(wall));
  if (v.ok) v.note = "wall " + secs(wall);
  return v;
}

Criterion scenario_three() {
  Criterion v;
  const auto [rep, wall] = timed_run(fixture_scenario(3));
  audit(rep.trace, "scenario3");
  v.check(count_kind(rep.trace, kind::alert_raised) == 0, "alert_raised present");
  v.check(count_kind(rep.trace, kind::outputs_on) == 0, "outputs_on present");
  v.check(count_kind(rep.trace, kind::disarmed) > 0, "no disarmed record");
  bool late = false;
  for (const auto* r : records_of(rep.trace, kind::core_output)) late |= r->t > SimTime{15000};
  v.check(late, "no core-process records after 15000 ms");
  v.check(rep.passed(), "fixture assertions failed");
  v.check(wall < 5.0, "wall time " + secs(wall));
  if (v.ok) v.note = "wall " + secs(wall);
  return v;
}

Criterion no_false_positives() {
  Criterion v;
  std::set<int> sizes;
  std::size_t alerts = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto run = quiet_run(seed);
    sizes.insert(run.plcs);
    alerts += run.alerts;
    v.check(run.alerts == 0, "seed " + std::to_string(seed) + " alerted");
    v.check(run.scans >= 10000u * static_cast<std::uint64_t>(run.plcs) - run.plcs,
            "seed " + std::to_string(seed) + " ran only " + std::to_string(run.scans) + " scans");
    v.check(run.cycle_violations.empty(), "seed " + std::to_string(seed) + " cycle audit violation");
    audit(run.trace, "quiet seed " + std::to_string(seed));
  }
  v.check(sizes.size() == 8, "fleet sizes 3..10 not all covered");
  if (v.ok) v.note = "100 runs, 0 alerts";
  return v;
}

Criterion propagation_bound() {
  Criterion v;
  const auto cases = propagation_cases();
  for (const auto& c : cases) {
    const auto out = run_propagation(c);
    if (!out.failures.empty()) v.fail(c.describe() + ": " + out.failures.front());
    audit(out.trace, c.describe());
  }
  if (v.ok) v.note = std::to_string(cases.size()) + " fault cases";
  return v;
}

Criterion extra_corpus_for_audit() {
  Criterion v;
  const auto project = load_project(fixture("projects/figure6.json"));
  const std::size_t n = project.links.size() * 2;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        const auto w = latch_walk(project, {i, j, k});
        if (!w.failures.empty()) v.fail(w.failures.front());
        audit(w.trace, "latch walk");
      }
    }
  }
  return v;
}

Criterion trace_auditor(const Criterion& walks) {
  Criterion v = walks;
  if (audit_count > 0) v.fail(std::to_string(audit_count) + " violations, first " + audit_failures.front());
  if (v.ok) v.note = std::to_string(audit_traces) + " traces";
  return v;
}

Criterion determinism() {
  Criterion v;
  const auto dir = std::filesystem::temp_directory_path() / "dmsim_acceptance";
  std::filesystem::create_directories(dir);
  auto bytes_of = [&](const TraceLog& t, const std::string& name) {
    const auto path = dir / name;
    {
      std::ofstream out(path, std::ios::binary);
      write_trace(out, t);
    }
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  for (int n : {1, 2, 3}) {
    const auto s = fixture_scenario(n);
    v.check(bytes_of(run_scenario(s).trace, "a") == bytes_of(run_scenario(s).trace, "b"),
            "scenario" + std::to_string(n) + " differs");
  }
  for (std::uint64_t seed : {5, 8, 13}) {
    v.check(bytes_of(quiet_run(seed, 2000).trace, "a") == bytes_of(quiet_run(seed, 2000).trace, "b"),
            "seed " + std::to_string(seed) + " differs");
  }
  std::filesystem::remove_all(dir);
  return v;
}

Criterion detection_recall() {
  Criterion v;
  for (int n : {1, 2, 3}) {
    const auto s = fixture_scenario(n);
    const auto r = recall_check(s.project, s.seed, SimTime{30000}, s);
    if (!r.failures.empty()) v.fail("scenario" + std::to_string(n) + ": " + r.failures.front());
    audit(r.trace, "recall");
  }
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto project = chatty_project(seed);
    auto armed = armed_script(project, SimTime{30000});
    armed.dmplc.auto_arm_at = SimTime{10000};
    const auto r = recall_check(project, seed, SimTime{10000}, armed);
    if (!r.failures.empty()) v.fail("generated seed " + std::to_string(seed) + ": " + r.failures.front());
    audit(r.trace, "recall");
  }
  for (const auto& project : {load_project(fixture("projects/figure6.json")), load_project(fixture("projects/poc2.json"))}) {
    const auto [installed, diffed] = install_vs_diff(project);
    v.check(!installed.empty() && installed == diffed, "config diff differs from install report");
  }
  return v;
}

Criterion password_soundness() {
  Criterion v;
  const auto r = password_fuzz(1000, 20240611);
  v.check(r.attempts == 1000, "wrong attempt count");
  v.check(r.accepted == 0, std::to_string(r.accepted) + " credentials accepted");
  v.check(r.config_unchanged, "configuration changed");
  if (v.ok) v.note = "1000 credentials, 0 accepted";
  return v;
}

}  // namespace

Criterion guarded(const std::function<Criterion()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    Criterion v;
    v.fail(std::string("exception: ") + e.what());
    return v;
  }
}

int main() {
  std::map<int, std::pair<std::string, Criterion>> results;
  results[1] = {"scenario1-link-loss", guarded(scenario_one)};
  results[2] = {"scenario2-deadline", guarded(scenario_two)};
  results[3] = {"scenario3-disarm", guarded(scenario_three)};
  results[4] = {"no-false-positives", guarded(no_false_positives)};
  results[5] = {"propagation-bound", guarded(propagation_bound)};
  results[7] = {"determinism", guarded(determinism)};
  results[8] = {"detection-recall", guarded(detection_recall)};
  results[9] = {"password-soundness", guarded(password_soundness)};
  // The auditor runs over every trace produced above plus the latch walks.
  const Criterion walks = guarded(extra_corpus_for_audit);
  results[6] = {"trace-auditor", guarded([&] { return trace_auditor(walks); })};

  int failed = 0;
  for (const auto& [n, r] : results) {
    const auto& [name, v] = r;
    std::cout << (v.ok ? "PASS" : "FAIL") << " " << n << " " << name;
    if (!v.note.empty()) std::cout << " (" << v.note << ")";
    std::cout << "\n";
    failed += !v.ok;
  }
  return failed == 0 ? 0 : 1;
}
