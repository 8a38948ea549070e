// stemgrow: run, compare and re-check growth simulations.
#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "stemgrow/error.hpp"
#include "stemgrow/scenario.hpp"

namespace sg = stemgrow;

namespace {

constexpr int kUsageError = 2;

int run_verb(const std::string& config_path, const std::string& out, std::size_t stride) {
  sg::SimConfig config = sg::load_config(config_path);
  if (stride > 0) config.stride = stride;
  const sg::RunResult r = sg::run_scenario(config, out);
  std::cout << sg::to_string(r.terminal) << ' ' << r.frames << " frames\n";
  return r.exit_status;
}

int twin_verb(const std::string& config_path, const std::string& perturb, const std::string& out) {
  const sg::SimConfig config = sg::load_config(config_path);
  const sg::TwinResult r = sg::twin_run(config, sg::parse_perturbation(perturb), out);
  std::cout << "samples " << r.distance.size() << " initial " << r.distance.front() << " terminal "
            << r.distance.back();
  if (r.has_certificate) {
    std::cout << " rate " << r.certificate.rate << '\n';
  } else {
    std::cout << " (" << r.certificate_note << ")\n";
  }
  const auto worst = std::max(sg::exit_code(r.terminal_a), sg::exit_code(r.terminal_b));
  return worst;
}

int audit_verb(const std::string& frames) {
  const sg::AuditSummary s = sg::audit_frames(frames);
  for (const auto& f : s.failures) std::cout << f << '\n';
  std::cout << (s.ok() ? "ok " : "FAILED ") << s.frames << " frames\n";
  return s.ok() ? 0 : 1;
}

int oracle_verb(const std::string& frames) {
  const sg::OracleSummary s = sg::oracle_check(frames);
  for (const auto& f : s.failures) std::cout << f << '\n';
  std::cout << (s.ok() ? "ok " : "FAILED ") << s.checked << " reactions checked, " << s.skipped
            << " skipped (more than 12 rows), max omega error " << s.max_omega_error << '\n';
  return s.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Growth of stems around rigid obstacles"};
  app.require_subcommand(1);
  std::size_t seed = 0;
  app.add_option("--seed", seed, "Reserved; the simulation is deterministic");

  std::string config, out, perturb, frames;
  std::size_t stride = 0;

  auto* run = app.add_subcommand("run", "Run a scenario to the horizon or breakdown");
  run->add_option("config", config, "Scenario config (or a run manifest)")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--stride", stride, "Write every n-th frame (overrides the config)")->check(CLI::PositiveNumber);

  auto* twin = app.add_subcommand("twin", "Run a scenario and a perturbed copy; record their distance");
  twin->add_option("config", config, "Scenario config")->required();
  twin->add_option("--perturb", perturb, "tilt:<delta>[:ax,ay,az]")->required();
  twin->add_option("--out", out, "Output directory")->required();

  auto* audit = app.add_subcommand("audit", "Re-check state invariants on stored frames");
  audit->add_option("frames", frames, "Run directory or frames.jsonl")->required();

  auto* oracle = app.add_subcommand("oracle-check", "Re-solve stored reactions by enumeration");
  oracle->add_option("frames", frames, "Run directory or frames.jsonl")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_verb(config, out, stride);
    if (*twin) return twin_verb(config, perturb, out);
    if (*audit) return audit_verb(frames);
    if (*oracle) return oracle_verb(frames);
  } catch (const sg::Error& e) {
    std::cerr << "stemgrow: " << e.what() << '\n';
    switch (e.kind()) {
      case sg::ErrorKind::ParseError:
      case sg::ErrorKind::ValidationError:
      case sg::ErrorKind::IoError:
        return kUsageError;
      default:
        return 20;
    }
  } catch (const std::exception& e) {
    std::cerr << "stemgrow: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}
