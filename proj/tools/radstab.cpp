#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include "radstab/cli.hpp"
#include "radstab/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Radial stability analysis for u'' + (N-1)/r u' + f(u) = 0"};
  std::string config_path = "-";
  std::optional<std::string> out;
  std::optional<double> rmax, rtol, atol;
  std::optional<int> threads;
  app.add_option("config", config_path, "JSON run config; '-' or absent reads standard input");
  app.add_option("--out", out, "Output directory");
  app.add_option("--rmax", rmax, "Integration range")->check(CLI::PositiveNumber);
  app.add_option("--rtol", rtol, "Relative tolerance")->check(CLI::PositiveNumber);
  app.add_option("--atol", atol, "Absolute tolerance")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  radstab::Json summary;
  int code = 0;
  std::string dir;
  try {
    std::string text;
    if (config_path == "-") {
      text.assign(std::istreambuf_iterator<char>(std::cin), {});
    } else {
      std::ifstream f(config_path);
      if (!f) throw radstab::ConfigError("cannot read " + config_path);
      text.assign(std::istreambuf_iterator<char>(f), {});
    }
    radstab::Json j;
    try {
      j = radstab::Json::parse(text);
    } catch (const radstab::Json::exception& e) {
      throw radstab::ConfigError(std::string("invalid JSON: ") + e.what());
    }
    if (j.is_object()) {
      if (out) j["out"] = *out;
      if (rmax) j["r_max"] = *rmax;
      if (rtol) j["rtol"] = *rtol;
      if (atol) j["atol"] = *atol;
      if (threads) j["threads"] = *threads;
    }
    const auto cfg = radstab::parse_config(j);
    dir = cfg.out;
    std::cerr << "radstab: running " << radstab::to_string(cfg.command) << "\n";
    const auto result = radstab::run(cfg);
    radstab::write_artifacts(result, dir);
    code = result.exit_code;
    summary = {{"command", result.report["command"]},
               {"config_hash", result.report["config_hash"]},
               {"exit_code", code},
               {"headline", result.report.value("headline", "")},
               {"out", dir}};
    if (result.report.contains("error")) summary["error"] = result.report["error"];
    std::cerr << result.summary;
  } catch (const std::exception& e) {
    code = radstab::exit_code_for(e);
    summary = {{"exit_code", code}, {"error", {{"message", e.what()}}}};
    std::cerr << "radstab: " << e.what() << "\n";
    if (dir.empty()) dir = out.value_or("radstab-out");
    summary["out"] = dir;
    try {
      radstab::RunResult r;
      r.exit_code = code;
      r.report = summary;
      r.summary = std::string("error: ") + e.what() + "\n";
      radstab::write_artifacts(r, dir);
    } catch (const std::exception& w) {
      std::cerr << "radstab: " << w.what() << "\n";
    }
  }
  std::cout << radstab::dump_json(summary, 0) << "\n";
  return code;
}
