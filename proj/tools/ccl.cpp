// ccl <command> --config <path> --out <dir> [--seed N] [--tol X]
#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "ccl/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cone calculus, conformal tensors and fully nonlinear solves"};
  std::string command, config, out;
  std::uint64_t seed = 1;
  std::optional<double> tol;
  app.add_option("command", command, "cone-report | ellipticity | verify-identities | construct | solve | suite")
      ->required()
      ->check(CLI::IsMember({"cone-report", "ellipticity", "verify-identities", "construct", "solve", "suite"}));
  app.add_option("--config", config, "JSON configuration")->required();
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--seed", seed, "random seed");
  app.add_option("--tol", tol, "tolerance override");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ccl::kExitConfig;
  }

  ccl::CommandOptions opt;
  opt.seed = seed;
  opt.tol = tol;
  opt.base_dir = std::filesystem::path(config).parent_path();
  if (tol && !(*tol > 0.0)) {
    std::cerr << "error: --tol must be positive\n";
    return ccl::kExitConfig;
  }

  const auto t0 = std::chrono::steady_clock::now();
  ccl::io::json cfg;
  try {
    cfg = ccl::io::load_json(config);
  } catch (const ccl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ccl::kExitConfig;
  }
  const ccl::CommandFn fn = command == "suite" ? ccl::CommandFn(ccl::commands::suite) : *ccl::find_command(command);
  const auto res = ccl::run_command(fn, cfg, opt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    ccl::write_result(res, command, cfg, out, opt, wall);
  } catch (const ccl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ccl::kExitConfig;
  }
  if (command == "suite")
    for (const auto& row : ccl::io::parse_json(res.artifacts.empty() ? "{}" : res.artifacts.front().second, "suite")
                               .value("criteria", ccl::io::json::array()))
      std::cout << (row["passed"].get<bool>() ? "PASS" : "FAIL") << " criterion " << row["criterion"].get<std::string>() << ": "
                << row["detail"].get<std::string>() << "\n";
  if (!res.message.empty()) std::cerr << (res.exit_code ? "error: " : "") << res.message << "\n";
  return res.exit_code;
}
