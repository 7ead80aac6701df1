#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "immersia/error.hpp"
#include "immersia/parallel.hpp"
#include "immersia/report.hpp"

namespace {

int fail(int status, const std::string& code, const std::string& message) {
  auto j = immersia::report_header("error");
  j["error"] = code;
  j["message"] = message;
  std::cerr << immersia::dump_report(j) << std::endl;
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"immersia: curvature energies, slices and charts of sampled immersions"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads; IMMERSIA_THREADS or all cores when absent")
      ->check(CLI::NonNegativeNumber);
  const auto commands = immersia::cli::register_commands(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  immersia::set_thread_count(threads);
  try {
    for (const auto& c : commands)
      if (c.app->parsed()) return c.run();
    return fail(2, "usage", "no subcommand");
  } catch (const immersia::Error& e) {
    return fail(1, immersia::error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}
