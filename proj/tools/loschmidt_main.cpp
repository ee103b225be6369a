#include <CLI11.hpp>

#include "loschmidt/commands.hpp"
#include "loschmidt/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Loschmidt echo estimators: semiclassical dephasing representations "
               "with an exact grid reference"};
  app.set_version_flag("--version", std::string(loschmidt::kVersion));
  app.require_subcommand(1);

  loschmidt::CliOptions opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config_path, "JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("-w,--workers", opts.workers_override,
                    "worker threads (overrides LOSCHMIDT_WORKERS and the config; 0 = auto)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("-o,--output", opts.output_dir, "output directory (default: .)");
    sub->add_option("--format", opts.format, "data file format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("-v,--verbose", opts.verbose, "print per-method summaries");
  };

  CLI::App* run = app.add_subcommand("run", "compute echo series for one configuration");
  add_common(run);
  CLI::App* cmp = app.add_subcommand(
      "compare", "compute echo series and report pairwise method differences");
  add_common(cmp);
  CLI::App* sweep = app.add_subcommand(
      "sweep", "repeat a run over the parameter values in the config's sweep block");
  add_common(sweep);
  CLI::App* selftest =
      app.add_subcommand("selftest", "run built-in convention and consistency checks");
  selftest->add_flag("--flip-cayley-convention", opts.flip_cayley,
                     "negative control: flip the Cayley sign convention (must fail)");
  selftest->add_flag("-v,--verbose", opts.verbose, "print per-method summaries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) return loschmidt::cmd_run(opts);
  if (cmp->parsed()) return loschmidt::cmd_compare(opts);
  if (sweep->parsed()) return loschmidt::cmd_sweep(opts);
  return loschmidt::cmd_selftest(opts);
}
