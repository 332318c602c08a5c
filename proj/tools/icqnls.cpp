// Command-line driver for scenarios, probes, identity ladders and sweeps.

#include <glob.h>

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "icqnls/icqnls.hpp"

namespace {

using namespace icqnls;

struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int ladder = 3;
  bool quiet = false;
};

RunOptions options(const Flags& f) {
  RunOptions o;
  o.seed = f.seed;
  o.out_dir = f.out_dir;
  o.quiet = f.quiet;
  return o;
}

void report(const Flags& f, const std::string& what, const ojson& j) {
  if (f.quiet) return;
  std::cout << what << "\n" << j.dump(2) << "\n";
}

void print_first_failure(const ojson& s) {
  if (s.contains("first_failed_assertion") && !s["first_failed_assertion"].is_null())
    std::cerr << "assertion failed: " << s["first_failed_assertion"].dump() << "\n";
}

int do_run(const std::string& path, const Flags& f, const std::string& force_template = {}) {
  auto cfg = load_scenario(path);
  if (!force_template.empty()) {
    if (!cfg.template_name.empty() && cfg.template_name != force_template)
      throw ConfigError(path + ": template '" + cfg.template_name + "' does not match subcommand '" +
                        force_template + "'");
    if (cfg.template_name.empty()) {
      // re-parse so that template-specific validation and defaults apply
      std::ifstream in(path);
      std::stringstream ss;
      ss << in.rdbuf();
      auto j = ojson::parse(ss.str());
      j["template"] = force_template;
      cfg = parse_scenario(j.dump(2), path);
    }
  }
  auto res = run_scenario(cfg, options(f));
  if (!f.quiet) {
    ojson brief = {{"name", res.summary["name"]},
                   {"status", res.summary["status"]},
                   {"verdict", res.summary["verdict"]},
                   {"exit_code", res.exit_code}};
    for (const char* k : {"conservation", "residuals", "blowup", "scattering", "decay_fit"})
      if (res.summary.contains(k)) brief[k] = res.summary[k];
    if (brief.contains("blowup")) {
      brief["blowup"].erase("concavity_times");
      brief["blowup"].erase("concavity_margin");
    }
    report(f, "run " + path, brief);
  }
  print_first_failure(res.summary);
  return res.exit_code;
}

int do_probe(const std::string& path, const Flags& f) {
  auto res = run_probes(load_scenario(path), options(f));
  report(f, "probe " + path, res.summary);
  return res.exit_code;
}

int do_identities(const std::string& path, const Flags& f) {
  auto res = run_identity_ladder(load_scenario(path), f.ladder, options(f));
  report(f, "identities " + path, res.summary);
  print_first_failure(res.summary);
  return res.exit_code;
}

int do_sweep(const std::string& pattern, const Flags& f) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> paths;
  if (rc == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  if (paths.empty()) throw ConfigError("sweep: no configs match '" + pattern + "'");
  int worst = kExitOk;
  for (const auto& p : paths) {
    auto cfg = load_scenario(p);
    Flags each = f;
    if (f.out_dir) each.out_dir = *f.out_dir + "/" + cfg.name;
    const int code = cfg.has_run ? do_run(p, each) : do_probe(p, each);
    if (!f.quiet) std::cout << p << " -> exit " << code << "\n";
    // assertion failures dominate; blowup exits are statuses
    if (code == kExitAssertion || code == kExitConfig) worst = std::max(worst, code);
    else if (worst == kExitOk) worst = code;
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icqnls: pseudo-spectral simulator and diagnostics for the inhomogeneous cubic-quintic NLS"};
  app.require_subcommand(1);
  Flags flags;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* seed_opt = app.add_option("--seed", seed, "override the scenario seed");
  auto* out_opt = app.add_option("--out-dir", out_dir, "output directory (overrides 'outputs')");
  app.add_option("--dt-ladder", flags.ladder, "refinement levels for 'identities'")->check(CLI::Range(2, 8));
  app.add_flag("--quiet", flags.quiet, "suppress summaries on stdout");
  app.fallthrough();

  std::string target;
  auto* run = app.add_subcommand("run", "run a scenario");
  auto* probe = app.add_subcommand("probe", "run the inequality probes of a config");
  auto* ident = app.add_subcommand("identities", "conservation and identity residual dt ladder");
  auto* scatter = app.add_subcommand("scatter", "run a scenario under the scattering template");
  auto* blow = app.add_subcommand("blowup", "run a scenario under the blowup template");
  auto* sweep = app.add_subcommand("sweep", "run every config matching a glob");
  for (auto* s : {run, probe, ident, scatter, blow}) s->add_option("config", target, "scenario JSON")->required();
  sweep->add_option("glob", target, "config glob, e.g. 'configs/*.json'")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) flags.seed = seed;
  if (*out_opt) flags.out_dir = out_dir;

  try {
    if (*run) return do_run(target, flags);
    if (*probe) return do_probe(target, flags);
    if (*ident) return do_identities(target, flags);
    if (*scatter) return do_run(target, flags, "scattering");
    if (*blow) return do_run(target, flags, "blowup");
    if (*sweep) return do_sweep(target, flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
