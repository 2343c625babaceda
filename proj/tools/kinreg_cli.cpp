#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "kinreg/kinreg.h"

namespace {

int fail(kr_status st) {
  std::cerr << "kinreg: " << kr_last_error() << "\n";
  return st == KR_CONFIG ? 2 : 3;
}

int run(kr_mode mode, const std::string& config, const std::string& out, std::optional<std::uint64_t> seed) {
  kr_scenario* sc = nullptr;
  if (kr_status st = kr_scenario_load(config.c_str(), &sc); st != KR_OK) return fail(st);
  if (seed) kr_scenario_set_seed(sc, *seed);
  if (!out.empty()) kr_scenario_set_output(sc, out.c_str());
  int passed = 0;
  char* summary = nullptr;
  const kr_status st = kr_run(sc, mode, nullptr, &passed, &summary);
  kr_scenario_destroy(sc);
  if (st != KR_OK) return fail(st);

  const auto j = nlohmann::ordered_json::parse(summary);
  kr_string_free(summary);
  if (!j["solve"].is_null()) {
    const auto& s = j["solve"];
    std::printf("solve  %-10s iterations=%d residual=%s\n", s["status"].get<std::string>().c_str(),
                s["iterations"].get<int>(), s["residual"].dump().c_str());
  }
  for (const auto& c : j["checks"]) {
    std::printf("%-4s %-22s sup=%s stability=%s%s\n", c["passed"].get<bool>() ? "PASS" : "FAIL",
                c["name"].get<std::string>().c_str(), c["sup_or_violations"].dump().c_str(),
                c["stability_ratio"].dump().c_str(), c["asserted"].get<bool>() ? "" : " (not asserted)");
  }
  std::printf("%s\n", passed ? "all asserted checks passed" : "asserted failures present");
  return passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinreg: linearized Boltzmann boundary-value solver and estimate verifier"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: hardware concurrency)");

  std::string config, out;
  std::optional<std::uint64_t> seed;
  auto scenario_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides the scenario)");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--threads", threads, "worker threads");
  };
  CLI::App* solve = app.add_subcommand("solve", "solve and write the field checkpoint");
  scenario_opts(solve);
  CLI::App* verify = app.add_subcommand("verify", "solve if needed and run the scenario's checks");
  scenario_opts(verify);
  CLI::App* list = app.add_subcommand("list-checks", "print the check registry");
  list->add_option("--threads", threads, "ignored");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) kr_set_threads(static_cast<int>(threads));

  if (*list) {
    char* json = nullptr;
    if (kr_status st = kr_list_checks(&json); st != KR_OK) return fail(st);
    const auto j = nlohmann::ordered_json::parse(json);
    kr_string_free(json);
    for (const auto& e : j) {
      std::printf("%-22s %s%s\n", e["name"].get<std::string>().c_str(), e["statement"].get<std::string>().c_str(),
                  e["needs_field"].get<bool>() ? "  [solved field]" : "");
    }
    std::printf("%zu checks\n", j.size());
    return 0;
  }
  return run(*solve ? KR_MODE_SOLVE : KR_MODE_VERIFY, config, out, seed);
}
