#include "lse/lse.h"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace {

int report(lse_status s)
{
    std::fprintf(stderr, "lse: %s: %s\n", lse_status_name(s), lse_last_error());
    return 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Large-system precoding experiments"};
    app.set_version_flag("--version", std::string(lse_version()));

    std::string mode;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 1;

    app.add_option("mode", mode, "replica | sweep | simulate | compare | calibrate | saving | plot")
        ->required()
        ->check(CLI::IsMember({"replica", "sweep", "simulate", "compare", "calibrate", "saving", "plot"}));
    app.add_option("--config", config_path, "experiment config (key = value with [sections])")
        ->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "override, section.key=value (repeatable)");
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "master seed, overrides simulation.seed");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    lse_config* config = nullptr;
    lse_status s = config_path.empty() ? lse_config_create(&config) : lse_config_load(config_path.c_str(), &config);
    if (s != LSE_OK)
        return report(s);

    for (const auto& o : overrides) {
        if ((s = lse_config_override(config, o.c_str())) != LSE_OK) {
            lse_config_destroy(config);
            return report(s);
        }
    }
    if (*seed_opt) {
        const std::string v = std::to_string(seed);
        if ((s = lse_config_set(config, "simulation.seed", v.c_str())) != LSE_OK) {
            lse_config_destroy(config);
            return report(s);
        }
    }

    lse_run_options opts{out_dir.c_str(), threads};
    s = lse_run(config, mode.c_str(), &opts);
    lse_config_destroy(config);
    if (s != LSE_OK)
        return report(s);
    return 0;
}
