#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "qpgl/sweep.hpp"

int main(int argc, char** argv) {
    CLI::App app{"qpgl: finite-volume Green's function laboratory for quasi-periodic operators"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::int64_t seed_override = -1;
    int workers_override = 0;
    std::string out_override;

    for (const auto& name : qpgl::sweep_subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "path to the JSON config")->required();
        sub->add_option("--set", overrides, "dotted-path override key=value (repeatable)");
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--workers", workers_override, "override the worker count");
        sub->add_option("--out", out_override, "override the output directory");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string subcommand = app.get_subcommands().front()->get_name();

    try {
        qpgl::SweepConfig cfg = qpgl::load_config_file(config_path);
        qpgl::Json doc = cfg.doc;
        for (const auto& o : overrides) qpgl::apply_override(doc, o);
        if (seed_override >= 0) doc["seed"] = static_cast<std::uint64_t>(seed_override);
        if (workers_override > 0) doc["workers"] = workers_override;
        if (!out_override.empty()) doc["out"] = out_override;
        cfg = qpgl::parse_config(std::move(doc));

        const qpgl::SweepResult res = qpgl::run_sweep(subcommand, cfg);
        long failed = 0;
        for (const auto& r : res.records)
            if (!r.status.empty()) ++failed;
        std::fprintf(stdout, "qpgl %s: %zu tasks, %ld failed, outputs in %s (digest %s)\n",
                     subcommand.c_str(), res.records.size(), failed, cfg.out_dir.c_str(),
                     cfg.digest.c_str());
        if (subcommand == "selftest")
            for (const auto& r : res.records) {
                std::string name, pass, detail;
                for (const auto& [k, v] : r.fields) {
                    if (k == "check") name = v;
                    if (k == "pass") pass = v;
                    if (k == "detail") detail = v;
                }
                std::fprintf(stdout, "  [%s] %s (%s)\n", pass == "true" ? "ok" : "FAIL", name.c_str(),
                             detail.c_str());
            }
        return failed == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "qpgl: %s\n", e.what());
        return 2;
    }
}
