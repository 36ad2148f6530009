// Command-line front end for the subjtag shared library. Talks to the engine
// exclusively through the C API in subjtag.h.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "subjtag.h"

namespace {

void print_log(const char* line, void* /*user_data*/) { std::printf("%s\n", line); }

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> sets;  // key=value overrides
    bool force = false;
    std::string seed;
    std::string k;
    std::string mode;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--set", flags.sets, "Override a config key (KEY=VALUE, repeatable)");
    cmd->add_flag("--force", flags.force, "Re-run even when outputs are newer than inputs");
    cmd->add_option("--seed", flags.seed, "Dataset generation seed");
    cmd->add_option("--k", flags.k, "Retrieval depth");
    cmd->add_option("--mode", flags.mode, "Representation mode: title|contextual|hierarchical");
}

int fail_with(subjtag_status status) {
    std::fprintf(stderr, "error: %s\n", subjtag_last_error());
    return static_cast<int>(status);
}

int apply_flags(subjtag_config* config, const CommonFlags& flags) {
    if (!flags.config_path.empty()) {
        if (auto s = subjtag_config_load(config, flags.config_path.c_str()); s != SUBJTAG_OK) {
            return fail_with(s);
        }
    }
    for (const std::string& kv : flags.sets) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects KEY=VALUE, got \"%s\"\n", kv.c_str());
            return static_cast<int>(SUBJTAG_ERR_CONFIG);
        }
        std::string key = kv.substr(0, eq);
        std::string value = kv.substr(eq + 1);
        if (auto s = subjtag_config_set(config, key.c_str(), value.c_str()); s != SUBJTAG_OK) {
            return fail_with(s);
        }
    }
    auto set_if = [config](const char* key, const std::string& value) -> int {
        if (value.empty()) return 0;
        if (auto s = subjtag_config_set(config, key, value.c_str()); s != SUBJTAG_OK) {
            return fail_with(s);
        }
        return 0;
    };
    if (int rc = set_if("seed", flags.seed); rc != 0) return rc;
    if (int rc = set_if("k", flags.k); rc != 0) return rc;
    if (int rc = set_if("mode", flags.mode); rc != 0) return rc;
    if (flags.force) {
        if (auto s = subjtag_config_set(config, "force", "true"); s != SUBJTAG_OK) {
            return fail_with(s);
        }
    }
    return 0;
}

using StageFn = subjtag_status (*)(const subjtag_config*);

int run_stage(const CommonFlags& flags, StageFn stage) {
    subjtag_config* config = subjtag_config_new();
    if (config == nullptr) {
        std::fprintf(stderr, "error: out of memory\n");
        return static_cast<int>(SUBJTAG_ERR_INTERNAL);
    }
    int rc = apply_flags(config, flags);
    if (rc == 0) {
        if (auto s = stage(config); s != SUBJTAG_OK) rc = fail_with(s);
    }
    subjtag_config_free(config);
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    subjtag_set_logger(print_log, nullptr);

    CLI::App app{std::string("subjtag ") + subjtag_version() +
                 " - controlled-vocabulary subject tagging pipeline"};
    app.require_subcommand(1);

    struct SubCmd {
        const char* name;
        const char* help;
        StageFn fn;
    };
    const std::vector<SubCmd> subcommands = {
        {"index", "Embed the taxonomy and write the subject index", subjtag_run_index},
        {"retrieve", "Write top-k candidate subjects per record", subjtag_run_retrieve},
        {"rerank", "Filter candidates with the match judge", subjtag_run_rerank},
        {"export-sts", "Write the contrastive sentence-pair CSV", subjtag_run_export_sts},
        {"export-sft", "Write the prompt/label JSONL", subjtag_run_export_sft},
        {"evaluate", "Score assignments against gold subjects", subjtag_run_evaluate},
        {"pipeline", "index + retrieve + rerank + evaluate", subjtag_run_pipeline},
    };

    std::vector<CommonFlags> flag_sets(subcommands.size());
    std::vector<StageFn> chosen;
    std::vector<const CommonFlags*> chosen_flags;
    for (std::size_t i = 0; i < subcommands.size(); ++i) {
        CLI::App* cmd = app.add_subcommand(subcommands[i].name, subcommands[i].help);
        add_common_flags(cmd, flag_sets[i]);
        StageFn fn = subcommands[i].fn;
        CommonFlags* flags = &flag_sets[i];
        cmd->callback([&chosen, &chosen_flags, fn, flags] {
            chosen.push_back(fn);
            chosen_flags.push_back(flags);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        // Usage problems are configuration errors; --help exits cleanly.
        return rc == 0 ? 0 : static_cast<int>(SUBJTAG_ERR_CONFIG);
    }

    if (chosen.empty()) return static_cast<int>(SUBJTAG_ERR_CONFIG);
    return run_stage(*chosen_flags.front(), chosen.front());
}
