#include "marscache/marscache.h"

#include "CLI11.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace {

struct Options {
    std::string              config_path;
    std::vector<std::string> overrides;
    std::string              output_dir;
    std::string              mode;
    bool                     print_config = false;
};

int report(mc_status st) {
    if (st != MC_OK) {
        std::fprintf(stderr, "error: %s: %s\n", mc_status_string(st), mc_last_error());
    }
    return static_cast<int>(st);
}

int run(const std::string & command, const Options & opt) {
    std::vector<std::string> sets = opt.overrides;
    if (!opt.output_dir.empty()) {
        sets.push_back("output_dir=\"" + opt.output_dir + "\"");
    }
    std::vector<const char *> ptrs;
    for (const auto & s : sets) {
        ptrs.push_back(s.c_str());
    }
    mc_config * cfg = nullptr;
    mc_status   st  = mc_config_load_with_overrides(opt.config_path.empty() ? nullptr : opt.config_path.c_str(),
                                                    ptrs.data(), ptrs.size(), &cfg);
    if (st != MC_OK) {
        return report(st);
    }
    if (opt.print_config) {
        char * text = nullptr;
        if ((st = mc_config_to_json(cfg, &text)) == MC_OK) {
            std::printf("%s\n", text);
            mc_string_free(text);
        }
        mc_config_free(cfg);
        return report(st);
    }

    char * summary = nullptr;
    if (command == "decode") {
        st = mc_cmd_decode(cfg, &summary);
    } else if (command == "bench") {
        st = mc_cmd_bench(cfg, &summary);
    } else {
        st = mc_cmd_analyze(cfg, opt.mode.c_str(), &summary);
    }
    if (summary != nullptr) {
        std::printf("%s\n", summary);
        mc_string_free(summary);
    }
    mc_config_free(cfg);
    return report(st);
}

void add_common(CLI::App * sub, Options & opt) {
    sub->add_option("config", opt.config_path, "run config (JSON); defaults apply when omitted")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", opt.overrides, "override a config key, e.g. decode.num_steps=128")->take_all();
    sub->add_option("-o,--output-dir", opt.output_dir, "override output_dir");
    sub->add_flag("--print-config", opt.print_config, "print the resolved config and exit");
}

}  // namespace

int main(int argc, char ** argv) {
    CLI::App app{"Masked-diffusion decoding with modality-aware cache refreshing"};
    app.set_version_flag("--version", std::string(mc_version()));
    app.require_subcommand(1);

    Options opt;
    auto *  decode = app.add_subcommand("decode", "decode once; writes tokens.txt, trace.jsonl, config.resolved.json");
    add_common(decode, opt);
    auto * bench = app.add_subcommand("bench", "compare the config's engines against vanilla; writes bench.csv");
    add_common(bench, opt);
    auto * analyze = app.add_subcommand("analyze", "run an analysis; writes <mode>.csv");
    analyze->add_option("-m,--mode", opt.mode, "drift | sparsity | visibility | relocation | cost")->required();
    add_common(analyze, opt);

    CLI11_PARSE(app, argc, argv);

    const std::string command = decode->parsed() ? "decode" : bench->parsed() ? "bench" : "analyze";
    return run(command, opt);
}
