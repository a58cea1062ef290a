#pragma once

// Command-line front end: single-file and batch conversion with
// machine-readable reports. Exposed as a library function so the tests can
// drive it in-process.

#include <mensura/convert.hpp>
#include <mensura/log.hpp>
#include <mensura/report.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#if defined(_WIN32)
#include <io.h>
#define MENSURA_ISATTY _isatty(_fileno(stdout))
#else
#include <unistd.h>
#define MENSURA_ISATTY isatty(fileno(stdout))
#endif

namespace mensura::cli {

struct CliConfig {
    std::vector<std::string> inputs;
    std::string output_dir = ".";
    std::string target = "cmn";
    bool mei_basic = false;
    std::string reading = "default";
    std::string report_format;  // empty = auto (text on a terminal, else json)
    bool fail_fast = false;
};

// Exit codes: 0 = converted cleanly, 1 = at least one file had errors,
// 2 = invalid arguments.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               bool stdout_is_tty = MENSURA_ISATTY) {
    CLI::App app{"CMME-XML to MEI converter"};
    app.require_subcommand(1);
    CliConfig cfg;

    CLI::App* convert = app.add_subcommand("convert", "Convert CMME files to MEI");
    convert->add_option("inputs", cfg.inputs, "CMME files or directories")->required();
    convert->add_option("--to", cfg.target, "Output flavour: mensural or cmn")
        ->check(CLI::IsMember({"mensural", "cmn"}))
        ->required();
    convert->add_flag("--mei-basic", cfg.mei_basic,
                      "Restrict CMN output to the MEI-Basic subset");
    convert->add_option("--reading", cfg.reading,
                        "Variant reading to select: a source id, or 'default'");
    convert->add_option("--out,-o", cfg.output_dir, "Output directory");
    convert->add_option("--report", cfg.report_format, "Report format")
        ->check(CLI::IsMember({"text", "json"}));
    convert->add_flag("--fail-fast", cfg.fail_fast, "Abort the batch on the first error");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            out << app.help();
            return 0;
        }
        std::cerr << "mensura: " << e.what() << "\n" << app.help();
        return 2;
    }

    if (cfg.target == "mensural" && cfg.mei_basic) {
        std::cerr << "mensura: --mei-basic applies to --to cmn only\n" << app.help();
        return 2;
    }

    ConvertOptions opts;
    opts.target = (cfg.target == "cmn") ? Target::Cmn : Target::Mensural;
    opts.mei_basic = cfg.mei_basic;
    opts.reading = (cfg.reading == "default" || cfg.reading.empty())
                       ? VariantSelector::defaults()
                       : VariantSelector::by_source(cfg.reading);

    // expand directories into batches; keep explicit files in command order
    std::vector<std::filesystem::path> files;
    for (const auto& input : cfg.inputs) {
        std::filesystem::path p(input);
        std::error_code ec;
        if (std::filesystem::is_directory(p, ec)) {
            for (auto& f : discover_inputs(p)) files.push_back(f);
        } else {
            files.push_back(p);
        }
    }

    std::filesystem::path out_dir(cfg.output_dir);
    std::error_code mk_ec;
    std::filesystem::create_directories(out_dir, mk_ec);

    BatchReport batch;
    bool aborted = false;
    for (const auto& file : files) {
        log(LogLevel::Info, "converting " + file.generic_string());
        ConvertResult result = convert_file(file, opts);
        if (result.ok) {
            std::filesystem::path target = out_dir / output_filename(file, opts.target);
            std::ofstream os(target, std::ios::binary);
            os << result.xml;
            if (!os) result.report.error("cannot write " + target.generic_string());
        }
        bool failed = !result.report.ok();
        batch.add(std::move(result.report));
        if (failed) {
            log(LogLevel::Error, "failed: " + file.generic_string());
            if (cfg.fail_fast) {
                aborted = true;
                break;
            }
        }
    }

    {
        std::ofstream rp(out_dir / "report.json", std::ios::binary);
        rp << batch.to_json().dump(2) << "\n";
    }

    bool as_json = cfg.report_format.empty() ? !stdout_is_tty : cfg.report_format == "json";
    if (as_json) out << batch.to_json().dump(2) << "\n";
    else out << batch.to_text();

    if (aborted) return 1;
    return batch.error_count() == 0 ? 0 : 1;
}

}  // namespace mensura::cli
