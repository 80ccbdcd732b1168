#pragma once

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "campfin/pipeline.hpp"

namespace campfin::cli {

namespace detail {

/// Per-subcommand 'key=value' setters so a config file can override any flag
/// after the command line is parsed (config wins, by contract).
using OverrideMap = std::map<std::string, std::function<void(const std::string&)>>;

inline void apply_config_overrides(const std::filesystem::path& config_path,
                                   const OverrideMap& setters) {
    std::ifstream in(config_path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + config_path.string());
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto trimmed = ingest::detail::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--config", "line " + std::to_string(row) +
                                                       " is not key=value");
        const std::string key = ingest::detail::trim(trimmed.substr(0, eq));
        const std::string value = ingest::detail::trim(trimmed.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw CLI::ValidationError("--config", "unknown key '" + key + "'");
        it->second(value);
    }
}

inline report::ReportFormat parse_format(const std::string& text) {
    if (text == "csv") return report::ReportFormat::Csv;
    if (text == "md" || text == "markdown") return report::ReportFormat::Markdown;
    if (text == "tex" || text == "latex") return report::ReportFormat::Latex;
    throw CLI::ValidationError("--format", "unknown format '" + text + "'");
}

}  // namespace detail

/// Entry point behind the campfin binary: 0 success, 1 analysis error,
/// 2 usage error.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Electoral campaign finance forensics: descriptive statistics, "
                 "Benford conformance tests, donation-model synthesis and "
                 "election-outcome regressions over TSE-layout data files."};
    app.require_subcommand(1);

    std::string config_path;
    const char* env_data = std::getenv("CAMPFIN_DATA_DIR");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "Check files against an MD5 manifest");
    pipeline::VerifyOptions verify_options;
    verify_cmd->add_option("--manifest", verify_options.manifest, "manifest file")->required();
    verify_cmd->add_option("--data", verify_options.base_dir,
                           "directory holding the listed files (default: manifest's)");

    // ingest
    auto* ingest_cmd =
        app.add_subcommand("ingest", "Parse a TSE-layout donations file to canonical CSV");
    pipeline::IngestOptions ingest_options;
    ingest_cmd->add_option("--input", ingest_options.input, "donations file")->required();
    ingest_cmd->add_option("--schema", ingest_options.schema, "schema config")->required();
    ingest_cmd->add_option("--output", ingest_options.output, "canonical CSV path")->required();

    // stats / benford / fit-model share their option shape
    pipeline::TableOptions stats_options, benford_options, fit_options;
    std::string stats_format = "csv", benford_format = "csv", fit_format = "csv";
    auto* stats_cmd = app.add_subcommand("stats", "Descriptive statistics per donation set");
    stats_cmd->add_option("--input", stats_options.input, "canonical donations CSV")->required();
    stats_cmd->add_option("--by", stats_options.by, "grouping keys (party,category)");
    stats_cmd->add_option("--output", stats_options.output, "table path")->required();
    stats_cmd->add_option("--format", stats_format, "csv|md|tex");

    auto* benford_cmd = app.add_subcommand("benford", "Benford first-digit tests per set");
    benford_cmd->add_option("--input", benford_options.input, "canonical donations CSV")
        ->required();
    benford_cmd->add_option("--by", benford_options.by, "grouping keys (party,category)");
    benford_cmd->add_option("--min-n", benford_options.min_n,
                            "smallest set size tested (default 21)");
    benford_cmd->add_option("--output", benford_options.output, "table path")->required();
    benford_cmd->add_option("--format", benford_format, "csv|md|tex");

    auto* fit_cmd = app.add_subcommand("fit-model", "Fit the donation model per set");
    fit_cmd->add_option("--input", fit_options.input, "canonical donations CSV")->required();
    fit_cmd->add_option("--by", fit_options.by, "grouping keys (party,category)");
    fit_cmd->add_option("--output", fit_options.output, "table path")->required();
    fit_cmd->add_option("--format", fit_format, "csv|md|tex");

    // synth
    auto* synth_cmd =
        app.add_subcommand("synth", "Draw matched Rand/Model synthetic control sets");
    pipeline::SynthOptions synth_options;
    synth_cmd->add_option("--input", synth_options.input, "canonical donations CSV")->required();
    synth_cmd->add_option("--output-dir", synth_options.out_dir, "directory for the sets")
        ->required();
    synth_cmd->add_option("--seed", synth_options.seed, "random seed (fixed default)");
    synth_cmd->add_flag("--combined", [&](std::int64_t) { synth_options.by_party = false; },
                        "one combined group instead of per party");

    // logit
    auto* logit_cmd =
        app.add_subcommand("logit", "Logistic regression of outcome on donation share");
    pipeline::LogitOptions logit_options;
    std::string logit_format = "csv";
    std::string logit_outcomes_schema, logit_diag_dir;
    logit_cmd->add_option("--donations", logit_options.donations, "canonical donations CSV")
        ->required();
    logit_cmd->add_option("--outcomes", logit_options.outcomes, "election results file")
        ->required();
    logit_cmd->add_option("--outcomes-schema", logit_outcomes_schema,
                          "schema for a raw results export (omit for canonical CSV)");
    logit_cmd->add_option("--office", logit_options.office_filter,
                          "only offices containing this text");
    logit_cmd->add_option("--output", logit_options.output, "table path")->required();
    logit_cmd->add_option("--format", logit_format, "csv|md|tex");
    logit_cmd->add_option("--diagnostics-dir", logit_diag_dir,
                          "emit per-candidate fitted probabilities here");

    // report (re-format a CSV table)
    auto* report_cmd =
        app.add_subcommand("report", "Re-emit a CSV table as Markdown or LaTeX");
    pipeline::ReformatOptions reformat_options;
    std::string report_format = "md";
    report_cmd->add_option("--input", reformat_options.input, "CSV table")->required();
    report_cmd->add_option("--output", reformat_options.output, "output path")->required();
    report_cmd->add_option("--format", report_format, "md|tex|csv");

    // pipeline
    auto* pipeline_cmd = app.add_subcommand("pipeline", "Run the full analysis flow");
    pipeline::PipelineOptions pipeline_options;
    if (env_data) pipeline_options.data_dir = env_data;
    auto* data_opt = pipeline_cmd->add_option("--data", pipeline_options.data_dir,
                                              "data directory (or $CAMPFIN_DATA_DIR)");
    if (!env_data) data_opt->required();
    pipeline_cmd->add_option("--schema", pipeline_options.schema, "donations schema")
        ->required();
    pipeline_cmd
        ->add_option("--outcomes-schema", pipeline_options.outcomes_schema, "results schema")
        ->required();
    pipeline_cmd->add_option("--out", pipeline_options.out_dir, "output directory")->required();
    pipeline_cmd->add_option("--seed", pipeline_options.seed, "random seed (fixed default)");
    pipeline_cmd->add_option("--min-n", pipeline_options.min_set_size,
                             "smallest set size tested (default 21)");
    pipeline_cmd->add_option("--jobs", pipeline_options.jobs,
                             "worker threads (default: processors)");
    pipeline_cmd->add_option("--office", pipeline_options.office_filter,
                             "regress only offices containing this text");
    pipeline_cmd->add_flag("--diagnostics", pipeline_options.diagnostics,
                           "per-candidate regression dumps");
    pipeline_cmd->add_option("--config", config_path,
                             "key=value file overriding any pipeline flag");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? pipeline::kExitOk : pipeline::kExitUsageError;
    }

    try {
        if (*verify_cmd) {
            const auto result = pipeline::run_verify(verify_options);
            for (const auto& e : result.entries)
                std::cout << (e.ok ? "OK    " : "FAIL  ") << e.filename
                          << (e.detail.empty() ? "" : "  (" + e.detail + ")") << "\n";
            return result.all_ok() ? pipeline::kExitOk : pipeline::kExitAnalysisError;
        }
        if (*ingest_cmd) return pipeline::run_ingest(ingest_options, std::cerr);
        if (*stats_cmd) {
            stats_options.format = detail::parse_format(stats_format);
            return pipeline::run_stats(stats_options);
        }
        if (*benford_cmd) {
            benford_options.format = detail::parse_format(benford_format);
            return pipeline::run_benford(benford_options);
        }
        if (*fit_cmd) {
            fit_options.format = detail::parse_format(fit_format);
            return pipeline::run_fit_model(fit_options, std::cerr);
        }
        if (*synth_cmd) return pipeline::run_synth(synth_options, std::cerr);
        if (*logit_cmd) {
            logit_options.format = detail::parse_format(logit_format);
            if (!logit_outcomes_schema.empty())
                logit_options.outcomes_schema = logit_outcomes_schema;
            if (!logit_diag_dir.empty()) logit_options.diagnostics_dir = logit_diag_dir;
            return pipeline::run_logit(logit_options, std::cerr);
        }
        if (*report_cmd) {
            reformat_options.format = detail::parse_format(report_format);
            return pipeline::run_reformat(reformat_options);
        }
        if (*pipeline_cmd) {
            if (!config_path.empty()) {
                detail::OverrideMap setters{
                    {"data", [&](const std::string& v) { pipeline_options.data_dir = v; }},
                    {"schema", [&](const std::string& v) { pipeline_options.schema = v; }},
                    {"outcomes-schema",
                     [&](const std::string& v) { pipeline_options.outcomes_schema = v; }},
                    {"out", [&](const std::string& v) { pipeline_options.out_dir = v; }},
                    {"seed",
                     [&](const std::string& v) { pipeline_options.seed = std::stoull(v); }},
                    {"min-n",
                     [&](const std::string& v) {
                         pipeline_options.min_set_size = std::stoull(v);
                     }},
                    {"jobs",
                     [&](const std::string& v) {
                         pipeline_options.jobs = static_cast<unsigned>(std::stoul(v));
                     }},
                    {"office",
                     [&](const std::string& v) { pipeline_options.office_filter = v; }},
                    {"diagnostics",
                     [&](const std::string& v) {
                         pipeline_options.diagnostics = v == "true" || v == "1";
                     }}};
                detail::apply_config_overrides(config_path, setters);
            }
            return pipeline::run_pipeline(pipeline_options, std::cerr);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return pipeline::kExitUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pipeline::kExitAnalysisError;
    }
    return pipeline::kExitUsageError;
}

}  // namespace campfin::cli
