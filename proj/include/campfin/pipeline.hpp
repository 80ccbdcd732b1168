#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "campfin/benford.hpp"
#include "campfin/donmodel.hpp"
#include "campfin/ingest.hpp"
#include "campfin/logit.hpp"
#include "campfin/money.hpp"
#include "campfin/report.hpp"
#include "campfin/stats.hpp"

namespace campfin::pipeline {

namespace fs = std::filesystem;

/// Fixed default seed: runs are reproducible unless the caller opts out.
inline constexpr std::uint64_t kDefaultSeed = 20140101;

inline constexpr int kExitOk = 0;
inline constexpr int kExitAnalysisError = 1;
inline constexpr int kExitUsageError = 2;

namespace detail {

/// Fan a fixed-size batch of independent jobs over a small pool. Results are
/// written into per-index slots, so the merge order never depends on thread
/// scheduling.
template <typename Result>
std::vector<Result> parallel_map(std::size_t count, unsigned jobs,
                                 const std::function<Result(std::size_t)>& fn) {
    std::vector<Result> results(count);
    if (count == 0) return results;
    unsigned workers = jobs == 0 ? std::thread::hardware_concurrency() : jobs;
    if (workers == 0) workers = 1;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    results[i] = fn(i);
                } catch (...) {
                    std::scoped_lock lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

inline report::SetCategory to_set_category(ingest::DonorCategory c) {
    switch (c) {
        case ingest::DonorCategory::Cnpj: return report::SetCategory::Cnpj;
        case ingest::DonorCategory::Cpf: return report::SetCategory::Cpf;
        case ingest::DonorCategory::NonOriginal: return report::SetCategory::NonOriginal;
        case ingest::DonorCategory::Unknown: return report::SetCategory::Unknown;
    }
    return report::SetCategory::Unknown;
}

inline std::string sanitize_filename(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out;
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    const auto lower = [](char c) {
        return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c;
    };
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size(); ++k)
            if (lower(haystack[i + k]) != lower(needle[k])) {
                match = false;
                break;
            }
        if (match) return true;
    }
    return false;
}

}  // namespace detail

/// Which keys define the analyzed sets.
struct GroupBy {
    bool by_party = true;
    bool by_category = true;

    static GroupBy parse(std::string_view text) {
        GroupBy g{false, false};
        std::string item;
        std::istringstream ss{std::string(text)};
        while (std::getline(ss, item, ',')) {
            if (item == "party") g.by_party = true;
            else if (item == "category") g.by_category = true;
            else if (!item.empty())
                throw std::invalid_argument("unknown grouping key '" + item + "'");
        }
        return g;
    }
};

inline constexpr const char* kCombinedPartyLabel = "(all)";

/// One labeled donation set plus its amounts, the unit every statistical
/// module consumes.
struct LabeledSet {
    report::SetKey key;
    std::vector<Cents> amounts;
};

/// Split records into analysis sets per the grouping: for each party block
/// an "All" set plus one set per donor category present.
inline std::vector<LabeledSet> collect_sets(std::span<const ingest::DonationRecord> records,
                                            const GroupBy& by) {
    std::map<std::string, std::vector<const ingest::DonationRecord*>> parties;
    for (const auto& r : records)
        parties[by.by_party ? r.party : std::string(kCombinedPartyLabel)].push_back(&r);

    std::vector<LabeledSet> sets;
    for (const auto& [party, rows] : parties) {
        LabeledSet all{{party, report::SetCategory::All, report::SetVariant::Real}, {}};
        all.amounts.reserve(rows.size());
        std::map<report::SetCategory, std::vector<Cents>> per_category;
        for (const auto* r : rows) {
            all.amounts.push_back(r->amount_cents);
            if (by.by_category)
                per_category[detail::to_set_category(r->donor_category)].push_back(
                    r->amount_cents);
        }
        sets.push_back(std::move(all));
        for (auto& [cat, amounts] : per_category)
            sets.push_back({{party, cat, report::SetVariant::Real}, std::move(amounts)});
    }
    return sets;
}

// --------------------------------------------------------------------------
// verify
// --------------------------------------------------------------------------

struct VerifyOptions {
    fs::path manifest;
    fs::path base_dir;  // files resolved relative to this; empty = manifest dir
};

struct VerifyResult {
    struct Entry {
        std::string filename;
        bool ok = false;
        std::string detail;
    };
    std::vector<Entry> entries;
    bool all_ok() const {
        for (const auto& e : entries)
            if (!e.ok) return false;
        return true;
    }
};

inline VerifyResult run_verify(const VerifyOptions& options) {
    const auto entries = ingest::read_md5_manifest(options.manifest);
    const fs::path base =
        options.base_dir.empty() ? options.manifest.parent_path() : options.base_dir;
    VerifyResult result;
    for (const auto& e : entries) {
        VerifyResult::Entry out{e.filename, false, {}};
        const fs::path target = base / e.filename;
        try {
            out.ok = ingest::verify_checksum(target, e.md5);
            if (!out.ok) out.detail = "digest mismatch";
        } catch (const std::exception& ex) {
            out.detail = ex.what();
        }
        result.entries.push_back(std::move(out));
    }
    return result;
}

// --------------------------------------------------------------------------
// ingest
// --------------------------------------------------------------------------

struct IngestOptions {
    fs::path input;
    fs::path schema;
    fs::path output;
};

inline int run_ingest(const IngestOptions& options, std::ostream& log) {
    const auto schema = ingest::load_schema(options.schema);
    const auto parsed = ingest::parse_donations(options.input, schema);
    ingest::write_canonical_csv(options.output, parsed.records);
    log << options.input.string() << ": " << parsed.report.rows_parsed << "/"
        << parsed.report.rows_total << " rows parsed\n";
    for (const auto& bad : parsed.report.malformed)
        log << "  row " << bad.row_number << ": " << bad.reason << "\n";
    return parsed.report.exceeds_failure_threshold() ? kExitAnalysisError : kExitOk;
}

// --------------------------------------------------------------------------
// stats / benford / fit-model over canonical dumps
// --------------------------------------------------------------------------

struct TableOptions {
    fs::path input;  // canonical donation CSV
    std::string by = "party,category";
    fs::path output;
    report::ReportFormat format = report::ReportFormat::Csv;
    std::uint64_t min_n = 21;  // benford only
};

inline int run_stats(const TableOptions& options) {
    const auto records = ingest::read_canonical_csv(options.input);
    const auto sets = collect_sets(records, GroupBy::parse(options.by));
    std::vector<report::DescriptiveRow> rows;
    rows.reserve(sets.size());
    for (const auto& set : sets) rows.push_back({set.key, stats::describe(set.amounts)});
    report::emit({report::ReportKind::DescriptiveTable, options.format, options.output},
                 std::move(rows));
    return kExitOk;
}

inline int run_benford(const TableOptions& options) {
    const auto records = ingest::read_canonical_csv(options.input);
    const auto sets = collect_sets(records, GroupBy::parse(options.by));
    std::vector<report::BenfordRow> rows;
    for (const auto& set : sets) {
        const auto test = benford::test_set(set.amounts, set.key.label(), options.min_n);
        if (!test) continue;
        report::BenfordRow row;
        row.key = set.key;
        row.proportions = test->proportions;
        row.n = test->histogram.n();
        row.chi2 = test->chi2;
        row.p_value = test->p_value;
        const auto d = stats::describe(set.amounts);
        row.min = d.min;
        row.max = d.max;
        row.sum = d.total;
        rows.push_back(std::move(row));
    }
    report::emit({report::ReportKind::BenfordTable, options.format, options.output},
                 std::move(rows));
    return kExitOk;
}

inline int run_fit_model(const TableOptions& options, std::ostream& log) {
    const auto records = ingest::read_canonical_csv(options.input);
    const auto sets = collect_sets(records, GroupBy::parse(options.by));
    std::vector<report::FitParamsRow> rows;
    for (const auto& set : sets) {
        try {
            const auto fit = donmodel::fit(set.amounts);
            const auto d = stats::describe(set.amounts);
            rows.push_back({set.key, d.max.value_or(0), fit.n, fit.gamma, std::exp(fit.xi0),
                            fit.converged});
        } catch (const std::exception& ex) {
            log << "fit failed for " << set.key.label() << ": " << ex.what() << "\n";
        }
    }
    report::emit({report::ReportKind::FitParamsTable, options.format, options.output},
                 std::move(rows));
    return kExitOk;
}

// --------------------------------------------------------------------------
// synth
// --------------------------------------------------------------------------

struct SynthOptions {
    fs::path input;  // canonical donation CSV
    fs::path out_dir;
    std::uint64_t seed = kDefaultSeed;
    bool by_party = true;
};

namespace detail {

/// Serialize a synthetic set as a canonical donation dump: amounts and the
/// category that generated each row; identity fields stay blank.
inline void write_synthetic_csv(const fs::path& path, const donmodel::SyntheticSet& set,
                                std::span<const std::pair<report::SetCategory, std::size_t>>
                                    category_spans,
                                const std::string& party,
                                ingest::RecipientKind recipient_kind) {
    std::vector<ingest::DonationRecord> records;
    records.reserve(set.amounts.size());
    std::size_t offset = 0;
    for (const auto& [category, count] : category_spans) {
        ingest::DonorCategory donor = ingest::DonorCategory::Unknown;
        switch (category) {
            case report::SetCategory::Cnpj: donor = ingest::DonorCategory::Cnpj; break;
            case report::SetCategory::Cpf: donor = ingest::DonorCategory::Cpf; break;
            case report::SetCategory::NonOriginal:
                donor = ingest::DonorCategory::NonOriginal;
                break;
            default: donor = ingest::DonorCategory::Unknown; break;
        }
        for (std::size_t i = 0; i < count; ++i) {
            ingest::DonationRecord r;
            r.amount_cents = set.amounts[offset + i];
            r.donor_category = donor;
            r.recipient_kind = recipient_kind;
            r.party = party;
            records.push_back(std::move(r));
        }
        offset += count;
    }
    ingest::write_canonical_csv(path, records);
}

inline void write_sidecar(const fs::path& path, const nlohmann::json& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write sidecar: " + path.string());
    out << meta.dump(2) << "\n";
}

inline nlohmann::json fit_to_json(const donmodel::DonationModelFit& fit) {
    return {{"gamma", fit.gamma}, {"xi0", fit.xi0},       {"delta", fit.delta},
            {"xi_max", fit.xi_max}, {"n", fit.n},         {"converged", fit.converged},
            {"log_likelihood", fit.log_likelihood}};
}

struct PartySynthesis {
    std::string party;
    std::optional<donmodel::SyntheticSet> all_rand;
    std::optional<donmodel::DonationModelFit> all_fit;
    std::vector<std::tuple<report::SetCategory, donmodel::DonationModelFit,
                           donmodel::SyntheticSet>>
        category_rand;
    std::optional<donmodel::SyntheticSet> model;
    std::vector<std::pair<report::SetCategory, std::size_t>> model_spans;
    std::vector<std::string> notes;
};

/// Fit one party's All and per-category sets, then draw the matched Rand
/// sets and the combined Model set from deterministic sub-streams.
inline PartySynthesis synthesize_party(
    const std::string& party,
    const std::map<report::SetCategory, std::vector<Cents>>& categories,
    std::uint64_t party_seed) {
    PartySynthesis synth;
    synth.party = party;

    std::vector<donmodel::CategoryFit> category_fits;
    for (const auto& [category, amounts] : categories) {
        const bool is_all = category == report::SetCategory::All;
        try {
            const auto fit = donmodel::fit(amounts);
            if (is_all) {
                synth.all_fit = fit;
                if (fit.converged) {
                    const auto sub = donmodel::CounterRng::derive_stream(party_seed, 0);
                    synth.all_rand = donmodel::sample(fit, amounts.size(), sub);
                }
            } else if (fit.converged) {
                category_fits.push_back(
                    {std::string(report::to_string(category)), fit, amounts.size()});
                synth.model_spans.emplace_back(category, amounts.size());
            } else {
                synth.notes.push_back("fit did not converge for category " +
                                      std::string(report::to_string(category)));
            }
        } catch (const std::exception& ex) {
            synth.notes.push_back("fit failed for category " +
                                  std::string(report::to_string(category)) + ": " + ex.what());
        }
    }
    if (!category_fits.empty()) {
        const auto controls = donmodel::make_controls(
            category_fits, donmodel::CounterRng::derive_stream(party_seed, 1));
        std::size_t k = 0;
        for (const auto& [category, count] : synth.model_spans) {
            synth.category_rand.emplace_back(category, category_fits[k].fit,
                                             controls.rand_sets[k].second);
            ++k;
        }
        synth.model = controls.model_set;
    }
    return synth;
}

/// Write one party's Rand/Model sets as canonical CSVs with JSON sidecars.
inline void write_party_synthetics(const fs::path& synth_dir, const PartySynthesis& s,
                                   ingest::RecipientKind kind) {
    const std::string stem = sanitize_filename(s.party);
    if (s.all_rand) {
        const std::vector<std::pair<report::SetCategory, std::size_t>> span{
            {report::SetCategory::All, s.all_rand->amounts.size()}};
        write_synthetic_csv(synth_dir / (stem + "_All_rand.csv"), *s.all_rand, span, s.party,
                            kind);
        nlohmann::json meta{{"tag", "Rand"},
                            {"party", s.party},
                            {"category", "All"},
                            {"seed", s.all_rand->seed},
                            {"n", s.all_rand->amounts.size()},
                            {"fit", fit_to_json(*s.all_fit)}};
        write_sidecar(synth_dir / (stem + "_All_rand.json"), meta);
    }
    for (const auto& [category, fit, rand_set] : s.category_rand) {
        const std::string cat_name(report::to_string(category));
        const std::vector<std::pair<report::SetCategory, std::size_t>> span{
            {category, rand_set.amounts.size()}};
        const std::string base = stem + "_" + sanitize_filename(cat_name);
        write_synthetic_csv(synth_dir / (base + "_rand.csv"), rand_set, span, s.party, kind);
        nlohmann::json meta{{"tag", "Rand"},        {"party", s.party},
                            {"category", cat_name}, {"seed", rand_set.seed},
                            {"n", rand_set.amounts.size()},
                            {"fit", fit_to_json(fit)}};
        write_sidecar(synth_dir / (base + "_rand.json"), meta);
    }
    if (s.model) {
        write_synthetic_csv(synth_dir / (stem + "_model.csv"), *s.model, s.model_spans,
                            s.party, kind);
        nlohmann::json components = nlohmann::json::array();
        for (const auto& [category, fit, rand_set] : s.category_rand)
            components.push_back({{"category", std::string(report::to_string(category))},
                                  {"n", rand_set.amounts.size()},
                                  {"fit", fit_to_json(fit)}});
        nlohmann::json meta{{"tag", "Model"},
                            {"party", s.party},
                            {"seed", s.model->seed},
                            {"n", s.model->amounts.size()},
                            {"components", components}};
        write_sidecar(synth_dir / (stem + "_model.json"), meta);
    }
}

}  // namespace detail

/// Standalone synthesis over a canonical dump: per party, fit and draw the
/// Rand and Model control sets into out_dir.
inline int run_synth(const SynthOptions& options, std::ostream& log) {
    const auto records = ingest::read_canonical_csv(options.input);
    const GroupBy by{options.by_party, true};
    const auto sets = collect_sets(records, by);
    std::map<std::string, std::map<report::SetCategory, std::vector<Cents>>> party_amounts;
    for (const auto& s : sets) party_amounts[s.key.party][s.key.category] = s.amounts;
    std::map<std::string, ingest::RecipientKind> party_kind;
    for (const auto& r : records)
        party_kind.emplace(by.by_party ? r.party : std::string(kCombinedPartyLabel),
                           r.recipient_kind);

    fs::create_directories(options.out_dir);
    std::size_t index = 0;
    for (const auto& [party, categories] : party_amounts) {
        const auto synth = detail::synthesize_party(
            party, categories, donmodel::CounterRng::derive_stream(options.seed, index));
        for (const auto& note : synth.notes) log << party << ": " << note << "\n";
        detail::write_party_synthetics(options.out_dir, synth, party_kind.at(party));
        ++index;
    }
    return kExitOk;
}

// --------------------------------------------------------------------------
// logit
// --------------------------------------------------------------------------

struct LogitOptions {
    fs::path donations;                 // canonical donation CSV
    fs::path outcomes;                  // raw outcomes (with schema) or canonical outcomes
    std::optional<fs::path> outcomes_schema;
    std::string office_filter;          // case-insensitive substring; empty = all
    fs::path output;
    report::ReportFormat format = report::ReportFormat::Csv;
    std::optional<fs::path> diagnostics_dir;
};

inline constexpr std::string_view kCanonicalOutcomesHeader =
    "candidate_id,federal_unit,office,elected";

inline std::vector<ingest::CandidateOutcome> read_outcomes_any(
    const fs::path& path, const std::optional<fs::path>& schema_path) {
    if (schema_path) return ingest::parse_outcomes(path, ingest::load_schema(*schema_path));
    // canonical outcomes CSV
    const auto lines = ingest::detail::read_raw_lines(path);
    if (lines.empty() || lines[0] != kCanonicalOutcomesHeader)
        throw ingest::schema_error(path.string() + ": not a canonical outcomes file");
    std::vector<ingest::CandidateOutcome> outcomes;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = ingest::detail::split_fields(lines[i], ',', '"');
        if (fields.size() != 4)
            throw ingest::schema_error(path.string() + ": row " + std::to_string(i + 1) +
                                       " needs 4 fields");
        ingest::CandidateOutcome o;
        o.candidate_id = fields[0];
        o.federal_unit = fields[1];
        o.office = fields[2];
        o.elected = fields[3] == "true" || fields[3] == "1";
        outcomes.push_back(std::move(o));
    }
    return outcomes;
}

inline void write_canonical_outcomes(const fs::path& path,
                                     std::span<const ingest::CandidateOutcome> outcomes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    out << kCanonicalOutcomesHeader << "\n";
    for (const auto& o : outcomes)
        out << ingest::detail::csv_escape(o.candidate_id) << ','
            << ingest::detail::csv_escape(o.federal_unit) << ','
            << ingest::detail::csv_escape(o.office) << ',' << (o.elected ? "true" : "false")
            << "\n";
}

/// Fit one race: join donations to candidates, convert to money fractions of
/// the race total, regress. Failures come back as marked results, not holes.
inline logit::RaceResult fit_one_race(const std::string& federal_unit,
                                      const std::string& office,
                                      std::span<const ingest::DonationRecord> donations,
                                      std::span<const ingest::CandidateOutcome> outcomes,
                                      std::optional<fs::path> diagnostics_path = std::nullopt) {
    logit::RaceResult result;
    result.federal_unit = federal_unit;
    result.office = office;
    result.n = outcomes.size();

    Cents race_total = 0;
    for (const auto& d : donations) race_total += d.amount_cents;
    result.total_money = race_total;

    const auto joined = ingest::join_donations_to_candidates(donations, outcomes);
    logit::RaceDataset dataset;
    dataset.federal_unit = federal_unit;
    dataset.office = office;
    dataset.total_money = race_total;
    for (const auto& o : joined.outcomes) {
        logit::RaceRow row;
        row.fraction = race_total > 0 ? static_cast<double>(o.total_donations) /
                                            static_cast<double>(race_total)
                                      : 0.0;
        row.elected = o.elected;
        dataset.rows.push_back(row);
        result.n_elected += o.elected ? 1 : 0;
    }

    try {
        if (race_total <= 0) throw std::invalid_argument("race has no donations");
        const auto fit = logit::fit_race(dataset);
        result.fit = fit;
        if (diagnostics_path) {
            std::ofstream out(*diagnostics_path, std::ios::binary);
            if (!out)
                throw std::runtime_error("cannot write diagnostics: " +
                                         diagnostics_path->string());
            out << "candidate_id,fraction,elected,fitted_probability\n";
            for (std::size_t i = 0; i < joined.outcomes.size(); ++i)
                out << ingest::detail::csv_escape(joined.outcomes[i].candidate_id) << ','
                    << report::detail::compact(dataset.rows[i].fraction) << ','
                    << (dataset.rows[i].elected ? "true" : "false") << ','
                    << report::detail::compact(logit::predict(fit, dataset.rows[i].fraction))
                    << "\n";
        }
    } catch (const logit::separation_error& ex) {
        result.error = std::string("separation-failure: ") + ex.what();
    } catch (const std::exception& ex) {
        result.error = ex.what();
    }
    return result;
}

inline report::LogitRow to_logit_row(const logit::RaceResult& r) {
    report::LogitRow row;
    row.federal_unit = r.federal_unit;
    row.office = r.office;
    row.n_candidates = r.n;
    row.n_elected = r.n_elected;
    row.total_money = r.total_money;
    if (r.fit) {
        row.beta0 = r.fit->beta0;
        row.sigma0 = r.fit->sigma0();
        row.wald_p0 = r.fit->wald_p[0];
        row.beta1 = r.fit->beta1;
        row.sigma1 = r.fit->sigma1();
        row.wald_p1 = r.fit->wald_p[1];
        row.deviance = r.fit->deviance;
        row.deviance_p = r.fit->deviance_p;
    } else {
        row.error = r.error;
    }
    return row;
}

inline int run_logit(const LogitOptions& options, std::ostream& log) {
    const auto donations = ingest::read_canonical_csv(options.donations);
    const auto outcomes = read_outcomes_any(options.outcomes, options.outcomes_schema);

    std::map<std::pair<std::string, std::string>, std::vector<ingest::DonationRecord>>
        donations_by_race;
    for (const auto& d : donations)
        donations_by_race[{d.federal_unit, d.office}].push_back(d);
    std::map<std::pair<std::string, std::string>, std::vector<ingest::CandidateOutcome>>
        outcomes_by_race;
    for (const auto& o : outcomes) {
        if (!detail::contains_ci(o.office, options.office_filter)) continue;
        outcomes_by_race[{o.federal_unit, o.office}].push_back(o);
    }

    std::vector<logit::RaceResult> results;
    for (const auto& [race, race_outcomes] : outcomes_by_race) {
        const auto it = donations_by_race.find(race);
        static const std::vector<ingest::DonationRecord> kEmpty;
        const auto& race_donations = it == donations_by_race.end() ? kEmpty : it->second;
        std::optional<fs::path> diag;
        if (options.diagnostics_dir) {
            fs::create_directories(*options.diagnostics_dir);
            diag = *options.diagnostics_dir /
                   (detail::sanitize_filename(race.first + "_" + race.second) + ".csv");
        }
        results.push_back(
            fit_one_race(race.first, race.second, race_donations, race_outcomes, diag));
    }
    results = logit::summarize_races(std::move(results));

    std::vector<report::LogitRow> rows;
    rows.reserve(results.size());
    for (const auto& r : results) {
        if (!r.error.empty()) log << r.federal_unit << " " << r.office << ": " << r.error << "\n";
        rows.push_back(to_logit_row(r));
    }
    report::emit({report::ReportKind::LogitTable, options.format, options.output},
                 std::move(rows));
    return kExitOk;
}

// --------------------------------------------------------------------------
// report reformat (csv table -> markdown / latex)
// --------------------------------------------------------------------------

struct ReformatOptions {
    fs::path input;  // a CSV table emitted by this tool
    fs::path output;
    report::ReportFormat format = report::ReportFormat::Markdown;
};

inline int run_reformat(const ReformatOptions& options) {
    const auto lines = ingest::detail::read_raw_lines(options.input);
    if (lines.empty()) throw std::runtime_error(options.input.string() + ": empty table");
    report::detail::TableDoc doc;
    doc.columns = ingest::detail::split_fields(lines[0], ',', '"');
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        doc.rows.push_back(ingest::detail::split_fields(lines[i], ',', '"'));
    }
    std::ofstream out(options.output, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + options.output.string());
    report::detail::write_table(out, doc, options.format);
    return kExitOk;
}

// --------------------------------------------------------------------------
// pipeline
// --------------------------------------------------------------------------

struct PipelineOptions {
    fs::path data_dir;
    fs::path schema;
    fs::path outcomes_schema;
    fs::path out_dir;
    std::uint64_t seed = kDefaultSeed;
    std::uint64_t min_set_size = 21;
    unsigned jobs = 0;  // 0 = hardware concurrency
    std::string office_filter;
    bool diagnostics = false;
};

namespace detail {

inline report::BenfordRow benford_row(const report::SetKey& key,
                                      const benford::BenfordTest& test,
                                      std::span<const Cents> amounts,
                                      std::optional<double> gamma, std::optional<double> xi0) {
    report::BenfordRow row;
    row.key = key;
    row.proportions = test.proportions;
    row.n = test.histogram.n();
    row.chi2 = test.chi2;
    row.p_value = test.p_value;
    const auto d = stats::describe(amounts);
    row.min = d.min;
    row.max = d.max;
    row.sum = d.total;
    row.gamma = gamma;
    row.xi0 = xi0;
    return row;
}

}  // namespace detail

/// The full batch flow over one data directory: verify checksums, ingest,
/// describe, fit the donation model, synthesize matched controls, run the
/// Benford battery on real and synthetic sets, regress every race, and emit
/// every table in CSV, Markdown and LaTeX. Identical inputs and seed produce
/// a byte-identical output tree.
inline int run_pipeline(const PipelineOptions& options, std::ostream& log) {
    const auto schema = ingest::load_schema(options.schema);
    const auto outcomes_schema = ingest::load_schema(options.outcomes_schema);
    fs::create_directories(options.out_dir);

    // 1. integrity: a manifest in the data directory gates the whole run
    const fs::path manifest = options.data_dir / "manifest.md5";
    if (fs::exists(manifest)) {
        const auto verify = run_verify({manifest, options.data_dir});
        std::ofstream vout(options.out_dir / "verify_report.txt", std::ios::binary);
        for (const auto& e : verify.entries)
            vout << (e.ok ? "OK    " : "FAIL  ") << e.filename
                 << (e.detail.empty() ? "" : "  (" + e.detail + ")") << "\n";
        if (!verify.all_ok()) {
            log << "checksum verification failed; aborting\n";
            return kExitAnalysisError;
        }
    }

    // 2. ingest every donations file, in parallel, merged in sorted order
    std::vector<fs::path> donation_files;
    std::vector<fs::path> outcome_files;
    for (const auto& entry : fs::directory_iterator(options.data_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.starts_with("receitas_")) donation_files.push_back(entry.path());
        if (name.starts_with("resultados")) outcome_files.push_back(entry.path());
    }
    std::sort(donation_files.begin(), donation_files.end());
    std::sort(outcome_files.begin(), outcome_files.end());
    if (donation_files.empty()) {
        log << "no donation files (receitas_*) under " << options.data_dir.string() << "\n";
        return kExitAnalysisError;
    }

    const auto parses = detail::parallel_map<ingest::DonationParse>(
        donation_files.size(), options.jobs,
        [&](std::size_t i) { return ingest::parse_donations(donation_files[i], schema); });

    std::vector<ingest::DonationRecord> records;
    {
        std::ofstream preport(options.out_dir / "parse_report.txt", std::ios::binary);
        bool threshold_exceeded = false;
        for (std::size_t i = 0; i < parses.size(); ++i) {
            const auto& p = parses[i];
            preport << donation_files[i].filename().string() << ": " << p.report.rows_parsed
                    << "/" << p.report.rows_total << " rows\n";
            for (const auto& bad : p.report.malformed)
                preport << "  row " << bad.row_number << ": " << bad.reason << "\n";
            threshold_exceeded |= p.report.exceeds_failure_threshold();
            records.insert(records.end(), p.records.begin(), p.records.end());
        }
        if (threshold_exceeded) {
            log << "more than 0.1% malformed rows in at least one file; aborting\n";
            return kExitAnalysisError;
        }
    }
    if (records.empty()) {
        log << "no donation records parsed\n";
        return kExitAnalysisError;
    }

    std::vector<ingest::CandidateOutcome> outcomes;
    for (const auto& f : outcome_files) {
        const auto part = ingest::parse_outcomes(f, outcomes_schema);
        outcomes.insert(outcomes.end(), part.begin(), part.end());
    }

    // 3. canonical dump
    ingest::write_canonical_csv(options.out_dir / "donations_canonical.csv", records);
    if (!outcomes.empty())
        write_canonical_outcomes(options.out_dir / "outcomes_canonical.csv", outcomes);

    const auto emit_all_formats = [&](report::ReportKind kind, const std::string& stem,
                                      report::ReportRows rows) {
        static constexpr std::pair<report::ReportFormat, const char*> kFormats[] = {
            {report::ReportFormat::Csv, ".csv"},
            {report::ReportFormat::Markdown, ".md"},
            {report::ReportFormat::Latex, ".tex"}};
        for (const auto& [format, ext] : kFormats)
            report::emit({kind, format, options.out_dir / (stem + ext)}, rows);
    };

    // 4. descriptive statistics per party x category plus the combined block
    const auto party_sets = collect_sets(records, GroupBy{true, true});
    const auto combined_sets = collect_sets(records, GroupBy{false, true});
    {
        std::vector<report::DescriptiveRow> rows;
        for (const auto& s : combined_sets) rows.push_back({s.key, stats::describe(s.amounts)});
        for (const auto& s : party_sets) rows.push_back({s.key, stats::describe(s.amounts)});
        emit_all_formats(report::ReportKind::DescriptiveTable, "stats", std::move(rows));
    }

    // 5. cumulative curves for the combined sets (plot-ready data)
    {
        std::vector<report::CurveSeries> series;
        for (const auto& s : combined_sets)
            series.push_back({s.key, stats::cumulative_curve(s.amounts)});
        report::emit({report::ReportKind::CumulativeCurves, report::ReportFormat::Csv,
                      options.out_dir / "curves.csv"},
                     std::move(series));
    }

    // 6. per-party donation-model fits and matched synthetic controls
    std::map<std::string, std::map<report::SetCategory, std::vector<Cents>>> party_amounts;
    std::map<std::string, ingest::RecipientKind> party_kind;
    for (const auto& s : party_sets) party_amounts[s.key.party][s.key.category] = s.amounts;
    for (const auto& r : records)
        party_kind.emplace(r.party, r.recipient_kind);  // first record decides

    std::vector<std::string> party_names;
    for (const auto& [party, _] : party_amounts) party_names.push_back(party);

    const auto syntheses = detail::parallel_map<detail::PartySynthesis>(
        party_names.size(), options.jobs, [&](std::size_t index) {
            const std::string& party = party_names[index];
            return detail::synthesize_party(
                party, party_amounts.at(party),
                donmodel::CounterRng::derive_stream(options.seed, index));
        });

    // 7. fitted-parameters table and synthetic-set serialization
    {
        std::vector<report::FitParamsRow> rows;
        const fs::path synth_dir = options.out_dir / "synth";
        fs::create_directories(synth_dir);
        std::ofstream notes(options.out_dir / "pipeline_log.txt", std::ios::binary);
        for (const auto& s : syntheses) {
            const auto kind = party_kind.at(s.party);
            for (const auto& note : s.notes) notes << s.party << ": " << note << "\n";
            if (s.all_fit) {
                const auto& amounts = party_amounts.at(s.party).at(report::SetCategory::All);
                const auto d = stats::describe(amounts);
                rows.push_back({{s.party, report::SetCategory::All, report::SetVariant::Real},
                                d.max.value_or(0), s.all_fit->n, s.all_fit->gamma,
                                std::exp(s.all_fit->xi0), s.all_fit->converged});
            }
            for (const auto& [category, fit, rand_set] : s.category_rand) {
                const auto& amounts = party_amounts.at(s.party).at(category);
                const auto d = stats::describe(amounts);
                rows.push_back({{s.party, category, report::SetVariant::Real},
                                d.max.value_or(0), fit.n, fit.gamma, std::exp(fit.xi0),
                                fit.converged});
            }

            detail::write_party_synthetics(synth_dir, s, kind);
        }
        emit_all_formats(report::ReportKind::FitParamsTable, "fit_params", std::move(rows));
    }

    // 8. the Benford battery over real and synthetic sets
    {
        std::vector<report::BenfordRow> rows;
        for (const auto& s : syntheses) {
            const auto& categories = party_amounts.at(s.party);
            for (const auto& [category, amounts] : categories) {
                report::SetKey key{s.party, category, report::SetVariant::Real};
                std::optional<double> gamma, xi0;
                if (category == report::SetCategory::All && s.all_fit) {
                    gamma = s.all_fit->gamma;
                    xi0 = s.all_fit->xi0;
                }
                for (const auto& [cat, fit, rand_set] : s.category_rand)
                    if (cat == category) {
                        gamma = fit.gamma;
                        xi0 = fit.xi0;
                    }
                if (const auto test =
                        benford::test_set(amounts, key.label(), options.min_set_size))
                    rows.push_back(detail::benford_row(key, *test, amounts, gamma, xi0));
            }
            if (s.all_rand) {
                report::SetKey key{s.party, report::SetCategory::All, report::SetVariant::Rand};
                if (const auto test = benford::test_set(s.all_rand->amounts, key.label(),
                                                        options.min_set_size))
                    rows.push_back(detail::benford_row(key, *test, s.all_rand->amounts,
                                                       s.all_fit->gamma, s.all_fit->xi0));
            }
            for (const auto& [category, fit, rand_set] : s.category_rand) {
                report::SetKey key{s.party, category, report::SetVariant::Rand};
                if (const auto test = benford::test_set(rand_set.amounts, key.label(),
                                                        options.min_set_size))
                    rows.push_back(
                        detail::benford_row(key, *test, rand_set.amounts, fit.gamma, fit.xi0));
            }
            if (s.model) {
                report::SetKey key{s.party, report::SetCategory::All, report::SetVariant::Model};
                if (const auto test = benford::test_set(s.model->amounts, key.label(),
                                                        options.min_set_size))
                    rows.push_back(detail::benford_row(key, *test, s.model->amounts,
                                                       std::nullopt, std::nullopt));
            }
        }
        emit_all_formats(report::ReportKind::BenfordTable, "benford", std::move(rows));
    }

    // 9. logistic regression per race
    if (!outcomes.empty()) {
        std::map<std::pair<std::string, std::string>, std::vector<ingest::DonationRecord>>
            donations_by_race;
        for (const auto& d : records)
            donations_by_race[{d.federal_unit, d.office}].push_back(d);
        std::map<std::pair<std::string, std::string>, std::vector<ingest::CandidateOutcome>>
            outcomes_by_race;
        for (const auto& o : outcomes) {
            if (!detail::contains_ci(o.office, options.office_filter)) continue;
            outcomes_by_race[{o.federal_unit, o.office}].push_back(o);
        }
        std::vector<std::pair<std::string, std::string>> race_keys;
        for (const auto& [key, _] : outcomes_by_race) race_keys.push_back(key);

        const fs::path diag_dir = options.out_dir / "logit_diagnostics";
        if (options.diagnostics) fs::create_directories(diag_dir);

        const auto results = detail::parallel_map<logit::RaceResult>(
            race_keys.size(), options.jobs, [&](std::size_t i) {
                const auto& key = race_keys[i];
                static const std::vector<ingest::DonationRecord> kEmpty;
                const auto it = donations_by_race.find(key);
                const auto& race_donations =
                    it == donations_by_race.end() ? kEmpty : it->second;
                std::optional<fs::path> diag;
                if (options.diagnostics)
                    diag = diag_dir /
                           (detail::sanitize_filename(key.first + "_" + key.second) + ".csv");
                return fit_one_race(key.first, key.second, race_donations,
                                    outcomes_by_race.at(key), diag);
            });

        std::vector<report::LogitRow> rows;
        for (const auto& r : logit::summarize_races({results.begin(), results.end()}))
            rows.push_back(to_logit_row(r));
        emit_all_formats(report::ReportKind::LogitTable, "logit", std::move(rows));
    }

    log << "pipeline complete: " << records.size() << " donations, " << outcomes.size()
        << " candidate outcomes, " << party_names.size() << " parties\n";
    return kExitOk;
}

}  // namespace campfin::pipeline
