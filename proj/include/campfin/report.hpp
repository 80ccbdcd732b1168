#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "campfin/money.hpp"
#include "campfin/stats.hpp"

namespace campfin::report {

enum class SetCategory { All, Cnpj, Cpf, NonOriginal, Unknown };
enum class SetVariant { Real, Rand, Model };

inline std::string_view to_string(SetCategory c) {
    switch (c) {
        case SetCategory::All: return "All";
        case SetCategory::Cnpj: return "CNPJ";
        case SetCategory::Cpf: return "CPF";
        case SetCategory::NonOriginal: return "Non-original";
        case SetCategory::Unknown: return "Unknown";
    }
    return "All";
}

/// Identity of one analyzed donation set. Rows order by party, then the
/// category order All/CNPJ/CPF/Non-original/Unknown with Real before Rand,
/// and the combined Model row closing each party block.
struct SetKey {
    std::string party;
    SetCategory category = SetCategory::All;
    SetVariant variant = SetVariant::Real;

    std::string label() const {
        if (variant == SetVariant::Model) return party + " - Model";
        std::string s = party + " - " + std::string(to_string(category));
        if (variant == SetVariant::Rand) s += " Rand";
        return s;
    }

    friend bool operator<(const SetKey& a, const SetKey& b) {
        const auto rank = [](const SetKey& k) {
            const int cat = k.variant == SetVariant::Model ? 5 : static_cast<int>(k.category);
            const int var = k.variant == SetVariant::Rand ? 1 : 0;
            return std::pair<int, int>(cat, var);
        };
        if (a.party != b.party) return a.party < b.party;
        return rank(a) < rank(b);
    }
};

struct DescriptiveRow {
    SetKey key;
    stats::DescriptiveStats stats;
};

struct BenfordRow {
    SetKey key;
    std::array<double, 9> proportions{};
    std::uint64_t n = 0;
    double chi2 = 0.0;
    double p_value = 1.0;
    std::optional<Cents> min;
    std::optional<Cents> max;
    Cents sum = 0;
    std::optional<double> gamma;  // absent on Model rows
    std::optional<double> xi0;
};

struct LogitRow {
    std::string federal_unit;
    std::string office;
    double beta0 = 0.0, sigma0 = 0.0, wald_p0 = 0.0;
    double beta1 = 0.0, sigma1 = 0.0, wald_p1 = 0.0;
    std::size_t n_candidates = 0;
    std::size_t n_elected = 0;
    double deviance = 0.0;
    double deviance_p = 0.0;
    Cents total_money = 0;
    std::string error;  // non-empty marks a failed fit; numeric fields unset
};

struct FitParamsRow {
    SetKey key;
    Cents max_amount = 0;
    std::size_t n = 0;
    double gamma = 0.0;
    double exp_xi0 = 0.0;
    bool converged = false;
};

struct CurveSeries {
    SetKey key;
    std::vector<stats::CurvePoint> points;
};

enum class ReportKind { DescriptiveTable, BenfordTable, LogitTable, FitParamsTable, CumulativeCurves };
enum class ReportFormat { Csv, Markdown, Latex };

struct ReportSpec {
    ReportKind kind;
    ReportFormat format;
    std::filesystem::path output_path;
};

using ReportRows =
    std::variant<std::vector<DescriptiveRow>, std::vector<BenfordRow>, std::vector<LogitRow>,
                 std::vector<FitParamsRow>, std::vector<CurveSeries>>;

namespace detail {

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

inline std::string compact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string latex_escape(std::string_view field) {
    std::string out;
    for (char c : field) {
        if (c == '&' || c == '%' || c == '#' || c == '_' || c == '$') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

inline std::string md_escape(std::string_view field) {
    std::string out;
    for (char c : field) {
        if (c == '|') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

struct TableDoc {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;  // already formatted cells
};

inline void write_table(std::ostream& out, const TableDoc& doc, ReportFormat format) {
    switch (format) {
        case ReportFormat::Csv: {
            for (std::size_t i = 0; i < doc.columns.size(); ++i)
                out << (i ? "," : "") << csv_escape(doc.columns[i]);
            out << "\n";
            for (const auto& row : doc.rows) {
                for (std::size_t i = 0; i < row.size(); ++i)
                    out << (i ? "," : "") << csv_escape(row[i]);
                out << "\n";
            }
            break;
        }
        case ReportFormat::Markdown: {
            for (const auto& c : doc.columns) out << "| " << md_escape(c) << " ";
            out << "|\n";
            for (std::size_t i = 0; i < doc.columns.size(); ++i) out << "| --- ";
            out << "|\n";
            for (const auto& row : doc.rows) {
                for (const auto& cell : row) out << "| " << md_escape(cell) << " ";
                out << "|\n";
            }
            break;
        }
        case ReportFormat::Latex: {
            out << "\\begin{tabular}{" << std::string(doc.columns.size(), 'c') << "}\n";
            for (std::size_t i = 0; i < doc.columns.size(); ++i)
                out << (i ? " & " : "") << latex_escape(doc.columns[i]);
            out << " \\\\\n\\hline\n";
            for (const auto& row : doc.rows) {
                for (std::size_t i = 0; i < row.size(); ++i)
                    out << (i ? " & " : "") << latex_escape(row[i]);
                out << " \\\\\n";
            }
            out << "\\end{tabular}\n";
            break;
        }
    }
}

inline std::string opt_cents(const std::optional<Cents>& c) {
    return c ? money::format_cents(*c) : std::string();
}

inline TableDoc build_descriptive(std::vector<DescriptiveRow> rows) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.key < b.key; });
    TableDoc doc;
    doc.columns = {"set", "min", "max", "average", "std", "n", "total"};
    for (const auto& r : rows)
        doc.rows.push_back({r.key.label(), opt_cents(r.stats.min), opt_cents(r.stats.max),
                            fixed(r.stats.mean, 3), fixed(r.stats.std_dev, 3),
                            std::to_string(r.stats.n), money::format_cents(r.stats.total)});
    return doc;
}

inline TableDoc build_benford(std::vector<BenfordRow> rows) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.key < b.key; });
    TableDoc doc;
    doc.columns = {"set", "1", "2", "3", "4",    "5",     "6",   "7",   "8",
                   "9",   "n", "chi2", "p_value", "min", "max", "sum", "gamma", "xi0"};
    for (const auto& r : rows) {
        std::vector<std::string> cells{r.key.label()};
        for (double p : r.proportions) cells.push_back(fixed(p, 3));
        cells.push_back(std::to_string(r.n));
        cells.push_back(fixed(r.chi2, 3));
        cells.push_back(fixed(r.p_value, 3));
        cells.push_back(opt_cents(r.min));
        cells.push_back(opt_cents(r.max));
        cells.push_back(money::format_cents(r.sum));
        cells.push_back(r.gamma ? fixed(*r.gamma, 4) : std::string("-"));
        cells.push_back(r.xi0 ? fixed(*r.xi0, 4) : std::string("-"));
        doc.rows.push_back(std::move(cells));
    }
    return doc;
}

inline TableDoc build_logit(std::vector<LogitRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const LogitRow& a, const LogitRow& b) {
        if (a.office != b.office) return a.office < b.office;
        return a.federal_unit < b.federal_unit;
    });
    TableDoc doc;
    doc.columns = {"uf",     "office",   "beta0",      "sigma0",     "wald_p0",
                   "beta1",  "sigma1",   "wald_p1",    "N",          "n",
                   "deviance", "deviance_p", "total_money", "error"};
    for (const auto& r : rows) {
        if (r.error.empty())
            doc.rows.push_back({r.federal_unit, r.office, fixed(r.beta0, 6), fixed(r.sigma0, 6),
                                fixed(r.wald_p0, 6), fixed(r.beta1, 6), fixed(r.sigma1, 6),
                                fixed(r.wald_p1, 6), std::to_string(r.n_candidates),
                                std::to_string(r.n_elected), fixed(r.deviance, 6),
                                fixed(r.deviance_p, 6), money::format_cents(r.total_money), ""});
        else
            doc.rows.push_back({r.federal_unit, r.office, "", "", "", "", "", "",
                                std::to_string(r.n_candidates), std::to_string(r.n_elected),
                                "", "", money::format_cents(r.total_money), r.error});
    }
    return doc;
}

inline TableDoc build_fit_params(std::vector<FitParamsRow> rows) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.key < b.key; });
    TableDoc doc;
    doc.columns = {"set", "max", "n", "gamma", "exp_xi0", "converged"};
    for (const auto& r : rows)
        doc.rows.push_back({r.key.label(), money::format_cents(r.max_amount),
                            std::to_string(r.n), fixed(r.gamma, 6), fixed(r.exp_xi0, 2),
                            r.converged ? "yes" : "no"});
    return doc;
}

inline TableDoc build_curves(std::vector<CurveSeries> rows) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.key < b.key; });
    TableDoc doc;
    doc.columns = {"set", "log_amount", "cumulative_fraction"};
    for (const auto& series : rows)
        for (const auto& p : series.points)
            doc.rows.push_back({series.key.label(), compact(p.log_amount), compact(p.fraction)});
    return doc;
}

}  // namespace detail

/// Emit one table. Pure function of (spec, rows): repeated emissions are
/// byte-identical; outputs are UTF-8 with LF newlines.
inline void emit(const ReportSpec& spec, const ReportRows& rows) {
    const detail::TableDoc doc = [&] {
        switch (spec.kind) {
            case ReportKind::DescriptiveTable:
                if (const auto* r = std::get_if<std::vector<DescriptiveRow>>(&rows))
                    return detail::build_descriptive(*r);
                break;
            case ReportKind::BenfordTable:
                if (const auto* r = std::get_if<std::vector<BenfordRow>>(&rows))
                    return detail::build_benford(*r);
                break;
            case ReportKind::LogitTable:
                if (const auto* r = std::get_if<std::vector<LogitRow>>(&rows))
                    return detail::build_logit(*r);
                break;
            case ReportKind::FitParamsTable:
                if (const auto* r = std::get_if<std::vector<FitParamsRow>>(&rows))
                    return detail::build_fit_params(*r);
                break;
            case ReportKind::CumulativeCurves:
                if (const auto* r = std::get_if<std::vector<CurveSeries>>(&rows))
                    return detail::build_curves(*r);
                break;
        }
        throw std::invalid_argument("report rows do not match the report kind");
    }();

    std::ofstream out(spec.output_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + spec.output_path.string());
    detail::write_table(out, doc, spec.format);
    if (!out) throw std::runtime_error("write failed: " + spec.output_path.string());
}

}  // namespace campfin::report
