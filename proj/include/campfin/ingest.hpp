#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "campfin/detail/md5.hpp"
#include "campfin/money.hpp"

namespace campfin::ingest {

enum class DonorCategory { Cnpj, Cpf, NonOriginal, Unknown };
enum class RecipientKind { Candidate, Party, Committee };

inline std::string_view to_string(DonorCategory c) {
    switch (c) {
        case DonorCategory::Cnpj: return "CNPJ";
        case DonorCategory::Cpf: return "CPF";
        case DonorCategory::NonOriginal: return "NonOriginal";
        case DonorCategory::Unknown: return "Unknown";
    }
    return "Unknown";
}

inline std::string_view to_string(RecipientKind k) {
    switch (k) {
        case RecipientKind::Candidate: return "Candidate";
        case RecipientKind::Party: return "Party";
        case RecipientKind::Committee: return "Committee";
    }
    return "Candidate";
}

inline std::optional<DonorCategory> donor_category_from(std::string_view s) {
    if (s == "CNPJ") return DonorCategory::Cnpj;
    if (s == "CPF") return DonorCategory::Cpf;
    if (s == "NonOriginal") return DonorCategory::NonOriginal;
    if (s == "Unknown") return DonorCategory::Unknown;
    return std::nullopt;
}

inline std::optional<RecipientKind> recipient_kind_from(std::string_view s) {
    if (s == "Candidate") return RecipientKind::Candidate;
    if (s == "Party") return RecipientKind::Party;
    if (s == "Committee") return RecipientKind::Committee;
    return std::nullopt;
}

/// One declared donation in canonical form.
struct DonationRecord {
    Cents amount_cents = 0;
    DonorCategory donor_category = DonorCategory::Unknown;
    std::string donor_id;
    RecipientKind recipient_kind = RecipientKind::Candidate;
    std::string recipient_id;
    std::string party;
    std::string federal_unit;
    std::string office;

    friend bool operator==(const DonationRecord&, const DonationRecord&) = default;
};

/// One candidate's result plus (after joining) total donations received.
struct CandidateOutcome {
    std::string candidate_id;
    std::string federal_unit;
    std::string office;
    bool elected = false;
    Cents total_donations = 0;

    friend bool operator==(const CandidateOutcome&, const CandidateOutcome&) = default;
};

/// A mapped column: 0-based index or header name.
using ColumnRef = std::variant<int, std::string>;

class schema_error : public std::runtime_error {
public:
    explicit schema_error(const std::string& what) : std::runtime_error(what) {}
};

/// Externalized file layout: the TSE exports never documented their columns,
/// and layouts drift across election years, so the mapping lives in a config
/// file rather than in code.
struct IngestSchema {
    char delimiter = ';';
    char decimal_separator = ',';
    std::string text_encoding = "latin1";  // or "utf-8"
    std::optional<char> quote_char = '"';
    RecipientKind recipient_kind = RecipientKind::Candidate;
    std::map<std::string, ColumnRef> column_map;
    std::vector<std::string> elected_values;

    static constexpr const char* kDonationColumns[] = {
        "amount", "donor_id", "recipient_id", "party", "federal_unit", "office"};
    static constexpr const char* kOutcomeColumns[] = {
        "candidate_id", "federal_unit", "office", "situation"};

    void require_columns(std::span<const char* const> names) const {
        for (const char* name : names)
            if (!column_map.contains(name))
                throw schema_error(std::string("schema is missing column mapping '") + name +
                                   "'");
        std::set<int> indices;
        for (const auto& [key, ref] : column_map)
            if (const int* idx = std::get_if<int>(&ref))
                if (!indices.insert(*idx).second)
                    throw schema_error("schema maps two fields to column index " +
                                       std::to_string(*idx));
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return std::string(s);
}

inline bool iequals_ascii(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        unsigned char ca = static_cast<unsigned char>(a[i]);
        unsigned char cb = static_cast<unsigned char>(b[i]);
        if (ca >= 'a' && ca <= 'z') ca -= 32;
        if (cb >= 'a' && cb <= 'z') cb -= 32;
        if (ca != cb) return false;
    }
    return true;
}

/// Latin-1 bytes to UTF-8; bytes below 0x80 pass through.
inline std::string latin1_to_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char b : bytes) {
        if (b < 0x80) {
            out.push_back(static_cast<char>(b));
        } else {
            out.push_back(static_cast<char>(0xC0 | (b >> 6)));
            out.push_back(static_cast<char>(0x80 | (b & 0x3F)));
        }
    }
    return out;
}

inline bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b = static_cast<unsigned char>(s[i]);
        std::size_t len;
        if (b < 0x80) len = 1;
        else if ((b >> 5) == 0x6) len = 2;
        else if ((b >> 4) == 0xE) len = 3;
        else if ((b >> 3) == 0x1E) len = 4;
        else return false;
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        i += len;
    }
    return true;
}

/// Decode one raw line to UTF-8 per the schema encoding. Returns nullopt on
/// invalid input (only possible for utf-8 input).
inline std::optional<std::string> decode_line(std::string_view raw,
                                              const std::string& encoding) {
    if (encoding == "utf-8" || encoding == "utf8") {
        if (!is_valid_utf8(raw)) return std::nullopt;
        return std::string(raw);
    }
    // latin1 / iso-8859-1 / cp1252 family: every byte decodes
    return latin1_to_utf8(raw);
}

/// Split one delimited line into fields, honoring an optional quote
/// character (doubled quotes escape inside quoted fields).
inline std::vector<std::string> split_fields(std::string_view line, char delimiter,
                                             std::optional<char> quote) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote && c == *quote) {
            if (in_quotes && i + 1 < line.size() && line[i + 1] == *quote) {
                current.push_back(c);
                ++i;
            } else {
                in_quotes = !in_quotes;
            }
        } else if (c == delimiter && !in_quotes) {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

inline std::vector<std::string> read_raw_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline std::size_t digit_count(std::string_view s) {
    std::size_t n = 0;
    for (char c : s)
        if (c >= '0' && c <= '9') ++n;
    return n;
}

/// Resolve the schema's column map against a decoded header line.
inline std::unordered_map<std::string, std::size_t> resolve_columns(
    const IngestSchema& schema, const std::vector<std::string>& header) {
    std::unordered_map<std::string, std::size_t> resolved;
    for (const auto& [field, ref] : schema.column_map) {
        if (const int* idx = std::get_if<int>(&ref)) {
            if (*idx < 0) throw schema_error("negative column index for '" + field + "'");
            resolved[field] = static_cast<std::size_t>(*idx);
        } else {
            const std::string& name = std::get<std::string>(ref);
            const auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) {
                return trim(h) == name;
            });
            if (it == header.end())
                throw schema_error("header row 1 has no column named '" + name + "'");
            resolved[field] = static_cast<std::size_t>(it - header.begin());
        }
    }
    return resolved;
}

}  // namespace detail

/// Per-file parse accounting: malformed rows are reported, never silently
/// dropped, and a forensic run refuses files where more than 0.1% fail.
struct ParseReport {
    struct BadRow {
        std::size_t row_number;  // 1-based, header included
        std::string reason;
    };
    std::size_t rows_total = 0;   // data rows seen
    std::size_t rows_parsed = 0;  // data rows converted
    std::vector<BadRow> malformed;

    bool exceeds_failure_threshold() const {
        return rows_total > 0 &&
               static_cast<double>(malformed.size()) > 0.001 * static_cast<double>(rows_total);
    }
};

struct DonationParse {
    std::vector<DonationRecord> records;
    ParseReport report;
};

/// Parse a delimited donations file under the schema. Donor classification:
/// an originating-donor id marks NonOriginal (overriding the others), a
/// 14-digit id is CNPJ, an 11-digit id is CPF, anything else is Unknown.
inline DonationParse parse_donations(const std::filesystem::path& path,
                                     const IngestSchema& schema) {
    schema.require_columns(IngestSchema::kDonationColumns);
    const auto raw_lines = detail::read_raw_lines(path);
    if (raw_lines.empty()) throw schema_error(path.string() + ": empty file, no header row");

    const auto header_line = detail::decode_line(raw_lines[0], schema.text_encoding);
    if (!header_line) throw schema_error(path.string() + ": header row is not valid UTF-8");
    const auto header = detail::split_fields(*header_line, schema.delimiter, schema.quote_char);
    const auto columns = detail::resolve_columns(schema, header);

    std::size_t max_index = 0;
    for (const auto& [_, idx] : columns) max_index = std::max(max_index, idx);

    const bool has_origin = columns.contains("donor_origin_id");

    DonationParse out;
    for (std::size_t row = 1; row < raw_lines.size(); ++row) {
        const std::size_t row_number = row + 1;
        if (raw_lines[row].empty()) continue;
        ++out.report.rows_total;

        const auto decoded = detail::decode_line(raw_lines[row], schema.text_encoding);
        if (!decoded) {
            out.report.malformed.push_back({row_number, "invalid UTF-8"});
            continue;
        }
        auto fields = detail::split_fields(*decoded, schema.delimiter, schema.quote_char);
        if (fields.size() <= max_index)
            throw schema_error(path.string() + ": row " + std::to_string(row_number) +
                               " is missing mapped columns (" + std::to_string(fields.size()) +
                               " fields, need " + std::to_string(max_index + 1) + ")");

        const std::string amount_text = detail::trim(fields[columns.at("amount")]);
        const auto cents = money::parse_decimal_cents(amount_text, schema.decimal_separator);
        if (!cents) {
            out.report.malformed.push_back({row_number, "unparseable amount '" + amount_text + "'"});
            continue;
        }
        if (*cents < 1) {
            out.report.malformed.push_back({row_number, "amount below one cent"});
            continue;
        }

        DonationRecord rec;
        rec.amount_cents = *cents;
        rec.donor_id = detail::trim(fields[columns.at("donor_id")]);
        rec.recipient_kind = schema.recipient_kind;
        rec.recipient_id = detail::trim(fields[columns.at("recipient_id")]);
        rec.party = detail::trim(fields[columns.at("party")]);
        rec.federal_unit = detail::trim(fields[columns.at("federal_unit")]);
        rec.office = detail::trim(fields[columns.at("office")]);

        const std::string origin =
            has_origin ? detail::trim(fields[columns.at("donor_origin_id")]) : std::string();
        const std::size_t id_digits = detail::digit_count(rec.donor_id);
        if (!origin.empty())
            rec.donor_category = DonorCategory::NonOriginal;
        else if (id_digits == 14)
            rec.donor_category = DonorCategory::Cnpj;
        else if (id_digits == 11)
            rec.donor_category = DonorCategory::Cpf;
        else
            rec.donor_category = DonorCategory::Unknown;

        out.records.push_back(std::move(rec));
        ++out.report.rows_parsed;
    }
    return out;
}

/// Parse an election-results export. A situation matching any configured
/// elected value (both QP and media modes by default) maps to elected=true.
/// A duplicate candidate id within one office signals a malformed export.
inline std::vector<CandidateOutcome> parse_outcomes(const std::filesystem::path& path,
                                                    const IngestSchema& schema) {
    schema.require_columns(IngestSchema::kOutcomeColumns);
    if (schema.elected_values.empty())
        throw schema_error("outcomes schema must configure elected_values");
    const auto raw_lines = detail::read_raw_lines(path);
    if (raw_lines.empty()) throw schema_error(path.string() + ": empty file, no header row");

    const auto header_line = detail::decode_line(raw_lines[0], schema.text_encoding);
    if (!header_line) throw schema_error(path.string() + ": header row is not valid UTF-8");
    const auto header = detail::split_fields(*header_line, schema.delimiter, schema.quote_char);
    const auto columns = detail::resolve_columns(schema, header);
    std::size_t max_index = 0;
    for (const auto& [_, idx] : columns) max_index = std::max(max_index, idx);

    std::vector<CandidateOutcome> outcomes;
    std::set<std::pair<std::string, std::string>> seen;  // (office, candidate id)
    for (std::size_t row = 1; row < raw_lines.size(); ++row) {
        const std::size_t row_number = row + 1;
        if (raw_lines[row].empty()) continue;
        const auto decoded = detail::decode_line(raw_lines[row], schema.text_encoding);
        if (!decoded)
            throw std::runtime_error(path.string() + ": row " + std::to_string(row_number) +
                                     " is not valid UTF-8");
        auto fields = detail::split_fields(*decoded, schema.delimiter, schema.quote_char);
        if (fields.size() <= max_index)
            throw schema_error(path.string() + ": row " + std::to_string(row_number) +
                               " is missing mapped columns");

        CandidateOutcome o;
        o.candidate_id = detail::trim(fields[columns.at("candidate_id")]);
        o.federal_unit = detail::trim(fields[columns.at("federal_unit")]);
        o.office = detail::trim(fields[columns.at("office")]);
        const std::string situation = detail::trim(fields[columns.at("situation")]);
        o.elected = std::any_of(schema.elected_values.begin(), schema.elected_values.end(),
                                [&](const std::string& v) {
                                    return detail::iequals_ascii(situation, v);
                                });
        if (!seen.insert({o.office, o.candidate_id}).second)
            throw std::runtime_error(path.string() + ": duplicate candidate id '" +
                                     o.candidate_id + "' for office '" + o.office +
                                     "' at row " + std::to_string(row_number));
        outcomes.push_back(std::move(o));
    }
    return outcomes;
}

/// Joined totals plus donations whose recipient matched no candidate.
struct JoinResult {
    std::vector<CandidateOutcome> outcomes;
    std::vector<DonationRecord> unmatched;
};

/// Fill each candidate's total from exact cent sums; candidates without
/// donations keep 0 and unmatched donations land in the residual list.
inline JoinResult join_donations_to_candidates(std::span<const DonationRecord> donations,
                                               std::span<const CandidateOutcome> outcomes) {
    JoinResult result;
    result.outcomes.assign(outcomes.begin(), outcomes.end());
    std::unordered_map<std::string, std::size_t> by_id;
    by_id.reserve(result.outcomes.size());
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
        result.outcomes[i].total_donations = 0;
        by_id.emplace(result.outcomes[i].candidate_id, i);
    }
    for (const auto& d : donations) {
        const auto it = by_id.find(d.recipient_id);
        if (it == by_id.end())
            result.unmatched.push_back(d);
        else
            result.outcomes[it->second].total_donations += d.amount_cents;
    }
    return result;
}

/// MD5 equality check against a 32-hex digest (case-insensitive).
inline bool verify_checksum(const std::filesystem::path& path, std::string_view expected_md5) {
    if (expected_md5.size() != 32)
        throw std::invalid_argument("expected md5 must be 32 hex characters");
    std::string expected_lower(expected_md5);
    for (char& c : expected_lower)
        if (c >= 'A' && c <= 'F') c += 32;
    return campfin::detail::md5_file(path.string()) == expected_lower;
}

struct ManifestEntry {
    std::string md5;
    std::string filename;
};

/// Read a checksum manifest in md5sum format: "<hex><space><space><name>"
/// (a '*' binary marker before the name is tolerated).
inline std::vector<ManifestEntry> read_md5_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.size() < 35)
            throw std::runtime_error(path.string() + ": malformed manifest line " +
                                     std::to_string(row));
        ManifestEntry e;
        e.md5 = line.substr(0, 32);
        std::size_t name_pos = 34;
        if (line[name_pos] == '*') ++name_pos;
        e.filename = line.substr(name_pos);
        for (char c : e.md5)
            if (!std::isxdigit(static_cast<unsigned char>(c)))
                throw std::runtime_error(path.string() + ": bad digest on manifest line " +
                                         std::to_string(row));
        entries.push_back(std::move(e));
    }
    return entries;
}

inline void write_md5_manifest(const std::filesystem::path& path,
                               std::span<const ManifestEntry> entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
    for (const auto& e : entries) out << e.md5 << "  " << e.filename << "\n";
}

namespace detail {

inline bool needs_csv_quoting(std::string_view field) {
    return field.find_first_of(",\"\n") != std::string_view::npos;
}

inline std::string csv_escape(std::string_view field) {
    if (!needs_csv_quoting(field)) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace detail

inline constexpr std::string_view kCanonicalHeader =
    "amount_cents,donor_category,donor_id,recipient_kind,recipient_id,party,federal_unit,office";

/// Canonical UTF-8 CSV dump, one row per record in input order.
inline void write_canonical_csv(std::ostream& out, std::span<const DonationRecord> records) {
    out << kCanonicalHeader << "\n";
    for (const auto& r : records) {
        out << r.amount_cents << ',' << to_string(r.donor_category) << ','
            << detail::csv_escape(r.donor_id) << ',' << to_string(r.recipient_kind) << ','
            << detail::csv_escape(r.recipient_id) << ',' << detail::csv_escape(r.party) << ','
            << detail::csv_escape(r.federal_unit) << ',' << detail::csv_escape(r.office)
            << "\n";
    }
}

inline void write_canonical_csv(const std::filesystem::path& path,
                                std::span<const DonationRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    write_canonical_csv(out, records);
}

/// Strict reader for the canonical dump (round-trips write_canonical_csv).
inline std::vector<DonationRecord> read_canonical_csv(const std::filesystem::path& path) {
    const auto lines = detail::read_raw_lines(path);
    if (lines.empty() || lines[0] != kCanonicalHeader)
        throw schema_error(path.string() + ": not a canonical donation dump");
    std::vector<DonationRecord> records;
    records.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = detail::split_fields(lines[i], ',', '"');
        if (fields.size() != 8)
            throw schema_error(path.string() + ": row " + std::to_string(i + 1) +
                               " has " + std::to_string(fields.size()) + " fields, want 8");
        DonationRecord r;
        try {
            r.amount_cents = std::stoll(fields[0]);
        } catch (const std::exception&) {
            throw schema_error(path.string() + ": row " + std::to_string(i + 1) +
                               " has a bad amount");
        }
        const auto cat = donor_category_from(fields[1]);
        const auto kind = recipient_kind_from(fields[3]);
        if (!cat || !kind)
            throw schema_error(path.string() + ": row " + std::to_string(i + 1) +
                               " has bad enum values");
        r.donor_category = *cat;
        r.donor_id = fields[2];
        r.recipient_kind = *kind;
        r.recipient_id = fields[4];
        r.party = fields[5];
        r.federal_unit = fields[6];
        r.office = fields[7];
        records.push_back(std::move(r));
    }
    return records;
}

/// Parse a schema config: 'key=value' lines, '#' comments. Column mappings
/// use 'column.<field>=<header name or 0-based index>'; elected situations
/// are '|'-separated in elected_values.
inline IngestSchema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open schema: " + path.string());
    IngestSchema schema;
    schema.column_map.clear();
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw schema_error(path.string() + ": line " + std::to_string(row) +
                               " is not key=value");
        const std::string key = detail::trim(trimmed.substr(0, eq));
        const std::string value = trimmed.substr(eq + 1);
        if (key == "delimiter") {
            if (value.size() != 1) throw schema_error("delimiter must be one character");
            schema.delimiter = value[0];
        } else if (key == "decimal_separator") {
            if (value.size() != 1) throw schema_error("decimal_separator must be one character");
            schema.decimal_separator = value[0];
        } else if (key == "encoding") {
            schema.text_encoding = detail::trim(value);
        } else if (key == "quote") {
            const std::string v = detail::trim(value);
            schema.quote_char = v.empty() ? std::nullopt : std::optional<char>(v[0]);
        } else if (key == "recipient_kind") {
            const std::string v = detail::trim(value);
            if (detail::iequals_ascii(v, "candidate"))
                schema.recipient_kind = RecipientKind::Candidate;
            else if (detail::iequals_ascii(v, "party"))
                schema.recipient_kind = RecipientKind::Party;
            else if (detail::iequals_ascii(v, "committee"))
                schema.recipient_kind = RecipientKind::Committee;
            else
                throw schema_error("unknown recipient_kind '" + v + "'");
        } else if (key == "elected_values") {
            schema.elected_values.clear();
            std::string item;
            std::istringstream ss(value);
            while (std::getline(ss, item, '|')) {
                const std::string v = detail::trim(item);
                if (!v.empty()) schema.elected_values.push_back(v);
            }
        } else if (key.starts_with("column.")) {
            const std::string field = key.substr(7);
            const std::string v = detail::trim(value);
            if (v.empty()) throw schema_error("empty column mapping for '" + field + "'");
            const bool numeric = std::all_of(v.begin(), v.end(), [](char c) {
                return c >= '0' && c <= '9';
            });
            if (numeric) {
                try {
                    schema.column_map[field] = std::stoi(v);
                } catch (const std::exception&) {
                    throw schema_error("column index out of range for '" + field + "'");
                }
            } else {
                schema.column_map[field] = v;
            }
        } else {
            throw schema_error(path.string() + ": unknown schema key '" + key + "'");
        }
    }
    return schema;
}

}  // namespace campfin::ingest
