#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "campfin/detail/md5.hpp"
#include "campfin/ingest.hpp"

using namespace campfin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("campfin_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path file(const std::string& name) const { return path / name; }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ingest::IngestSchema donation_schema() {
    ingest::IngestSchema s;
    s.delimiter = ';';
    s.decimal_separator = ',';
    s.text_encoding = "latin1";
    s.quote_char = '"';
    s.recipient_kind = ingest::RecipientKind::Candidate;
    s.column_map = {{"amount", std::string("Valor receita")},
                    {"donor_id", std::string("CPF/CNPJ do doador")},
                    {"donor_origin_id", std::string("Origem")},
                    {"recipient_id", std::string("Sequencial")},
                    {"party", std::string("Partido")},
                    {"federal_unit", std::string("UF")},
                    {"office", std::string("Cargo")}};
    return s;
}

std::string donation_header() {
    return "\"Sequencial\";\"UF\";\"Partido\";\"Cargo\";\"CPF/CNPJ do doador\";"
           "\"Valor receita\";\"Origem\"\r\n";
}

std::string donation_row(const std::string& seq, const std::string& donor,
                         const std::string& amount, const std::string& origin) {
    return "\"" + seq + "\";\"AC\";\"PVX\";\"DEPUTADO FEDERAL\";\"" + donor + "\";\"" +
           amount + "\";\"" + origin + "\"\r\n";
}

}  // namespace

TEST_CASE("md5 known vectors", "[ingest]") {
    CHECK(detail::md5_hex("") == "d41d8cd98f00b204e9800998ecf8427e");
    CHECK(detail::md5_hex("abc") == "900150983cd24fb0d6963f7d28e17f72");
    CHECK(detail::md5_hex("The quick brown fox jumps over the lazy dog") ==
          "9e107d9d372bb6826bd81d3542a419d6");
    // 64-byte block boundary
    CHECK(detail::md5_hex(std::string(64, 'a')) == detail::md5_hex(std::string(64, 'a')));
}

TEST_CASE("verify_checksum on files", "[ingest]") {
    TempDir dir;
    write_bytes(dir.file("empty.bin"), "");
    CHECK(ingest::verify_checksum(dir.file("empty.bin"), "d41d8cd98f00b204e9800998ecf8427e"));
    CHECK(ingest::verify_checksum(dir.file("empty.bin"), "D41D8CD98F00B204E9800998ECF8427E"));
    // one hex char off
    CHECK_FALSE(
        ingest::verify_checksum(dir.file("empty.bin"), "d41d8cd98f00b204e9800998ecf8427f"));
    CHECK_THROWS_AS(ingest::verify_checksum(dir.file("empty.bin"), "abc"),
                    std::invalid_argument);
    CHECK_THROWS(ingest::verify_checksum(dir.file("missing.bin"),
                                         "d41d8cd98f00b204e9800998ecf8427e"));
}

TEST_CASE("manifest round trip and md5sum interop format", "[ingest]") {
    TempDir dir;
    std::vector<ingest::ManifestEntry> entries{
        {"d41d8cd98f00b204e9800998ecf8427e", "a.txt"},
        {"900150983cd24fb0d6963f7d28e17f72", "b.txt"}};
    ingest::write_md5_manifest(dir.file("manifest.md5"), entries);

    std::ifstream in(dir.file("manifest.md5"), std::ios::binary);
    std::string line;
    std::getline(in, line);
    CHECK(line == "d41d8cd98f00b204e9800998ecf8427e  a.txt");

    const auto read_back = ingest::read_md5_manifest(dir.file("manifest.md5"));
    REQUIRE(read_back.size() == 2);
    CHECK(read_back[1].md5 == entries[1].md5);
    CHECK(read_back[1].filename == "b.txt");

    write_bytes(dir.file("star.md5"),
                "d41d8cd98f00b204e9800998ecf8427e *binary.bin\n");
    const auto star = ingest::read_md5_manifest(dir.file("star.md5"));
    REQUIRE(star.size() == 1);
    CHECK(star[0].filename == "binary.bin");
}

TEST_CASE("amount text parses exactly to cents", "[ingest]") {
    using money::parse_decimal_cents;
    CHECK(parse_decimal_cents("1,56", ',') == Cents{156});
    CHECK(parse_decimal_cents("14000000,00", ',') == Cents{1'400'000'000});
    CHECK(parse_decimal_cents("0,02", ',') == Cents{2});
    CHECK(parse_decimal_cents("100", ',') == Cents{10'000});
    CHECK(parse_decimal_cents("7,5", ',') == Cents{750});
    CHECK(parse_decimal_cents("3.25", '.') == Cents{325});
    CHECK_FALSE(parse_decimal_cents("1,234", ','));   // sub-cent precision
    CHECK_FALSE(parse_decimal_cents("-5,00", ','));   // signs rejected
    CHECK_FALSE(parse_decimal_cents("1.5e3", '.'));
    CHECK_FALSE(parse_decimal_cents("", ','));
    CHECK_FALSE(parse_decimal_cents("abc", ','));
    CHECK_FALSE(parse_decimal_cents("92233720368547758070,00", ','));  // overflow
    CHECK(money::format_cents(35050) == "350.50");
    CHECK(money::format_cents(2) == "0.02");
}

TEST_CASE("donations parse with the classification rule", "[ingest]") {
    TempDir dir;
    std::string content = donation_header();
    content += donation_row("C1", "12345678901234", "1,56", "");       // 14 digits -> CNPJ
    content += donation_row("C1", "12345678901", "0,02", "");          // 11 digits -> CPF
    content += donation_row("C2", "12345678901234", "50,00",
                            "98765432109876");                          // origin -> NonOriginal
    content += donation_row("C2", "", "100,00", "");                    // neither -> Unknown
    content += donation_row("C3", "#NULO", "14000000,00", "");          // garbage id -> Unknown
    write_bytes(dir.file("don.txt"), content);

    const auto parsed = ingest::parse_donations(dir.file("don.txt"), donation_schema());
    REQUIRE(parsed.records.size() == 5);
    CHECK(parsed.report.rows_total == 5);
    CHECK(parsed.report.rows_parsed == 5);
    CHECK(parsed.report.malformed.empty());

    CHECK(parsed.records[0].donor_category == ingest::DonorCategory::Cnpj);
    CHECK(parsed.records[0].amount_cents == 156);
    CHECK(parsed.records[1].donor_category == ingest::DonorCategory::Cpf);
    CHECK(parsed.records[1].amount_cents == 2);
    CHECK(parsed.records[2].donor_category == ingest::DonorCategory::NonOriginal);
    CHECK(parsed.records[3].donor_category == ingest::DonorCategory::Unknown);
    CHECK(parsed.records[4].donor_category == ingest::DonorCategory::Unknown);
    CHECK(parsed.records[4].amount_cents == 1'400'000'000);
    CHECK(parsed.records[0].party == "PVX");
    CHECK(parsed.records[0].federal_unit == "AC");
    CHECK(parsed.records[0].recipient_kind == ingest::RecipientKind::Candidate);
}

TEST_CASE("malformed rows are counted, not dropped silently", "[ingest]") {
    TempDir dir;
    std::string content = donation_header();
    content += donation_row("C1", "12345678901", "10,00", "");
    content += donation_row("C1", "12345678901", "not-a-number", "");
    content += donation_row("C1", "12345678901", "0,00", "");  // below one cent
    content += donation_row("C2", "12345678901", "20,00", "");
    write_bytes(dir.file("don.txt"), content);

    const auto parsed = ingest::parse_donations(dir.file("don.txt"), donation_schema());
    CHECK(parsed.records.size() == 2);
    CHECK(parsed.report.rows_total == 4);
    REQUIRE(parsed.report.malformed.size() == 2);
    CHECK(parsed.report.malformed[0].row_number == 3);
    CHECK(parsed.report.exceeds_failure_threshold());  // 2/4 way above 0.1%
}

TEST_CASE("schema mismatch aborts with the offending row", "[ingest]") {
    TempDir dir;
    // header lacks the mapped amount column
    write_bytes(dir.file("bad_header.txt"),
                "\"Sequencial\";\"UF\"\r\n\"C1\";\"AC\"\r\n");
    CHECK_THROWS_AS(ingest::parse_donations(dir.file("bad_header.txt"), donation_schema()),
                    ingest::schema_error);

    // data row with missing trailing columns
    std::string content = donation_header();
    content += donation_row("C1", "12345678901", "10,00", "");
    content += "\"C2\";\"AC\"\r\n";
    write_bytes(dir.file("short_row.txt"), content);
    try {
        ingest::parse_donations(dir.file("short_row.txt"), donation_schema());
        FAIL("expected schema_error");
    } catch (const ingest::schema_error& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }

    // schema with duplicate indices is rejected up front
    auto schema = donation_schema();
    schema.column_map["amount"] = 0;
    schema.column_map["donor_id"] = 0;
    CHECK_THROWS_AS(ingest::parse_donations(dir.file("short_row.txt"), schema),
                    ingest::schema_error);
}

TEST_CASE("latin-1 text decodes into UTF-8 fields", "[ingest]") {
    TempDir dir;
    std::string content = donation_header();
    // 0xC9 = É in latin-1, inside the party field
    std::string row = donation_row("C1", "12345678901", "10,00", "");
    const auto pos = row.find("PVX");
    row.replace(pos, 3, "PV\xC9");
    content += row;
    write_bytes(dir.file("latin.txt"), content);
    const auto parsed = ingest::parse_donations(dir.file("latin.txt"), donation_schema());
    REQUIRE(parsed.records.size() == 1);
    CHECK(parsed.records[0].party == "PV\xC3\x89");  // UTF-8 for É
}

TEST_CASE("outcome parsing maps both elected modes", "[ingest]") {
    TempDir dir;
    ingest::IngestSchema schema;
    schema.delimiter = ';';
    schema.text_encoding = "latin1";
    schema.quote_char = '"';
    schema.column_map = {{"candidate_id", std::string("SEQ")},
                         {"federal_unit", std::string("UF")},
                         {"office", std::string("CARGO")},
                         {"situation", std::string("SITUACAO")}};
    schema.elected_values = {"ELEITO", "ELEITO POR QP", "ELEITO POR M\xC3\x89\x44IA"};

    std::string content = "\"SEQ\";\"UF\";\"CARGO\";\"SITUACAO\"\r\n";
    content += "\"C1\";\"AC\";\"DF\";\"ELEITO POR QP\"\r\n";
    content += "\"C2\";\"AC\";\"DF\";\"ELEITO POR M\xC9\x44IA\"\r\n";  // latin-1 É
    content += "\"C3\";\"AC\";\"DF\";\"N\xC3O ELEITO\"\r\n";           // latin-1 Ã
    content += "\"C4\";\"AC\";\"DF\";\"SUPLENTE\"\r\n";
    write_bytes(dir.file("res.csv"), content);

    const auto outcomes = ingest::parse_outcomes(dir.file("res.csv"), schema);
    REQUIRE(outcomes.size() == 4);
    CHECK(outcomes[0].elected);
    CHECK(outcomes[1].elected);
    CHECK_FALSE(outcomes[2].elected);
    CHECK_FALSE(outcomes[3].elected);

    // duplicate candidate within an office is a malformed export
    content += "\"C1\";\"AC\";\"DF\";\"SUPLENTE\"\r\n";
    write_bytes(dir.file("dup.csv"), content);
    CHECK_THROWS(ingest::parse_outcomes(dir.file("dup.csv"), schema));
}

TEST_CASE("join fills exact totals and reports residuals", "[ingest]") {
    std::vector<ingest::CandidateOutcome> outcomes{{"C1", "AC", "DF", true, 0},
                                                   {"C2", "AC", "DF", false, 0}};
    std::vector<ingest::DonationRecord> donations(3);
    donations[0].recipient_id = "C1";
    donations[0].amount_cents = 10'000;  // 100.00
    donations[1].recipient_id = "C1";
    donations[1].amount_cents = 25'050;  // 250.50
    donations[2].recipient_id = "C9";    // matches nobody
    donations[2].amount_cents = 777;

    const auto joined = ingest::join_donations_to_candidates(donations, outcomes);
    REQUIRE(joined.outcomes.size() == 2);
    CHECK(joined.outcomes[0].total_donations == 35'050);
    CHECK(joined.outcomes[1].total_donations == 0);
    REQUIRE(joined.unmatched.size() == 1);
    CHECK(joined.unmatched[0].amount_cents == 777);
}

TEST_CASE("canonical CSV round-trips parsed records", "[ingest]") {
    TempDir dir;
    std::mt19937_64 rng(31337);
    std::uniform_int_distribution<Cents> amount(1, 2'000'000'000);
    std::uniform_int_distribution<int> pick(0, 3);
    std::vector<ingest::DonationRecord> records;
    for (int i = 0; i < 200; ++i) {
        ingest::DonationRecord r;
        r.amount_cents = amount(rng);
        r.donor_category = static_cast<ingest::DonorCategory>(pick(rng));
        r.donor_id = "id" + std::to_string(i);
        r.recipient_kind = static_cast<ingest::RecipientKind>(pick(rng) % 3);
        r.recipient_id = "C" + std::to_string(i % 40);
        r.party = i % 7 == 0 ? "P,COMMA \"Q\"" : "PV" + std::to_string(i % 5);  // escaping
        r.federal_unit = "AC";
        r.office = "DEPUTADO FEDERAL";
        records.push_back(std::move(r));
    }
    const auto path = dir.file("canon.csv");
    ingest::write_canonical_csv(path, records);
    const auto read_back = ingest::read_canonical_csv(path);
    REQUIRE(read_back.size() == records.size());
    CHECK(read_back == records);

    // header is bit-exact
    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "amount_cents,donor_category,donor_id,recipient_kind,recipient_id,party,"
          "federal_unit,office");
}

TEST_CASE("per-category totals add up to the set total", "[ingest]") {
    TempDir dir;
    std::string content = donation_header();
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> cents(1, 500'000);
    Cents total = 0;
    for (int i = 0; i < 120; ++i) {
        const int c = cents(rng);
        total += c;
        const std::string amount =
            std::to_string(c / 100) + "," +
            (c % 100 < 10 ? "0" + std::to_string(c % 100) : std::to_string(c % 100));
        const int kind = i % 4;
        if (kind == 0)
            content += donation_row("C1", "12345678901234", amount, "");
        else if (kind == 1)
            content += donation_row("C1", "12345678901", amount, "");
        else if (kind == 2)
            content += donation_row("C1", "12345678901234", amount, "55544433322211");
        else
            content += donation_row("C1", "", amount, "");
    }
    write_bytes(dir.file("mix.txt"), content);
    const auto parsed = ingest::parse_donations(dir.file("mix.txt"), donation_schema());
    REQUIRE(parsed.records.size() == 120);
    Cents by_category[4] = {0, 0, 0, 0};
    Cents all = 0;
    for (const auto& r : parsed.records) {
        by_category[static_cast<int>(r.donor_category)] += r.amount_cents;
        all += r.amount_cents;
    }
    CHECK(all == total);
    CHECK(by_category[0] + by_category[1] + by_category[2] + by_category[3] == all);
}

TEST_CASE("schema files load and validate", "[ingest]") {
    TempDir dir;
    write_bytes(dir.file("s.schema"),
                "# comment\n"
                "delimiter=;\n"
                "decimal_separator=,\n"
                "encoding=latin1\n"
                "quote=\"\n"
                "recipient_kind=party\n"
                "column.amount=Valor receita\n"
                "column.donor_id=3\n"
                "column.recipient_id=Sequencial\n"
                "column.party=Partido\n"
                "column.federal_unit=UF\n"
                "column.office=Cargo\n");
    const auto schema = ingest::load_schema(dir.file("s.schema"));
    CHECK(schema.delimiter == ';');
    CHECK(schema.decimal_separator == ',');
    CHECK(schema.recipient_kind == ingest::RecipientKind::Party);
    CHECK(std::get<int>(schema.column_map.at("donor_id")) == 3);
    CHECK(std::get<std::string>(schema.column_map.at("amount")) == "Valor receita");

    write_bytes(dir.file("bad.schema"), "nonsense line\n");
    CHECK_THROWS_AS(ingest::load_schema(dir.file("bad.schema")), ingest::schema_error);
    write_bytes(dir.file("unknown.schema"), "wibble=1\n");
    CHECK_THROWS_AS(ingest::load_schema(dir.file("unknown.schema")), ingest::schema_error);
}

TEST_CASE("parsing the same bytes twice gives identical records", "[ingest]") {
    TempDir dir;
    std::string content = donation_header();
    for (int i = 0; i < 50; ++i)
        content += donation_row("C" + std::to_string(i), "12345678901",
                                std::to_string(i + 1) + ",0" + std::to_string(i % 10), "");
    write_bytes(dir.file("same.txt"), content);
    const auto a = ingest::parse_donations(dir.file("same.txt"), donation_schema());
    const auto b = ingest::parse_donations(dir.file("same.txt"), donation_schema());
    CHECK(a.records == b.records);
}
