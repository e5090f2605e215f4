#include "belink/kb.hpp"

#include "belink/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace belink;
using namespace belink::test;

TEST_CASE("load_kb parses a jsonl concept line") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, R"({"id":"MESH:C535396","aliases":["atelosteogenesis, type 1","AO1","giant cell chondrodysplasia"]})"
                         "\n");
    KnowledgeBase kb = load_kb(path, KbFormat::jsonl);
    REQUIRE(kb.size() == 1);
    const Concept& c = kb.concepts().front();
    CHECK(c.id.value == "MESH:C535396");
    REQUIRE(c.aliases.size() == 3);
    CHECK(c.aliases[0] == "atelosteogenesis, type 1");
    CHECK(c.aliases[1] == "AO1");
    CHECK(c.aliases[2] == "giant cell chondrodysplasia");
}

TEST_CASE("load_kb merges duplicate ids preserving first-seen alias order") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, R"({"id":"X","aliases":["a"]})"
                     "\n"
                     R"({"id":"X","aliases":["b"]})"
                     "\n");
    KnowledgeBase kb = load_kb(path, KbFormat::jsonl);
    REQUIRE(kb.size() == 1);
    CHECK(kb.concepts().front().aliases == std::vector<std::string>{"a", "b"});
}

TEST_CASE("load_kb drops exact duplicate aliases within one concept") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, R"({"id":"X","aliases":["a","a","A"]})"
                     "\n");
    KnowledgeBase kb = load_kb(path, KbFormat::jsonl);
    // comparison is case-preserving: "a" and "A" are distinct
    CHECK(kb.concepts().front().aliases == std::vector<std::string>{"a", "A"});
}

TEST_CASE("load_kb tsv keeps an ambiguous alias mapped to both concepts") {
    TempDir dir;
    auto path = dir.file("kb.tsv");
    write_file(path, "G1\tp53\nG2\tp53\nG1\ttumor protein\n");
    KnowledgeBase kb = load_kb(path, KbFormat::two_column_tsv);
    REQUIRE(kb.size() == 2);
    auto owners = kb.concepts_for_alias("p53");
    REQUIRE(owners.size() == 2);
    CHECK(owners[0].value == "G1");
    CHECK(owners[1].value == "G2");
}

TEST_CASE("load_kb reports the offending line number") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, R"({"id":"X","aliases":["a"]})"
                     "\nnot json\n");
    try {
        load_kb(path, KbFormat::jsonl);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("load_kb rejects an empty aliases array") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, R"({"id":"X","aliases":[]})"
                     "\n");
    try {
        load_kb(path, KbFormat::jsonl);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
}

TEST_CASE("load_kb rejects an empty file") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, "");
    CHECK_THROWS_WITH_AS(load_kb(path, KbFormat::jsonl), doctest::Contains("empty knowledge base"),
                         ParseError);
}

TEST_CASE("load_kb rejects malformed tsv") {
    TempDir dir;
    auto path = dir.file("kb.tsv");
    write_file(path, "G1\tp53\nno-tab-here\n");
    try {
        load_kb(path, KbFormat::two_column_tsv);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("enumerate_alias_records counts and order") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, R"({"id":"X","aliases":["x1","x2","x3"]})"
                     "\n");
    KnowledgeBase kb = load_kb(path, KbFormat::jsonl);
    auto records = enumerate_alias_records(kb);
    REQUIRE(records.size() == 3);
    CHECK(records[0].alias == "x1");
    CHECK(records[2].alias == "x3");
}

TEST_CASE("enumerate_alias_records preserves alias ambiguity") {
    TempDir dir;
    auto path = dir.file("kb.tsv");
    write_file(path, "G1\tp53\nG2\tp53\n");
    KnowledgeBase kb = load_kb(path, KbFormat::two_column_tsv);
    auto records = enumerate_alias_records(kb);
    REQUIRE(records.size() == 2);
    CHECK(records[0].alias == "p53");
    CHECK(records[1].alias == "p53");
    CHECK(records[0].concept_id.value != records[1].concept_id.value);
}

TEST_CASE("record count matches brute-force enumeration of the fixture file") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, synthetic_kb_jsonl(8, 3));
    KnowledgeBase kb = load_kb(path, KbFormat::jsonl);
    auto records = enumerate_alias_records(kb);

    // independent count: parse the fixture text directly
    std::map<std::string, std::set<std::string>> expected;
    std::istringstream in(synthetic_kb_jsonl(8, 3));
    std::string line;
    while (std::getline(in, line)) {
        auto id_start = line.find(R"("id":")") + 6;
        auto id_end = line.find('"', id_start);
        std::string id = line.substr(id_start, id_end - id_start);
        size_t pos = line.find('[');
        while ((pos = line.find('"', pos + 1)) != std::string::npos) {
            auto end = line.find('"', pos + 1);
            if (end == std::string::npos) {
                break;
            }
            expected[id].insert(line.substr(pos + 1, end - pos - 1));
            pos = end;
        }
    }
    size_t expected_pairs = 0;
    for (const auto& [id, aliases] : expected) {
        expected_pairs += aliases.size();
    }
    CHECK(records.size() == expected_pairs);
}

TEST_CASE("two loads of the same file yield identical record sequences") {
    TempDir dir;
    auto path = dir.file("kb.jsonl");
    write_file(path, synthetic_kb_jsonl(20, 4));
    auto a = enumerate_alias_records(load_kb(path, KbFormat::jsonl));
    auto b = enumerate_alias_records(load_kb(path, KbFormat::jsonl));
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].alias == b[i].alias);
        CHECK(a[i].concept_id.value == b[i].concept_id.value);
    }
}
