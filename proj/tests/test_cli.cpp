#include "belink/cli.hpp"

#include "belink/alias_index.hpp"
#include "belink/mock_backends.hpp"
#include "pipeline_fixture.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>

using namespace belink;
using namespace belink::test;
using nlohmann::json;

namespace {

std::vector<std::string> common_mock_args(const PipelineFixture& fixture) {
    return {"--kb",
            fixture.kb_path(),
            "--dataset",
            fixture.dataset_path(),
            "--cache",
            fixture.dir.file("cli_cache.bin"),
            "--mock-backends",
            "--no-genqr",
            "--mock-dim",
            std::to_string(fixture.config.mock.embed_dim),
            "--mock-seed",
            std::to_string(fixture.config.mock.embed_seed)};
}

int run_cli(std::vector<std::string> args) {
    return cli_main(args);
}

} // namespace

TEST_CASE("cli index writes a snapshot that loads back identical") {
    FixtureSpec spec;
    spec.concepts = 6;
    spec.aliases_per_concept = 2;
    auto fixture = make_pipeline_fixture(spec);
    auto snapshot_path = fixture.dir.file("index.bin");

    auto args = common_mock_args(fixture);
    args.insert(args.begin(), "index");
    args.push_back("--out");
    args.push_back(snapshot_path);
    CHECK(run_cli(args) == 0);

    AliasIndex loaded = AliasIndex::load_snapshot(snapshot_path);
    CHECK(loaded.rows() == fixture.index->rows());
    CHECK(loaded.matrix() == fixture.index->matrix());
}

TEST_CASE("cli index on a corrupt KB exits 2 with a line-numbered message") {
    TempDir dir;
    auto kb_path = dir.file("kb.jsonl");
    write_file(kb_path, R"({"id":"X","aliases":["a"]})"
                        "\n{oops\n");
    int code = run_cli({"index", "--kb", kb_path, "--mock-backends", "--out",
                        dir.file("index.bin")});
    CHECK(code == 2);
}

TEST_CASE("cli link with rerank none emits the top-1 concept per mention") {
    FixtureSpec spec;
    spec.concepts = 10;
    spec.hit_mentions = 8;
    spec.hard_mentions = 0;
    spec.nil_mentions = 2;
    auto fixture = make_pipeline_fixture(spec);
    auto out_path = fixture.dir.file("links.jsonl");

    auto args = common_mock_args(fixture);
    args.insert(args.begin(), "link");
    args.push_back("--rerank");
    args.push_back("none");
    args.push_back("--out");
    args.push_back(out_path);
    REQUIRE(run_cli(args) == 0);

    std::ifstream in(out_path);
    std::string line;
    size_t lines = 0;
    while (std::getline(in, line)) {
        auto obj = json::parse(line);
        ++lines;
        if (!obj["top1"].is_null()) {
            CHECK(obj["decision"]["predicted"] == obj["top1"]);
        } else {
            CHECK(obj["decision"]["is_nil"].get<bool>());
        }
    }
    CHECK(lines == fixture.mentions.size());
    // config echo lands in the sidecar
    CHECK(std::filesystem::exists(out_path + ".meta.json"));
}

TEST_CASE("cli link with the gold oracle matches gold wherever it was retrieved") {
    FixtureSpec spec;
    spec.hit_mentions = 15;
    spec.hard_mentions = 10;
    spec.nil_mentions = 5;
    auto fixture = make_pipeline_fixture(spec);
    auto out_path = fixture.dir.file("links.jsonl");

    auto args = common_mock_args(fixture);
    args.insert(args.begin(), "link");
    args.push_back("--mock-llm");
    args.push_back("always_gold");
    args.push_back("--out");
    args.push_back(out_path);
    REQUIRE(run_cli(args) == 0);

    // oracle: recompute retrieval per mention and compare decisions
    std::ifstream in(out_path);
    std::string line;
    size_t idx = 0;
    while (std::getline(in, line)) {
        auto obj = json::parse(line);
        const auto& mention = fixture.mentions.at(idx++);
        auto trace = fixture.pipeline->link_annotated(mention);
        bool gold_retrieved = false;
        if (mention.gold) {
            for (const auto& candidate : trace.candidates.candidates) {
                gold_retrieved = gold_retrieved || candidate.concept_id == *mention.gold;
            }
        }
        if (gold_retrieved) {
            CHECK(obj["decision"]["predicted"].get<std::string>() == mention.gold->value);
        } else {
            CHECK(obj["decision"]["is_nil"].get<bool>());
        }
    }
    CHECK(idx == fixture.mentions.size());
}

TEST_CASE("cli link on an empty dataset succeeds with empty output") {
    TempDir dir;
    auto kb_path = dir.file("kb.jsonl");
    write_file(kb_path, synthetic_kb_jsonl(3, 1));
    auto dataset = dir.file("empty.jsonl");
    write_file(dataset, "");
    auto out_path = dir.file("links.jsonl");
    int code = run_cli({"link", "--kb", kb_path, "--dataset", dataset, "--mock-backends",
                        "--no-genqr", "--out", out_path});
    CHECK(code == 0);
    CHECK(read_file(out_path).empty());
}

TEST_CASE("cli evaluate twice with a fixed seed is byte-identical") {
    FixtureSpec spec;
    spec.hit_mentions = 12;
    spec.hard_mentions = 8;
    spec.nil_mentions = 4;
    auto fixture = make_pipeline_fixture(spec);

    auto run_once = [&](const std::string& prefix) {
        auto args = common_mock_args(fixture);
        args.insert(args.begin(), "evaluate");
        args.push_back("--seed");
        args.push_back("7");
        args.push_back("--out");
        args.push_back(fixture.dir.file(prefix));
        REQUIRE(run_cli(args) == 0);
        return read_file(fixture.dir.file(prefix) + ".json") +
               read_file(fixture.dir.file(prefix) + ".txt");
    };
    auto first = run_once("report_a");
    auto second = run_once("report_b");
    CHECK(!first.empty());
    // reports embed no paths other than config inputs, which are identical
    CHECK(first == second);
}

TEST_CASE("cli export-training is deterministic and gives NIL mentions the none letter") {
    FixtureSpec spec;
    spec.aliases_per_concept = 3;
    spec.hit_mentions = 10;
    spec.hard_mentions = 5;
    spec.nil_mentions = 5;
    auto fixture = make_pipeline_fixture(spec);

    auto run_export = [&](const std::string& name) {
        auto args = common_mock_args(fixture);
        args.insert(args.begin(), "export-training");
        args.push_back("--seed");
        args.push_back("13");
        args.push_back("--out");
        args.push_back(fixture.dir.file(name));
        REQUIRE(run_cli(args) == 0);
        return read_file(fixture.dir.file(name));
    };
    auto first = run_export("train_a.jsonl");
    auto second = run_export("train_b.jsonl");
    REQUIRE(!first.empty());
    CHECK(first == second);

    // last five dataset lines are gold-NIL: their assistant letter must equal
    // the none letter, i.e. the letter of the final option line in the prompt
    std::istringstream lines(first);
    std::string line;
    std::vector<json> examples;
    while (std::getline(lines, line)) {
        examples.push_back(json::parse(line));
    }
    REQUIRE(examples.size() == fixture.mentions.size());
    for (size_t i = 0; i < examples.size(); ++i) {
        const auto& messages = examples[i]["messages"];
        REQUIRE(messages.size() == 2);
        std::string user = messages[0]["content"].get<std::string>();
        std::string assistant = messages[1]["content"].get<std::string>();
        REQUIRE(assistant.rfind("<think></think>\nAnswer: ", 0) == 0);
        char answer = assistant.back();
        auto none_pos = user.rfind(": None of the above.");
        REQUIRE(none_pos != std::string::npos);
        REQUIRE(none_pos >= 1);
        char none_letter = user[none_pos - 1];
        if (!fixture.mentions[i].gold) {
            CHECK(answer == none_letter);
        }
        CHECK(answer >= 'A');
        CHECK(answer <= none_letter);
    }
}

TEST_CASE("cli transfer-matrix assembles a CSV from evaluate reports") {
    FixtureSpec spec;
    spec.hit_mentions = 10;
    spec.hard_mentions = 5;
    spec.nil_mentions = 5;
    auto fixture = make_pipeline_fixture(spec);

    for (const std::string prefix : {"run_aa", "run_ab", "run_ba", "run_bb"}) {
        auto args = common_mock_args(fixture);
        args.insert(args.begin(), "evaluate");
        args.push_back("--out");
        args.push_back(fixture.dir.file(prefix));
        REQUIRE(run_cli(args) == 0);
    }
    json manifest = json::array();
    manifest.push_back({{"source", "A"}, {"target", "A"},
                        {"report", fixture.dir.file("run_aa.json")}});
    manifest.push_back({{"source", "A"}, {"target", "B"},
                        {"report", fixture.dir.file("run_ab.json")}});
    manifest.push_back({{"source", "B"}, {"target", "A"},
                        {"report", fixture.dir.file("run_ba.json")}});
    manifest.push_back({{"source", "B"}, {"target", "B"},
                        {"report", fixture.dir.file("run_bb.json")}});
    auto manifest_path = fixture.dir.file("runs.json");
    write_file(manifest_path, manifest.dump());

    auto csv_path = fixture.dir.file("matrix.csv");
    REQUIRE(run_cli({"transfer-matrix", "--runs", manifest_path, "--out", csv_path}) == 0);
    auto csv = read_file(csv_path);
    CHECK(csv.find("acc@1,A,B") != std::string::npos);
    CHECK(csv.find("p_vs_diagonal,A,B") != std::string::npos);
    // identical runs in every cell: deltas zero, p = 1 everywhere
    CHECK(csv.find("1.000000") != std::string::npos);
}

TEST_CASE("cli rejects unknown flags with exit 1") {
    CHECK(run_cli({"evaluate", "--definitely-not-a-flag"}) == 1);
    CHECK(run_cli({"link"}) == 1); // missing --kb
}

TEST_CASE("cli stdin link: empty stdin gives empty output, exit 0") {
    const char* binary = std::getenv("BELINK_CLI");
    std::string path = binary ? binary : BELINK_CLI_PATH;
    TempDir dir;
    auto kb_path = dir.file("kb.jsonl");
    write_file(kb_path, synthetic_kb_jsonl(3, 1));
    auto out_path = dir.file("out.jsonl");
    std::string command = "printf '' | " + path + " link --kb " + kb_path +
                          " --mock-backends --no-genqr --out " + out_path + " 2>/dev/null";
    int code = std::system(command.c_str());
    CHECK(code == 0);
    CHECK(read_file(out_path).empty());
}

TEST_CASE("cli stdin link processes bare mention lines") {
    const char* binary = std::getenv("BELINK_CLI");
    std::string path = binary ? binary : BELINK_CLI_PATH;
    TempDir dir;
    auto kb_path = dir.file("kb.jsonl");
    write_file(kb_path, synthetic_kb_jsonl(3, 1));
    auto out_path = dir.file("out.jsonl");
    std::string command =
        "printf '%s\\n' '{\"mention\":\"name 1 form 0\",\"context\":\"x name 1 form 0 y\"}' | " +
        path + " link --kb " + kb_path + " --mock-backends --no-genqr --rerank none --out " +
        out_path + " 2>/dev/null";
    int code = std::system(command.c_str());
    REQUIRE(code == 0);
    auto obj = json::parse(read_file(out_path));
    CHECK(obj["decision"]["predicted"].get<std::string>() == "C1");
}
