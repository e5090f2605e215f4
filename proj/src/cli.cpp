#include "belink/cli.hpp"

#include "belink/alias_index.hpp"
#include "belink/config.hpp"
#include "belink/errors.hpp"
#include "belink/eval.hpp"
#include "belink/mock_backends.hpp"
#include "belink/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace belink {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

OracleSpec oracle_spec_from_config(const MockBackendConfig& mock) {
    OracleSpec spec;
    if (mock.llm_behavior == "always_gold") {
        spec.behavior = OracleSpec::Behavior::always_gold;
    } else if (mock.llm_behavior == "always_none") {
        spec.behavior = OracleSpec::Behavior::always_none;
    } else if (mock.llm_behavior.rfind("fixed:", 0) == 0) {
        spec.behavior = OracleSpec::Behavior::fixed_reply;
        spec.reply = mock.llm_behavior.substr(6);
    } else {
        throw ContractError("unknown mock llm behavior: " + mock.llm_behavior);
    }
    spec.default_yes_prob = mock.default_yes_prob;
    spec.delay = std::chrono::milliseconds(static_cast<long long>(mock.llm_delay_ms));
    return spec;
}

struct Backends {
    std::shared_ptr<EmbeddingProvider> embedder;
    std::shared_ptr<LlmClient> llm;
    std::shared_ptr<InflightLimiter> limiter;
};

Backends make_backends(const PipelineConfig& config) {
    Backends backends;
    backends.limiter = std::make_shared<InflightLimiter>(config.max_inflight);

    std::shared_ptr<EmbeddingProvider> embedder;
    if (config.mock.enabled) {
        embedder = std::make_shared<MockEmbeddingProvider>(config.mock.embed_dim,
                                                           config.mock.embed_seed);
    } else {
        if (config.embedding.endpoint_url.empty()) {
            throw ContractError("no embedding endpoint configured (use --mock-backends or "
                                "set embedding.endpoint_url)");
        }
        embedder = std::make_shared<HttpEmbeddingProvider>(config.embedding);
    }
    embedder = std::make_shared<LimitedEmbeddingProvider>(std::move(embedder), backends.limiter);
    if (!config.cache_path.empty()) {
        embedder = std::make_shared<CachedEmbedder>(std::move(embedder), config.cache_path);
    }
    backends.embedder = std::move(embedder);

    bool needs_llm = config.genqr_enabled || config.rerank_mode != RerankMode::none;
    if (needs_llm) {
        std::shared_ptr<LlmClient> llm;
        if (config.mock.enabled) {
            llm = std::make_shared<MockLlm>(oracle_spec_from_config(config.mock));
        } else {
            if (config.llm.endpoint_url.empty()) {
                throw ContractError("no LLM endpoint configured (use --mock-backends or set "
                                    "llm.endpoint_url)");
            }
            llm = std::make_shared<HttpLlmClient>(config.llm);
        }
        backends.llm = std::make_shared<LimitedLlmClient>(std::move(llm), backends.limiter);
    }
    return backends;
}

std::shared_ptr<const KnowledgeBase> load_kb_checked(const PipelineConfig& config) {
    if (config.kb_path.empty()) {
        throw ContractError("--kb is required");
    }
    return std::make_shared<const KnowledgeBase>(
        load_kb(config.kb_path, config.resolved_kb_format()));
}

std::shared_ptr<const AliasIndex> obtain_index(const PipelineConfig& config,
                                               const KnowledgeBase& kb,
                                               EmbeddingProvider& embedder) {
    if (!config.index_path.empty() && std::filesystem::exists(config.index_path)) {
        return std::make_shared<const AliasIndex>(AliasIndex::load_snapshot(config.index_path));
    }
    return std::make_shared<const AliasIndex>(build_index(kb, embedder));
}

ordered_json decision_to_json(const RerankDecision& decision) {
    ordered_json out;
    out["predicted"] =
        decision.predicted ? ordered_json(decision.predicted->value) : ordered_json(nullptr);
    out["is_nil"] = decision.is_nil;
    out["fell_back"] = decision.fell_back;
    out["llm_error"] = decision.llm_error;
    out["raw_answer"] = decision.raw_answer;
    return out;
}

ordered_json trace_to_json(const LinkTrace& trace, const KnowledgeBase& kb) {
    ordered_json out;
    out["doc_id"] = trace.query.doc_id;
    out["mention"] = trace.query.mention;
    out["feedback_text"] = trace.feedback_text;
    out["alpha"] = trace.alpha;
    out["genqr_fallback"] = trace.genqr_fallback;
    out["fuse_degenerate"] = trace.fuse_degenerate;
    ordered_json options = ordered_json::array();
    for (const auto& option : trace.options.options) {
        options.push_back({{"letter", std::string(1, option.letter)}, {"text", option.text}});
    }
    out["options"] = options;
    out["none_letter"] = std::string(1, trace.options.none_letter);
    auto top1 = trace.candidates.top1();
    out["top1"] = top1 ? ordered_json(top1->value) : ordered_json(nullptr);
    out["decision"] = decision_to_json(trace.decision);
    if (trace.decision.predicted) {
        const Concept* entry = kb.find(*trace.decision.predicted);
        out["predicted_name"] = entry && !entry->aliases.empty()
                                    ? ordered_json(entry->aliases.front())
                                    : ordered_json(nullptr);
    } else {
        out["predicted_name"] = nullptr;
    }
    return out;
}

void write_sidecar_meta(const std::string& out_path, const PipelineConfig& config,
                        const ordered_json& extra = {}) {
    ordered_json meta;
    meta["config"] = ordered_json::parse(config_to_json(config));
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        meta[it.key()] = it.value();
    }
    std::ofstream out(out_path + ".meta.json", std::ios::trunc);
    out << meta.dump(2) << '\n';
}

// Lenient stdin mention lines: only "mention" is required. A line without a
// "gold" key means "gold unknown", distinct from an explicit null (gold-NIL).
void read_mentions_stream(std::istream& in, std::vector<AnnotatedMention>& mentions,
                          std::vector<bool>& has_gold) {
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        AnnotatedMention mention;
        if (!obj.contains("mention") || !obj["mention"].is_string()) {
            throw ParseError("missing string field 'mention'", line_no);
        }
        mention.query.mention = obj["mention"].get<std::string>();
        mention.query.context = obj.value("context", std::string{});
        mention.query.doc_id = obj.value("doc_id", std::string{});
        if (obj.contains("gold") && obj["gold"].is_string() &&
            obj["gold"].get<std::string>() != "-1") {
            mention.gold = ConceptId{obj["gold"].get<std::string>()};
        }
        has_gold.push_back(obj.contains("gold"));
        mentions.push_back(std::move(mention));
    }
}

int cmd_index(const PipelineConfig& config, const std::string& out_path) {
    auto kb = load_kb_checked(config);
    Backends backends = make_backends(config);
    AliasIndex index = build_index(*kb, *backends.embedder);
    std::string path = out_path.empty() ? config.index_path : out_path;
    if (path.empty()) {
        throw ContractError("index: --out (or index_path) is required");
    }
    index.save_snapshot(path);
    std::fprintf(stderr, "indexed %zu alias records (dim %zu) -> %s\n", index.rows(), index.dim(),
                 path.c_str());
    return 0;
}

int cmd_link(const PipelineConfig& config, const std::string& out_path) {
    auto kb = load_kb_checked(config);
    Backends backends = make_backends(config);
    auto index = obtain_index(config, *kb, *backends.embedder);
    Pipeline pipeline(config, kb, index, backends.embedder, backends.llm);

    std::vector<AnnotatedMention> mentions;
    std::vector<bool> has_gold;
    if (!config.dataset_path.empty()) {
        mentions = load_dataset(config.dataset_path);
        has_gold.assign(mentions.size(), true);
    } else {
        read_mentions_stream(std::cin, mentions, has_gold);
    }

    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file_out.open(out_path, std::ios::trunc);
        if (!file_out) {
            throw std::runtime_error("cannot open output file: " + out_path);
        }
        out = &file_out;
        write_sidecar_meta(out_path, config);
    } else {
        std::cerr << "config: " << config_to_json(config) << '\n';
    }

    for (size_t i = 0; i < mentions.size(); ++i) {
        LinkTrace trace = has_gold[i] ? pipeline.link_annotated(mentions[i])
                                      : pipeline.link_one(mentions[i].query);
        (*out) << trace_to_json(trace, *kb).dump() << '\n';
    }
    return 0;
}

std::string format_report_text(const EvalReport& report, const PipelineConfig& config) {
    std::ostringstream out;
    char line[160];
    out << "system                         Acc@1/NIL-Acc@1      Q/s\n";
    std::snprintf(line, sizeof(line), "%-30s %5.1f/-              -\n", "baseline (top-1)",
                  100.0 * report.baseline_acc);
    out << line;
    std::string qps = "-";
    if (report.throughput_qps) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", *report.throughput_qps);
        qps = buf;
    }
    std::string name = "belink (" + to_string(config.rerank_mode) + ")";
    std::snprintf(line, sizeof(line), "%-30s %5.1f%s/%4.1f          %s\n", name.c_str(),
                  100.0 * report.acc_at_1, report.significant_at_95 ? "+" : " ",
                  100.0 * report.nil_sensitive_acc_at_1, qps.c_str());
    out << line;
    std::snprintf(line, sizeof(line),
                  "n=%zu  paired-t vs baseline: t=%.4f p=%.6f%s  gold-missing-from-kb=%zu\n",
                  report.n, report.t_statistic, report.p_value,
                  report.significant_at_95 ? " (significant at 95%)" : "",
                  report.gold_missing_from_kb);
    out << line;
    return out.str();
}

ordered_json report_to_json(const EvalReport& report, const PipelineConfig& config) {
    ordered_json out;
    out["config"] = ordered_json::parse(config_to_json(config));
    ordered_json metrics;
    metrics["acc_at_1"] = report.acc_at_1;
    metrics["nil_sensitive_acc_at_1"] = report.nil_sensitive_acc_at_1;
    metrics["baseline_acc"] = report.baseline_acc;
    metrics["t_statistic"] = report.t_statistic;
    metrics["p_value"] = report.p_value;
    metrics["significant_at_95"] = report.significant_at_95;
    metrics["throughput_qps"] = report.throughput_qps ? ordered_json(*report.throughput_qps)
                                                      : ordered_json(nullptr);
    metrics["n"] = report.n;
    metrics["gold_missing_from_kb"] = report.gold_missing_from_kb;
    out["metrics"] = metrics;
    ordered_json outcomes = ordered_json::array();
    for (const auto& outcome : report.outcomes) {
        ordered_json o;
        o["idx"] = outcome.mention_idx;
        o["baseline_correct"] = outcome.baseline_correct;
        o["system_correct"] = outcome.system_correct;
        o["system_correct_nil_sensitive"] = outcome.system_correct_nil_sensitive;
        o["decision"] = decision_to_json(outcome.decision);
        outcomes.push_back(std::move(o));
    }
    out["outcomes"] = outcomes;
    return out;
}

int cmd_evaluate(const PipelineConfig& config, const std::string& out_prefix,
                 bool with_throughput) {
    if (config.dataset_path.empty()) {
        throw ContractError("evaluate: --dataset is required");
    }
    auto kb = load_kb_checked(config);
    Backends backends = make_backends(config);
    auto index = obtain_index(config, *kb, *backends.embedder);
    Pipeline pipeline(config, kb, index, backends.embedder, backends.llm);
    std::vector<AnnotatedMention> mentions = load_dataset(config.dataset_path);

    EvalRunResult run = run_accuracy_pass(pipeline, mentions, config.max_inflight);
    if (with_throughput) {
        run.report.throughput_qps =
            run_throughput_pass(pipeline, mentions, config.throughput_warmup);
    }

    std::string prefix = out_prefix.empty() ? "eval_report" : out_prefix;
    {
        std::ofstream json_out(prefix + ".json", std::ios::trunc);
        if (!json_out) {
            throw std::runtime_error("cannot write report: " + prefix + ".json");
        }
        json_out << report_to_json(run.report, config).dump(2) << '\n';
    }
    std::string text = format_report_text(run.report, config);
    {
        std::ofstream text_out(prefix + ".txt", std::ios::trunc);
        text_out << text;
    }
    std::cout << text;
    return 0;
}

int cmd_export_training(const PipelineConfig& config, const std::string& out_path) {
    if (config.dataset_path.empty()) {
        throw ContractError("export-training: --dataset is required");
    }
    if (out_path.empty()) {
        throw ContractError("export-training: --out is required");
    }
    // training export never invokes the re-ranker; force rerank off so the
    // pipeline works without an LLM when GenQR is also disabled
    PipelineConfig export_config = config;
    export_config.rerank_mode = RerankMode::none;

    auto kb = load_kb_checked(export_config);
    Backends backends = make_backends(export_config);
    auto index = obtain_index(export_config, *kb, *backends.embedder);
    Pipeline pipeline(export_config, kb, index, backends.embedder, backends.llm);

    std::vector<AnnotatedMention> mentions = load_dataset(config.dataset_path);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + out_path);
    }
    std::vector<size_t> unretrieved;
    for (size_t i = 0; i < mentions.size(); ++i) {
        LinkTrace trace =
            pipeline.link_annotated(mentions[i], DedupMode::training, derive_seed(config.seed, i));
        out << training_example_jsonl(trace.prompt, *trace.gold_letter) << '\n';
        if (trace.gold_unretrieved) {
            unretrieved.push_back(i);
        }
    }
    ordered_json extra;
    extra["n"] = mentions.size();
    extra["gold_not_retrieved_indices"] = unretrieved;
    write_sidecar_meta(out_path, config, extra);
    if (!unretrieved.empty()) {
        std::fprintf(stderr,
                     "warning: %zu mention(s) exported with the None letter because the gold "
                     "concept was not retrieved\n",
                     unretrieved.size());
    }
    return 0;
}

int cmd_transfer_matrix(const std::string& runs_path, const std::string& out_path) {
    std::ifstream in(runs_path);
    if (!in) {
        throw ParseError("cannot open runs manifest: " + runs_path);
    }
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("runs manifest: " + std::string(e.what()));
    }
    if (!manifest.is_array() || manifest.empty()) {
        throw ParseError("runs manifest must be a non-empty array");
    }
    std::vector<TransferRun> runs;
    for (const auto& entry : manifest) {
        TransferRun run;
        run.source_tag = entry.at("source").get<std::string>();
        run.target_tag = entry.at("target").get<std::string>();
        std::string report_path = entry.at("report").get<std::string>();
        std::ifstream report_in(report_path);
        if (!report_in) {
            throw ParseError("cannot open report: " + report_path);
        }
        json report = json::parse(report_in);
        run.acc_at_1 = report.at("metrics").at("acc_at_1").get<double>();
        for (const auto& outcome : report.at("outcomes")) {
            run.system_bits.push_back(outcome.at("system_correct").get<int>());
        }
        runs.push_back(std::move(run));
    }
    std::string csv = transfer_matrix_csv(runs);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        out << csv;
    }
    return 0;
}

} // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"BeLink: retrieve-and-rerank biomedical entity linking"};
    app.require_subcommand(1);

    PipelineConfig config;
    std::string config_path;
    std::string out_path;
    std::string runs_path;
    bool with_throughput = false;
    bool mock_backends = false;
    bool genqr_on = false, genqr_off = false;
    std::string rerank_mode_name;
    std::string mock_llm_behavior;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--kb", config.kb_path, "knowledge base file (JSONL or TSV)");
        cmd->add_option("--kb-format", config.kb_format, "auto|jsonl|tsv");
        cmd->add_option("--dataset", config.dataset_path, "annotated mention JSONL");
        cmd->add_option("--index", config.index_path, "index snapshot path");
        cmd->add_option("--cache", config.cache_path, "embedding cache path");
        cmd->add_option("--k", config.k, "retrieval depth");
        cmd->add_option("--alpha", config.alpha, "query fusion weight");
        cmd->add_flag("--genqr", genqr_on, "enable generative query reformulation");
        cmd->add_flag("--no-genqr", genqr_off, "disable generative query reformulation");
        cmd->add_option("--rerank", rerank_mode_name, "setwise|pointwise|none");
        cmd->add_flag("--nil-sensitive", config.nil_sensitive, "NIL-sensitive decisions");
        cmd->add_option("--threshold", config.pointwise_threshold,
                        "point-wise NIL score threshold");
        cmd->add_option("--seed", config.seed, "sampling seed");
        cmd->add_option("--max-inflight", config.max_inflight, "backend call concurrency cap");
        cmd->add_flag("--mock-backends", mock_backends, "use offline deterministic backends");
        cmd->add_option("--mock-llm", mock_llm_behavior,
                        "mock behavior: always_gold|always_none|fixed:<reply>");
        cmd->add_option("--mock-dim", config.mock.embed_dim, "mock embedding dim");
        cmd->add_option("--mock-seed", config.mock.embed_seed, "mock embedding seed");
        cmd->add_option("--mock-delay-ms", config.mock.llm_delay_ms, "mock LLM delay");
        cmd->add_option("--mock-yes-prob", config.mock.default_yes_prob,
                        "mock point-wise default P(yes)");
        cmd->add_option("--embed-endpoint", config.embedding.endpoint_url,
                        "embedding endpoint URL");
        cmd->add_option("--embed-model", config.embedding.model_name, "embedding model name");
        cmd->add_option("--llm-endpoint", config.llm.endpoint_url, "LLM endpoint URL");
        cmd->add_option("--llm-model", config.llm.model_name, "LLM model name");
        cmd->add_option("--out", out_path, "output path");
    };

    CLI::App* index_cmd = app.add_subcommand("index", "build and save the alias index");
    CLI::App* link_cmd = app.add_subcommand("link", "link mentions from a dataset or stdin");
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "run the evaluation harness");
    CLI::App* export_cmd =
        app.add_subcommand("export-training", "export chat-format training data");
    CLI::App* matrix_cmd =
        app.add_subcommand("transfer-matrix", "assemble a cross-domain transfer matrix CSV");
    for (CLI::App* cmd : {index_cmd, link_cmd, eval_cmd, export_cmd}) {
        add_common(cmd);
    }
    eval_cmd->add_flag("--throughput", with_throughput, "also run the serial throughput pass");
    matrix_cmd->add_option("--runs", runs_path, "manifest JSON of {source,target,report} runs")
        ->required();
    matrix_cmd->add_option("--out", out_path, "output CSV path");

    std::vector<const char*> argv;
    argv.push_back("belink");
    for (const auto& arg : args) {
        argv.push_back(arg.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        // file config first, then every flag the user actually passed on top
        if (!config_path.empty()) {
            CLI::App* active = app.get_subcommands().front();
            PipelineConfig flags = config;
            config = load_config(config_path);
            auto take = [active](const std::string& name, auto& dst, const auto& flag_value) {
                if (active->count(name) > 0) {
                    dst = flag_value;
                }
            };
            take("--kb", config.kb_path, flags.kb_path);
            take("--kb-format", config.kb_format, flags.kb_format);
            take("--dataset", config.dataset_path, flags.dataset_path);
            take("--index", config.index_path, flags.index_path);
            take("--cache", config.cache_path, flags.cache_path);
            take("--k", config.k, flags.k);
            take("--alpha", config.alpha, flags.alpha);
            take("--nil-sensitive", config.nil_sensitive, flags.nil_sensitive);
            take("--threshold", config.pointwise_threshold, flags.pointwise_threshold);
            take("--seed", config.seed, flags.seed);
            take("--max-inflight", config.max_inflight, flags.max_inflight);
            take("--mock-dim", config.mock.embed_dim, flags.mock.embed_dim);
            take("--mock-seed", config.mock.embed_seed, flags.mock.embed_seed);
            take("--mock-delay-ms", config.mock.llm_delay_ms, flags.mock.llm_delay_ms);
            take("--mock-yes-prob", config.mock.default_yes_prob, flags.mock.default_yes_prob);
            take("--embed-endpoint", config.embedding.endpoint_url,
                 flags.embedding.endpoint_url);
            take("--embed-model", config.embedding.model_name, flags.embedding.model_name);
            take("--llm-endpoint", config.llm.endpoint_url, flags.llm.endpoint_url);
            take("--llm-model", config.llm.model_name, flags.llm.model_name);
        }
        if (genqr_on && genqr_off) {
            throw ContractError("--genqr and --no-genqr are mutually exclusive");
        }
        if (genqr_on) {
            config.genqr_enabled = true;
        }
        if (genqr_off) {
            config.genqr_enabled = false;
        }
        if (!rerank_mode_name.empty()) {
            config.rerank_mode = rerank_mode_from_string(rerank_mode_name);
        }
        if (mock_backends) {
            config.mock.enabled = true;
        }
        if (!mock_llm_behavior.empty()) {
            config.mock.llm_behavior = mock_llm_behavior;
        }

        if (*index_cmd) {
            return cmd_index(config, out_path);
        }
        if (*link_cmd) {
            return cmd_link(config, out_path);
        }
        if (*eval_cmd) {
            return cmd_evaluate(config, out_path, with_throughput);
        }
        if (*export_cmd) {
            return cmd_export_training(config, out_path);
        }
        if (*matrix_cmd) {
            return cmd_transfer_matrix(runs_path, out_path);
        }
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const TransportError& e) {
        std::cerr << "backend failure: " << e.what() << '\n';
        return 3;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace belink
