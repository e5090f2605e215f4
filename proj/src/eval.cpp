#include "belink/eval.hpp"

#include "belink/errors.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace belink {

using nlohmann::json;

std::vector<AnnotatedMention> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open dataset file: " + path);
    }
    std::vector<AnnotatedMention> mentions;
    std::string line;
    size_t line_no = 0;
    size_t context_warnings = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!obj.is_object() || !obj.contains("mention") || !obj["mention"].is_string() ||
            obj["mention"].get<std::string>().empty()) {
            throw ParseError("missing non-empty string field 'mention'", line_no);
        }
        if (!obj.contains("context") || !obj["context"].is_string()) {
            throw ParseError("missing string field 'context'", line_no);
        }
        if (!obj.contains("gold")) {
            throw ParseError("missing field 'gold' (string or null)", line_no);
        }
        AnnotatedMention mention;
        mention.query.mention = obj["mention"].get<std::string>();
        mention.query.context = obj["context"].get<std::string>();
        mention.query.doc_id = obj.value("doc_id", std::string{});
        if (obj["gold"].is_null()) {
            mention.gold = std::nullopt;
        } else if (obj["gold"].is_string()) {
            std::string gold = obj["gold"].get<std::string>();
            mention.gold = (gold == "-1") ? std::nullopt : std::make_optional(ConceptId{gold});
        } else {
            throw ParseError("field 'gold' must be a string or null", line_no);
        }
        if (mention.query.context.find(mention.query.mention) == std::string::npos) {
            ++context_warnings;
        }
        mentions.push_back(std::move(mention));
    }
    if (context_warnings > 0) {
        std::fprintf(stderr, "warning: %zu mention(s) in %s do not occur in their context\n",
                     context_warnings, path.c_str());
    }
    return mentions;
}

EvalOutcome score_outcome(const RerankDecision& decision, const std::optional<ConceptId>& gold,
                          const std::optional<ConceptId>& top1) {
    EvalOutcome outcome;
    outcome.decision = decision;
    outcome.baseline_correct = (gold && top1 && *top1 == *gold) ? 1 : 0;

    // plain mode enforces a candidate choice: NIL or absent predictions are
    // replaced by the top-1 retrieved concept
    std::optional<ConceptId> effective = decision.predicted ? decision.predicted : top1;
    outcome.system_correct = (gold && effective && *effective == *gold) ? 1 : 0;

    if (decision.is_nil) {
        outcome.system_correct_nil_sensitive = gold ? 0 : 1;
    } else {
        outcome.system_correct_nil_sensitive =
            (gold && decision.predicted && *decision.predicted == *gold) ? 1 : 0;
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Student t machinery

namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 300;
    constexpr double kEpsilon = 1e-15;
    constexpr double kTiny = 1e-300;

    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) {
        d = kTiny;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) {
            d = kTiny;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) {
            d = kTiny;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEpsilon) {
            return h;
        }
    }
    return h; // converged close enough for any realistic dof
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                       b * std::log1p(-x);
    double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
    if (std::isinf(t)) {
        return 0.0;
    }
    return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

TTestResult paired_t_test(const std::vector<int>& system_bits,
                          const std::vector<int>& baseline_bits) {
    if (system_bits.size() != baseline_bits.size()) {
        throw ContractError("paired_t_test: vectors must have equal length");
    }
    size_t n = system_bits.size();
    if (n < 2) {
        throw ContractError("paired_t_test: need at least 2 paired observations");
    }
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mean += static_cast<double>(system_bits[i] - baseline_bits[i]);
    }
    mean /= static_cast<double>(n);
    double sum_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(system_bits[i] - baseline_bits[i]) - mean;
        sum_sq += d * d;
    }
    double stddev = std::sqrt(sum_sq / static_cast<double>(n - 1));

    TTestResult result;
    if (stddev == 0.0) {
        if (mean == 0.0) {
            return result; // identical vectors: t=0, p=1
        }
        result.t_statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity();
        result.p_value = 0.0;
        result.significant_at_95 = true;
        return result;
    }
    result.t_statistic = mean * std::sqrt(static_cast<double>(n)) / stddev;
    result.p_value = student_t_two_sided_p(result.t_statistic, static_cast<double>(n - 1));
    result.significant_at_95 = result.p_value < 0.05;
    return result;
}

double measure_throughput(const std::function<void(const AnnotatedMention&)>& process_one,
                          const std::vector<AnnotatedMention>& mentions, size_t warmup) {
    if (mentions.empty()) {
        throw ContractError("measure_throughput: no mentions");
    }
    if (warmup >= mentions.size()) {
        warmup = mentions.size() - 1; // keep at least one timed mention
    }
    for (size_t i = 0; i < warmup; ++i) {
        process_one(mentions[i]);
    }
    auto started = std::chrono::steady_clock::now();
    for (size_t i = warmup; i < mentions.size(); ++i) {
        process_one(mentions[i]);
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                         .count();
    if (seconds <= 0.0) {
        seconds = 1e-9;
    }
    return static_cast<double>(mentions.size() - warmup) / seconds;
}

EvalReport summarize_outcomes(std::vector<EvalOutcome> outcomes) {
    EvalReport report;
    report.n = outcomes.size();
    if (outcomes.empty()) {
        report.outcomes = std::move(outcomes);
        return report;
    }
    size_t system = 0, nil_sensitive = 0, baseline = 0;
    std::vector<int> system_bits, baseline_bits;
    system_bits.reserve(outcomes.size());
    baseline_bits.reserve(outcomes.size());
    for (const auto& outcome : outcomes) {
        system += static_cast<size_t>(outcome.system_correct);
        nil_sensitive += static_cast<size_t>(outcome.system_correct_nil_sensitive);
        baseline += static_cast<size_t>(outcome.baseline_correct);
        system_bits.push_back(outcome.system_correct);
        baseline_bits.push_back(outcome.baseline_correct);
    }
    double n = static_cast<double>(outcomes.size());
    report.acc_at_1 = static_cast<double>(system) / n;
    report.nil_sensitive_acc_at_1 = static_cast<double>(nil_sensitive) / n;
    report.baseline_acc = static_cast<double>(baseline) / n;
    if (outcomes.size() >= 2) {
        TTestResult t = paired_t_test(system_bits, baseline_bits);
        report.t_statistic = t.t_statistic;
        report.p_value = t.p_value;
        report.significant_at_95 = t.significant_at_95;
    }
    report.outcomes = std::move(outcomes);
    return report;
}

// ---------------------------------------------------------------------------
// Transfer matrix

std::string transfer_matrix_csv(const std::vector<TransferRun>& runs) {
    if (runs.empty()) {
        throw ContractError("transfer_matrix_csv: no runs");
    }
    std::vector<std::string> sources, targets;
    auto note = [](std::vector<std::string>& tags, const std::string& tag) {
        for (const auto& existing : tags) {
            if (existing == tag) {
                return;
            }
        }
        tags.push_back(tag);
    };
    std::map<std::pair<std::string, std::string>, const TransferRun*> cells;
    for (const auto& run : runs) {
        note(sources, run.source_tag);
        note(targets, run.target_tag);
        cells[{run.source_tag, run.target_tag}] = &run;
    }

    auto find_cell = [&](const std::string& src, const std::string& tgt) -> const TransferRun* {
        auto it = cells.find({src, tgt});
        return it == cells.end() ? nullptr : it->second;
    };

    std::ostringstream out;
    char buf[32];
    out << "acc@1";
    for (const auto& target : targets) {
        out << ',' << target;
    }
    out << '\n';
    for (const auto& source : sources) {
        out << source;
        for (const auto& target : targets) {
            const TransferRun* run = find_cell(source, target);
            if (run) {
                std::snprintf(buf, sizeof(buf), "%.4f", run->acc_at_1);
                out << ',' << buf;
            } else {
                out << ",NA";
            }
        }
        out << '\n';
    }

    out << "\np_vs_diagonal";
    for (const auto& target : targets) {
        out << ',' << target;
    }
    out << '\n';
    for (const auto& source : sources) {
        out << source;
        for (const auto& target : targets) {
            const TransferRun* run = find_cell(source, target);
            const TransferRun* diagonal = find_cell(target, target);
            if (!run || !diagonal || diagonal->system_bits.empty() ||
                run->system_bits.size() != diagonal->system_bits.size()) {
                out << ",NA";
                continue;
            }
            TTestResult t = paired_t_test(run->system_bits, diagonal->system_bits);
            std::snprintf(buf, sizeof(buf), "%.6f", t.p_value);
            out << ',' << buf;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace belink
