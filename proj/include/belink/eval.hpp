#pragma once

#include "belink/genqr.hpp"
#include "belink/kb.hpp"
#include "belink/reranker.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace belink {

// A dataset mention with its gold concept; absent gold means gold-NIL.
struct AnnotatedMention {
    MentionQuery query;
    std::optional<ConceptId> gold;
};

// JSONL: {"doc_id": str, "context": str, "mention": str, "span": [s,e]?,
// "gold": str|null}. NIL encoded as null or "-1". Order-preserving; malformed
// lines raise ParseError with the line number.
std::vector<AnnotatedMention> load_dataset(const std::string& path);

struct EvalOutcome {
    size_t mention_idx = 0;
    int baseline_correct = 0;
    int system_correct = 0;
    int system_correct_nil_sensitive = 0;
    RerankDecision decision;
};

// Correctness bits for one mention. Plain mode replaces a NIL or invalid
// decision by the top-1 retrieved concept (a choice is enforced for every
// mention); NIL-sensitive mode credits a NIL decision on a gold-NIL mention.
EvalOutcome score_outcome(const RerankDecision& decision, const std::optional<ConceptId>& gold,
                          const std::optional<ConceptId>& top1);

struct TTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    bool significant_at_95 = false;
};

// Two-sided paired t-test on per-mention correctness differences. Sample
// stddev (n-1); p from the Student t CDF with n-1 dof. All-zero differences
// give t=0, p=1; a constant nonzero difference vector gives |t|=inf, p=0.
TTestResult paired_t_test(const std::vector<int>& system_bits,
                          const std::vector<int>& baseline_bits);

// Two-sided tail probability of Student's t with `dof` degrees of freedom,
// via the regularized incomplete beta function.
double student_t_two_sided_p(double t, double dof);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Serial, unbatched Q/s: mentions processed one at a time, a warm-up prefix
// excluded from timing. One-time costs (KB embedding, index build) are the
// caller's, not measured here.
double measure_throughput(const std::function<void(const AnnotatedMention&)>& process_one,
                          const std::vector<AnnotatedMention>& mentions, size_t warmup = 5);

struct EvalReport {
    double acc_at_1 = 0.0;
    double nil_sensitive_acc_at_1 = 0.0;
    double baseline_acc = 0.0;
    double t_statistic = 0.0;
    double p_value = 1.0;
    bool significant_at_95 = false;
    std::optional<double> throughput_qps; // absent unless a throughput pass ran
    size_t n = 0;
    size_t gold_missing_from_kb = 0; // retained and scored, reported separately
    std::vector<EvalOutcome> outcomes;
};

// Aggregates outcomes into a report (throughput left unset).
EvalReport summarize_outcomes(std::vector<EvalOutcome> outcomes);

// One evaluation run feeding a cross-domain transfer matrix cell.
struct TransferRun {
    std::string source_tag;
    std::string target_tag;
    double acc_at_1 = 0.0;
    std::vector<int> system_bits;
};

// CSV with an Acc@1 matrix (rows = sources, columns = targets) followed by a
// per-cell p-value matrix vs the diagonal run of the same target column.
// Columns whose diagonal run is missing are marked NA.
std::string transfer_matrix_csv(const std::vector<TransferRun>& runs);

} // namespace belink
