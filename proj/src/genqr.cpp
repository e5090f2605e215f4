#include "belink/genqr.hpp"

#include "belink/errors.hpp"

#include <cctype>
#include <cmath>

namespace belink {

namespace {

void replace_all(std::string& text, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string trim(const std::string& s) {
    size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
        ++begin;
    }
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
        --end;
    }
    return s.substr(begin, end - begin);
}

std::string clean_feedback(const std::string& raw) {
    std::string s = trim(raw);
    auto newline = s.find('\n');
    if (newline != std::string::npos) {
        s = s.substr(0, newline); // single-line feedback only
    }
    s = trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\''))) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

} // namespace

std::string instantiate_prompt(const std::string& prompt_template, const MentionQuery& q) {
    std::string text = prompt_template;
    replace_all(text, "{m}", q.mention);
    replace_all(text, "{T}", q.context);
    return text;
}

FeedbackResult generate_feedback(const MentionQuery& q, LlmClient& llm,
                                 const std::string& prompt_template, int max_tokens) {
    if (q.mention.empty()) {
        throw ContractError("generate_feedback: empty mention");
    }
    LlmRequest request;
    std::string user = instantiate_prompt(prompt_template, q);
    request.messages.push_back({"user", user});
    request.raw_prompt = user;
    request.max_tokens = max_tokens;
    request.temperature = 0.0;

    std::string feedback;
    try {
        feedback = clean_feedback(llm.complete(request).text);
    } catch (const TransportError&) {
        return {q.mention, true};
    } catch (const ProtocolError&) {
        return {q.mention, true};
    }
    if (feedback.empty()) {
        return {q.mention, true};
    }
    return {feedback, false};
}

FusedQuery fuse_query(const EmbeddingVector& mention_vec, const EmbeddingVector& feedback_vec,
                      double alpha) {
    if (mention_vec.dim() != feedback_vec.dim()) {
        throw ContractError("fuse_query: dimension mismatch");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ContractError("fuse_query: alpha must be within [0,1]");
    }
    if (std::fabs(l2_norm(mention_vec) - 1.0) > 1e-6 ||
        std::fabs(l2_norm(feedback_vec) - 1.0) > 1e-6) {
        throw ContractError("fuse_query: inputs must be unit-normalized");
    }
    if (alpha == 1.0) {
        return {mention_vec, false};
    }
    if (alpha == 0.0) {
        return {feedback_vec, false};
    }
    EmbeddingVector combined;
    combined.values.resize(mention_vec.dim());
    for (size_t i = 0; i < combined.values.size(); ++i) {
        combined.values[i] = alpha * mention_vec.values[i] + (1.0 - alpha) * feedback_vec.values[i];
    }
    if (l2_norm(combined) <= 1e-9) {
        return {mention_vec, true}; // antipodal inputs cancelled out
    }
    return {normalize(combined), false};
}

} // namespace belink
