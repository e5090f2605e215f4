#include "belink/reranker.hpp"

#include "belink/errors.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>

namespace belink {

RerankPrompt build_prompt(const MentionQuery& q, const OptionList& opts) {
    std::string user = "<Instruct>: Given the context " + q.context +
                       ", select the correct biomedical concept corresponding to " + q.mention +
                       ". Answer using one of the provided options.\n<Options>: \n";
    for (const auto& option : opts.options) {
        user += option.letter;
        user += ": ";
        user += option.text;
        user += '\n';
    }
    user += opts.none_letter;
    user += ": ";
    user += OptionList::kNoneText;

    RerankPrompt prompt;
    prompt.assistant_prefix = "<think></think>\nAnswer:";
    prompt.messages.push_back({"user", user});
    prompt.rendered = "<im_start>user\n" + user + "\n<im_end>\n<im_start>assistant\n" +
                      prompt.assistant_prefix;
    return prompt;
}

namespace {

// First non-whitespace character, uppercased; 0 when the answer is blank.
char parse_answer_letter(const std::string& raw) {
    for (char c : raw) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
    }
    return 0;
}

RerankDecision fallback_decision(const CandidateSet& cs, std::string raw_answer, bool llm_error) {
    RerankDecision decision;
    decision.raw_answer = std::move(raw_answer);
    decision.llm_error = llm_error;
    if (auto top1 = cs.top1()) {
        decision.predicted = *top1;
        decision.fell_back = true;
    } else {
        decision.is_nil = true; // nothing retrieved, nothing to fall back to
    }
    return decision;
}

} // namespace

RerankDecision select_setwise(const RerankPrompt& prompt, const OptionList& opts,
                              const CandidateSet& cs, LlmClient& llm,
                              std::optional<char> gold_letter_hint) {
    LlmRequest request;
    request.messages = prompt.messages;
    request.assistant_prefix = prompt.assistant_prefix;
    request.raw_prompt = prompt.rendered;
    request.max_tokens = 1;
    request.temperature = 0.0;
    request.oracle_gold_letter = gold_letter_hint;

    auto started = std::chrono::steady_clock::now();
    LlmResult result;
    try {
        result = llm.complete(request);
    } catch (const TransportError& e) {
        RerankDecision decision = fallback_decision(cs, e.what(), true);
        decision.latency = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::steady_clock::now() - started);
        return decision;
    } catch (const ProtocolError& e) {
        RerankDecision decision = fallback_decision(cs, e.what(), true);
        decision.latency = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::steady_clock::now() - started);
        return decision;
    }
    auto latency = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - started);

    RerankDecision decision;
    decision.raw_answer = result.text;
    decision.latency = latency;
    char letter = parse_answer_letter(result.text);
    if (letter == opts.none_letter) {
        decision.is_nil = true;
    } else if (letter >= 'A' && letter < opts.none_letter) {
        decision.predicted = cs.candidates[static_cast<size_t>(letter - 'A')].concept_id;
    } else {
        decision = fallback_decision(cs, result.text, false);
        decision.latency = latency;
    }
    return decision;
}

std::vector<PointwiseScore> score_pointwise(const MentionQuery& q, const CandidateSet& cs,
                                            LlmClient& llm, const std::string& prompt_template) {
    std::vector<PointwiseScore> scores;
    scores.reserve(cs.candidates.size());
    for (const auto& candidate : cs.candidates) {
        std::string user = instantiate_prompt(prompt_template, q);
        size_t pos;
        while ((pos = user.find("{alias}")) != std::string::npos) {
            user.replace(pos, 7, candidate.display_alias);
        }
        LlmRequest request;
        request.messages.push_back({"user", user});
        request.raw_prompt = user;
        request.max_tokens = 1;
        request.temperature = 0.0;
        request.want_logprobs = true;

        LlmResult result = llm.complete(request);
        double yes_mass = 0.0, no_mass = 0.0;
        for (const auto& [token, logprob] : result.top_logprobs) {
            std::string normalized;
            for (char c : token) {
                if (!std::isspace(static_cast<unsigned char>(c))) {
                    normalized += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                }
            }
            if (normalized == "yes") {
                yes_mass += std::exp(logprob);
            } else if (normalized == "no") {
                no_mass += std::exp(logprob);
            }
        }
        if (yes_mass + no_mass <= 0.0) {
            throw ProtocolError("score_pointwise: backend returned no yes/no token probabilities");
        }
        scores.push_back(PointwiseScore{candidate.concept_id, yes_mass / (yes_mass + no_mass)});
    }
    return scores;
}

RerankDecision decide_pointwise(const std::vector<PointwiseScore>& scores, double threshold,
                                bool nil_sensitive) {
    RerankDecision decision;
    if (scores.empty()) {
        decision.is_nil = true;
        return decision;
    }
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i) {
        if (scores[i].yes_probability > scores[best].yes_probability) {
            best = i; // strict: ties keep the lower ordinal
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", scores[best].yes_probability);
    decision.raw_answer = buf;
    if (nil_sensitive && scores[best].yes_probability < threshold) {
        decision.is_nil = true;
        return decision;
    }
    decision.predicted = scores[best].concept_id;
    return decision;
}

std::string training_example_jsonl(const RerankPrompt& prompt, char gold_letter) {
    nlohmann::ordered_json user = {{"role", "user"}, {"content", prompt.messages.front().content}};
    nlohmann::ordered_json assistant = {
        {"role", "assistant"},
        {"content", prompt.assistant_prefix + " " + std::string(1, gold_letter)}};
    nlohmann::ordered_json line = {{"messages", nlohmann::ordered_json::array({user, assistant})}};
    return line.dump();
}

} // namespace belink
