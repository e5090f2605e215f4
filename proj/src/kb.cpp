#include "belink/kb.hpp"

#include "belink/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace belink {

void KnowledgeBase::add_alias(const ConceptId& id, const std::string& alias) {
    auto it = id_to_index_.find(id.value);
    size_t index;
    if (it == id_to_index_.end()) {
        index = concepts_.size();
        concepts_.push_back(Concept{id, {}});
        id_to_index_.emplace(id.value, index);
    } else {
        index = it->second;
    }
    auto& aliases = concepts_[index].aliases;
    if (std::find(aliases.begin(), aliases.end(), alias) != aliases.end()) {
        return; // exact duplicate within the same concept
    }
    aliases.push_back(alias);
    alias_table_[alias].push_back(index);
}

const Concept* KnowledgeBase::find(const ConceptId& id) const {
    auto it = id_to_index_.find(id.value);
    return it == id_to_index_.end() ? nullptr : &concepts_[it->second];
}

std::vector<ConceptId> KnowledgeBase::concepts_for_alias(const std::string& alias) const {
    std::vector<ConceptId> out;
    auto it = alias_table_.find(alias);
    if (it == alias_table_.end()) {
        return out;
    }
    out.reserve(it->second.size());
    for (size_t index : it->second) {
        out.push_back(concepts_[index].id);
    }
    return out;
}

namespace {

void parse_jsonl_line(KnowledgeBase& kb, const std::string& line, size_t line_no) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string()) {
        throw ParseError("missing string field 'id'", line_no);
    }
    if (!obj.contains("aliases") || !obj["aliases"].is_array() || obj["aliases"].empty()) {
        throw ParseError("missing non-empty array field 'aliases'", line_no);
    }
    ConceptId id{obj["id"].get<std::string>()};
    if (id.value.empty()) {
        throw ParseError("empty concept id", line_no);
    }
    for (const auto& alias : obj["aliases"]) {
        if (!alias.is_string() || alias.get<std::string>().empty()) {
            throw ParseError("aliases must be non-empty strings", line_no);
        }
        kb.add_alias(id, alias.get<std::string>());
    }
}

void parse_tsv_line(KnowledgeBase& kb, const std::string& line, size_t line_no) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
        throw ParseError("expected concept_id<TAB>alias", line_no);
    }
    std::string id = line.substr(0, tab);
    std::string alias = line.substr(tab + 1);
    if (!alias.empty() && alias.back() == '\r') {
        alias.pop_back();
    }
    if (id.empty() || alias.empty()) {
        throw ParseError("empty concept id or alias", line_no);
    }
    kb.add_alias(ConceptId{id}, alias);
}

} // namespace

KnowledgeBase load_kb(const std::string& path, KbFormat format) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open KB file: " + path);
    }
    KnowledgeBase kb;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) {
            continue;
        }
        if (format == KbFormat::jsonl) {
            parse_jsonl_line(kb, line, line_no);
        } else {
            parse_tsv_line(kb, line, line_no);
        }
    }
    if (kb.empty()) {
        throw ParseError("empty knowledge base: " + path);
    }
    return kb;
}

std::vector<AliasRecord> enumerate_alias_records(const KnowledgeBase& kb) {
    std::vector<AliasRecord> records;
    for (const auto& entry : kb.concepts()) {
        for (const auto& alias : entry.aliases) {
            records.push_back(AliasRecord{alias, entry.id});
        }
    }
    return records;
}

} // namespace belink
