#include "ctxnav/vocab.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace ctxnav {

using json = nlohmann::ordered_json;

const std::string& Vocab::pad_word() {
    static const std::string pad = "<pad>";
    return pad;
}

Vocab Vocab::build(std::span<const std::vector<std::string>> sentences) {
    std::set<std::string> uniq;
    for (const auto& s : sentences) uniq.insert(s.begin(), s.end());
    Vocab v;
    v.words_.push_back(pad_word());
    for (const auto& w : uniq) v.words_.push_back(w);
    for (size_t i = 0; i < v.words_.size(); ++i) v.index_[v.words_[i]] = static_cast<int>(i);
    return v;
}

int Vocab::id(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) throw UnknownTokenError(word);
    return it->second;
}

bool Vocab::contains(const std::string& word) const { return index_.count(word) > 0; }

const std::string& Vocab::word(int id) const {
    if (id < 0 || id >= size()) throw CtxError("vocab index " + std::to_string(id) + " out of range");
    return words_[static_cast<size_t>(id)];
}

std::string Vocab::to_json() const {
    json j;
    for (size_t i = 0; i < words_.size(); ++i) j[words_[i]] = i;
    return j.dump(2);
}

Vocab Vocab::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw FormatError(std::string("vocab: ") + ex.what());
    }
    std::vector<std::pair<int, std::string>> pairs;
    for (const auto& [word, idx] : j.items()) pairs.emplace_back(idx.get<int>(), word);
    std::sort(pairs.begin(), pairs.end());
    Vocab v;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].first != static_cast<int>(i))
            throw FormatError("vocab: indices are not contiguous from 0");
        v.words_.push_back(pairs[i].second);
        v.index_[pairs[i].second] = static_cast<int>(i);
    }
    if (v.words_.empty() || v.words_[0] != pad_word())
        throw FormatError("vocab: index 0 must be the padding token");
    return v;
}

}  // namespace ctxnav
