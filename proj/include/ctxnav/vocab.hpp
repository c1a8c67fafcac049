#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctxnav/errors.hpp"

namespace ctxnav {

// Word <-> index mapping for instructions.  Index 0 is reserved for padding;
// real words get 1..size()-1 in sorted order, which makes the table a pure
// function of the word set.
class Vocab {
  public:
    static constexpr int kPadIndex = 0;
    static const std::string& pad_word();

    Vocab() = default;
    static Vocab build(std::span<const std::vector<std::string>> sentences);

    int id(const std::string& word) const;        // UnknownTokenError
    const std::string& word(int id) const;        // CtxError on bad index
    bool contains(const std::string& word) const;
    int size() const { return static_cast<int>(words_.size()); }

    std::string to_json() const;
    static Vocab from_json(const std::string& text);  // FormatError

  private:
    std::vector<std::string> words_;      // index -> word, [0] = pad
    std::map<std::string, int> index_;
};

}  // namespace ctxnav
