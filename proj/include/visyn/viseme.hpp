#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "visyn/common.hpp"
#include "visyn/io.hpp"

namespace visyn {

inline const std::string kEmptyViseme = "#";

// CELEX phoneme -> viseme symbol. Case-sensitive on both sides.
struct VisemeDict {
    std::map<std::string, std::string> map;

    const std::string& viseme_of(const std::string& phoneme) const {
        auto it = map.find(phoneme);
        if (it == map.end()) throw Error("unknown phoneme \"" + phoneme + "\"");
        return it->second;
    }

    // distinct non-empty viseme symbols
    std::vector<std::string> symbols() const {
        std::vector<std::string> out;
        for (const auto& [p, v] : map)
            if (v != kEmptyViseme &&
                std::find(out.begin(), out.end(), v) == out.end())
                out.push_back(v);
        return out;
    }
};

inline VisemeDict default_viseme_dict() {
    VisemeDict d;
    auto add = [&](const char* phonemes, const char* viseme) {
        std::istringstream in(phonemes);
        std::string p;
        while (in >> p) d.map[p] = viseme;
    };
    add("b m p", "P");
    add("d n s t", "T");
    add("@ N g h k x", "-");
    add("l", "L");
    add("f v", "F");
    add("I i j", "I");
    add("E e", "E");
    add("a", "A");
    add("& O Q o", "O");
    add("U Y u y", "U");
    add("r", "R");
    add("z", "S");
    add("S", "G");
    return d;
}

inline void save_viseme_dict(const std::string& path, const VisemeDict& dict) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [p, v] : dict.map) j[p] = v;
    write_text_file(path, j.dump(2) + "\n");
}

inline VisemeDict load_viseme_dict(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, true, true);
    if (!j.is_object()) throw FormatError(path + ": dictionary must be a JSON object");
    VisemeDict d;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_string()) throw FormatError(path + ": viseme for \"" + it.key() + "\" must be a string");
        d.map[it.key()] = it.value().get<std::string>();
    }
    if (d.map.empty()) throw FormatError(path + ": empty dictionary");
    return d;
}

// Tri-context label: previous, current, next viseme. prev/next may be the
// empty marker at word boundaries; cur never is.
struct ExtendedLabel {
    std::string prev, cur, next;

    std::string str() const { return prev + cur + next; }

    bool operator==(const ExtendedLabel& o) const {
        return prev == o.prev && cur == o.cur && next == o.next;
    }
};

// Parses a label like "ALT" or "#-A"; symbols are single characters in the
// shipped dictionary.
inline ExtendedLabel parse_extended_label(const std::string& s) {
    if (s.size() != 3) throw Error("extended label must have 3 symbols: \"" + s + "\"");
    ExtendedLabel l{std::string(1, s[0]), std::string(1, s[1]), std::string(1, s[2])};
    if (l.cur == kEmptyViseme) throw Error("extended label with empty current viseme: \"" + s + "\"");
    return l;
}

// Maps a phoneme sequence (one word) to extended labels, wrapping the word
// boundaries with the empty marker.
inline std::vector<ExtendedLabel> phonemes_to_extended(const std::vector<std::string>& phonemes,
                                                       const VisemeDict& dict) {
    std::vector<std::string> visemes;
    visemes.reserve(phonemes.size());
    for (std::size_t i = 0; i < phonemes.size(); ++i) {
        auto it = dict.map.find(phonemes[i]);
        if (it == dict.map.end())
            throw Error("unknown phoneme \"" + phonemes[i] + "\" at position " + std::to_string(i));
        visemes.push_back(it->second);
    }
    std::vector<ExtendedLabel> out;
    out.reserve(visemes.size());
    for (std::size_t i = 0; i < visemes.size(); ++i) {
        ExtendedLabel l;
        l.prev = i == 0 ? kEmptyViseme : visemes[i - 1];
        l.cur = visemes[i];
        l.next = i + 1 == visemes.size() ? kEmptyViseme : visemes[i + 1];
        out.push_back(l);
    }
    return out;
}

inline std::vector<std::string> split_phoneme_string(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string p;
    while (in >> p) out.push_back(p);
    return out;
}

}  // namespace visyn
