#include "udiff/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace udiff {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

}  // namespace

std::vector<char32_t> utf8_decode(std::string_view text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto lead = static_cast<unsigned char>(text[i]);
        int extra = 0;
        char32_t cp = 0;
        if (lead < 0x80) {
            cp = lead;
        } else if ((lead & 0xE0) == 0xC0) {
            extra = 1;
            cp = lead & 0x1F;
        } else if ((lead & 0xF0) == 0xE0) {
            extra = 2;
            cp = lead & 0x0F;
        } else if ((lead & 0xF8) == 0xF0) {
            extra = 3;
            cp = lead & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = i + static_cast<std::size_t>(extra) < text.size();
        for (int k = 1; ok && k <= extra; ++k) {
            const auto c = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
            if ((c & 0xC0) != 0x80) ok = false;
            else cp = (cp << 6) | (c & 0x3F);
        }
        static constexpr char32_t kMin[] = {0, 0x80, 0x800, 0x10000};
        if (ok && (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
        if (!ok) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(extra) + 1;
    }
    return out;
}

std::string utf8_encode(std::span<const char32_t> code_points) {
    std::string out;
    out.reserve(code_points.size());
    for (char32_t cp : code_points) {
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = kReplacement;
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Tokenizer Tokenizer::build(std::string_view utf8_text) {
    auto cps = utf8_decode(utf8_text);
    if (cps.empty()) throw std::invalid_argument("cannot build a tokenizer from an empty corpus");
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    return from_symbols(std::move(cps));
}

Tokenizer Tokenizer::from_file(const std::filesystem::path& path) { return build(read_text_file(path)); }

Tokenizer Tokenizer::from_symbols(std::vector<char32_t> symbols) {
    if (symbols.empty()) throw std::invalid_argument("tokenizer needs at least one symbol");
    if (!std::is_sorted(symbols.begin(), symbols.end()) ||
        std::adjacent_find(symbols.begin(), symbols.end()) != symbols.end())
        throw std::invalid_argument("tokenizer symbols must be sorted and distinct");
    Tokenizer t;
    t.symbols_ = std::move(symbols);
    return t;
}

std::vector<Token> Tokenizer::encode(std::string_view utf8_text) const {
    const auto cps = utf8_decode(utf8_text);
    std::vector<Token> out;
    out.reserve(cps.size());
    for (char32_t cp : cps) {
        auto it = std::lower_bound(symbols_.begin(), symbols_.end(), cp);
        out.push_back(it != symbols_.end() && *it == cp ? static_cast<Token>(it - symbols_.begin()) : unknown());
    }
    return out;
}

std::string Tokenizer::decode(std::span<const Token> tokens) const {
    std::vector<char32_t> cps;
    cps.reserve(tokens.size());
    for (Token t : tokens) {
        if (t < 0 || t > unknown()) throw std::out_of_range("token index outside the vocabulary");
        cps.push_back(t == unknown() ? kReplacement : symbols_[static_cast<std::size_t>(t)]);
    }
    return utf8_encode(cps);
}

nlohmann::json Tokenizer::to_json() const {
    std::vector<std::uint32_t> cps(symbols_.begin(), symbols_.end());
    return nlohmann::json{{"mode", "char"}, {"symbols", cps}};
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
    if (j.value("mode", std::string("char")) != "char") throw std::invalid_argument("unsupported tokenizer mode");
    const auto cps = j.at("symbols").get<std::vector<std::uint32_t>>();
    return from_symbols(std::vector<char32_t>(cps.begin(), cps.end()));
}

std::string ascii_clean(std::string_view text) {
    std::vector<char32_t> out;
    for (char32_t cp : utf8_decode(text)) {
        switch (cp) {
            case 0x2018: case 0x2019: case 0x201A: case 0x2032: out.push_back('\''); break;
            case 0x201C: case 0x201D: case 0x201E: case 0x2033: out.push_back('"'); break;
            case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2212: out.push_back('-'); break;
            case 0x2014: case 0x2015: out.push_back('-'); out.push_back('-'); break;
            case 0x2026: out.insert(out.end(), {'.', '.', '.'}); break;
            case 0x00A0: out.push_back(' '); break;
            default: out.push_back(cp);
        }
    }
    return utf8_encode(out);
}

}  // namespace udiff
