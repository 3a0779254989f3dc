#include "corpus.hpp"

#include <cctype>
#include <random>
#include <vector>

namespace udiff::testing {

namespace {

const char* const kOnsets[] = {"b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "v", "w",
                               "br", "ch", "cl", "dr", "st", "th", "tr", "sh", "pl", "gr"};
const char* const kVowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "ou", "y"};
const char* const kCodas[] = {"", "", "", "n", "r", "s", "t", "l", "nd", "st", "ng", "ck"};

template <typename T, std::size_t N>
const T& pick(const T (&items)[N], std::mt19937_64& rng) {
    return items[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

}  // namespace

std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int words = 1500;
    std::vector<std::string> lexicon;
    lexicon.reserve(words);
    std::discrete_distribution<int> syllables({30, 40, 22, 8});
    for (int w = 0; w < words; ++w) {
        std::string word;
        const int n = syllables(rng) + 1;
        for (int s = 0; s < n; ++s) {
            word += pick(kOnsets, rng);
            word += pick(kVowels, rng);
            if (s + 1 == n || rng() % 4 == 0) word += pick(kCodas, rng);
        }
        lexicon.push_back(word);
    }

    std::vector<double> zipf(words);
    for (int w = 0; w < words; ++w) zipf[w] = 1.0 / (w + 2.0);
    std::discrete_distribution<int> unigram(zipf.begin(), zipf.end());

    std::vector<std::vector<int>> successors(words);
    for (auto& next : successors)
        for (int k = 0; k < 4; ++k) next.push_back(unigram(rng));

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> sentence_len(4, 14), paragraph_len(3, 6), four(0, 3);

    std::string text;
    text.reserve(bytes + 256);
    while (text.size() < bytes) {
        const int sentences = paragraph_len(rng);
        for (int s = 0; s < sentences; ++s) {
            const int n = sentence_len(rng);
            int w = unigram(rng);
            for (int i = 0; i < n; ++i) {
                std::string word = lexicon[w];
                if (i == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
                text += word;
                if (i + 1 < n) text += (coin(rng) < 0.08 ? ", " : " ");
                w = coin(rng) < 0.7 ? successors[w][four(rng)] : unigram(rng);
            }
            text += (coin(rng) < 0.1 ? "? " : ". ");
        }
        text.back() = '\n';
    }
    text.resize(bytes);
    return text;
}

}  // namespace udiff::testing
