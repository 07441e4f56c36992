#include "maelm/corpus_gen.hpp"

#include <vector>

#include "maelm/rng.hpp"

namespace maelm {

namespace {

std::vector<std::string> build_lexicon(Rng& rng, std::size_t count) {
    const std::vector<std::string> onsets = {"b", "br", "c", "ch", "d", "f",  "g",  "gr",
                                             "k", "l",  "m", "n",  "p", "pl", "r",  "s",
                                             "st", "t", "tr", "v", "w", "sh"};
    const std::vector<std::string> nuclei = {"a", "e", "i", "o", "u", "ai", "ea", "oo"};
    const std::vector<std::string> codas = {"", "n", "r", "s", "t", "l", "m", "nd", "st", "ck"};
    std::vector<std::string> words;
    while (words.size() < count) {
        std::string w;
        const std::size_t syllables = 1 + rng.next_below(3);
        for (std::size_t s = 0; s < syllables; ++s) {
            w += onsets[rng.next_below(onsets.size())];
            w += nuclei[rng.next_below(nuclei.size())];
            if (s + 1 == syllables) w += codas[rng.next_below(codas.size())];
        }
        bool duplicate = false;
        for (const auto& existing : words) duplicate = duplicate || existing == w;
        if (!duplicate) words.push_back(w);
    }
    return words;
}

}  // namespace

std::string generate_corpus_text(std::uint64_t seed, std::size_t target_bytes,
                                 std::size_t lexicon_size) {
    Rng rng(seed);
    std::vector<std::string> lexicon = build_lexicon(rng, lexicon_size);

    std::vector<double> cumulative;
    double total = 0.0;
    for (std::size_t i = 0; i < lexicon.size(); ++i) {
        total += 1.0 / static_cast<double>(i + 1);
        cumulative.push_back(total);
    }
    auto draw_word = [&]() -> const std::string& {
        const double u = rng.next_double() * total;
        std::size_t lo = 0, hi = cumulative.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cumulative[mid] < u) lo = mid + 1;
            else hi = mid;
        }
        return lexicon[lo];
    };

    std::string out;
    out.reserve(target_bytes + 64);
    while (out.size() < target_bytes) {
        const std::size_t sentence_len = 4 + rng.next_below(7);
        for (std::size_t w = 0; w < sentence_len; ++w) {
            if (w) out += ' ';
            out += draw_word();
        }
        out += ".\n";
    }
    return out;
}

}  // namespace maelm
