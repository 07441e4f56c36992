// Writes a deterministic synthetic plain-text corpus for pretraining runs.

#include <cstdio>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "maelm/corpus_gen.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a deterministic synthetic plain-text corpus"};
    std::string out_path = "corpus.txt";
    std::size_t target_bytes = 1 << 20;
    std::uint64_t seed = 7;
    std::size_t lexicon_size = 120;
    app.add_option("--out", out_path, "Output file");
    app.add_option("--bytes", target_bytes, "Approximate corpus size in bytes");
    app.add_option("--seed", seed, "Generator seed");
    app.add_option("--words", lexicon_size, "Lexicon size");
    CLI11_PARSE(app, argc, argv);

    const std::string text = maelm::generate_corpus_text(seed, target_bytes, lexicon_size);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
        return 1;
    }
    out << text;
    std::printf("wrote %zu bytes to %s\n", text.size(), out_path.c_str());
    return 0;
}
