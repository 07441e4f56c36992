#pragma once

#include <cstdint>
#include <string>

namespace maelm {

// Deterministic synthetic plain-text corpus: Zipf-weighted sentences over a
// small syllable-built lexicon. Char-level models can learn the spellings,
// which is what the pretraining sanity checks exercise.
std::string generate_corpus_text(std::uint64_t seed, std::size_t target_bytes,
                                 std::size_t lexicon_size);

}  // namespace maelm
