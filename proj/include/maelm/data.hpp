#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "maelm/special_tokens.hpp"

namespace maelm {

// Token table with fixed reserved ids. Char mode treats every Unicode code
// point as a token; word mode splits on whitespace.
struct Vocab {
    enum class Mode { Char, Word };

    Mode mode = Mode::Char;
    std::vector<std::string> id_to_token;            // index = id
    std::unordered_map<std::string, int> token_to_id;  // corpus tokens only, ids >= 3

    std::size_t size() const { return id_to_token.size(); }
    int lookup(const std::string& token) const;
    std::vector<int> encode(const std::string& text) const;  // OOV tokens are dropped
    std::string decode(const std::vector<int>& ids) const;

    void dump(const std::string& path) const;  // one token per line, line = id
};

// Splits UTF-8 text into tokens for the given mode; validates the encoding
// and reports the byte offset of the first invalid sequence.
std::vector<std::string> tokenize(const std::string& text, Vocab::Mode mode);

Vocab build_vocab_from_text(const std::string& text, Vocab::Mode mode, std::size_t min_freq);
Vocab build_vocab(const std::string& corpus_path, Vocab::Mode mode, std::size_t min_freq);

std::string read_text_file(const std::string& path);

// One batch of fixed-width rows; every row starts with [CLS] and any padding
// sits at the tail.
struct Batch {
    std::size_t rows = 0;
    std::size_t width = 0;  // seq_len + 1
    std::vector<int> tokens;
    std::vector<std::size_t> true_length;

    const int* row(std::size_t r) const { return tokens.data() + r * width; }
    std::vector<int> row_vec(std::size_t r) const {
        return std::vector<int>(row(r), row(r) + width);
    }
};

// Deterministic batch stream over non-overlapping corpus chunks. The last
// 5% of chunks (at least one) are the validation split and never enter the
// shuffled training order.
class BatchStream {
  public:
    BatchStream(std::vector<int> token_stream, std::size_t seq_len, std::size_t batch_size,
                std::uint64_t seed);

    Batch next_train();
    std::vector<Batch> validation_batches() const;

    std::size_t train_chunk_count() const { return train_chunks_; }
    std::size_t validation_chunk_count() const { return chunk_count_ - train_chunks_; }
    std::size_t seq_len() const { return seq_len_; }

    struct State {
        std::array<std::uint64_t, 4> rng;
        std::uint64_t cursor = 0;
        std::vector<std::uint64_t> order;
    };
    State state() const;
    void restore(const State& s);

  private:
    Batch make_batch(const std::vector<std::uint64_t>& chunk_ids) const;

    std::vector<int> stream_;
    std::size_t seq_len_;
    std::size_t batch_size_;
    std::size_t chunk_count_;
    std::size_t train_chunks_;
    std::vector<std::uint64_t> order_;
    std::uint64_t cursor_ = 0;
    std::array<std::uint64_t, 4> rng_state_;
};

// Convenience: tokenize a corpus file and wrap it in a stream.
BatchStream encode_batches(const std::string& corpus_path, const Vocab& vocab,
                           std::size_t seq_len, std::size_t batch_size, std::uint64_t seed);

}  // namespace maelm
