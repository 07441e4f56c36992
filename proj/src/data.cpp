#include "maelm/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "maelm/errors.hpp"
#include "maelm/rng.hpp"

namespace maelm {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Walks one UTF-8 sequence starting at `i`; returns its byte length.
// Checks lead/continuation structure, overlong forms, surrogates and the
// U+10FFFF ceiling.
static std::size_t utf8_advance(const std::string& s, std::size_t i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    auto fail = [&]() -> std::size_t {
        throw DataError("invalid UTF-8 at byte offset " + std::to_string(i));
    };
    if (b0 < 0x80) return 1;
    std::size_t len;
    std::uint32_t cp;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return fail();
    }
    if (i + len > s.size()) return fail();
    for (std::size_t k = 1; k < len; ++k) {
        const unsigned char bk = byte(i + k);
        if ((bk & 0xC0) != 0x80) return fail();
        cp = (cp << 6) | (bk & 0x3F);
    }
    static const std::uint32_t min_cp[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[len]) return fail();                  // overlong
    if (cp >= 0xD800 && cp <= 0xDFFF) return fail();      // surrogate
    if (cp > 0x10FFFF) return fail();
    return len;
}

std::vector<std::string> tokenize(const std::string& text, Vocab::Mode mode) {
    std::vector<std::string> tokens;
    if (mode == Vocab::Mode::Char) {
        std::size_t i = 0;
        while (i < text.size()) {
            const std::size_t len = utf8_advance(text, i);
            tokens.emplace_back(text.substr(i, len));
            i += len;
        }
    } else {
        // Validate the whole buffer first so offsets refer to the raw file.
        std::size_t i = 0;
        while (i < text.size()) i += utf8_advance(text, i);
        std::string current;
        for (char ch : text) {
            if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!current.empty()) tokens.push_back(std::move(current));
                current.clear();
            } else {
                current.push_back(ch);
            }
        }
        if (!current.empty()) tokens.push_back(std::move(current));
    }
    return tokens;
}

Vocab build_vocab_from_text(const std::string& text, Vocab::Mode mode, std::size_t min_freq) {
    if (text.empty()) throw DataError("empty corpus");
    std::vector<std::string> tokens = tokenize(text, mode);
    if (tokens.empty()) throw DataError("empty corpus");

    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& t : tokens) ++freq[t];

    std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab vocab;
    vocab.mode = mode;
    vocab.id_to_token = {"[PAD]", "[CLS]", "[MASK]"};
    const std::size_t cutoff = (mode == Vocab::Mode::Char) ? 1 : min_freq;
    for (const auto& [token, count] : entries) {
        if (count < cutoff) continue;
        vocab.token_to_id.emplace(token, static_cast<int>(vocab.id_to_token.size()));
        vocab.id_to_token.push_back(token);
    }
    return vocab;
}

Vocab build_vocab(const std::string& corpus_path, Vocab::Mode mode, std::size_t min_freq) {
    return build_vocab_from_text(read_text_file(corpus_path), mode, min_freq);
}

int Vocab::lookup(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? -1 : it->second;
}

std::vector<int> Vocab::encode(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& t : tokenize(text, mode)) {
        const int id = lookup(t);
        if (id >= 0) ids.push_back(id);
    }
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    bool first = true;
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= id_to_token.size()) {
            throw ContractError("decode: id " + std::to_string(id) + " outside vocabulary of " +
                                std::to_string(id_to_token.size()));
        }
        if (mode == Vocab::Mode::Word && !first) out.push_back(' ');
        out += id_to_token[static_cast<std::size_t>(id)];
        first = false;
    }
    return out;
}

void Vocab::dump(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    for (const auto& t : id_to_token) out << t << "\n";
}

BatchStream::BatchStream(std::vector<int> token_stream, std::size_t seq_len,
                         std::size_t batch_size, std::uint64_t seed)
    : stream_(std::move(token_stream)), seq_len_(seq_len), batch_size_(batch_size) {
    if (seq_len_ == 0) throw ContractError("seq_len must be positive");
    chunk_count_ = stream_.size() / seq_len_;
    if (chunk_count_ == 0) {
        throw DataError("corpus of " + std::to_string(stream_.size()) +
                        " tokens is shorter than one chunk of " + std::to_string(seq_len_));
    }
    const std::size_t n_valid = std::max<std::size_t>(1, chunk_count_ / 20);
    if (chunk_count_ <= n_valid) {
        throw DataError("corpus too small: " + std::to_string(chunk_count_) +
                        " chunks leave no training data after the validation tail");
    }
    train_chunks_ = chunk_count_ - n_valid;
    if (train_chunks_ < batch_size_) {
        throw DataError("corpus too small: " + std::to_string(train_chunks_) +
                        " training chunks for batch size " + std::to_string(batch_size_));
    }
    Rng rng(Rng::derive(seed, rng_purpose::kDataOrder));
    order_.resize(train_chunks_);
    for (std::size_t i = 0; i < train_chunks_; ++i) order_[i] = i;
    rng.shuffle(order_);
    rng_state_ = rng.state();
}

Batch BatchStream::make_batch(const std::vector<std::uint64_t>& chunk_ids) const {
    Batch b;
    b.rows = chunk_ids.size();
    b.width = seq_len_ + 1;
    b.tokens.assign(b.rows * b.width, kPadId);
    b.true_length.assign(b.rows, b.width);
    for (std::size_t r = 0; r < b.rows; ++r) {
        int* row = b.tokens.data() + r * b.width;
        row[0] = kClsId;
        const int* src = stream_.data() + chunk_ids[r] * seq_len_;
        std::copy_n(src, seq_len_, row + 1);
    }
    return b;
}

Batch BatchStream::next_train() {
    if (cursor_ + batch_size_ > train_chunks_) {
        // Epoch boundary: drop the remainder and reshuffle.
        Rng rng(0);
        rng.set_state(rng_state_);
        rng.shuffle(order_);
        rng_state_ = rng.state();
        cursor_ = 0;
    }
    std::vector<std::uint64_t> ids(order_.begin() + cursor_, order_.begin() + cursor_ + batch_size_);
    cursor_ += batch_size_;
    return make_batch(ids);
}

std::vector<Batch> BatchStream::validation_batches() const {
    std::vector<Batch> out;
    std::vector<std::uint64_t> ids;
    for (std::size_t c = train_chunks_; c < chunk_count_; ++c) {
        ids.push_back(c);
        if (ids.size() == batch_size_) {
            out.push_back(make_batch(ids));
            ids.clear();
        }
    }
    if (!ids.empty()) out.push_back(make_batch(ids));
    return out;
}

BatchStream::State BatchStream::state() const {
    return State{rng_state_, cursor_, order_};
}

void BatchStream::restore(const State& s) {
    rng_state_ = s.rng;
    cursor_ = s.cursor;
    order_ = s.order;
}

BatchStream encode_batches(const std::string& corpus_path, const Vocab& vocab,
                           std::size_t seq_len, std::size_t batch_size, std::uint64_t seed) {
    return BatchStream(vocab.encode(read_text_file(corpus_path)), seq_len, batch_size, seed);
}

}  // namespace maelm
