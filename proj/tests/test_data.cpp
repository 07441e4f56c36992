#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "maelm/data.hpp"
#include "maelm/errors.hpp"

using namespace maelm;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("char vocab over 'aba'") {
    Vocab v = build_vocab_from_text("aba", Vocab::Mode::Char, 1);
    CHECK(v.size() == 5);  // 3 reserved + {a, b}
    CHECK(v.id_to_token[0] == "[PAD]");
    CHECK(v.id_to_token[1] == "[CLS]");
    CHECK(v.id_to_token[2] == "[MASK]");
    CHECK(v.lookup("a") == 3);  // frequency 2 beats frequency 1
    CHECK(v.lookup("b") == 4);
}

TEST_CASE("vocab construction is deterministic") {
    const std::string text = "the cat the dog a cat the";
    Vocab a = build_vocab_from_text(text, Vocab::Mode::Word, 1);
    Vocab b = build_vocab_from_text(text, Vocab::Mode::Word, 1);
    CHECK(a.id_to_token == b.id_to_token);
    // frequency desc, ties lexicographic
    CHECK(a.lookup("the") == 3);
    CHECK(a.lookup("cat") == 4);
    CHECK(a.lookup("a") == 5);
    CHECK(a.lookup("dog") == 6);
}

TEST_CASE("word mode min_freq filter") {
    Vocab v = build_vocab_from_text("ab ab cd", Vocab::Mode::Word, 2);
    CHECK(v.size() == 4);  // reserved + "ab"
    CHECK(v.lookup("ab") == 3);
    CHECK(v.lookup("cd") == -1);
}

TEST_CASE("empty corpus rejected") {
    CHECK_THROWS_AS(build_vocab_from_text("", Vocab::Mode::Char, 1), DataError);
    CHECK_THROWS_AS(build_vocab_from_text("   \n ", Vocab::Mode::Word, 1), DataError);
}

TEST_CASE("invalid UTF-8 names the byte offset") {
    std::string bad = "ab";
    bad.push_back(static_cast<char>(0xC0));  // overlong lead with no valid continuation
    bad.push_back('x');
    CHECK_THROWS_WITH_AS(build_vocab_from_text(bad, Vocab::Mode::Char, 1),
                         doctest::Contains("byte offset 2"), DataError);
}

TEST_CASE("multibyte code points tokenize as single char tokens") {
    const std::string e_acute = "\xC3"
                                "\xA9";
    Vocab v = build_vocab_from_text("a" + e_acute + "b", Vocab::Mode::Char, 1);
    CHECK(v.size() == 6);
    CHECK(v.lookup(e_acute) >= 3);
}

TEST_CASE("encode never emits reserved ids and char round trip holds") {
    const std::string text = "hello world";
    Vocab v = build_vocab_from_text(text, Vocab::Mode::Char, 1);
    std::vector<int> ids = v.encode(text);
    CHECK(ids.size() == text.size());
    for (int id : ids) CHECK(id >= kNumReserved);
    CHECK(v.decode(ids) == text);
}

TEST_CASE("decode accepts any id below vocab size") {
    Vocab v = build_vocab_from_text("xy", Vocab::Mode::Char, 1);
    for (int id = 0; id < static_cast<int>(v.size()); ++id) {
        CHECK_NOTHROW(v.decode({id}));
    }
    CHECK_THROWS_AS(v.decode({static_cast<int>(v.size())}), ContractError);
}

TEST_CASE("chunk arithmetic: 1000 tokens at seq_len 99") {
    std::vector<int> stream(1000, 5);
    BatchStream bs(stream, 99, 2, 1);
    CHECK(bs.train_chunk_count() + bs.validation_chunk_count() == 10);
    CHECK(bs.validation_chunk_count() == 1);  // max(1, 10/20)
    Batch b = bs.next_train();
    CHECK(b.rows == 2);
    CHECK(b.width == 100);  // [CLS] + 99 tokens
    CHECK(b.row(0)[0] == kClsId);
}

TEST_CASE("batch order deterministic under a seed") {
    std::vector<int> stream(2000);
    for (std::size_t i = 0; i < stream.size(); ++i) stream[i] = 3 + int(i % 17);
    BatchStream a(stream, 40, 4, 9);
    BatchStream b(stream, 40, 4, 9);
    for (int step = 0; step < 30; ++step) {  // crosses an epoch boundary
        Batch ba = a.next_train();
        Batch bb = b.next_train();
        CHECK(ba.tokens == bb.tokens);
    }
}

TEST_CASE("validation chunks never appear in training batches") {
    std::vector<int> stream(600);
    // tag each chunk with a distinct token value
    for (std::size_t i = 0; i < stream.size(); ++i) stream[i] = 3 + int(i / 20);
    BatchStream bs(stream, 20, 2, 3);
    const std::size_t train_chunks = bs.train_chunk_count();

    std::set<int> validation_tags;
    for (const Batch& vb : bs.validation_batches())
        for (std::size_t r = 0; r < vb.rows; ++r) validation_tags.insert(vb.row(r)[1]);
    CHECK(validation_tags.size() == bs.validation_chunk_count());

    for (int step = 0; step < 100; ++step) {  // several epochs
        Batch tb = bs.next_train();
        for (std::size_t r = 0; r < tb.rows; ++r)
            CHECK(validation_tags.count(tb.row(r)[1]) == 0);
    }
    CHECK(train_chunks + validation_tags.size() == 30);
}

TEST_CASE("insufficient data errors") {
    CHECK_THROWS_AS(BatchStream(std::vector<int>(10, 3), 99, 1, 1), DataError);
    // one chunk total: validation tail consumes it
    CHECK_THROWS_AS(BatchStream(std::vector<int>(100, 3), 99, 1, 1), DataError);
}

TEST_CASE("encode_batches end to end") {
    const std::string path = temp_file("maelm_corpus_test.txt", "abcdefgh abcdefgh abcdefgh");
    Vocab v = build_vocab(path, Vocab::Mode::Char, 1);
    BatchStream bs = encode_batches(path, v, 5, 1, 2);
    Batch b = bs.next_train();
    CHECK(b.width == 6);
    std::remove(path.c_str());
}
