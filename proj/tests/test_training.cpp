#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "maelm/errors.hpp"
#include "maelm/rng.hpp"
#include "maelm/training.hpp"
#include "oracles.hpp"

using namespace maelm;

namespace {

TrainRunConfig run_config() {
    TrainRunConfig cfg;
    cfg.steps = 20000;
    cfg.peak_lr = 5e-4;
    cfg.warmup = 10000;
    return cfg;
}

std::string write_tiny_corpus(const std::string& name) {
    // 24 distinct chars, enough chunks for a small stream.
    std::string text;
    maelm::Rng rng(77);
    const std::string alphabet = "abcdefghijklmnopqrstuvw ";
    for (int i = 0; i < 4000; ++i) text.push_back(alphabet[rng.next_below(alphabet.size())]);
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    return path;
}

RunConfig tiny_run(const std::string& corpus) {
    RunConfig cfg;
    cfg.model.enc_layers = 1;
    cfg.model.dec_layers = 1;
    cfg.model.dim = 8;
    cfg.model.dec_dim = 8;
    cfg.model.heads = 2;
    cfg.model.ffn_dim = 16;
    cfg.model.max_len = 64;
    cfg.train.steps = 6;
    cfg.train.warmup = 2;
    cfg.train.batch = 2;
    cfg.train.checkpoint_every = 3;
    cfg.train.seed = 11;
    cfg.data.corpus = corpus;
    cfg.data.seq_len = 16;
    return cfg;
}

}  // namespace

TEST_CASE("learning rate ramps and decays linearly") {
    TrainRunConfig cfg = run_config();
    CHECK(lr_at_step(0, cfg) == 0.0);
    CHECK(lr_at_step(5000, cfg) == doctest::Approx(2.5e-4).epsilon(1e-15));
    CHECK(lr_at_step(10000, cfg) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(lr_at_step(cfg.steps, cfg) == 0.0);
    // peak is attained exactly at the warmup boundary
    for (std::uint64_t t : {std::uint64_t(9999), std::uint64_t(10001)})
        CHECK(lr_at_step(t, cfg) < lr_at_step(10000, cfg));
    // piecewise linear: slope constant within each segment
    const double s1 = lr_at_step(1, cfg) - lr_at_step(0, cfg);
    const double s2 = lr_at_step(8001, cfg) - lr_at_step(8000, cfg);
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-9));
}

TEST_CASE("clip halves gradients at twice the threshold") {
    std::vector<Tensor> grads;
    grads.push_back(Tensor({2}, {0.0, 0.0}));
    grads[0](0) = 4.0;  // global norm 4
    const double norm = clip_global_norm(grads, 2.0);
    CHECK(norm == 4.0);
    CHECK(grads[0](0) == 2.0);
    CHECK(grads[0](1) == 0.0);
}

TEST_CASE("clip leaves small gradients bitwise untouched") {
    std::vector<Tensor> grads;
    grads.push_back(Tensor({3}, {0.3, -0.4, 0.5}));
    Tensor before = grads[0];
    const double norm = clip_global_norm(grads, 2.0);
    CHECK(norm == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    for (std::size_t i = 0; i < 3; ++i) CHECK(grads[0](i) == before(i));

    std::vector<Tensor> zeros;
    zeros.push_back(Tensor({4}));
    CHECK(clip_global_norm(zeros, 2.0) == 0.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(zeros[0](i) == 0.0);
}

TEST_CASE("clip preserves gradient direction when it fires") {
    Rng rng(81);
    std::vector<Tensor> grads;
    grads.push_back(oracle::random_tensor(rng, {5}, 3.0));
    grads.push_back(oracle::random_tensor(rng, {3}, 3.0));
    std::vector<Tensor> before = grads;
    const double norm = clip_global_norm(grads, 1.0);
    REQUIRE(norm > 1.0);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t p = 0; p < grads.size(); ++p)
        for (std::size_t i = 0; i < grads[p].size(); ++i) {
            dot += grads[p](i) * before[p](i);
            na += grads[p](i) * grads[p](i);
            nb += before[p](i) * before[p](i);
        }
    CHECK(dot / std::sqrt(na * nb) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adam hand trace on a scalar parameter") {
    ModelParameters params;
    Var theta = parameter(Tensor({1}, {1.0}));
    params.manifest.emplace_back("w", theta);
    AdamState st = init_adam_state(params);

    std::vector<Tensor> grads;
    grads.push_back(Tensor({1}, {1.0}));
    adam_step(params.manifest, grads, st, 0.1);

    CHECK(st.t == 1);
    CHECK(st.m[0](0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(st.v[0](0) == doctest::Approx(0.02).epsilon(1e-12));
    // bias correction makes m_hat = v_hat = 1 at t=1
    const double after_update = 1.0 - 0.1 * (1.0 / (1.0 + 1e-6));
    const double expect = after_update - 0.1 * 0.01 * after_update;
    CHECK(theta->value(0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam fixed point at zero gradient without decay") {
    ModelParameters params;
    Var theta = parameter(Tensor({1}, {2.5}));
    params.manifest.emplace_back("w", theta);
    AdamState st = init_adam_state(params);
    std::vector<Tensor> grads;
    grads.push_back(Tensor({1}));
    AdamConfig adam;
    adam.weight_decay = 0.0;
    adam_step(params.manifest, grads, st, 0.1, adam);
    CHECK(theta->value(0) == 2.5);
}

TEST_CASE("decoupled decay shrinks by lr times coefficient") {
    ModelParameters params;
    Var theta = parameter(Tensor({1}, {1.0}));
    params.manifest.emplace_back("w", theta);
    AdamState st = init_adam_state(params);
    std::vector<Tensor> grads;
    grads.push_back(Tensor({1}));
    adam_step(params.manifest, grads, st, 0.1);
    CHECK(theta->value(0) == doctest::Approx(1.0 - 0.001).epsilon(1e-15));
}

TEST_CASE("adam is deterministic given identical inputs") {
    auto run_once = [] {
        ModelParameters params;
        Var theta = parameter(Tensor({3}, {1.0, -2.0, 0.5}));
        params.manifest.emplace_back("w", theta);
        AdamState st = init_adam_state(params);
        for (int t = 0; t < 5; ++t) {
            std::vector<Tensor> grads;
            grads.push_back(Tensor({3}, {0.1, 0.2, -0.3}));
            adam_step(params.manifest, grads, st, 0.01);
        }
        return theta->value;
    };
    Tensor a = run_once();
    Tensor b = run_once();
    for (std::size_t i = 0; i < 3; ++i) CHECK(a(i) == b(i));
}

TEST_CASE("warmup must stay below max steps") {
    TrainRunConfig cfg;
    cfg.steps = 10;
    cfg.warmup = 10;
    CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("short training runs are bitwise reproducible") {
    const std::string corpus = write_tiny_corpus("maelm_train_det.txt");
    RunConfig cfg = tiny_run(corpus);
    TrainResult a = train_mlm(cfg, "/tmp/maelm_run_a");
    TrainResult b = train_mlm(cfg, "/tmp/maelm_run_b");
    const std::string ma = read_text_file(a.metrics_path);
    const std::string mb = read_text_file(b.metrics_path);
    CHECK(ma == mb);
    CHECK(ma.find("\"step\":0,\"split\":\"valid\"") != std::string::npos);
    std::remove(corpus.c_str());
}

TEST_CASE("validation loss at zero-init embeddings equals ln vocab size") {
    const std::string corpus = write_tiny_corpus("maelm_train_lnv.txt");
    RunConfig cfg = tiny_run(corpus);
    cfg.train.steps = 2;
    cfg.train.warmup = 1;
    cfg.train.checkpoint_every = 2;
    TrainResult res = train_mlm(cfg, "/tmp/maelm_run_lnv");
    CHECK(res.step0_valid_loss ==
          doctest::Approx(std::log(double(res.vocab_size))).epsilon(1e-9));
    std::remove(corpus.c_str());
}

TEST_CASE("step-0 loss is independent of delta and mask mode at zero embeddings") {
    const std::string corpus = write_tiny_corpus("maelm_train_modes.txt");
    double reference = -1.0;
    for (const char* mode : {"exclude", "include", "include-dec-resets", "random-replace"}) {
        for (double delta : {0.0, 0.5, 1.0}) {
            RunConfig cfg = tiny_run(corpus);
            cfg.model.mask_mode = parse_mask_mode(mode);
            cfg.model.delta = delta;
            cfg.train.steps = 1;
            cfg.train.warmup = 0;
            TrainResult res = train_mlm(cfg, "/tmp/maelm_run_mode");
            if (reference < 0) reference = res.step0_valid_loss;
            CHECK(res.step0_valid_loss == doctest::Approx(reference).epsilon(1e-12));
        }
    }
    std::remove(corpus.c_str());
}

TEST_CASE("metrics records carry exactly the contract keys") {
    const std::string corpus = write_tiny_corpus("maelm_train_keys.txt");
    RunConfig cfg = tiny_run(corpus);
    cfg.train.steps = 2;
    cfg.train.warmup = 1;
    TrainResult res = train_mlm(cfg, "/tmp/maelm_run_keys");
    std::ifstream in(res.metrics_path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(line.find("\"step\":") != std::string::npos);
        CHECK(line.find("\"split\":") != std::string::npos);
        CHECK(line.find("\"loss\":") != std::string::npos);
        CHECK(line.find("\"lr\":") != std::string::npos);
        CHECK(line.find("\"grad_norm\":") != std::string::npos);
    }
    CHECK(lines >= 3);  // step-0 validation + 2 train steps
    std::remove(corpus.c_str());
}
