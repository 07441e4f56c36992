#include "maelm/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "maelm/checkpoint.hpp"
#include "maelm/config.hpp"
#include "maelm/errors.hpp"
#include "maelm/probe.hpp"
#include "maelm/rank_analysis.hpp"
#include "maelm/rng.hpp"
#include "maelm/theorem.hpp"
#include "maelm/training.hpp"

namespace maelm {

namespace {

namespace fs = std::filesystem;

RunConfig load_config(const std::string& path) {
    if (path.empty()) throw ContractError("--config is required");
    RunConfig cfg = parse_config_file(path);
    if (const char* env = std::getenv("MAELM_SEED")) {
        apply_config_key(cfg, "train.seed", env);
    }
    return cfg;
}

void require_corpus(const RunConfig& cfg) {
    if (cfg.data.corpus.empty()) {
        throw ContractError("config key data.corpus is required but not set");
    }
    if (!fs::exists(cfg.data.corpus)) {
        throw ContractError("data.corpus points to a missing file: " + cfg.data.corpus);
    }
}

std::string config_help_footer() {
    std::ostringstream out;
    out << "Config keys (key=value lines) and their defaults:\n";
    for (const auto& [key, value] : config_keys_with_defaults()) {
        out << "  " << key << " = " << (value.empty() ? "(unset)" : value) << "\n";
    }
    out << "The environment variable MAELM_SEED overrides train.seed.\n";
    return out.str();
}

std::vector<Batch> analysis_batches(const RunConfig& cfg, const Vocab& vocab) {
    BatchStream stream = encode_batches(cfg.data.corpus, vocab, cfg.data.seq_len, cfg.train.batch,
                                        cfg.train.seed);
    std::vector<Batch> all = stream.validation_batches();
    // Respect the token budget: keep whole batches until the pool is full.
    std::vector<Batch> picked;
    std::size_t tokens = 0;
    for (auto& b : all) {
        picked.push_back(b);
        tokens += b.rows * b.width;
        if (tokens >= cfg.analysis.tokens_budget) break;
    }
    return picked;
}

// Parameter set + encoder view reconstructed from a checkpoint.
std::pair<ModelParameters, ModelConfig> load_model(const std::string& ckpt_path,
                                                   const Vocab& vocab) {
    Checkpoint ckpt = checkpoint_load(ckpt_path);
    RunConfig run = parse_config_text(ckpt.config_text);
    ModelConfig mc = run.model;
    mc.vocab_size = vocab.size();
    mc.validate();
    ModelParameters params = init_parameters(mc, run.train.seed);
    restore_parameters(params, ckpt);
    return {std::move(params), mc};
}

int cmd_pretrain(const std::string& config_path, const std::string& out_dir,
                 const std::string& resume) {
    RunConfig cfg = load_config(config_path);
    require_corpus(cfg);
    TrainResult res = train_mlm(cfg, out_dir, resume);
    std::printf("pretrain done: %llu steps, validation loss %.6f -> %.6f\n",
                static_cast<unsigned long long>(res.final_step), res.step0_valid_loss,
                res.final_valid_loss);
    std::printf("metrics: %s\ncheckpoint: %s\n", res.metrics_path.c_str(),
                res.last_checkpoint.c_str());
    return 0;
}

int cmd_analyze_rank(const std::string& config_path, const std::string& out_dir,
                     const std::string& mlm_ckpt, const std::string& mae_ckpt) {
    RunConfig cfg = load_config(config_path);
    require_corpus(cfg);
    fs::create_directories(out_dir);
    Vocab vocab = build_vocab(cfg.data.corpus, cfg.data.mode(), cfg.data.min_freq);
    auto [mlm_params, mlm_cfg] = load_model(mlm_ckpt, vocab);
    auto [mae_params, mae_cfg] = load_model(mae_ckpt, vocab);
    std::vector<Batch> batches = analysis_batches(cfg, vocab);
    const std::uint64_t mask_seed = Rng::derive(cfg.train.seed, rng_purpose::kMasking) ^ 0xa11a;

    RankReport gap = rank_gap_report(mlm_params, mlm_cfg, mae_params, mae_cfg, batches,
                                     cfg.analysis.tau, mask_seed);
    gap.write_csv(out_dir + "/rank_report.csv");
    RankReport lemma = lemma1_report(mlm_params, mlm_cfg, batches, cfg.analysis.tau, mask_seed);
    lemma.write_csv(out_dir + "/lemma1_report.csv");

    for (const auto& row : gap.rows) {
        std::printf("layer %zu  %-16s rank_%.2g = %d  (%zu tokens)\n", row.layer,
                    row.config.c_str(), row.tau, row.rank, row.tokens);
    }
    std::printf("reports: %s/rank_report.csv, %s/lemma1_report.csv\n", out_dir.c_str(),
                out_dir.c_str());
    return 0;
}

int cmd_verify_theory(std::size_t seeds, std::size_t chains, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::size_t in_regime = 0, hold = 0, fail = 0, out_of_regime = 0;
    std::string first_trace;
    for (std::size_t s = 0; s < seeds; ++s) {
        Rng shapes(1000 + s);
        const std::size_t n = 2 + shapes.next_below(7);   // 2..8
        const std::size_t m = 1 + shapes.next_below(4);   // 1..4
        const std::size_t d = 2 + shapes.next_below(15);  // 2..16
        TheoremInstance inst = make_theorem_instance(5000 + s, n, m, d,
                                                     0.35 / std::sqrt(double(d)), 1.0, true);
        ResidualDecomposition decomp = residual_decompose(inst.h_r);
        TheoremStepResult res = verify_theorem_step(inst, decomp);
        if (!res.in_regime) {
            ++out_of_regime;
            continue;
        }
        ++in_regime;
        if (res.holds) ++hold;
        else ++fail;
        if (first_trace.empty()) first_trace = res.trace.to_json();
    }

    std::size_t chains_pass = 0;
    for (std::size_t c = 0; c < chains; ++c) {
        auto chain = make_theorem_chain(9000 + c, 3, 6, 3, 8, 0.25);
        TheoremDepthResult res = verify_theorem_depth(std::move(chain));
        if (res.bound_holds && res.strictly_decreasing && res.all_in_regime && res.all_steps_hold)
            ++chains_pass;
    }

    nlohmann::json report;
    report["single_step"] = {{"seeds", seeds},       {"in_regime", in_regime},
                             {"hold", hold},         {"fail", fail},
                             {"out_of_regime", out_of_regime}};
    report["depth_chains"] = {{"total", chains}, {"pass", chains_pass}};
    if (!first_trace.empty()) report["example_trace"] = nlohmann::json::parse(first_trace);
    std::ofstream out(out_dir + "/theorem_report.json", std::ios::binary);
    out << report.dump(2) << "\n";

    std::printf("%zu in-regime, %zu hold, %zu fail\n", in_regime, hold, fail);
    std::printf("%zu out-of-regime (reported, not failed)\n", out_of_regime);
    std::printf("depth chains: %zu/%zu pass\n", chains_pass, chains);
    return (fail == 0 && chains_pass == chains) ? 0 : 3;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               const std::string& deltas, const std::string& modes, const std::string& attns) {
    RunConfig base = load_config(config_path);
    require_corpus(base);
    fs::create_directories(out_dir);

    auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                if (!cur.empty()) parts.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) parts.push_back(cur);
        return parts;
    };

    std::vector<std::string> delta_list = split(deltas);
    if (delta_list.empty()) delta_list = {"0"};
    std::vector<std::string> mode_list = split(modes);
    if (mode_list.empty()) mode_list = {to_string(base.model.mask_mode)};
    std::vector<std::string> attn_list = split(attns);
    if (attn_list.empty()) attn_list = {to_string(base.model.decoder_attn)};

    for (const auto& mode : mode_list) {
        for (const auto& attn : attn_list) {
            for (const auto& delta : delta_list) {
                RunConfig cfg = base;
                apply_config_key(cfg, "model.mask_mode", mode);
                apply_config_key(cfg, "model.decoder_attn", attn);
                apply_config_key(cfg, "model.delta", delta);
                const std::string cell = mode + "_" + attn + "_delta-" + delta;
                const std::string cell_dir = out_dir + "/" + cell;
                std::printf("ablate cell %s\n", cell.c_str());
                train_mlm(cfg, cell_dir);
            }
        }
    }
    return 0;
}

int cmd_probe(const std::string& ckpt, std::size_t steps, std::uint64_t seed) {
    ProbeResult res = finetune_probe(ckpt, seed, steps);
    std::printf("probe accuracy %.4f on %zu held-out examples (decoder absent: %s)\n",
                res.accuracy, res.test_examples, res.decoder_absent ? "yes" : "no");
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Masked-autoencoder language-model pretraining and analysis toolkit"};
    app.footer(config_help_footer());
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", resume, mlm_ckpt, mae_ckpt, ckpt;
    std::string deltas, modes, attns;
    std::size_t seeds = 200, chains = 50, probe_steps = 300;
    std::uint64_t probe_seed = 42;

    auto* pretrain = app.add_subcommand("pretrain", "Run MLM/MAE-LM pretraining");
    pretrain->add_option("--config", config_path, "Run configuration file")->required();
    pretrain->add_option("--out", out_dir, "Output directory");
    pretrain->add_option("--resume", resume, "Checkpoint to resume from");

    auto* analyze = app.add_subcommand("analyze-rank", "Emit effective-rank reports");
    analyze->add_option("--config", config_path, "Run configuration file")->required();
    analyze->add_option("--out", out_dir, "Output directory");
    analyze->add_option("--mlm-checkpoint", mlm_ckpt, "Trained MLM checkpoint")->required();
    analyze->add_option("--maelm-checkpoint", mae_ckpt, "Trained MAE-LM checkpoint")->required();

    auto* verify = app.add_subcommand("verify-theory", "Run the residual-bound sweeps");
    verify->add_option("--seeds", seeds, "Single-step instances");
    verify->add_option("--chains", chains, "Depth-3 chains");
    verify->add_option("--out", out_dir, "Output directory");

    auto* ablate = app.add_subcommand("ablate", "Train a grid of model variants");
    ablate->add_option("--config", config_path, "Run configuration file")->required();
    ablate->add_option("--out", out_dir, "Output directory");
    ablate->add_option("--delta", deltas, "Comma-separated delta values");
    ablate->add_option("--mask-mode", modes, "Comma-separated mask modes");
    ablate->add_option("--decoder-attn", attns, "Comma-separated decoder attention modes");

    auto* probe = app.add_subcommand("finetune-probe", "Encoder-only transfer probe");
    probe->add_option("--checkpoint", ckpt, "Pretraining checkpoint")->required();
    probe->add_option("--steps", probe_steps, "Probe training steps");
    probe->add_option("--seed", probe_seed, "Probe seed");

    std::vector<const char*> argv;
    argv.push_back("maelm");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (pretrain->parsed()) return cmd_pretrain(config_path, out_dir, resume);
        if (analyze->parsed()) return cmd_analyze_rank(config_path, out_dir, mlm_ckpt, mae_ckpt);
        if (verify->parsed()) return cmd_verify_theory(seeds, chains, out_dir);
        if (ablate->parsed()) return cmd_ablate(config_path, out_dir, deltas, modes, attns);
        if (probe->parsed()) return cmd_probe(ckpt, probe_steps, probe_seed);
        std::cerr << "usage error: no subcommand\n";
        return 1;
    } catch (const TrainingDivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace maelm
