#include "maelm/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "maelm/errors.hpp"

namespace maelm {

void TrainRunConfig::validate() const {
    if (steps == 0) throw ContractError("train.steps must be positive");
    if (warmup >= steps) throw ContractError("train.warmup must be below train.steps");
    if (batch == 0) throw ContractError("train.batch must be positive");
    if (clip <= 0.0) throw ContractError("train.clip must be positive");
    if (checkpoint_every == 0) throw ContractError("train.checkpoint_every must be positive");
}

Vocab::Mode DataConfig::mode() const {
    if (tokenizer == "char") return Vocab::Mode::Char;
    if (tokenizer == "word") return Vocab::Mode::Word;
    throw ContractError("data.tokenizer must be 'char' or 'word', got '" + tokenizer + "'");
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ContractError(key + ": expected true/false, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ContractError(key + ": expected a nonnegative integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ContractError(key + ": expected a real number, got '" + v + "'");
    }
}

}  // namespace

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "model.enc_layers") cfg.model.enc_layers = parse_u64(key, value);
    else if (key == "model.dec_layers") cfg.model.dec_layers = parse_u64(key, value);
    else if (key == "model.dim") cfg.model.dim = parse_u64(key, value);
    else if (key == "model.dec_dim") cfg.model.dec_dim = parse_u64(key, value);
    else if (key == "model.heads") cfg.model.heads = parse_u64(key, value);
    else if (key == "model.ffn_dim") cfg.model.ffn_dim = parse_u64(key, value);
    else if (key == "model.max_len") cfg.model.max_len = parse_u64(key, value);
    else if (key == "model.relative_bias") cfg.model.use_relative_bias = parse_bool(key, value);
    else if (key == "model.aligned_positions") cfg.model.aligned_positions = parse_bool(key, value);
    else if (key == "model.mask_mode") cfg.model.mask_mode = parse_mask_mode(value);
    else if (key == "model.decoder_attn") cfg.model.decoder_attn = parse_decoder_attn(value);
    else if (key == "model.delta") cfg.model.delta = parse_double(key, value);
    else if (key == "train.steps") cfg.train.steps = parse_u64(key, value);
    else if (key == "train.peak_lr") cfg.train.peak_lr = parse_double(key, value);
    else if (key == "train.warmup") cfg.train.warmup = parse_u64(key, value);
    else if (key == "train.batch") cfg.train.batch = parse_u64(key, value);
    else if (key == "train.clip") cfg.train.clip = parse_double(key, value);
    else if (key == "train.seed") cfg.train.seed = parse_u64(key, value);
    else if (key == "train.checkpoint_every") cfg.train.checkpoint_every = parse_u64(key, value);
    else if (key == "data.corpus") cfg.data.corpus = value;
    else if (key == "data.tokenizer") cfg.data.tokenizer = value;
    else if (key == "data.seq_len") cfg.data.seq_len = parse_u64(key, value);
    else if (key == "data.min_freq") cfg.data.min_freq = parse_u64(key, value);
    else if (key == "analysis.tau") cfg.analysis.tau = parse_double(key, value);
    else if (key == "analysis.tokens_budget") cfg.analysis.tokens_budget = parse_u64(key, value);
    else throw ContractError("unknown config key: " + key);
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Strip comments and surrounding whitespace.
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ContractError("config line " + std::to_string(lineno) + " is not key=value: '" +
                                line + "'");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto kend = key.find_last_not_of(" \t");
        key = key.substr(0, kend == std::string::npos ? 0 : kend + 1);
        const auto vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        apply_config_key(cfg, key, value);
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string canonical_config_text(const RunConfig& cfg) {
    std::ostringstream out;
    out << "model.enc_layers=" << cfg.model.enc_layers << "\n";
    out << "model.dec_layers=" << cfg.model.dec_layers << "\n";
    out << "model.dim=" << cfg.model.dim << "\n";
    out << "model.dec_dim=" << cfg.model.dec_dim << "\n";
    out << "model.heads=" << cfg.model.heads << "\n";
    out << "model.ffn_dim=" << cfg.model.ffn_dim << "\n";
    out << "model.max_len=" << cfg.model.max_len << "\n";
    out << "model.relative_bias=" << (cfg.model.use_relative_bias ? "true" : "false") << "\n";
    out << "model.aligned_positions=" << (cfg.model.aligned_positions ? "true" : "false") << "\n";
    out << "model.mask_mode=" << to_string(cfg.model.mask_mode) << "\n";
    out << "model.decoder_attn=" << to_string(cfg.model.decoder_attn) << "\n";
    out << "model.delta=" << fmt_double(cfg.model.delta) << "\n";
    out << "train.steps=" << cfg.train.steps << "\n";
    out << "train.peak_lr=" << fmt_double(cfg.train.peak_lr) << "\n";
    out << "train.warmup=" << cfg.train.warmup << "\n";
    out << "train.batch=" << cfg.train.batch << "\n";
    out << "train.clip=" << fmt_double(cfg.train.clip) << "\n";
    out << "train.seed=" << cfg.train.seed << "\n";
    out << "train.checkpoint_every=" << cfg.train.checkpoint_every << "\n";
    out << "data.corpus=" << cfg.data.corpus << "\n";
    out << "data.tokenizer=" << cfg.data.tokenizer << "\n";
    out << "data.seq_len=" << cfg.data.seq_len << "\n";
    out << "data.min_freq=" << cfg.data.min_freq << "\n";
    out << "analysis.tau=" << fmt_double(cfg.analysis.tau) << "\n";
    out << "analysis.tokens_budget=" << cfg.analysis.tokens_budget << "\n";
    return out.str();
}

std::vector<std::pair<std::string, std::string>> config_keys_with_defaults() {
    const RunConfig cfg;  // defaults are the shipped toy configuration
    std::vector<std::pair<std::string, std::string>> keys;
    std::istringstream in(canonical_config_text(cfg));
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t eq = line.find('=');
        keys.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return keys;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace maelm
