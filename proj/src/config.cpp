#include "fedu/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "fedu/errors.hpp"

namespace fedu {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& message) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + message);
}

long long parse_int(const std::string& origin, int line, const std::string& key,
                    const std::string& value) {
    long long out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        fail(origin, line, "key '" + key + "': expected integer, got '" + value + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& origin, int line, const std::string& key,
                        const std::string& value) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        fail(origin, line, "key '" + key + "': expected unsigned integer, got '" + value + "'");
    }
    return out;
}

Scalar parse_float(const std::string& origin, int line, const std::string& key,
                   const std::string& value) {
    try {
        std::size_t used = 0;
        Scalar out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        fail(origin, line, "key '" + key + "': expected number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& origin, int line, const std::string& key,
                const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    fail(origin, line, "key '" + key + "': expected true or false, got '" + value + "'");
}

template <typename T>
std::vector<T> parse_int_list(const std::string& origin, int line, const std::string& key,
                              const std::string& value) {
    std::vector<T> out;
    if (trim(value).empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<T>(parse_int(origin, line, key, trim(item))));
    }
    return out;
}

std::string format_float(Scalar v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

template <typename T>
std::string format_list(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(values[i]);
    }
    return out;
}

}  // namespace

MlpSpec ExperimentConfig::encoder_spec(Index input_dim) const {
    MlpSpec spec;
    spec.widths.push_back(input_dim);
    for (Index w : encoder_hidden) spec.widths.push_back(w);
    spec.widths.push_back(encoder_out);
    return spec;
}

MlpSpec ExperimentConfig::predictor_spec() const {
    if (predictor_hidden.empty()) return default_predictor_spec(encoder_out);
    MlpSpec spec;
    spec.widths.push_back(encoder_out);
    for (Index w : predictor_hidden) spec.widths.push_back(w);
    spec.widths.push_back(encoder_out);
    return spec;
}

int ExperimentConfig::effective_clients_per_round() const {
    return clients_per_round == 0 ? clients : clients_per_round;
}

void ExperimentConfig::validate() const {
    if (dataset == DatasetKind::Cifar10 && cifar_path.empty()) {
        throw ConfigError("config: dataset = cifar10 requires cifar10.path");
    }
    if (dataset == DatasetKind::Cifar10 && cifar_test_path.empty() &&
        cifar_holdout_per_class <= 0) {
        throw ConfigError(
            "config: dataset = cifar10 needs cifar10.test_path or cifar10.holdout_per_class");
    }
    if (blobs_classes < 1) throw ConfigError("config: blobs.classes must be >= 1");
    if (blobs_dim < 1) throw ConfigError("config: blobs.dim must be >= 1");
    if (blobs_train_per_class < 1) throw ConfigError("config: blobs.train_per_class must be >= 1");
    if (blobs_test_per_class < 1) throw ConfigError("config: blobs.test_per_class must be >= 1");
    if (blobs_separation < 0) throw ConfigError("config: blobs.separation must be >= 0");
    if (clients < 1) throw ConfigError("config: clients must be >= 1");
    if (clients_per_round < 0 || clients_per_round > clients) {
        throw ConfigError("config: clients_per_round must be in [1, clients] (or 0 for all)");
    }
    if (rounds < 0) throw ConfigError("config: rounds must be >= 0");
    for (Index w : encoder_hidden) {
        if (w < 1) throw ConfigError("config: encoder.hidden widths must be positive");
    }
    if (encoder_out < 1) throw ConfigError("config: encoder.out must be >= 1");
    for (Index w : predictor_hidden) {
        if (w < 1) throw ConfigError("config: predictor.hidden widths must be positive");
    }
    if (eval_interval < 0) throw ConfigError("config: eval.interval must be >= 0");
    if (checkpoint_interval < 0) throw ConfigError("config: checkpoint_interval must be >= 0");
    if (workers < 1) throw ConfigError("config: workers must be >= 1");
    train.validate();
    augment.validate();
    protocol.validate();
    eval.validate();
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (std::size_t hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            fail(origin, line_no, "expected 'key = value', got '" + trim(raw) + "'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, line_no, "missing key before '='");
        if (!seen.insert(key).second) fail(origin, line_no, "duplicate key '" + key + "'");

        if (key == "dataset") {
            if (value == "blobs") cfg.dataset = DatasetKind::Blobs;
            else if (value == "cifar10") cfg.dataset = DatasetKind::Cifar10;
            else fail(origin, line_no, "key 'dataset': expected blobs or cifar10, got '" + value + "'");
        } else if (key == "blobs.classes") {
            cfg.blobs_classes = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "blobs.dim") {
            cfg.blobs_dim = parse_int(origin, line_no, key, value);
        } else if (key == "blobs.train_per_class") {
            cfg.blobs_train_per_class = parse_int(origin, line_no, key, value);
        } else if (key == "blobs.test_per_class") {
            cfg.blobs_test_per_class = parse_int(origin, line_no, key, value);
        } else if (key == "blobs.separation") {
            cfg.blobs_separation = parse_float(origin, line_no, key, value);
        } else if (key == "cifar10.path") {
            cfg.cifar_path = value;
        } else if (key == "cifar10.test_path") {
            cfg.cifar_test_path = value;
        } else if (key == "cifar10.holdout_per_class") {
            cfg.cifar_holdout_per_class = parse_int(origin, line_no, key, value);
        } else if (key == "cifar10.downsample") {
            cfg.cifar_downsample = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "cifar10.keep_classes") {
            cfg.cifar_keep_classes = parse_int_list<int>(origin, line_no, key, value);
        } else if (key == "partition") {
            if (value == "iid") cfg.partition = PartitionScheme::Iid;
            else if (value == "noniid") cfg.partition = PartitionScheme::NonIid;
            else fail(origin, line_no, "key 'partition': expected iid or noniid, got '" + value + "'");
        } else if (key == "clients") {
            cfg.clients = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "clients_per_round") {
            cfg.clients_per_round = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "rounds") {
            cfg.rounds = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "encoder.hidden") {
            cfg.encoder_hidden = parse_int_list<Index>(origin, line_no, key, value);
        } else if (key == "encoder.out") {
            cfg.encoder_out = parse_int(origin, line_no, key, value);
        } else if (key == "predictor.hidden") {
            cfg.predictor_hidden = parse_int_list<Index>(origin, line_no, key, value);
        } else if (key == "local_epochs") {
            cfg.train.local_epochs = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "batch_size") {
            cfg.train.batch_size = parse_int(origin, line_no, key, value);
        } else if (key == "learning_rate") {
            cfg.train.learning_rate = parse_float(origin, line_no, key, value);
        } else if (key == "ema_decay") {
            cfg.train.ema_decay = parse_float(origin, line_no, key, value);
        } else if (key == "loss.symmetrized") {
            cfg.train.symmetrized = parse_bool(origin, line_no, key, value);
        } else if (key == "aggregate") {
            if (value == "online") cfg.protocol.aggregate_source = AggregateSource::Online;
            else if (value == "target") cfg.protocol.aggregate_source = AggregateSource::Target;
            else fail(origin, line_no, "key 'aggregate': expected online or target, got '" + value + "'");
        } else if (key == "update") {
            if (value == "online") cfg.protocol.update_target = UpdateTarget::Online;
            else if (value == "target") cfg.protocol.update_target = UpdateTarget::Target;
            else if (value == "both") cfg.protocol.update_target = UpdateTarget::Both;
            else fail(origin, line_no, "key 'update': expected online, target, or both, got '" + value + "'");
        } else if (key == "predictor") {
            if (value == "local") cfg.protocol.predictor_policy = PredictorPolicy::AlwaysLocal;
            else if (value == "global") cfg.protocol.predictor_policy = PredictorPolicy::AlwaysGlobal;
            else if (value == "dapu") cfg.protocol.predictor_policy = PredictorPolicy::Dapu;
            else fail(origin, line_no, "key 'predictor': expected local, global, or dapu, got '" + value + "'");
        } else if (key == "mu") {
            cfg.protocol.mu = parse_float(origin, line_no, key, value);
        } else if (key == "augment.noise_sigma") {
            cfg.augment.noise_sigma = parse_float(origin, line_no, key, value);
        } else if (key == "augment.mask_prob") {
            cfg.augment.mask_prob = parse_float(origin, line_no, key, value);
        } else if (key == "augment.scale_jitter") {
            cfg.augment.scale_jitter = parse_float(origin, line_no, key, value);
        } else if (key == "eval.knn_k") {
            cfg.eval.knn_k = parse_int(origin, line_no, key, value);
        } else if (key == "eval.knn_temperature") {
            cfg.eval.knn_temperature = parse_float(origin, line_no, key, value);
        } else if (key == "eval.probe_epochs") {
            cfg.eval.probe_epochs = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "eval.probe_lr") {
            cfg.eval.probe_lr = parse_float(origin, line_no, key, value);
        } else if (key == "eval.interval") {
            cfg.eval_interval = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "checkpoint_interval") {
            cfg.checkpoint_interval = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "seed") {
            cfg.seed = parse_u64(origin, line_no, key, value);
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else if (key == "workers") {
            cfg.workers = static_cast<int>(parse_int(origin, line_no, key, value));
        } else if (key == "log_timing") {
            cfg.log_timing = parse_bool(origin, line_no, key, value);
        } else {
            fail(origin, line_no, "unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::to_key_values() const {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("dataset", dataset == DatasetKind::Blobs ? "blobs" : "cifar10");
    kv.emplace_back("blobs.classes", std::to_string(blobs_classes));
    kv.emplace_back("blobs.dim", std::to_string(blobs_dim));
    kv.emplace_back("blobs.train_per_class", std::to_string(blobs_train_per_class));
    kv.emplace_back("blobs.test_per_class", std::to_string(blobs_test_per_class));
    kv.emplace_back("blobs.separation", format_float(blobs_separation));
    kv.emplace_back("cifar10.path", cifar_path);
    kv.emplace_back("cifar10.test_path", cifar_test_path);
    kv.emplace_back("cifar10.holdout_per_class", std::to_string(cifar_holdout_per_class));
    kv.emplace_back("cifar10.downsample", std::to_string(cifar_downsample));
    kv.emplace_back("cifar10.keep_classes", format_list(cifar_keep_classes));
    kv.emplace_back("partition", partition == PartitionScheme::Iid ? "iid" : "noniid");
    kv.emplace_back("clients", std::to_string(clients));
    kv.emplace_back("clients_per_round", std::to_string(clients_per_round));
    kv.emplace_back("rounds", std::to_string(rounds));
    kv.emplace_back("encoder.hidden", format_list(encoder_hidden));
    kv.emplace_back("encoder.out", std::to_string(encoder_out));
    kv.emplace_back("predictor.hidden", format_list(predictor_hidden));
    kv.emplace_back("local_epochs", std::to_string(train.local_epochs));
    kv.emplace_back("batch_size", std::to_string(train.batch_size));
    kv.emplace_back("learning_rate", format_float(train.learning_rate));
    kv.emplace_back("ema_decay", format_float(train.ema_decay));
    kv.emplace_back("loss.symmetrized", train.symmetrized ? "true" : "false");
    kv.emplace_back("aggregate", to_string(protocol.aggregate_source));
    kv.emplace_back("update", to_string(protocol.update_target));
    kv.emplace_back("predictor", to_string(protocol.predictor_policy));
    kv.emplace_back("mu", format_float(protocol.mu));
    kv.emplace_back("augment.noise_sigma", format_float(augment.noise_sigma));
    kv.emplace_back("augment.mask_prob", format_float(augment.mask_prob));
    kv.emplace_back("augment.scale_jitter", format_float(augment.scale_jitter));
    kv.emplace_back("eval.knn_k", std::to_string(eval.knn_k));
    kv.emplace_back("eval.knn_temperature", format_float(eval.knn_temperature));
    kv.emplace_back("eval.probe_epochs", std::to_string(eval.probe_epochs));
    kv.emplace_back("eval.probe_lr", format_float(eval.probe_lr));
    kv.emplace_back("eval.interval", std::to_string(eval_interval));
    kv.emplace_back("checkpoint_interval", std::to_string(checkpoint_interval));
    kv.emplace_back("seed", std::to_string(seed));
    kv.emplace_back("output_dir", output_dir);
    kv.emplace_back("workers", std::to_string(workers));
    kv.emplace_back("log_timing", log_timing ? "true" : "false");
    return kv;
}

void write_config_file(const ExperimentConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("config: cannot open '" + path + "' for writing");
    for (const auto& [key, value] : config.to_key_values()) {
        out << key << " = " << value << '\n';
    }
    if (!out) throw ConfigError("config: write to '" + path + "' failed");
}

std::string resolve_output_dir(const ExperimentConfig& config) {
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv(kOutputDirEnvVar); env && *env) return env;
    return "fedu_out";
}

}  // namespace fedu
