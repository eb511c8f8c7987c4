#include "nllab/config.hpp"

#include "nllab/errors.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace nllab {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError(key, "cannot parse integer value '" + value + "' for " + key);
    return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    const long long v = parse_int(key, value);
    if (v < 0) throw ConfigError(key, key + " must be nonnegative");
    return static_cast<std::size_t>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError(key, "cannot parse seed value '" + value + "' for " + key);
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const double out = std::strtod(begin, &end);
    if (end != begin + value.size() || value.empty())
        throw ConfigError(key, "cannot parse numeric value '" + value + "' for " + key);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(key, "cannot parse boolean value '" + value + "' for " + key);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (trim(value).empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(static_cast<int>(parse_int(key, trim(item))));
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

struct KeyHandler {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

// One entry per config key, in serialization order.
const std::vector<std::pair<std::string, KeyHandler>>& key_table() {
    static const std::vector<std::pair<std::string, KeyHandler>> table = {
        {"data_source",
         {[](RunConfig& c, const std::string& v) { c.data_source = v; },
          [](const RunConfig& c) { return c.data_source; }}},
        {"classes",
         {[](RunConfig& c, const std::string& v) { c.classes = parse_size("classes", v); },
          [](const RunConfig& c) { return std::to_string(c.classes); }}},
        {"feature_dim",
         {[](RunConfig& c, const std::string& v) { c.feature_dim = parse_size("feature_dim", v); },
          [](const RunConfig& c) { return std::to_string(c.feature_dim); }}},
        {"train_size",
         {[](RunConfig& c, const std::string& v) { c.train_size = parse_size("train_size", v); },
          [](const RunConfig& c) { return std::to_string(c.train_size); }}},
        {"test_size",
         {[](RunConfig& c, const std::string& v) { c.test_size = parse_size("test_size", v); },
          [](const RunConfig& c) { return std::to_string(c.test_size); }}},
        {"blob_spread",
         {[](RunConfig& c, const std::string& v) { c.blob_spread = parse_real("blob_spread", v); },
          [](const RunConfig& c) { return format_double(c.blob_spread); }}},
        {"blob_mean_distance",
         {[](RunConfig& c, const std::string& v) {
              c.blob_mean_distance = parse_real("blob_mean_distance", v);
          },
          [](const RunConfig& c) { return format_double(c.blob_mean_distance); }}},
        {"meta_fraction",
         {[](RunConfig& c, const std::string& v) {
              c.meta_fraction = parse_real("meta_fraction", v);
          },
          [](const RunConfig& c) { return format_double(c.meta_fraction); }}},
        {"meta_ratio",
         {[](RunConfig& c, const std::string& v) { c.meta_ratio = parse_real("meta_ratio", v); },
          [](const RunConfig& c) { return format_double(c.meta_ratio); }}},
        {"idx_train_images",
         {[](RunConfig& c, const std::string& v) { c.idx_train_images = v; },
          [](const RunConfig& c) { return c.idx_train_images; }}},
        {"idx_train_labels",
         {[](RunConfig& c, const std::string& v) { c.idx_train_labels = v; },
          [](const RunConfig& c) { return c.idx_train_labels; }}},
        {"idx_test_images",
         {[](RunConfig& c, const std::string& v) { c.idx_test_images = v; },
          [](const RunConfig& c) { return c.idx_test_images; }}},
        {"idx_test_labels",
         {[](RunConfig& c, const std::string& v) { c.idx_test_labels = v; },
          [](const RunConfig& c) { return c.idx_test_labels; }}},
        {"noise_kind",
         {[](RunConfig& c, const std::string& v) { c.noise_kind = noise_kind_from_string(v); },
          [](const RunConfig& c) { return std::string(to_string(c.noise_kind)); }}},
        {"eta",
         {[](RunConfig& c, const std::string& v) { c.eta = parse_real("eta", v); },
          [](const RunConfig& c) { return format_double(c.eta); }}},
        {"noise_trunc_std",
         {[](RunConfig& c, const std::string& v) {
              c.noise_trunc_std = parse_real("noise_trunc_std", v);
          },
          [](const RunConfig& c) { return format_double(c.noise_trunc_std); }}},
        {"asym_mapping",
         {[](RunConfig& c, const std::string& v) {
              c.asym_mapping = parse_int_list("asym_mapping", v);
          },
          [](const RunConfig& c) { return join_ints(c.asym_mapping); }}},
        {"epochs_total",
         {[](RunConfig& c, const std::string& v) {
              c.epochs_total = static_cast<int>(parse_int("epochs_total", v));
          },
          [](const RunConfig& c) { return std::to_string(c.epochs_total); }}},
        {"warmup_epochs",
         {[](RunConfig& c, const std::string& v) {
              c.warmup_epochs = static_cast<int>(parse_int("warmup_epochs", v));
          },
          [](const RunConfig& c) { return std::to_string(c.warmup_epochs); }}},
        {"correction_frequency",
         {[](RunConfig& c, const std::string& v) {
              c.correction_frequency = static_cast<int>(parse_int("correction_frequency", v));
          },
          [](const RunConfig& c) { return std::to_string(c.correction_frequency); }}},
        {"lambda",
         {[](RunConfig& c, const std::string& v) { c.lambda = parse_real("lambda", v); },
          [](const RunConfig& c) { return format_double(c.lambda); }}},
        {"batch_size",
         {[](RunConfig& c, const std::string& v) { c.batch_size = parse_size("batch_size", v); },
          [](const RunConfig& c) { return std::to_string(c.batch_size); }}},
        {"lr",
         {[](RunConfig& c, const std::string& v) {
              c.sgd.learning_rate = parse_real("lr", v);
          },
          [](const RunConfig& c) { return format_double(c.sgd.learning_rate); }}},
        {"momentum",
         {[](RunConfig& c, const std::string& v) { c.sgd.momentum = parse_real("momentum", v); },
          [](const RunConfig& c) { return format_double(c.sgd.momentum); }}},
        {"weight_decay",
         {[](RunConfig& c, const std::string& v) {
              c.sgd.weight_decay = parse_real("weight_decay", v);
          },
          [](const RunConfig& c) { return format_double(c.sgd.weight_decay); }}},
        {"lr_milestones",
         {[](RunConfig& c, const std::string& v) {
              c.sgd.milestones = parse_int_list("lr_milestones", v);
          },
          [](const RunConfig& c) { return join_ints(c.sgd.milestones); }}},
        {"lr_decay",
         {[](RunConfig& c, const std::string& v) {
              c.sgd.decay_factor = parse_real("lr_decay", v);
          },
          [](const RunConfig& c) { return format_double(c.sgd.decay_factor); }}},
        {"hidden1",
         {[](RunConfig& c, const std::string& v) { c.hidden1 = parse_size("hidden1", v); },
          [](const RunConfig& c) { return std::to_string(c.hidden1); }}},
        {"hidden2",
         {[](RunConfig& c, const std::string& v) { c.hidden2 = parse_size("hidden2", v); },
          [](const RunConfig& c) { return std::to_string(c.hidden2); }}},
        {"corrector_hidden",
         {[](RunConfig& c, const std::string& v) {
              c.corrector.hidden_units = parse_size("corrector_hidden", v);
          },
          [](const RunConfig& c) { return std::to_string(c.corrector.hidden_units); }}},
        {"corrector_lr",
         {[](RunConfig& c, const std::string& v) {
              c.corrector.lr = parse_real("corrector_lr", v);
          },
          [](const RunConfig& c) { return format_double(c.corrector.lr); }}},
        {"corrector_lr_after_decline",
         {[](RunConfig& c, const std::string& v) {
              c.corrector.lr_after_decline = parse_real("corrector_lr_after_decline", v);
          },
          [](const RunConfig& c) { return format_double(c.corrector.lr_after_decline); }}},
        {"corrector_max_epochs",
         {[](RunConfig& c, const std::string& v) {
              c.corrector.max_epochs = static_cast<int>(parse_int("corrector_max_epochs", v));
          },
          [](const RunConfig& c) { return std::to_string(c.corrector.max_epochs); }}},
        {"corrector_patience",
         {[](RunConfig& c, const std::string& v) {
              c.corrector.early_exit_patience =
                  static_cast<int>(parse_int("corrector_patience", v));
          },
          [](const RunConfig& c) { return std::to_string(c.corrector.early_exit_patience); }}},
        {"corrector_min_delta",
         {[](RunConfig& c, const std::string& v) {
              c.corrector.early_exit_min_delta = parse_real("corrector_min_delta", v);
          },
          [](const RunConfig& c) { return format_double(c.corrector.early_exit_min_delta); }}},
        {"corrector_batch",
         {[](RunConfig& c, const std::string& v) {
              c.corrector.batch_size = parse_size("corrector_batch", v);
          },
          [](const RunConfig& c) { return std::to_string(c.corrector.batch_size); }}},
        {"modality",
         {[](RunConfig& c, const std::string& v) {
              c.corrector.modality = modality_from_string(v);
          },
          [](const RunConfig& c) { return std::string(to_string(c.corrector.modality)); }}},
        {"corrector_refresh_epochs",
         {[](RunConfig& c, const std::string& v) {
              c.corrector_refresh_epochs =
                  static_cast<int>(parse_int("corrector_refresh_epochs", v));
          },
          [](const RunConfig& c) { return std::to_string(c.corrector_refresh_epochs); }}},
        {"corrector_warm_start",
         {[](RunConfig& c, const std::string& v) {
              c.corrector_warm_start = parse_bool("corrector_warm_start", v);
          },
          [](const RunConfig& c) { return std::string(c.corrector_warm_start ? "true" : "false"); }}},
        {"history_cap",
         {[](RunConfig& c, const std::string& v) { c.history_cap = parse_size("history_cap", v); },
          [](const RunConfig& c) { return std::to_string(c.history_cap); }}},
        {"method",
         {[](RunConfig& c, const std::string& v) { c.method = v; },
          [](const RunConfig& c) { return c.method; }}},
        {"export_dataset",
         {[](RunConfig& c, const std::string& v) {
              c.export_dataset = parse_bool("export_dataset", v);
          },
          [](const RunConfig& c) { return std::string(c.export_dataset ? "true" : "false"); }}},
        {"no_convex_combination",
         {[](RunConfig& c, const std::string& v) {
              c.no_convex_combination = parse_bool("no_convex_combination", v);
          },
          [](const RunConfig& c) {
              return std::string(c.no_convex_combination ? "true" : "false");
          }}},
        {"seed_data",
         {[](RunConfig& c, const std::string& v) { c.seed_data = parse_u64("seed_data", v); },
          [](const RunConfig& c) { return std::to_string(c.seed_data); }}},
        {"seed_noise",
         {[](RunConfig& c, const std::string& v) { c.seed_noise = parse_u64("seed_noise", v); },
          [](const RunConfig& c) { return std::to_string(c.seed_noise); }}},
        {"seed_model",
         {[](RunConfig& c, const std::string& v) { c.seed_model = parse_u64("seed_model", v); },
          [](const RunConfig& c) { return std::to_string(c.seed_model); }}},
        {"seed_corrector",
         {[](RunConfig& c, const std::string& v) {
              c.seed_corrector = parse_u64("seed_corrector", v);
          },
          [](const RunConfig& c) { return std::to_string(c.seed_corrector); }}},
    };
    return table;
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [name, handler] : key_table()) {
        if (name == key) {
            handler.set(cfg, value);
            return;
        }
    }
    throw ConfigError(key, "unknown config key '" + key + "'");
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, ptr};
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [name, handler] : key_table()) out.push_back(name);
        return out;
    }();
    return keys;
}

RunConfig parse_config_text(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line, "line " + std::to_string(line_no) +
                                        " is not a 'key = value' pair");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(key, "empty key on line " + std::to_string(line_no));
        apply_key(cfg, key, value);
    }
    for (const auto& [key, value] : overrides) apply_key(cfg, key, value);
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), overrides);
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [name, handler] : key_table()) {
        out += name;
        out += " = ";
        out += handler.get(cfg);
        out += '\n';
    }
    return out;
}

} // namespace nllab
