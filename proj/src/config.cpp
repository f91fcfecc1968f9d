#include "vse/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vse {

namespace {

const std::vector<std::string> kImageHead = {"image_projection"};
const std::vector<std::string> kText = {"text_embedding", "text_encoder", "text_attention", "text_projection"};
const std::vector<std::string> kImageRest = {"image_attention", "image_adapter", "image_backbone"};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
    std::vector<std::string> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

double to_probability(const std::string& key, const std::string& v) {
    const double p = to_double(key, v);
    if (p < 0.0 || p >= 1.0) throw ConfigError(key + ": dropout probability must be in [0, 1), got " + v);
    return p;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& s : split_list(v)) out.push_back(to_size(key, s));
    return out;
}

template <typename C>
std::string join(const C& items) {
    std::ostringstream os;
    bool first = true;
    for (const auto& i : items) {
        if (!first) os << ",";
        os << i;
        first = false;
    }
    return os.str();
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void validate_groups(const std::vector<std::string>& groups, const std::string& key) {
    const auto known = all_parameter_groups();
    for (const auto& g : groups) {
        if (std::find(known.begin(), known.end(), g) == known.end()) {
            throw ConfigError(key + ": unknown parameter group '" + g + "'");
        }
    }
}

// stageN.field with N >= 1; N may be one past the current plan length to append a stage.
bool set_stage_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key.rfind("stage", 0) != 0) return false;
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 5) return false;
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(key.data() + 5, key.data() + dot, n);
    if (ec != std::errc() || p != key.data() + dot || n == 0) return false;
    auto& stages = cfg.train.plan.stages;
    if (n > stages.size() + 1) throw ConfigError(key + ": stages must be defined in order");
    if (n == stages.size() + 1) stages.push_back({});
    auto& st = stages[n - 1];
    const std::string field = key.substr(dot + 1);
    if (field == "groups") {
        st.groups = split_list(value);
        validate_groups(st.groups, key);
    } else if (field == "epochs") {
        st.epochs = to_size(key, value);
        if (st.epochs == 0) throw ConfigError(key + ": epoch count must be positive");
    } else if (field == "lr") {
        st.lr = to_double(key, value);
        if (!(st.lr > 0.0)) throw ConfigError(key + ": learning rate must be positive");
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
    return true;
}

}  // namespace

std::vector<std::string> all_parameter_groups() { return concat({kImageHead, kText, kImageRest}); }

StagePlan StagePlan::paper() {
    return {{{kImageHead, 4, 0.005},
             {concat({kImageHead, kText}), 15, 0.0005},
             {concat({kImageHead, kText, kImageRest}), 40, 0.00005}}};
}

StagePlan StagePlan::desk() {
    return {{{kImageHead, 5, 0.005},
             {concat({kImageHead, kText}), 15, 0.005},
             {concat({kImageHead, kText, kImageRest}), 30, 0.0005}}};
}

StagePlan StagePlan::named(const std::string& preset) {
    if (preset == "paper") return paper();
    if (preset == "desk") return desk();
    throw ConfigError("unknown stage preset '" + preset + "' (expected paper or desk)");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    static const std::map<std::string, std::function<void(RunConfig&, const std::string&, const std::string&)>> table = {
        {"visual_input",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "features") c.model.visual_input = VisualInput::features;
             else if (v == "raster") c.model.visual_input = VisualInput::raster;
             else throw ConfigError(k + ": expected features or raster, got '" + v + "'");
         }},
        {"feature_channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.feature_channels = to_size(k, v); }},
        {"model_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.model_dim = to_size(k, v); }},
        {"attention_hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.attention_hidden = to_size(k, v); }},
        {"heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.heads = to_size(k, v); }},
        {"joint_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.joint_dim = to_size(k, v); }},
        {"word_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.word_dim = to_size(k, v); }},
        {"vocab_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.vocab_size = to_size(k, v); }},
        {"rnn_layers", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.rnn_layers = to_size(k, v); }},
        {"rnn_dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.rnn_dropout = to_probability(k, v); }},
        {"attention_dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.attention_dropout = to_probability(k, v); }},
        {"projection_dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.projection_dropout = to_probability(k, v); }},
        {"bidirectional", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.bidirectional = to_bool(k, v); }},
        {"rnn_residual", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.rnn_residual = to_bool(k, v); }},
        {"backbone_strides", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.backbone_strides = to_size_list(k, v); }},
        {"backbone_channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.backbone_channels = to_size_list(k, v); }},
        {"margin",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.loss.margin = to_double(k, v);
             if (c.train.loss.margin < 0) throw ConfigError(k + ": margin must be non-negative");
         }},
        {"lambda",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.loss.diversity_weight = to_double(k, v);
             if (c.train.loss.diversity_weight < 0) throw ConfigError(k + ": lambda must be non-negative");
         }},
        {"diversity_reduction",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "mean") c.train.loss.reduction = DiversityReduction::mean;
             else if (v == "sum") c.train.loss.reduction = DiversityReduction::sum;
             else throw ConfigError(k + ": expected mean or sum, got '" + v + "'");
         }},
        {"batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.batch_size = to_size(k, v);
             if (c.train.batch_size < 2) throw ConfigError(k + ": batch size must be at least 2");
         }},
        {"seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             try {
                 std::size_t used = 0;
                 c.train.seed = std::stoull(v, &used);
                 if (used != v.size()) throw std::invalid_argument(v);
             } catch (const std::exception&) {
                 throw ConfigError(k + ": expected an unsigned integer, got '" + v + "'");
             }
         }},
        {"stage_preset",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.train.plan = StagePlan::named(v);
             c.train.stage_preset = v;
         }},
        {"stages",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             const auto n = to_size(k, v);
             if (n == 0) throw ConfigError(k + ": need at least one stage");
             c.train.plan.stages.resize(n);
         }},
        {"eval_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.eval_every = to_size(k, v); }},
        {"manifest", [](RunConfig& c, const std::string&, const std::string& v) { c.train.manifest = v; }},
        {"checkpoint_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.train.checkpoint_dir = v; }},
        {"metrics_log", [](RunConfig& c, const std::string&, const std::string& v) { c.train.metrics_log = v; }},
    };
    if (auto it = table.find(key); it != table.end()) {
        it->second(cfg, key, value);
        return;
    }
    if (set_stage_value(cfg, key, value)) return;
    throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

std::string format_config(const RunConfig& cfg) {
    const auto& m = cfg.model;
    const auto& t = cfg.train;
    std::ostringstream os;
    os << "visual_input = " << (m.visual_input == VisualInput::features ? "features" : "raster") << "\n"
       << "feature_channels = " << m.feature_channels << "\n"
       << "model_dim = " << m.model_dim << "\n"
       << "attention_hidden = " << m.attention_hidden << "\n"
       << "heads = " << m.heads << "\n"
       << "joint_dim = " << m.joint_dim << "\n"
       << "word_dim = " << m.word_dim << "\n"
       << "vocab_size = " << m.vocab_size << "\n"
       << "rnn_layers = " << m.rnn_layers << "\n"
       << "rnn_dropout = " << fmt_double(m.rnn_dropout) << "\n"
       << "attention_dropout = " << fmt_double(m.attention_dropout) << "\n"
       << "projection_dropout = " << fmt_double(m.projection_dropout) << "\n"
       << "bidirectional = " << (m.bidirectional ? "true" : "false") << "\n"
       << "rnn_residual = " << (m.rnn_residual ? "true" : "false") << "\n"
       << "backbone_strides = " << join(m.backbone_strides) << "\n"
       << "backbone_channels = " << join(m.backbone_channels) << "\n"
       << "margin = " << fmt_double(t.loss.margin) << "\n"
       << "lambda = " << fmt_double(t.loss.diversity_weight) << "\n"
       << "diversity_reduction = " << (t.loss.reduction == DiversityReduction::mean ? "mean" : "sum") << "\n"
       << "batch_size = " << t.batch_size << "\n"
       << "seed = " << t.seed << "\n"
       << "stage_preset = " << t.stage_preset << "\n"
       << "stages = " << t.plan.stages.size() << "\n";
    for (std::size_t i = 0; i < t.plan.stages.size(); ++i) {
        const auto& st = t.plan.stages[i];
        os << "stage" << i + 1 << ".groups = " << join(st.groups) << "\n"
           << "stage" << i + 1 << ".epochs = " << st.epochs << "\n"
           << "stage" << i + 1 << ".lr = " << fmt_double(st.lr) << "\n";
    }
    os << "eval_every = " << t.eval_every << "\n";
    if (!t.manifest.empty()) os << "manifest = " << t.manifest << "\n";
    if (!t.checkpoint_dir.empty()) os << "checkpoint_dir = " << t.checkpoint_dir << "\n";
    if (!t.metrics_log.empty()) os << "metrics_log = " << t.metrics_log << "\n";
    return os.str();
}

}  // namespace vse
