#include "vse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "vse/tensor_io.hpp"

namespace vse {

namespace fs = std::filesystem;

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

std::optional<Split> parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    return std::nullopt;
}

std::vector<const DatasetItem*> Dataset::select(Split s) const { return select({s}); }

std::vector<const DatasetItem*> Dataset::select(std::initializer_list<Split> splits) const {
    std::vector<const DatasetItem*> out;
    for (const auto& it : items)
        if (std::find(splits.begin(), splits.end(), it.split) != splits.end()) out.push_back(&it);
    return out;
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

bool parse_index(const std::string& s, std::size_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("cannot open manifest " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    Dataset ds;
    std::optional<std::size_t> declared_vocab;
    std::size_t max_token = 0;
    std::size_t max_token_line = 0;
    bool any_token = false;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == '@') {
            std::istringstream in(line.substr(1));
            std::string key;
            std::size_t v = 0;
            if (!(in >> key >> v) || key != "vocab" || v == 0) {
                throw ParseError(manifest_path, lineno, "malformed directive '" + line + "'");
            }
            // Concatenated manifests may repeat the directive; the largest one wins.
            declared_vocab = std::max(declared_vocab.value_or(0), v);
            continue;
        }
        const auto fields = split_on(line, '\t');
        if (fields.size() < 4 || fields.size() > 5) {
            throw ParseError(manifest_path, lineno, "expected 4 or 5 tab-separated fields, got " + std::to_string(fields.size()));
        }
        DatasetItem item;
        item.id = fields[0];
        if (item.id.empty()) throw ParseError(manifest_path, lineno, "empty item id");
        if (!ids.insert(item.id).second) throw ParseError(manifest_path, lineno, "duplicate item id '" + item.id + "'");
        auto split = parse_split(fields[1]);
        if (!split) throw ParseError(manifest_path, lineno, "unknown split tag '" + fields[1] + "'");
        item.split = *split;
        item.feature_path = fields[2];
        for (const auto& cap : split_on(fields[3], '|')) {
            TokenSequence tokens;
            std::istringstream in(cap);
            std::string tok;
            while (in >> tok) {
                std::size_t v = 0;
                if (!parse_index(tok, v)) throw ParseError(manifest_path, lineno, "bad token index '" + tok + "'");
                if (declared_vocab && v >= *declared_vocab) {
                    throw ParseError(manifest_path, lineno,
                                     "token " + tok + " outside declared vocabulary of " + std::to_string(*declared_vocab));
                }
                tokens.push_back(v);
                if (v >= max_token) {
                    max_token = v;
                    max_token_line = lineno;
                }
                any_token = true;
            }
            if (tokens.empty()) throw ParseError(manifest_path, lineno, "empty caption");
            item.captions.push_back(std::move(tokens));
        }
        if (item.captions.empty()) throw ParseError(manifest_path, lineno, "item has no captions");
        if (fields.size() == 5) {
            const auto x = fields[4].find('x');
            ImageSize sz;
            if (x == std::string::npos || !parse_index(fields[4].substr(0, x), sz.width) ||
                !parse_index(fields[4].substr(x + 1), sz.height) || sz.width == 0 || sz.height == 0) {
                throw ParseError(manifest_path, lineno, "bad image size '" + fields[4] + "', expected WxH");
            }
            item.image_size = sz;
        }
        const fs::path p = fs::path(item.feature_path).is_absolute() ? fs::path(item.feature_path) : base / item.feature_path;
        try {
            item.features = read_tensor(p.string());
        } catch (const Error& e) {
            throw ParseError(manifest_path, lineno, "[" + e.category() + "] " + e.what());
        }
        if (item.features.rank() != 3) {
            throw ParseError(manifest_path, lineno, "feature file must have rank 3 {h, w, c}, got " + shape_str(item.features.dims()));
        }
        if (item.image_size) {
            const std::size_t h = item.features.dim(0), w = item.features.dim(1);
            if (w != item.image_size->width / 32 || h != item.image_size->height / 32) {
                throw ParseError(manifest_path, lineno,
                                 "feature grid " + std::to_string(w) + "x" + std::to_string(h) +
                                     " does not match image size " + fields[4] + " at stride 32");
            }
        }
        ds.items.push_back(std::move(item));
    }
    if (ds.items.empty()) throw ParseError(manifest_path, lineno, "manifest has no items");
    ds.vocab_size = declared_vocab.value_or(any_token ? max_token + 1 : 0);
    if (max_token >= ds.vocab_size) {
        throw ParseError(manifest_path, max_token_line,
                         "token " + std::to_string(max_token) + " outside vocabulary of " + std::to_string(ds.vocab_size));
    }
    return ds;
}

std::string format_manifest_item(const DatasetItem& item) {
    std::ostringstream os;
    os << item.id << '\t' << split_name(item.split) << '\t' << item.feature_path << '\t';
    for (std::size_t c = 0; c < item.captions.size(); ++c) {
        if (c) os << '|';
        for (std::size_t i = 0; i < item.captions[c].size(); ++i) os << (i ? " " : "") << item.captions[c][i];
    }
    if (item.image_size) os << '\t' << item.image_size->width << 'x' << item.image_size->height;
    return os.str();
}

}  // namespace vse
