#include "vse/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace vse {

namespace {

// Number of candidates ranked strictly ahead of candidate j.
std::size_t rank_of(const double* scores, std::size_t n, std::size_t j) {
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < n; ++c)
        if (scores[c] > scores[j] || (scores[c] == scores[j] && c < j)) ++ahead;
    return ahead;
}

}  // namespace

double recall_at_k(const Tensor<double>& sim, const GroundTruth& truth, std::size_t k) {
    const std::size_t a = sim.rows(), b = sim.cols();
    if (truth.size() != a) throw ContractError("recall_at_k: ground truth has " + std::to_string(truth.size()) + " queries, similarity has " + std::to_string(a));
    if (k == 0 || k > b) throw ContractError("recall_at_k: k = " + std::to_string(k) + " outside [1, " + std::to_string(b) + "]");
    std::size_t hits = 0;
    for (std::size_t q = 0; q < a; ++q) {
        if (truth[q].empty()) throw ContractError("recall_at_k: query " + std::to_string(q) + " has no ground truth");
        const double* row = &sim[q * b];
        std::size_t best = b;
        for (auto j : truth[q]) {
            if (j >= b) throw ContractError("recall_at_k: ground-truth index " + std::to_string(j) + " out of range");
            best = std::min(best, rank_of(row, b, j));
        }
        if (best < k) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(a);
}

std::string direction_name(Direction d) {
    return d == Direction::sentence_retrieval ? "sentence_retrieval" : "image_retrieval";
}

double ProtocolResult::mean_recall() const {
    return (sentence.r1 + sentence.r5 + sentence.r10 + image.r1 + image.r5 + image.r10) / 6.0;
}

namespace {

Tensor<double> dot_rows(const Tensor<double>& a, const std::vector<std::size_t>& ai, const Tensor<double>& b,
                        const std::vector<std::size_t>& bi) {
    const std::size_t d = a.cols();
    Tensor<double> out(Shape{ai.size(), bi.size()});
    for (std::size_t i = 0; i < ai.size(); ++i) {
        const double* x = &a[ai[i] * d];
        for (std::size_t j = 0; j < bi.size(); ++j) {
            const double* y = &b[bi[j] * d];
            double s = 0;
            for (std::size_t t = 0; t < d; ++t) s += x[t] * y[t];
            out(i, j) = s;
        }
    }
    return out;
}

}  // namespace

ProtocolResult evaluate_protocol(const EmbeddingSet& set, std::size_t fold_size) {
    const std::size_t n_images = set.images.rows();
    if (set.caption_image.size() != set.captions.rows()) throw ContractError("evaluate_protocol: caption map size mismatch");
    if (set.images.cols() != set.captions.cols()) throw ShapeError("evaluate_protocol: image and caption dims differ");
    if (fold_size == 0) fold_size = n_images;
    if (fold_size > n_images) {
        throw ConfigError("fold size " + std::to_string(fold_size) + " exceeds test size " + std::to_string(n_images));
    }
    if (n_images % fold_size != 0) {
        throw ConfigError("test size " + std::to_string(n_images) + " is not divisible into folds of " + std::to_string(fold_size));
    }
    const std::size_t folds = n_images / fold_size;
    ProtocolResult res;
    res.sentence.direction = Direction::sentence_retrieval;
    res.image.direction = Direction::image_retrieval;
    res.sentence.folds = res.image.folds = folds;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> imgs(fold_size);
        for (std::size_t i = 0; i < fold_size; ++i) imgs[i] = f * fold_size + i;
        std::vector<std::size_t> caps;
        GroundTruth sent_truth(fold_size), img_truth;
        for (std::size_t c = 0; c < set.caption_image.size(); ++c) {
            const std::size_t owner = set.caption_image[c];
            if (owner >= n_images) throw ContractError("evaluate_protocol: caption " + std::to_string(c) + " refers to missing image");
            if (owner / fold_size != f) continue;
            sent_truth[owner - f * fold_size].push_back(caps.size());
            img_truth.push_back({owner - f * fold_size});
            caps.push_back(c);
        }
        if (caps.empty()) throw ContractError("evaluate_protocol: fold " + std::to_string(f) + " has no captions");
        const auto s = dot_rows(set.images, imgs, set.captions, caps);
        Tensor<double> st(Shape{caps.size(), fold_size});
        for (std::size_t i = 0; i < fold_size; ++i)
            for (std::size_t j = 0; j < caps.size(); ++j) st(j, i) = s(i, j);
        auto add = [](RetrievalReport& r, const Tensor<double>& m, const GroundTruth& t) {
            const std::size_t b = m.cols();
            r.r1 += recall_at_k(m, t, std::min<std::size_t>(1, b));
            r.r5 += recall_at_k(m, t, std::min<std::size_t>(5, b));
            r.r10 += recall_at_k(m, t, std::min<std::size_t>(10, b));
            r.queries = m.rows();
            r.candidates = b;
        };
        add(res.sentence, s, sent_truth);
        add(res.image, st, img_truth);
    }
    for (auto* r : {&res.sentence, &res.image}) {
        r->r1 /= double(folds);
        r->r5 /= double(folds);
        r->r10 /= double(folds);
    }
    return res;
}

std::string format_report_table(const ProtocolResult& r) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-20s %7s %7s %7s %6s %8s %10s\n", "direction", "R@1", "R@5", "R@10", "folds",
                  "queries", "candidates");
    os << buf;
    for (const auto* rep : {&r.sentence, &r.image}) {
        std::snprintf(buf, sizeof buf, "%-20s %7.2f %7.2f %7.2f %6zu %8zu %10zu\n", direction_name(rep->direction).c_str(),
                      rep->r1, rep->r5, rep->r10, rep->folds, rep->queries, rep->candidates);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "mean of six R@K (summary, not a standard metric): %.2f\n", r.mean_recall());
    os << buf;
    return os.str();
}

std::string format_report_csv(const ProtocolResult& r, const std::string& label) {
    std::ostringstream os;
    char buf[200];
    for (const auto* rep : {&r.sentence, &r.image}) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.4f,%.4f,%zu,%zu,%zu\n", label.c_str(),
                      direction_name(rep->direction).c_str(), rep->r1, rep->r5, rep->r10, rep->folds, rep->queries,
                      rep->candidates);
        os << buf;
    }
    return os.str();
}

}  // namespace vse
