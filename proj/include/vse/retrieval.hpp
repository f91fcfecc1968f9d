#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vse/tensor.hpp"

namespace vse {

using GroundTruth = std::vector<std::vector<std::size_t>>;

// Percentage of query rows with at least one ground-truth candidate in the top k.
// Candidates rank by descending similarity, equal scores by ascending index.
double recall_at_k(const Tensor<double>& similarity, const GroundTruth& truth, std::size_t k);

enum class Direction { sentence_retrieval, image_retrieval };

std::string direction_name(Direction d);

struct RetrievalReport {
    Direction direction = Direction::sentence_retrieval;
    double r1 = 0, r5 = 0, r10 = 0;
    std::size_t folds = 0;
    std::size_t queries = 0;     // per fold
    std::size_t candidates = 0;  // per fold
};

struct ProtocolResult {
    RetrievalReport sentence;  // image query -> its captions
    RetrievalReport image;     // caption query -> its image
    // Mean of the six R@K values; a convenience summary.
    double mean_recall() const;
};

// Unit-norm joint vectors: images I x d', captions C x d', caption_image[c] = owning image.
struct EmbeddingSet {
    Tensor<double> images;
    Tensor<double> captions;
    std::vector<std::size_t> caption_image;
};

// fold_size == 0 evaluates the full set once. Otherwise images are split into disjoint
// consecutive folds of fold_size (with their captions) and R@K is averaged over folds.
// K larger than the candidate count is clamped to it.
ProtocolResult evaluate_protocol(const EmbeddingSet& set, std::size_t fold_size);

std::string format_report_table(const ProtocolResult& r);
// "direction,r1,r5,r10,folds,queries,candidates" lines prefixed by `label`.
std::string format_report_csv(const ProtocolResult& r, const std::string& label);

}  // namespace vse
