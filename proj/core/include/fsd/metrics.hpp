// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fsd/image.hpp"
#include "fsd/pipeline.hpp"
#include "fsd/tiny_model.hpp"

namespace fsd {

/// Rejects a defense whose output channel count differs from the model's,
/// naming the stage responsible.
void check_defense_channels(const TinyModel& model, const TransformPipeline& defense,
                            int input_channels);

/// Fraction of images whose argmax class equals the label after the defense.
/// When `adversarial` is given it replaces `images` as the model input.
double evaluate_accuracy(const TinyModel& model, std::span<const Image> images,
                         std::span<const int> labels, const TransformPipeline& defense,
                         std::optional<std::span<const Image>> adversarial = std::nullopt);

/// Average precision of one ranked list of relevance flags (rank order).
/// A list with no relevant items has AP 0.
double average_precision(const std::vector<bool>& ranked_relevance);

/// Gallery indices sorted by descending cosine similarity to `query`; equal
/// similarities keep gallery order.
std::vector<std::size_t> rank_by_cosine(std::span<const double> query,
                                        const std::vector<std::vector<double>>& gallery);

/// relevant[q] lists the gallery indices relevant to query q.
using Relevance = std::vector<std::vector<std::size_t>>;

Relevance same_class_relevance(std::span<const int> query_labels,
                               std::span<const int> gallery_labels);

/// Mean average precision of cosine-ranked retrieval over embeddings of the
/// defense-transformed queries and gallery. Queries without relevant items
/// raise DomainError unless `allow_empty`, in which case they score 0.
double evaluate_retrieval_map(const TinyModel& model, std::span<const Image> queries,
                              std::span<const Image> gallery, const Relevance& relevance,
                              const TransformPipeline& defense, bool allow_empty = false);

/// Embedding of the defended image; zero-norm embeddings raise DegenerateError.
std::vector<double> defended_embedding(const TinyModel& model, const Image& img,
                                       const TransformPipeline& defense);

}  // namespace fsd
