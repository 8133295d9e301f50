// SPDX-License-Identifier: Apache-2.0
#include "fsd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fsd/error.hpp"

namespace fsd {

void check_defense_channels(const TinyModel& model, const TransformPipeline& defense,
                            int input_channels) {
  if (defense.output_channels(input_channels) == model.shape().channels) return;
  std::string where = "input";
  if (const auto idx = defense.first_channel_change(input_channels)) {
    where = "stage " + std::to_string(*idx) + " (" + stage_name(defense.stages[*idx]) + ")";
  }
  throw DomainError("defense " + where + " produces " +
                    std::to_string(defense.output_channels(input_channels)) +
                    "-channel images but the model expects " +
                    std::to_string(model.shape().channels));
}

double evaluate_accuracy(const TinyModel& model, std::span<const Image> images,
                         std::span<const int> labels, const TransformPipeline& defense,
                         std::optional<std::span<const Image>> adversarial) {
  if (images.size() != labels.size()) throw DomainError("evaluate_accuracy: label count mismatch");
  if (images.empty()) throw DomainError("evaluate_accuracy: empty dataset");
  if (adversarial && adversarial->size() != images.size()) {
    throw DomainError("evaluate_accuracy: adversarial set size mismatch");
  }
  const auto inputs = adversarial ? *adversarial : images;
  check_defense_channels(model, defense, inputs.front().channels());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (predict(model, apply_pipeline(inputs[i], defense)) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

double average_precision(const std::vector<bool>& ranked_relevance) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranked_relevance.size(); ++r) {
    if (ranked_relevance[r]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<std::size_t> rank_by_cosine(std::span<const double> query,
                                        const std::vector<std::vector<double>>& gallery) {
  const double nq = norm(query);
  if (nq == 0.0) throw DegenerateError("retrieval: query embedding has zero norm");
  std::vector<double> sim(gallery.size());
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    if (gallery[g].size() != query.size()) throw DomainError("retrieval: embedding size mismatch");
    const double ng = norm(gallery[g]);
    if (ng == 0.0) {
      throw DegenerateError("retrieval: gallery embedding " + std::to_string(g) + " has zero norm");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) d += query[i] * gallery[g][i];
    sim[g] = d / (nq * ng);
  }
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  return order;
}

Relevance same_class_relevance(std::span<const int> query_labels,
                               std::span<const int> gallery_labels) {
  Relevance rel(query_labels.size());
  for (std::size_t q = 0; q < query_labels.size(); ++q) {
    for (std::size_t g = 0; g < gallery_labels.size(); ++g) {
      if (gallery_labels[g] == query_labels[q]) rel[q].push_back(g);
    }
  }
  return rel;
}

std::vector<double> defended_embedding(const TinyModel& model, const Image& img,
                                       const TransformPipeline& defense) {
  auto e = forward(model, apply_pipeline(img, defense)).embedding;
  if (norm(e) == 0.0) throw DegenerateError("retrieval: embedding has zero norm");
  return e;
}

double evaluate_retrieval_map(const TinyModel& model, std::span<const Image> queries,
                              std::span<const Image> gallery, const Relevance& relevance,
                              const TransformPipeline& defense, bool allow_empty) {
  if (queries.empty()) throw DomainError("retrieval: no queries");
  if (relevance.size() != queries.size()) throw DomainError("retrieval: relevance size mismatch");
  check_defense_channels(model, defense, queries.front().channels());

  std::vector<std::vector<double>> gal;
  gal.reserve(gallery.size());
  for (const auto& g : gallery) gal.push_back(defended_embedding(model, g, defense));

  double total = 0.0;
  std::vector<bool> is_rel(gallery.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (relevance[q].empty() && !allow_empty) {
      throw DomainError("retrieval: query " + std::to_string(q) + " has no relevant gallery items");
    }
    std::fill(is_rel.begin(), is_rel.end(), false);
    for (std::size_t g : relevance[q]) {
      if (g >= gallery.size()) throw DomainError("retrieval: relevance index out of range");
      is_rel[g] = true;
    }
    const auto order = rank_by_cosine(defended_embedding(model, queries[q], defense), gal);
    std::vector<bool> ranked(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) ranked[r] = is_rel[order[r]];
    total += average_precision(ranked);
  }
  return total / static_cast<double>(queries.size());
}

}  // namespace fsd
