// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "../support/oracles.hpp"
#include "fsd/error.hpp"
#include "fsd/grid.hpp"
#include "fsd/metrics.hpp"
#include "fsd/report.hpp"

namespace fsd {
namespace {

TEST(Metrics, AccuracyMatchesARecount) {
  const TinyModel m = TinyModel::random({8, 8, 3}, 16, 4, 2);
  std::vector<Image> images;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    images.push_back(oracle::random_image(8, 8, 3, 500 + i));
    labels.push_back(i % 4);
  }
  const TransformPipeline defense{{stage::FsDither{3}}};
  int correct = 0;
  for (int i = 0; i < 30; ++i) correct += predict(m, fs_dither(images[i], QuantSpec(3))) == labels[i];
  EXPECT_DOUBLE_EQ(evaluate_accuracy(m, images, labels, defense), correct / 30.0);

  std::vector<Image> flipped;
  for (const auto& img : images) flipped.push_back(hflip(img));
  int flipped_correct = 0;
  for (int i = 0; i < 30; ++i) flipped_correct += predict(m, flipped[i]) == labels[i];
  EXPECT_DOUBLE_EQ(evaluate_accuracy(m, images, labels, {}, std::span<const Image>(flipped)),
                   flipped_correct / 30.0);
}

TEST(Metrics, ChannelChangingDefenseIsRejected) {
  const TinyModel m = TinyModel::random({8, 8, 3}, 4, 4, 2);
  const std::vector<Image> images = {oracle::random_image(8, 8, 3, 1)};
  const std::vector<int> labels = {0};
  try {
    evaluate_accuracy(m, images, labels, TransformPipeline{{stage::Grayscale{}}});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("grayscale"), std::string::npos) << e.what();
  }
}

TEST(Metrics, AveragePrecisionExamples) {
  EXPECT_NEAR(average_precision({true, false, true}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(average_precision({true, true, false, false}), 1.0);
  EXPECT_EQ(average_precision({false, false}), 0.0);
  EXPECT_EQ(average_precision({}), 0.0);
}

TEST(Metrics, RankingIsStableForTies) {
  const std::vector<std::vector<double>> gallery = {{1, 0}, {2, 0}, {0, 1}, {1, 1}};
  const auto order = rank_by_cosine(std::vector<double>{1, 0}, gallery);
  EXPECT_EQ(order, (std::vector<std::size_t>{0, 1, 3, 2}));
  EXPECT_THROW(rank_by_cosine(std::vector<double>{0, 0}, gallery), DegenerateError);
}

TEST(Metrics, PerfectRetrievalHasUnitMap) {
  // Identity-like model: the embedding is the input, so each query is
  // closest to its own copy in the gallery.
  TinyModel m({1, 2, 1}, 2, 2);
  m.w1() = {1, 0, 0, 1};
  m.w2() = {1, 0, 0, 1};
  const std::vector<Image> gallery = {Image(1, 2, 1, std::vector<double>{1, 0}),
                                      Image(1, 2, 1, std::vector<double>{0, 1}),
                                      Image(1, 2, 1, std::vector<double>{0.9, 0.1})};
  const std::vector<int> gallery_labels = {0, 1, 0};
  const std::vector<Image> queries = {gallery[0], gallery[1]};
  const std::vector<int> query_labels = {0, 1};
  const auto rel = same_class_relevance(query_labels, gallery_labels);
  EXPECT_EQ(rel[0], (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(evaluate_retrieval_map(m, queries, gallery, rel, {}), 1.0);

  const Relevance with_empty = {{0, 2}, {}};
  EXPECT_THROW(evaluate_retrieval_map(m, queries, gallery, with_empty, {}), DomainError);
  EXPECT_EQ(evaluate_retrieval_map(m, queries, gallery, with_empty, {}, true), 0.5);
}

ReportRow row(std::string defense, std::string ste, std::optional<int> k, std::optional<double> pq,
              double value) {
  ReportRow r;
  r.defense = std::move(defense);
  r.attack = "pgd";
  r.ste = std::move(ste);
  r.ste_k = k;
  r.ste_pq = pq;
  r.task = "classification";
  r.metric = "accuracy";
  r.value = value;
  r.n = 200;
  r.psnr_mean = 40.1234567;
  r.seed = 9;
  return r;
}

TEST(Report, EmptyReportIsJustTheHeader) {
  EXPECT_EQ(report_to_csv(EvalReport{}), std::string(kCsvHeader) + "\n");
}

TEST(Report, TwoCellCsv) {
  EvalReport r;
  r.rows = {row("fs3", "O", std::nullopt, std::nullopt, 0.875), row("fs3", "k3_p0.5", 3, 0.5, 0.5)};
  r.rows[1].psnr_mean = INFINITY;
  EXPECT_EQ(report_to_csv(r), std::string(kCsvHeader) +
                                  "\n"
                                  "fs3,pgd,none,none,classification,accuracy,0.875,200,40.1235,9\n"
                                  "fs3,pgd,3,0.5,classification,accuracy,0.5,200,inf,9\n");
}

TEST(Report, WorstCaseIncludesTheObliviousEntry) {
  EvalReport r;
  r.rows = {row("fs4", "O", std::nullopt, std::nullopt, 0.6), row("fs4", "k3_p0.5", 3, 0.5, 0.7),
            row("fs4", "k3_p1", 3, 1.0, 0.4), row("fs4b", "O", std::nullopt, std::nullopt, 0.8),
            row("fs4b", "k3_p0.5", 3, 0.5, 0.9)};
  summarize_worst_case(r);
  ASSERT_EQ(r.worst_case.size(), 2u);
  EXPECT_EQ(r.worst_case[0].worst_ste, "k3_p1");
  EXPECT_NEAR(*r.worst_case[0].degradation, 0.2, 1e-12);
  EXPECT_EQ(r.worst_case[1].worst_ste, "O");
  EXPECT_EQ(*r.worst_case[1].degradation, 0.0);
  for (const auto& w : r.worst_case) EXPECT_LE(w.informed_worst, *w.oblivious);
}

TEST(Report, JsonRoundTrip) {
  EvalReport r;
  r.rows = {row("none", "O", std::nullopt, std::nullopt, round_sig6(1.0 / 3.0)),
            row("none", "k6_p1", 6, 1.0, 0.25)};
  r.rows[0].psnr_mean = INFINITY;
  r.rows[1].psnr_mean = round_sig6(r.rows[1].psnr_mean);
  r.failures = {{"fs3", "sia", "O", "retrieval", "boom"}};
  r.provenance = {"abc", "def", 9, "0.3.0", {"note"}};
  summarize_worst_case(r);
  EXPECT_EQ(parse_report_json(report_to_json(r)), r);
  EXPECT_FALSE(r.complete());
  EXPECT_THROW(parse_report_json("{\"rows\": 3}"), DomainError);
}

TEST(Report, SignificantDigits) {
  EXPECT_EQ(format_sig6(0.123456789), "0.123457");
  EXPECT_EQ(round_sig6(123456789.0), 123457000.0);
  EXPECT_TRUE(std::isinf(round_sig6(INFINITY)));
}

ExperimentGrid small_grid() {
  ExperimentGrid g;
  g.data.size = 16;
  g.data.train = 40;
  g.data.eval = 12;
  g.data.queries = 4;
  g.data.seed = 3;
  g.model.hidden = 32;
  g.model.train.epochs = 2;
  g.model.train.learning_rate = 0.01;
  g.base_seed = 11;
  g.defenses = {{"none", {}}, {"fs3", {{stage::FsDither{3}}}}};
  AttackConfig pgd;
  pgd.epsilon = 8.0 / 255;
  pgd.steps = 3;
  AttackConfig sia = pgd;
  sia.family = AttackFamily::sia;
  sia.sia = SiaConfig{};
  sia.sia->copies = 2;
  g.attacks = {{"pgd", pgd, ClassificationLoss::cross_entropy}, {"sia", sia, ClassificationLoss::cross_entropy}};
  g.ste = informed_ste_grid({3}, {0.0, 1.0}, true);
  g.tasks = {Task::classification, Task::retrieval};
  return g;
}

TEST(Grid, InformedSteGridIds) {
  const auto s = informed_ste_grid({3, 6}, {0.5, 1.0}, true);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s[0].id, "O");
  EXPECT_FALSE(s[0].config.enabled);
  EXPECT_EQ(s[1].id, "k3_p0.5");
  EXPECT_EQ(s[4].id, "k6_p1");
  EXPECT_EQ(s[4].config.k_attack, 6);
}

TEST(Grid, CellsAreCompleteAndZeroProbabilityIsOblivious) {
  const ExperimentGrid g = small_grid();
  const Experiment ex = prepare_experiment(g);
  const EvalReport r = run_grid(g, ex, {});
  EXPECT_TRUE(r.complete());
  EXPECT_EQ(r.rows.size(), 2u * 2u * 3u * 2u);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    if (row.ste == "k3_p0") {
      const auto match = std::find_if(r.rows.begin(), r.rows.end(), [&](const ReportRow& o) {
        return o.ste == "O" && o.defense == row.defense && o.attack == row.attack && o.task == row.task;
      });
      ASSERT_NE(match, r.rows.end());
      EXPECT_EQ(match->value, row.value);
      EXPECT_EQ(match->psnr_mean, row.psnr_mean);
    }
    EXPECT_GE(row.value, 0.0);
    EXPECT_LE(row.value, 1.0);
  }
  for (const auto& w : r.worst_case) EXPECT_LE(w.informed_worst, *w.oblivious);
}

TEST(Grid, ZeroStepAttackGivesCleanAccuracy) {
  ExperimentGrid g = small_grid();
  g.attacks.resize(1);
  g.attacks[0].config.steps = 0;
  g.ste = {{"O", SteConfig{}}};
  g.tasks = {Task::classification};
  const Experiment ex = prepare_experiment(g);
  const EvalReport r = run_grid(g, ex, {});
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].value, round_sig6(evaluate_accuracy(ex.model, ex.data.eval.images, ex.data.eval.labels, {})));
  EXPECT_EQ(r.rows[1].value, round_sig6(evaluate_accuracy(ex.model, ex.data.eval.images, ex.data.eval.labels,
                                                          g.defenses[1].pipeline)));
  EXPECT_TRUE(std::isinf(r.rows[0].psnr_mean));
}

TEST(Grid, WorkerCountDoesNotChangeResults) {
  const ExperimentGrid g = small_grid();
  const Experiment ex = prepare_experiment(g);
  EXPECT_EQ(report_to_csv(run_grid(g, ex, {1, {}})), report_to_csv(run_grid(g, ex, {4, {}})));
}

TEST(Grid, FailingCellsAreRecorded) {
  ExperimentGrid g = small_grid();
  g.defenses.push_back({"gray", {{stage::Grayscale{}}}});
  g.ste = {{"O", SteConfig{}}};
  g.tasks = {Task::classification};
  const EvalReport r = run_grid(g, prepare_experiment(g), {});
  EXPECT_FALSE(r.complete());
  EXPECT_EQ(r.failures.size(), 2u);
  EXPECT_EQ(r.rows.size(), 4u);
  EXPECT_NE(r.failures[0].message.find("grayscale"), std::string::npos);
}

TEST(Grid, ParsesConfigAndHashesIt) {
  const std::string text = R"({
    "seed": 5, "workers": 3,
    "data": {"size": 16, "train": 8, "eval": 4, "queries": 2, "seed": 1},
    "model": {"hidden": 8, "train": {"epochs": 1, "lr": 0.01}},
    "defenses": [{"id": "fs3", "pipeline": [{"op": "fs_dither", "params": {"k": 3}}]}],
    "attacks": [{"id": "a", "family": "mi-fgsm", "epsilon": "8/255", "steps": 4}],
    "ste": [{"id": "O", "enabled": false}, {"k_attack": 6, "p_q": 0.5}],
    "tasks": ["classification"]
  })";
  const ExperimentGrid g = parse_grid(text);
  EXPECT_EQ(g.base_seed, 5u);
  EXPECT_EQ(g.workers, 3);
  EXPECT_DOUBLE_EQ(g.attacks[0].config.epsilon, 8.0 / 255.0);
  EXPECT_EQ(g.attacks[0].config.family, AttackFamily::mifgsm);
  EXPECT_EQ(g.ste[1].id, "k6_p0.5");
  ExperimentGrid other = g;
  other.workers = 1;
  EXPECT_EQ(grid_hash(other), grid_hash(g));
  other.base_seed = 6;
  EXPECT_NE(grid_hash(other), grid_hash(g));
  EXPECT_EQ(parse_grid(canonical_grid_json(g)).defenses[0].pipeline, g.defenses[0].pipeline);

  EXPECT_THROW(parse_grid("{"), DomainError);
  EXPECT_THROW(parse_grid(R"({"defenses": [], "attacks": []})"), DomainError);
  EXPECT_THROW(parse_grid(R"({"defenses": [{"id": "x"}], "attacks": [{"id": "a", "family": "cw"}]})"),
               DomainError);
}

TEST(Grid, ImageSeedsDependOnTaskAndIndex) {
  EXPECT_EQ(image_seed(1, Task::classification, 4), image_seed(1, Task::classification, 4));
  EXPECT_NE(image_seed(1, Task::classification, 4), image_seed(1, Task::retrieval, 4));
  EXPECT_NE(image_seed(1, Task::classification, 4), image_seed(1, Task::classification, 5));
}

TEST(Grid, ParallelForRethrowsTheFirstFailure) {
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] = 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 50);
  try {
    parallel_for(20, 3, [](std::size_t i) {
      if (i == 7 || i == 13) throw DomainError("fail " + std::to_string(i));
    });
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_STREQ(e.what(), "fail 7");
  }
}

}  // namespace
}  // namespace fsd
