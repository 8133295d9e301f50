// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fsd/attacks.hpp"
#include "fsd/dataset.hpp"
#include "fsd/pipeline.hpp"
#include "fsd/report.hpp"
#include "fsd/tiny_model.hpp"

namespace fsd {

enum class Task { classification, retrieval };
std::string_view to_string(Task t) noexcept;
Task parse_task(std::string_view name);

enum class ClassificationLoss { cross_entropy, margin };

struct NamedDefense {
  std::string id;
  TransformPipeline pipeline;
};

struct NamedAttack {
  std::string id;
  AttackConfig config;  // config.seed is replaced per image
  ClassificationLoss loss = ClassificationLoss::cross_entropy;
};

struct NamedSte {
  std::string id;
  SteConfig config;
};

struct ModelSpec {
  std::optional<std::string> checkpoint;  // used when present
  int hidden = 128;
  std::uint64_t init_seed = 1;
  TrainOptions train;
};

/// Rows x columns of a sweep: every defense is evaluated against every
/// (attack, ste) pair for every task.
///
/// JSON schema:
/// {
///   "seed": 20240917,
///   "workers": 1,
///   "data":  {"size": 32, "train": 400, "eval": 200, "queries": 32,
///             "noise": 0.0, "palette_levels": 3, "contrast": [0.1, 0.4],
///             "texture": 0.03, "impulse": 0.05, "seed": 7},
///   "model": {"checkpoint": "model.bin"} |
///            {"hidden": 128, "init_seed": 1,
///             "train": {"epochs": 40, "lr": 0.002, "momentum": 0.9,
///                       "weight_decay": 0.0, "batch": 16, "seed": 1}},
///   "defenses": [{"id": "fs3", "pipeline": [{"op": "fs_dither", "params": {"k": 3}}]}],
///   "attacks":  [{"id": "pgd", "family": "pgd", "epsilon": 0.0313725,
///                 "steps": 50, "step_size": null, "momentum": 1.0,
///                 "random_start": false, "loss": "cross_entropy",
///                 "sia": {"copies": 8, "blocks": 4, "transforms": ["identity", ...]}}],
///   "ste":      [{"id": "O", "enabled": false},
///                {"k_attack": 3, "p_q": 0.5, "mode": "fs_dither"}],
///   "tasks":    ["classification", "retrieval"]
/// }
/// Missing ste ids are derived as "k<k>_p<p>"; a missing "ste" list means a
/// single oblivious entry.
struct ExperimentGrid {
  std::vector<NamedDefense> defenses;
  std::vector<NamedAttack> attacks;
  std::vector<NamedSte> ste;
  std::vector<Task> tasks;
  SplitParams data;
  ModelSpec model;
  std::uint64_t base_seed = 0;
  int workers = 1;

  void validate() const;
};

ExperimentGrid parse_grid(std::string_view json_text);

/// Canonical JSON of everything that influences results (workers excluded).
std::string canonical_grid_json(const ExperimentGrid& grid);
std::string grid_hash(const ExperimentGrid& grid);

/// The (K_attack x p_q) grid of informed configurations, optionally preceded
/// by the oblivious entry "O".
std::vector<NamedSte> informed_ste_grid(const std::vector<int>& k_values,
                                        const std::vector<double>& pq_values,
                                        bool include_oblivious, SteMode mode = SteMode::fs_dither);

/// Per-image attack seed: depends only on the base seed, the task and the
/// image index.
std::uint64_t image_seed(std::uint64_t base_seed, Task task, std::size_t index) noexcept;

struct Experiment {
  TinyModel model;
  DataSplits data;
};

/// Generates the data splits and loads or trains the model.
Experiment prepare_experiment(const ExperimentGrid& grid);

struct RunOptions {
  int workers = 1;
  std::function<void(std::string_view)> progress;  // optional log sink
};

/// Runs every cell. Adversarial images are crafted once per
/// (attack, ste, task) against the undefended model (through the STE when
/// enabled) and then evaluated under each defense. Results do not depend on
/// the worker count. Failing cells are recorded and skipped.
EvalReport run_grid(const ExperimentGrid& grid, const Experiment& experiment,
                    const RunOptions& options);

/// Calls fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception (lowest index) is rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

std::string_view tool_version() noexcept;

}  // namespace fsd
