// SPDX-License-Identifier: Apache-2.0
#include "fsd/grid.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include "fsd/error.hpp"
#include "fsd/metrics.hpp"
#include "json_codec.hpp"

namespace fsd {

std::string_view tool_version() noexcept { return FSD_VERSION; }

std::string_view to_string(Task t) noexcept {
  return t == Task::classification ? "classification" : "retrieval";
}

Task parse_task(std::string_view name) {
  if (name == "classification") return Task::classification;
  if (name == "retrieval") return Task::retrieval;
  throw DomainError("unknown task '" + std::string(name) + "'");
}

namespace detail {
namespace {

// Accepts a plain number or a "a/b" fraction string such as "8/255".
double read_intensity(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return std::stod(s);
      return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    } catch (const std::exception&) {
    }
  }
  throw DomainError(std::string("config field '") + key + "' must be a number or 'a/b' fraction");
}

}  // namespace

json attack_to_json(const AttackConfig& cfg) {
  json j;
  j["family"] = std::string(to_string(cfg.family));
  j["epsilon"] = cfg.epsilon;
  j["steps"] = cfg.steps;
  j["step_size"] = cfg.step_size ? json(*cfg.step_size) : json(nullptr);
  j["momentum"] = cfg.momentum;
  j["random_start"] = cfg.random_start;
  if (cfg.sia) {
    json t = json::array();
    for (auto x : cfg.sia->transforms) t.push_back(std::string(to_string(x)));
    j["sia"] = {{"copies", cfg.sia->copies}, {"blocks", cfg.sia->blocks}, {"transforms", t}};
  }
  return j;
}

AttackConfig attack_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("attack entry must be an object");
  AttackConfig cfg;
  cfg.family = parse_attack_family(get_or<std::string>(j, "family", "pgd"));
  cfg.epsilon = read_intensity(j, "epsilon", cfg.epsilon);
  cfg.steps = get_or<int>(j, "steps", cfg.steps);
  if (j.contains("step_size") && !j["step_size"].is_null()) cfg.step_size = read_intensity(j, "step_size", 0.0);
  cfg.momentum = get_or<double>(j, "momentum", cfg.momentum);
  cfg.random_start = get_or<bool>(j, "random_start", false);
  if (cfg.family == AttackFamily::sia) {
    SiaConfig sia;
    if (j.contains("sia")) {
      const auto& s = j["sia"];
      sia.copies = get_or<int>(s, "copies", sia.copies);
      sia.blocks = get_or<int>(s, "blocks", sia.blocks);
      if (s.contains("transforms")) {
        sia.transforms.clear();
        for (const auto& t : s["transforms"]) sia.transforms.push_back(parse_block_transform(t.get<std::string>()));
      }
    }
    cfg.sia = sia;
  } else if (j.contains("sia")) {
    throw DomainError("'sia' parameters are only valid for family 'sia'");
  }
  cfg.validate();
  return cfg;
}

json ste_to_json(const SteConfig& cfg) {
  json j;
  j["enabled"] = cfg.enabled;
  if (cfg.enabled) {
    j["k_attack"] = cfg.k_attack;
    j["p_q"] = cfg.p_q;
    j["mode"] = std::string(to_string(cfg.mode));
  }
  return j;
}

SteConfig ste_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("ste entry must be an object");
  SteConfig cfg;
  cfg.enabled = get_or<bool>(j, "enabled", j.contains("k_attack") || j.contains("p_q"));
  cfg.k_attack = get_or<int>(j, "k_attack", cfg.k_attack);
  cfg.p_q = get_or<double>(j, "p_q", cfg.p_q);
  cfg.mode = parse_ste_mode(get_or<std::string>(j, "mode", "fs_dither"));
  cfg.validate();
  return cfg;
}

}  // namespace detail

namespace {

using detail::get_or;
using detail::json;

std::string default_ste_id(const SteConfig& s) {
  if (!s.enabled) return "O";
  std::string id = "k" + std::to_string(s.k_attack) + "_p" + format_sig6(s.p_q);
  if (s.mode == SteMode::uniform_quantize) id += "_uq";
  return id;
}

template <typename T>
void require_unique_ids(const std::vector<T>& items, const char* what) {
  std::set<std::string> seen;
  for (const auto& it : items) {
    if (it.id.empty()) throw DomainError(std::string(what) + " entries need a non-empty id");
    if (!seen.insert(it.id).second) throw DomainError(std::string("duplicate ") + what + " id '" + it.id + "'");
  }
}

}  // namespace

void ExperimentGrid::validate() const {
  if (defenses.empty()) throw DomainError("grid needs at least one defense");
  if (attacks.empty()) throw DomainError("grid needs at least one attack");
  if (ste.empty()) throw DomainError("grid needs at least one ste entry");
  if (tasks.empty()) throw DomainError("grid needs at least one task");
  require_unique_ids(defenses, "defense");
  require_unique_ids(attacks, "attack");
  require_unique_ids(ste, "ste");
  for (const auto& a : attacks) a.config.validate();
  for (const auto& s : ste) s.config.validate();
  DatasetParams{data.size, data.train, data.appearance, data.seed, data.block_split}.validate();
  if (data.eval < 1) throw DomainError("grid data.eval must be >= 1");
  for (Task t : tasks) {
    if (t == Task::retrieval && data.queries < 1) throw DomainError("retrieval needs data.queries >= 1");
  }
  for (const auto& a : attacks) {
    if (a.config.sia && data.size % a.config.sia->blocks != 0) {
      throw DomainError("attack '" + a.id + "': image size is not divisible by the SIA block split");
    }
  }
  if (!model.checkpoint && data.train < 1) throw DomainError("training requires data.train >= 1");
  if (workers < 1) throw DomainError("workers must be >= 1");
}

ExperimentGrid parse_grid(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("grid config JSON: ") + e.what());
  }
  if (!j.is_object()) throw DomainError("grid config must be a JSON object");

  ExperimentGrid g;
  g.base_seed = get_or<std::uint64_t>(j, "seed", 0);
  g.workers = get_or<int>(j, "workers", 1);

  if (j.contains("data")) {
    const auto& d = j["data"];
    g.data.size = get_or<int>(d, "size", g.data.size);
    g.data.train = get_or<int>(d, "train", g.data.train);
    g.data.eval = get_or<int>(d, "eval", g.data.eval);
    g.data.queries = get_or<int>(d, "queries", g.data.queries);
    auto& a = g.data.appearance;
    a.noise = get_or<double>(d, "noise", a.noise);
    a.palette_levels = get_or<int>(d, "palette_levels", a.palette_levels);
    if (d.contains("contrast")) {
      const auto& c = d["contrast"];
      if (!c.is_array() || c.size() != 2) throw DomainError("data.contrast must be [min, max]");
      a.min_contrast = c[0].get<double>();
      a.max_contrast = c[1].get<double>();
    }
    a.texture = get_or<double>(d, "texture", a.texture);
    a.impulse = get_or<double>(d, "impulse", a.impulse);
    g.data.seed = get_or<std::uint64_t>(d, "seed", g.data.seed);
    g.data.block_split = get_or<int>(d, "block_split", g.data.block_split);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    if (m.contains("checkpoint")) g.model.checkpoint = m["checkpoint"].get<std::string>();
    g.model.hidden = get_or<int>(m, "hidden", g.model.hidden);
    g.model.init_seed = get_or<std::uint64_t>(m, "init_seed", g.model.init_seed);
    if (m.contains("train")) {
      const auto& t = m["train"];
      g.model.train.epochs = get_or<int>(t, "epochs", g.model.train.epochs);
      g.model.train.learning_rate = get_or<double>(t, "lr", g.model.train.learning_rate);
      g.model.train.momentum = get_or<double>(t, "momentum", g.model.train.momentum);
      g.model.train.weight_decay = get_or<double>(t, "weight_decay", g.model.train.weight_decay);
      g.model.train.batch_size = get_or<int>(t, "batch", g.model.train.batch_size);
      g.model.train.seed = get_or<std::uint64_t>(t, "seed", g.model.train.seed);
    }
  }

  if (!j.contains("defenses") || !j["defenses"].is_array()) throw DomainError("grid config needs a 'defenses' array");
  for (const auto& d : j["defenses"]) {
    NamedDefense nd;
    nd.id = get_or<std::string>(d, "id", "");
    try {
      nd.pipeline = detail::pipeline_from_json_value(d.contains("pipeline") ? d["pipeline"] : json::array());
    } catch (const DomainError& e) {
      throw DomainError("defense '" + nd.id + "': " + e.what());
    }
    g.defenses.push_back(std::move(nd));
  }

  if (!j.contains("attacks") || !j["attacks"].is_array()) throw DomainError("grid config needs an 'attacks' array");
  for (const auto& a : j["attacks"]) {
    NamedAttack na;
    na.id = get_or<std::string>(a, "id", "");
    try {
      na.config = detail::attack_from_json(a);
    } catch (const DomainError& e) {
      throw DomainError("attack '" + na.id + "': " + e.what());
    }
    const auto loss = get_or<std::string>(a, "loss", "cross_entropy");
    if (loss == "cross_entropy") {
      na.loss = ClassificationLoss::cross_entropy;
    } else if (loss == "margin") {
      na.loss = ClassificationLoss::margin;
    } else {
      throw DomainError("attack '" + na.id + "': unknown loss '" + loss + "'");
    }
    g.attacks.push_back(std::move(na));
  }

  if (j.contains("ste")) {
    for (const auto& s : j["ste"]) {
      NamedSte ns;
      ns.config = detail::ste_from_json(s);
      ns.id = get_or<std::string>(s, "id", default_ste_id(ns.config));
      g.ste.push_back(std::move(ns));
    }
  } else {
    g.ste.push_back({"O", SteConfig{}});
  }

  if (j.contains("tasks")) {
    for (const auto& t : j["tasks"]) g.tasks.push_back(parse_task(t.get<std::string>()));
  } else {
    g.tasks.push_back(Task::classification);
  }

  g.validate();
  return g;
}

std::string canonical_grid_json(const ExperimentGrid& g) {
  json j;
  j["seed"] = g.base_seed;
  const auto& a = g.data.appearance;
  j["data"] = {{"size", g.data.size},
               {"train", g.data.train},
               {"eval", g.data.eval},
               {"queries", g.data.queries},
               {"noise", a.noise},
               {"palette_levels", a.palette_levels},
               {"contrast", {a.min_contrast, a.max_contrast}},
               {"texture", a.texture},
               {"impulse", a.impulse},
               {"seed", g.data.seed},
               {"block_split", g.data.block_split}};
  json model;
  if (g.model.checkpoint) model["checkpoint"] = *g.model.checkpoint;
  model["hidden"] = g.model.hidden;
  model["init_seed"] = g.model.init_seed;
  model["train"] = {{"epochs", g.model.train.epochs},
                    {"lr", g.model.train.learning_rate},
                    {"momentum", g.model.train.momentum},
                    {"weight_decay", g.model.train.weight_decay},
                    {"batch", g.model.train.batch_size},
                    {"seed", g.model.train.seed}};
  j["model"] = std::move(model);
  json defs = json::array();
  for (const auto& d : g.defenses) defs.push_back({{"id", d.id}, {"pipeline", detail::pipeline_to_json_value(d.pipeline)}});
  j["defenses"] = std::move(defs);
  json atts = json::array();
  for (const auto& a : g.attacks) {
    json o = detail::attack_to_json(a.config);
    o["id"] = a.id;
    o["loss"] = a.loss == ClassificationLoss::margin ? "margin" : "cross_entropy";
    atts.push_back(std::move(o));
  }
  j["attacks"] = std::move(atts);
  json stes = json::array();
  for (const auto& s : g.ste) {
    json o = detail::ste_to_json(s.config);
    o["id"] = s.id;
    stes.push_back(std::move(o));
  }
  j["ste"] = std::move(stes);
  json tasks = json::array();
  for (Task t : g.tasks) tasks.push_back(std::string(to_string(t)));
  j["tasks"] = std::move(tasks);
  return j.dump();
}

std::string grid_hash(const ExperimentGrid& grid) {
  const auto text = canonical_grid_json(grid);
  return fnv1a_hex({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<NamedSte> informed_ste_grid(const std::vector<int>& k_values,
                                        const std::vector<double>& pq_values,
                                        bool include_oblivious, SteMode mode) {
  std::vector<NamedSte> out;
  if (include_oblivious) out.push_back({"O", SteConfig{}});
  for (int k : k_values) {
    for (double p : pq_values) {
      SteConfig s{true, k, p, mode};
      s.validate();
      out.push_back({default_ste_id(s), s});
    }
  }
  return out;
}

std::uint64_t image_seed(std::uint64_t base_seed, Task task, std::size_t index) noexcept {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(task) + 1, static_cast<std::uint64_t>(index)});
}

Experiment prepare_experiment(const ExperimentGrid& grid) {
  grid.validate();
  DataSplits data = generate_splits(grid.data);
  const InputShape shape{grid.data.size, grid.data.size, 3};
  if (grid.model.checkpoint) {
    TinyModel model = load_model(*grid.model.checkpoint);
    if (!(model.shape() == shape) || model.classes() != kSyntheticClasses) {
      throw DomainError("checkpoint '" + *grid.model.checkpoint + "' does not match the grid's data shape");
    }
    return {std::move(model), std::move(data)};
  }
  const TinyModel init = TinyModel::random(shape, grid.model.hidden, kSyntheticClasses, grid.model.init_seed);
  TinyModel model = train(init, data.train.images, data.train.labels, grid.model.train);
  return {std::move(model), std::move(data)};
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run_one = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_one(i);
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TaskData {
  Task task;
  std::span<const Image> clean;        // attacked images
  std::span<const int> labels;         // classification labels
  std::vector<std::vector<double>> reference;  // clean embeddings (retrieval)
  Relevance relevance;                 // retrieval
};

struct Crafted {
  std::vector<Image> images;
  double psnr_mean = 0.0;
  double seconds = 0.0;
  std::string error;
};

Crafted craft(const ExperimentGrid& grid, const TinyModel& model, const TaskData& td,
              const NamedAttack& attack, const NamedSte& ste, int workers) {
  const auto start = Clock::now();
  const std::size_t n = td.clean.size();
  Crafted out;
  out.images.resize(n);
  std::vector<double> psnrs(n);
  std::vector<std::string> errors(n);

  parallel_for(n, workers, [&](std::size_t i) {
    try {
      AttackConfig cfg = attack.config;
      cfg.seed = image_seed(grid.base_seed, td.task, i);
      LossKind loss;
      if (td.task == Task::classification) {
        if (attack.loss == ClassificationLoss::margin) {
          loss = loss::Margin{td.labels[i]};
        } else {
          loss = loss::CrossEntropy{td.labels[i]};
        }
      } else {
        // Every point starts where the cosine loss is stationary; a random
        // start inside the ball is needed to get a usable gradient.
        cfg.random_start = true;
        loss = loss::NegCosine{td.reference[i]};
      }
      auto r = run_attack(model, td.clean[i], loss, cfg, ste.config);
      psnrs[i] = r.psnr_db;
      out.images[i] = std::move(r.adversarial);
    } catch (const std::exception& e) {
      errors[i] = "image " + std::to_string(i) + ": " + e.what();
    }
  });

  for (const auto& e : errors) {
    if (!e.empty()) {
      out.error = e;
      break;
    }
  }
  double sum = 0.0;
  for (double p : psnrs) sum += p;
  out.psnr_mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
  out.seconds = seconds_since(start);
  return out;
}

}  // namespace

EvalReport run_grid(const ExperimentGrid& grid, const Experiment& experiment,
                    const RunOptions& options) {
  grid.validate();
  const TinyModel& model = experiment.model;
  const DataSplits& data = experiment.data;
  auto log = [&](const std::string& msg) {
    if (options.progress) options.progress(msg);
  };

  EvalReport report;
  report.provenance.config_hash = grid_hash(grid);
  report.provenance.model_hash = model_hash(model);
  report.provenance.seed = grid.base_seed;
  report.provenance.tool_version = std::string(tool_version());
  report.provenance.notes = {
      "oblivious attacks are crafted against the undefended model; defenses are applied at evaluation",
      "retrieval: gallery = eval split, queries = held-out split, relevance = same class; only queries are attacked",
      "retrieval attacks use a uniform random start inside the epsilon-ball",
      "queries without relevant items would score AP = 0",
  };

  std::vector<TaskData> tasks;
  for (Task t : grid.tasks) {
    TaskData td{t, {}, {}, {}, {}};
    if (t == Task::classification) {
      td.clean = data.eval.images;
      td.labels = data.eval.labels;
    } else {
      td.clean = data.queries.images;
      td.labels = data.queries.labels;
      td.relevance = same_class_relevance(data.queries.labels, data.eval.labels);
      for (const auto& q : data.queries.images) td.reference.push_back(forward(model, q).embedding);
    }
    tasks.push_back(std::move(td));
  }

  struct Cell {
    bool ok = false;
    double value = 0.0;
    double psnr = 0.0;
    double seconds = 0.0;
    std::int64_t n = 0;
    std::string error;
  };
  const std::size_t nd = grid.defenses.size();
  const std::size_t na = grid.attacks.size();
  const std::size_t ns = grid.ste.size();
  const std::size_t nt = tasks.size();
  std::vector<Cell> cells(nd * na * ns * nt);
  auto cell_at = [&](std::size_t d, std::size_t a, std::size_t s, std::size_t t) -> Cell& {
    return cells[((d * na + a) * ns + s) * nt + t];
  };

  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t t = 0; t < nt; ++t) {
        const auto& td = tasks[t];
        const Crafted crafted = craft(grid, model, td, grid.attacks[a], grid.ste[s], options.workers);
        log("crafted attack=" + grid.attacks[a].id + " ste=" + grid.ste[s].id + " task=" +
            std::string(to_string(td.task)) + " in " + format_sig6(crafted.seconds) + "s");
        for (std::size_t d = 0; d < nd; ++d) {
          Cell& cell = cell_at(d, a, s, t);
          if (!crafted.error.empty()) {
            cell.error = crafted.error;
            continue;
          }
          const auto start = Clock::now();
          try {
            const auto& defense = grid.defenses[d].pipeline;
            if (td.task == Task::classification) {
              cell.value = evaluate_accuracy(model, td.clean, td.labels, defense,
                                             std::span<const Image>(crafted.images));
            } else {
              cell.value = evaluate_retrieval_map(model, crafted.images, data.eval.images,
                                                  td.relevance, defense, true);
            }
            cell.ok = true;
            cell.n = static_cast<std::int64_t>(td.clean.size());
            cell.psnr = crafted.psnr_mean;
          } catch (const std::exception& e) {
            cell.error = e.what();
          }
          cell.seconds = crafted.seconds + seconds_since(start);
        }
      }
    }
  }

  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t t = 0; t < nt; ++t) {
          const Cell& cell = cell_at(d, a, s, t);
          const auto& ste = grid.ste[s];
          const std::string task(to_string(tasks[t].task));
          if (!cell.ok) {
            report.failures.push_back({grid.defenses[d].id, grid.attacks[a].id, ste.id, task, cell.error});
            continue;
          }
          ReportRow row;
          row.defense = grid.defenses[d].id;
          row.attack = grid.attacks[a].id;
          row.ste = ste.id;
          if (ste.config.enabled) {
            row.ste_k = ste.config.k_attack;
            row.ste_pq = round_sig6(ste.config.p_q);
          }
          row.task = task;
          row.metric = tasks[t].task == Task::classification ? "accuracy" : "map";
          row.value = round_sig6(cell.value);
          row.n = cell.n;
          row.psnr_mean = round_sig6(cell.psnr);
          row.seed = grid.base_seed;
          row.wall_time_s = round_sig6(cell.seconds);
          report.rows.push_back(std::move(row));
        }
      }
    }
  }
  summarize_worst_case(report);
  return report;
}

}  // namespace fsd
