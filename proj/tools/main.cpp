#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "visaw/errors.hpp"
#include "visaw/pipeline.hpp"

namespace {

struct Flags {
  std::string config_path, out_dir, data_dir, task;
  std::uint64_t seed = 0;
  std::size_t m = 0;
  bool no_visual = false;
};

int run_stage(const std::string& stage, const visaw::RunConfig& cfg) {
  using namespace visaw;
  if (stage == "gen-data") {
    GenSummary s = cmd_gen_data(cfg);
    std::printf("wrote %zu texts, %zu images, %zu training pairs, %zu held-out pairs to %s\n",
                s.texts, s.images, s.pairs, s.heldout, cfg.data_dir.c_str());
  } else if (stage == "train-embed") {
    EmbedSummary s = cmd_train_embed(cfg);
    for (std::size_t e = 0; e < s.epoch_loss.size(); ++e) {
      std::printf("epoch %zu mean triplet loss %.6f\n", e, s.epoch_loss[e]);
    }
    std::printf("held-out recall@%zu: %.4f\n", cfg.m, s.heldout_recall);
  } else if (stage == "build-index") {
    std::size_t n = cmd_build_index(cfg);
    std::printf("indexed %zu images\n", n);
  } else if (stage == "retrieve") {
    std::size_t n = cmd_retrieve(cfg);
    std::printf("retrieved top %zu for %zu queries\n", cfg.m, n);
  } else if (stage == "train-task") {
    TaskSummary s = cmd_train_task(cfg);
    for (std::size_t e = 0; e < s.epoch_loss.size(); ++e) {
      std::printf("epoch %zu mean %s loss %.6f\n", e, cfg.task.c_str(), s.epoch_loss[e]);
    }
  } else if (stage == "evaluate") {
    EvalSummary s = cmd_evaluate(cfg);
    for (const auto& [key, value] : s.metrics.items()) {
      std::printf("%s: %.6f\n", key.c_str(), value.get<double>());
    }
  } else if (stage == "gradcheck") {
    GradcheckSummary s = cmd_gradcheck(cfg);
    for (const GradCheckReport& r : s.reports) {
      std::printf("%-24s max rel err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                  r.pass ? "ok" : "FAIL");
    }
    std::printf("overall max rel err %.3e over %zu checks\n", s.max_rel_err, s.reports.size());
    return s.pass ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic-visual embedding, retrieval, fusion and task pipeline"};
  app.require_subcommand(1);

  Flags f;
  auto* opt_config = app.add_option("--config", f.config_path, "JSON configuration file");
  auto* opt_seed = app.add_option("--seed", f.seed, "random seed");
  auto* opt_m = app.add_option("--m", f.m, "images retrieved per sentence");
  app.add_flag("--no-visual", f.no_visual, "disable retrieval (same as --m 0)");
  auto* opt_out = app.add_option("--out", f.out_dir, "artifact directory");
  auto* opt_data = app.add_option("--data", f.data_dir, "corpus directory");
  auto* opt_task = app.add_option("--task", f.task, "downstream task: tag, nli or copy");

  const std::pair<const char*, const char*> stages[] = {
      {"gen-data", "generate the synthetic corpus"},
      {"train-embed", "train the joint text/image embedding"},
      {"build-index", "embed the paired images into a retrieval index"},
      {"retrieve", "dump top-m retrievals for every corpus text"},
      {"train-task", "train a downstream task model"},
      {"evaluate", "score a trained task model on its test split"},
      {"gradcheck", "finite-difference check of all differentiable ops"},
  };
  for (const auto& [name, help] : stages) {
    app.add_subcommand(name, help)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    visaw::RunConfig cfg;
    if (*opt_config) cfg = visaw::RunConfig::load(f.config_path);
    if (*opt_seed) cfg.seed = f.seed;
    if (*opt_m) cfg.m = f.m;
    if (f.no_visual) cfg.m = 0;
    if (*opt_out) cfg.out_dir = f.out_dir;
    if (*opt_data) cfg.data_dir = f.data_dir;
    if (*opt_task) cfg.task = f.task;

    return run_stage(app.get_subcommands().front()->get_name(), cfg);
  } catch (const visaw::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", visaw::error_kind_name(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
