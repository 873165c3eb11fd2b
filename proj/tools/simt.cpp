// simt: train, translate and simultaneously decode with a GRU attention model.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "simt/harness.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

simt::Criterion criterion_from(const std::string& name) {
  auto c = simt::parse_criterion(name);
  if (!c) throw simt::UsageError("unknown criterion '" + name + "' (expected worse, diff or entropy)");
  return *c;
}

simt::SimulConfig simul_config(std::size_t delta, std::size_t s0, const std::string& criterion, std::size_t max_len) {
  simt::SimulConfig cfg;
  cfg.delta = delta;
  cfg.s0 = s0;
  cfg.criterion = criterion_from(criterion);
  cfg.max_target_len = max_len;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous greedy decoding for attention-based GRU translation models"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, input, output, out_dir, criterion = "diff", mode = "greedy";
  std::string source_path, reference_path, sentence, hyp_path, ref_path;
  std::optional<std::uint64_t> seed;
  std::size_t delta = 1, s0 = 2, beam_width = 5, max_len = 0;
  bool with_entropy = false;

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "override the config seed");
  train->add_option("--out", out_dir, "output directory (overrides config)");

  auto* translate = app.add_subcommand("translate", "consecutive translation of a text file");
  translate->add_option("--checkpoint", checkpoint)->required();
  translate->add_option("--input", input, "one whitespace-tokenized sentence per line")->required();
  translate->add_option("--output", output, "output file (default stdout)");
  translate->add_option("--mode", mode)->check(CLI::IsMember({"greedy", "beam"}));
  translate->add_option("--beam-width", beam_width);
  translate->add_option("--max-len", max_len, "target length cap (0: 2|X|+10)");

  auto* simul = app.add_subcommand("simul", "streaming simultaneous decoding on stdin/stdout");
  simul->add_option("--checkpoint", checkpoint)->required();
  simul->add_option("--delta", delta);
  simul->add_option("--s0", s0);
  simul->add_option("--criterion", criterion);
  simul->add_option("--max-len", max_len);

  auto* sweep = app.add_subcommand("sweep", "quality/delay sweep over delta x s0 x criterion");
  sweep->add_option("--checkpoint", checkpoint)->required();
  sweep->add_option("--source", source_path, "test source sentences")->required();
  sweep->add_option("--reference", reference_path, "test reference sentences")->required();
  sweep->add_option("--config", config_path, "JSON config whose 'sweep' section defines the grid");
  sweep->add_option("--beam-width", beam_width);
  sweep->add_flag("--entropy", with_entropy, "also sweep the entropy criterion");
  sweep->add_option("--out", out_dir)->required();

  auto* trace = app.add_subcommand("trace", "render the chunk alignment of one sentence");
  trace->add_option("--checkpoint", checkpoint)->required();
  trace->add_option("--sentence", sentence)->required();
  trace->add_option("--delta", delta);
  trace->add_option("--s0", s0);
  trace->add_option("--criterion", criterion);
  trace->add_option("--max-len", max_len);
  trace->add_option("--out", out_dir, "directory for trace.txt and trace.svg");

  auto* bleu = app.add_subcommand("bleu", "corpus BLEU of two tokenized files");
  bleu->add_option("--hyp", hyp_path)->required();
  bleu->add_option("--ref", ref_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) {
      simt::RunConfig cfg = simt::load_run_config(config_path);
      if (seed) {
        cfg.seed = *seed;
        if (cfg.task) cfg.task->seed = *seed;
      }
      if (!out_dir.empty()) cfg.out = out_dir;
      const auto outcome = simt::cmd_train(cfg);
      for (const auto& r : outcome.result.log)
        std::cerr << "epoch " << r.epoch << " train_nll=" << simt::format_fixed(r.train_nll, 4)
                  << " valid_logprob=" << simt::format_fixed(r.valid_logprob, 4) << (r.best_so_far ? " *" : "")
                  << '\n';
      std::cout << outcome.checkpoint.string() << '\n';
    } else if (*translate) {
      const auto ck = simt::load_checkpoint(checkpoint);
      std::ifstream in(input);
      if (!in) throw simt::DataError("cannot read " + input);
      const auto m = mode == "beam" ? simt::TranslateMode::beam : simt::TranslateMode::greedy;
      if (output.empty()) {
        simt::cmd_translate(ck, in, std::cout, m, beam_width, max_len);
      } else {
        std::ofstream out(output, std::ios::binary | std::ios::trunc);
        if (!out) throw simt::DataError("cannot write " + output);
        simt::cmd_translate(ck, in, out, m, beam_width, max_len);
      }
    } else if (*simul) {
      const auto ck = simt::load_checkpoint(checkpoint);
      simt::cmd_simul(ck, std::cin, std::cout, simul_config(delta, s0, criterion, max_len));
    } else if (*sweep) {
      const auto ck = simt::load_checkpoint(checkpoint);
      simt::SweepGrid grid;
      if (!config_path.empty()) grid = simt::load_run_config(config_path).sweep;
      if (sweep->count("--beam-width")) grid.beam_width = beam_width;
      if (with_entropy && std::find(grid.criteria.begin(), grid.criteria.end(), simt::Criterion::entropy) ==
                              grid.criteria.end())
        grid.criteria.push_back(simt::Criterion::entropy);
      const auto corpus = simt::load_eval_corpus(ck, source_path, reference_path);
      const auto table = simt::cmd_sweep(ck, corpus, grid);
      fs::create_directories(out_dir);
      simt::write_text(fs::path(out_dir) / "sweep.csv", simt::sweep_csv(table));
      simt::write_text(fs::path(out_dir) / "frontier.svg", simt::frontier_svg(table));
      std::cout << simt::sweep_csv(table);
      for (const auto& [name, row] : table.best_q2d())
        std::cout << "#best_q2d criterion=" << name << " delta=" << row.delta << " s0=" << row.s0
                  << " bleu=" << simt::format_fixed(row.bleu, 2) << " tau=" << simt::format_fixed(row.mean_tau, 4)
                  << " q2d=" << simt::format_fixed(row.q2d, 2) << '\n';
    } else if (*trace) {
      const auto ck = simt::load_checkpoint(checkpoint);
      const auto r = simt::cmd_trace(ck, sentence, simul_config(delta, s0, criterion, max_len));
      std::cout << r.text;
      if (!out_dir.empty()) {
        simt::write_text(fs::path(out_dir) / "trace.txt", r.text);
        simt::write_text(fs::path(out_dir) / "trace.svg", r.svg);
      }
    } else if (*bleu) {
      const auto rep = simt::cmd_bleu(hyp_path, ref_path);
      std::cout << "BLEU = " << simt::format_fixed(rep.bleu, 2) << " (";
      for (std::size_t n = 0; n < rep.precisions.size(); ++n)
        std::cout << (n ? "/" : "") << simt::format_fixed(100.0 * rep.precisions[n], 1);
      std::cout << ", BP=" << simt::format_fixed(rep.brevity_penalty, 4) << ", hyp_len=" << rep.hyp_length
                << ", ref_len=" << rep.ref_length << ")\n";
    }
  } catch (const simt::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const simt::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
