// Smallest end-to-end run: overfit a tiny copy corpus with MLE, then decode
// a couple of validation sources and print the metric report.

#include <cstdio>
#include <filesystem>

#include "pgen/pgen.hpp"

int main() {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "pgen_demo_overfit";
  fs::create_directories(dir);

  auto pairs = pgen::synth_corpus(pgen::SynthTask::kCopy, 20, 120, 6, 5);
  pgen::CorpusSplit split = pgen::split(pairs, 100, 10, 10, 5);
  pgen::write_pairs((dir / "train.tsv").string(), split.train);
  pgen::write_pairs((dir / "val.tsv").string(), split.val);
  pgen::write_pairs((dir / "test.tsv").string(), split.test);

  pgen::TrainConfig cfg;
  cfg.model.hidden_dim = 24;
  cfg.model.emb_dim = 12;
  cfg.model.max_len = 8;
  cfg.train_path = (dir / "train.tsv").string();
  cfg.val_path = (dir / "val.tsv").string();
  cfg.vocab_path = (dir / "vocab.tsv").string();
  cfg.checkpoint_path = (dir / "mle.ckpt").string();
  cfg.eval_every = 100;
  cfg.max_iterations = 400;
  cfg.seed = 5;

  std::vector<pgen::RunRecord> records;
  pgen::pretrain(cfg, &records);
  std::printf("validation loss: %.3f at iteration 0, %.3f at iteration %zu\n",
              records.front().val_loss, records.back().val_loss, records.back().iteration);

  pgen::MetricReport report =
      pgen::evaluate(cfg.checkpoint_path, cfg.vocab_path, (dir / "test.tsv").string(), 4);
  std::printf("test metrics  rouge1 %.2f  rouge2 %.2f  bleu2 %.2f  avg %.2f\n", report.rouge1,
              report.rouge2, report.bleu2, report.avg);

  auto [model, params] = pgen::load_checkpoint(cfg.checkpoint_path);
  pgen::Vocabulary vocab = pgen::Vocabulary::load_file(cfg.vocab_path);
  for (std::size_t i = 0; i < 2 && i < split.test.size(); ++i) {
    pgen::EncodedExample ex = pgen::encode(split.test[i], vocab, model.max_len);
    auto ids = pgen::beam_search(params, model, ex, 4);
    std::printf("source: %s\noutput: %s\n", pgen::detokenize(split.test[i].source).c_str(),
                pgen::detokenize(pgen::decode_tokens(ids, vocab, ex.src_oovs)).c_str());
  }
  return 0;
}
