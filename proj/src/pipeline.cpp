#include "visaw/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "visaw/adam.hpp"
#include "visaw/checkpoint.hpp"
#include "visaw/errors.hpp"
#include "visaw/metrics.hpp"
#include "visaw/ops.hpp"
#include "visaw/rng.hpp"

namespace visaw {

namespace {

AdamConfig adam_config(const RunConfig& cfg) {
  return {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
}

void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

EmbedModel load_embed_model(const LoadedCheckpoint& ckpt, const RunConfig& ecfg,
                            std::size_t vocab) {
  EmbedModel model = EmbedModel::init(vocab, ecfg.d_t, ecfg.d_s, ecfg.d_img,
                                      {ecfg.k_plus, ecfg.k_minus, ecfg.weldon_beta}, ecfg.seed);
  ParamList params = model.params();
  load_into(ckpt, params);
  return model;
}

ImageIndex load_index(const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  if (ckpt.module != "index") {
    fail(ErrorKind::Integrity, "index: " + path + " holds module \"" + ckpt.module + "\"");
  }
  const Tensor& matrix = ckpt.tensor("index.matrix");
  if (matrix.rank() != 2 || ckpt.ids.size() != matrix.dim(0)) {
    fail(ErrorKind::Integrity, "index: " + path + " id list does not match the matrix");
  }
  ImageIndex index;
  index.ids = ckpt.ids;
  index.dim = matrix.dim(1);
  index.matrix = matrix.data();
  return index;
}

std::size_t argmax_row(const std::vector<double>& data, std::size_t row, std::size_t width) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < width; ++j) {
    if (data[row * width + j] > data[row * width + best]) best = j;
  }
  return best;
}

struct Span {
  std::size_t start, end;  // [start, end)
  std::string label;
  bool operator==(const Span&) const = default;
};

std::vector<Span> tag_spans(const std::vector<std::string>& tags) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i] == "O") {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j] == tags[i]) ++j;
    spans.push_back({i, j, tags[i]});
    i = j;
  }
  return spans;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "pipeline: cannot write " + path);
  return out;
}

void write_eval_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace

std::vector<std::string> tag_label_set(std::size_t topics) {
  std::vector<std::string> labels{"O"};
  for (std::size_t k = 0; k < topics; ++k) labels.push_back(topic_tag(k));
  return labels;
}

const std::vector<std::string>& nli_label_set() {
  static const std::vector<std::string> labels{"entailment", "neutral", "contradiction"};
  return labels;
}

VisualMemory VisualMemory::load(const RunConfig& cfg, const Corpus& corpus) {
  VisualMemory vm;
  vm.m = cfg.m;
  if (cfg.m == 0) return vm;

  RunPaths paths{cfg.out_dir};
  LoadedCheckpoint ckpt = load_checkpoint(paths.embed_ckpt());
  if (ckpt.module != "embedding") {
    fail(ErrorKind::Integrity,
         "embedding: " + paths.embed_ckpt() + " holds module \"" + ckpt.module + "\"");
  }
  RunConfig ecfg = RunConfig::from_json(ckpt.config);
  vm.max_len = ecfg.max_len;
  vm.pool = {ecfg.k_plus, ecfg.k_minus, ecfg.weldon_beta};
  vm.text = TextPathParams::init(corpus.vocab.size(), ecfg.d_t, ecfg.d_s, ecfg.seed);
  ParamList text_params = vm.text.params();
  load_into(ckpt, text_params);

  vm.index = load_index(paths.index_ckpt());
  if (vm.index.dim != ecfg.d_s) {
    fail(ErrorKind::Integrity, "index: dimension " + std::to_string(vm.index.dim) +
                                   " does not match the embedding space " +
                                   std::to_string(ecfg.d_s));
  }
  vm.active = true;
  return vm;
}

Tensor VisualMemory::memory_for(const std::vector<std::size_t>& token_ids,
                                const Corpus& corpus) const {
  if (!active || m == 0) return {};
  NoGradGuard frozen;
  Tensor query = encode_text(token_ids, text, max_len);
  RetrievalResult res = retrieve_top_m(query.data(), index, m);
  if (res.entries.empty()) return {};

  std::vector<double> rows;
  std::size_t d_img = 0;
  for (const auto& [image_id, score] : res.entries) {
    Tensor pooled = weldon_pool(corpus.image(image_id), pool);
    d_img = pooled.size();
    rows.insert(rows.end(), pooled.data().begin(), pooled.data().end());
  }
  return Tensor::from_data({res.entries.size(), d_img}, std::move(rows));
}

TaskModel TaskModel::init(const RunConfig& cfg, std::size_t vocab) {
  TaskModel model;
  model.task = cfg.task;
  model.enc = EncoderParams::init(vocab, cfg.d, cfg.layers, cfg.heads, cfg.d_ff, cfg.max_len,
                                  cfg.seed, "enc");
  model.enc.ln_eps = cfg.ln_eps;
  model.img = ImageProjParams::init(cfg.d_img, cfg.d, cfg.seed, "imgproj");
  model.fusion = FusionParams::init(cfg.d, cfg.fusion_heads, cfg.seed, "fusion");
  model.fusion.ln_eps = cfg.ln_eps;
  if (cfg.task == "tag") {
    model.tag = TagHeadParams::init(cfg.d, tag_label_set(cfg.topics).size(), cfg.seed, "tag");
  } else if (cfg.task == "nli") {
    model.pair = PairHeadParams::init(cfg.d, nli_label_set().size(), cfg.seed, "pair");
  } else if (cfg.task == "copy") {
    model.dec =
        DecoderParams::init(vocab, cfg.d, cfg.heads, cfg.d_ff, cfg.max_len, cfg.seed, "dec");
    model.dec.ln_eps = cfg.ln_eps;
  } else {
    fail(ErrorKind::Config, "config: unknown task \"" + cfg.task + "\"");
  }
  return model;
}

ParamList TaskModel::params() {
  ParamList out = enc.params("enc");
  append_params(out, img.params("imgproj"));
  append_params(out, fusion.params("fusion"));
  if (task == "tag") append_params(out, tag.params("tag"));
  if (task == "nli") append_params(out, pair.params("pair"));
  if (task == "copy") append_params(out, dec.params("dec"));
  return out;
}

Tensor TaskModel::fused_states(const std::vector<std::size_t>& token_ids, const Tensor& memory) {
  Tensor states = transformer_encode(token_ids, enc);
  Tensor projected;
  if (memory.defined()) projected = project_images(memory, img);
  return fuse(states, projected, fusion);
}

GenSummary cmd_gen_data(const RunConfig& cfg) {
  cfg.validate();
  Corpus corpus = generate_corpus(cfg);
  save_corpus(corpus, cfg.data_dir);

  ensure_dir(cfg.out_dir);
  RunPaths paths{cfg.out_dir};
  MetricsWriter metrics(paths.metrics("gen-data"), "gen-data", cfg.seed);
  GenSummary summary{corpus.texts.size(), corpus.images.size(), corpus.pairs.size(),
                     corpus.heldout_pairs.size()};
  metrics.record("texts", static_cast<double>(summary.texts));
  metrics.record("images", static_cast<double>(summary.images));
  metrics.record("pairs", static_cast<double>(summary.pairs));
  metrics.record("heldout_pairs", static_cast<double>(summary.heldout));
  return summary;
}

EmbedSummary cmd_train_embed(const RunConfig& cfg) {
  cfg.validate();
  Corpus corpus = load_corpus(cfg.data_dir);
  ensure_dir(cfg.out_dir);
  RunPaths paths{cfg.out_dir};
  MetricsWriter metrics(paths.metrics("train-embed"), "train-embed", cfg.seed);

  EmbedModel model =
      EmbedModel::init(corpus.vocab.size(), cfg.d_t, cfg.d_s, cfg.d_img,
                       {cfg.k_plus, cfg.k_minus, cfg.weldon_beta}, cfg.seed);
  std::vector<EmbedPair> pairs;
  pairs.reserve(corpus.pairs.size());
  for (const auto& [text_id, image_id] : corpus.pairs) {
    pairs.push_back({corpus.encode(corpus.text(text_id)), corpus.image(image_id)});
  }

  EmbedTrainOptions opt;
  opt.alpha = cfg.alpha;
  opt.symmetric = cfg.symmetric_triplet;
  opt.adam = adam_config(cfg);
  opt.batch_size = cfg.batch_size;
  opt.epochs = cfg.embed_epochs;
  opt.max_len = cfg.max_len;
  opt.seed = cfg.seed;

  EmbedSummary summary;
  summary.epoch_loss = train_embedding(model, pairs, opt, [&](std::size_t epoch, double loss) {
    metrics.record("train_loss", loss, static_cast<long long>(epoch));
  });

  if (!corpus.heldout_pairs.empty()) {
    NoGradGuard frozen;
    std::vector<std::pair<std::string, std::vector<double>>> entries;
    for (const auto& [text_id, image_id] : corpus.heldout_pairs) {
      entries.emplace_back(image_id, encode_image(corpus.image(image_id), model.image).data());
    }
    ImageIndex heldout = build_index(entries);
    std::vector<std::pair<std::vector<double>, std::string>> eval_pairs;
    for (const auto& [text_id, image_id] : corpus.heldout_pairs) {
      eval_pairs.emplace_back(
          encode_text(corpus.encode(corpus.text(text_id)), model.text, cfg.max_len).data(),
          image_id);
    }
    summary.heldout_recall = recall_at_k(eval_pairs, heldout, cfg.m);
    metrics.record("heldout_recall", summary.heldout_recall);
  }

  save_checkpoint(paths.embed_ckpt(), "embedding", model.params(), cfg.to_json(), cfg.seed);
  return summary;
}

std::size_t cmd_build_index(const RunConfig& cfg) {
  cfg.validate();
  Corpus corpus = load_corpus(cfg.data_dir);
  ensure_dir(cfg.out_dir);
  RunPaths paths{cfg.out_dir};

  LoadedCheckpoint ckpt = load_checkpoint(paths.embed_ckpt());
  RunConfig ecfg = RunConfig::from_json(ckpt.config);
  EmbedModel model = load_embed_model(ckpt, ecfg, corpus.vocab.size());

  NoGradGuard frozen;
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  entries.reserve(corpus.pairs.size());
  for (const auto& [text_id, image_id] : corpus.pairs) {
    entries.emplace_back(image_id, encode_image(corpus.image(image_id), model.image).data());
  }
  ImageIndex index = build_index(entries);

  Tensor matrix = Tensor::from_data({index.size(), index.dim}, index.matrix);
  ParamList params{{"index.matrix", matrix}};
  save_checkpoint(paths.index_ckpt(), "index", params, cfg.to_json(), cfg.seed, &index.ids);

  MetricsWriter metrics(paths.metrics("build-index"), "build-index", cfg.seed);
  metrics.record("indexed_images", static_cast<double>(index.size()));
  return index.size();
}

std::size_t cmd_retrieve(const RunConfig& cfg) {
  cfg.validate();
  Corpus corpus = load_corpus(cfg.data_dir);
  ensure_dir(cfg.out_dir);
  RunPaths paths{cfg.out_dir};

  LoadedCheckpoint ckpt = load_checkpoint(paths.embed_ckpt());
  RunConfig ecfg = RunConfig::from_json(ckpt.config);
  EmbedModel model = load_embed_model(ckpt, ecfg, corpus.vocab.size());
  ImageIndex index = load_index(paths.index_ckpt());

  NoGradGuard frozen;
  std::vector<std::pair<std::string, RetrievalResult>> results;
  results.reserve(corpus.texts.size());
  std::size_t rows = 0;
  for (const auto& [text_id, tokens] : corpus.texts) {
    Tensor query = encode_text(corpus.encode(tokens), model.text, ecfg.max_len);
    results.emplace_back(text_id, retrieve_top_m(query.data(), index, cfg.m));
    rows += results.back().second.entries.size();
  }
  write_retrieval_tsv(paths.retrieval_tsv(), results);

  MetricsWriter metrics(paths.metrics("retrieve"), "retrieve", cfg.seed);
  metrics.record("queries", static_cast<double>(results.size()));
  metrics.record("rows", static_cast<double>(rows));
  return results.size();
}

TaskSummary cmd_train_task(const RunConfig& cfg) {
  cfg.validate();
  Corpus corpus = load_corpus(cfg.data_dir);
  ensure_dir(cfg.out_dir);
  RunPaths paths{cfg.out_dir};
  MetricsWriter metrics(paths.metrics("train-task"), "train-task", cfg.seed);

  VisualMemory memory = VisualMemory::load(cfg, corpus);
  TaskModel model = TaskModel::init(cfg, corpus.vocab.size());
  ParamList params = model.params();
  Adam adam(adam_config(cfg));

  // Retrieval inputs are frozen, so each example's memory rows are
  // precomputed once and reused every epoch.
  std::vector<std::function<Tensor()>> losses;
  if (cfg.task == "tag") {
    std::vector<std::string> labels = tag_label_set(cfg.topics);
    for (const TagExample& ex : corpus.tag_train) {
      std::vector<std::size_t> ids = corpus.encode(ex.tokens);
      std::vector<std::size_t> gold;
      for (const std::string& tag : ex.tags) {
        auto it = std::find(labels.begin(), labels.end(), tag);
        if (it == labels.end()) fail(ErrorKind::Vocab, "tags: unknown tag \"" + tag + "\"");
        gold.push_back(static_cast<std::size_t>(it - labels.begin()));
      }
      Tensor mem = memory.memory_for(ids, corpus);
      losses.push_back([ids, gold, mem, &model] {
        return cross_entropy(tag_logits(model.fused_states(ids, mem), model.tag), gold);
      });
    }
  } else if (cfg.task == "nli") {
    const std::vector<std::string>& labels = nli_label_set();
    for (const PairExample& ex : corpus.nli_train) {
      std::vector<std::size_t> p_ids = corpus.encode(ex.premise);
      std::vector<std::size_t> h_ids = corpus.encode(ex.hypothesis);
      auto it = std::find(labels.begin(), labels.end(), ex.label);
      std::vector<std::size_t> gold{static_cast<std::size_t>(it - labels.begin())};
      Tensor p_mem = memory.memory_for(p_ids, corpus);
      Tensor h_mem = memory.memory_for(h_ids, corpus);
      losses.push_back([p_ids, h_ids, gold, p_mem, h_mem, &model] {
        Tensor fp = model.fused_states(p_ids, p_mem);
        Tensor fh = model.fused_states(h_ids, h_mem);
        return cross_entropy(pair_logits(fp, fh, model.pair), gold);
      });
    }
  } else {
    for (const SeqExample& ex : corpus.copy_train) {
      std::vector<std::size_t> src = corpus.encode(ex.source);
      std::vector<std::size_t> target = corpus.encode(ex.target);
      std::vector<std::size_t> prefix{Vocab::kBos};
      prefix.insert(prefix.end(), target.begin(), target.end());
      std::vector<std::size_t> gold = target;
      gold.push_back(Vocab::kEos);
      Tensor mem = memory.memory_for(src, corpus);
      losses.push_back([src, prefix, gold, mem, &model] {
        Tensor fused = model.fused_states(src, mem);
        return cross_entropy(decoder_logits(prefix, fused, model.dec), gold);
      });
    }
  }
  if (losses.empty()) fail(ErrorKind::Contract, "train-task: no training examples");

  Rng order = Rng::for_name(cfg.seed, "train-task.order");
  TaskSummary summary;
  for (std::size_t epoch = 0; epoch < cfg.task_epochs; ++epoch) {
    std::vector<std::size_t> idx(losses.size());
    std::iota(idx.begin(), idx.end(), 0);
    order.shuffle(idx);

    double total = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      std::size_t batch = std::min(cfg.batch_size, idx.size() - start);
      zero_grads(params);
      Tensor sum;
      for (std::size_t j = 0; j < batch; ++j) {
        Tensor loss = losses[idx[start + j]]();
        total += loss.value();
        sum = sum.defined() ? add(sum, loss) : loss;
      }
      scale(sum, 1.0 / static_cast<double>(batch)).backward();
      adam.step(params);
    }
    double mean = total / static_cast<double>(idx.size());
    summary.epoch_loss.push_back(mean);
    metrics.record("train_loss", mean, static_cast<long long>(epoch));
  }

  save_checkpoint(paths.task_ckpt(cfg.task), "task-" + cfg.task, params, cfg.to_json(),
                  cfg.seed);
  return summary;
}

EvalSummary cmd_evaluate(const RunConfig& cfg) {
  RunPaths paths{cfg.out_dir};
  LoadedCheckpoint ckpt = load_checkpoint(paths.task_ckpt(cfg.task));
  if (ckpt.module != "task-" + cfg.task) {
    fail(ErrorKind::Integrity, "evaluate: " + paths.task_ckpt(cfg.task) + " holds module \"" +
                                   ckpt.module + "\", expected task-" + cfg.task);
  }
  RunConfig tcfg = RunConfig::from_json(ckpt.config);
  tcfg.data_dir = cfg.data_dir;
  tcfg.out_dir = cfg.out_dir;
  tcfg.validate();

  Corpus corpus = load_corpus(tcfg.data_dir);
  TaskModel model = TaskModel::init(tcfg, corpus.vocab.size());
  ParamList params = model.params();
  load_into(ckpt, params);
  VisualMemory memory = VisualMemory::load(tcfg, corpus);

  NoGradGuard frozen;
  nlohmann::json record;
  if (tcfg.task == "tag") {
    std::vector<std::string> labels = tag_label_set(tcfg.topics);
    std::ofstream out = open_out(paths.predictions_tsv("tag"));
    std::size_t tokens = 0, correct = 0, ambig = 0, ambig_correct = 0;
    std::size_t gold_spans = 0, pred_spans = 0, span_matches = 0;
    for (const TagExample& ex : corpus.tag_test) {
      std::vector<std::size_t> ids = corpus.encode(ex.tokens);
      Tensor logits =
          tag_logits(model.fused_states(ids, memory.memory_for(ids, corpus)), model.tag);
      std::vector<std::string> pred(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        pred[i] = labels[argmax_row(logits.data(), i, labels.size())];
        out << ex.tokens[i] << '\t' << ex.tags[i] << '\t' << pred[i] << '\n';
        ++tokens;
        if (pred[i] == ex.tags[i]) ++correct;
        if (ex.tags[i] != "O") {
          ++ambig;
          if (pred[i] == ex.tags[i]) ++ambig_correct;
        }
      }
      out << '\n';
      std::vector<Span> gold = tag_spans(ex.tags);
      std::vector<Span> predicted = tag_spans(pred);
      gold_spans += gold.size();
      pred_spans += predicted.size();
      for (const Span& s : predicted) {
        if (std::find(gold.begin(), gold.end(), s) != gold.end()) ++span_matches;
      }
    }
    double span_f1 = (gold_spans + pred_spans) == 0
                         ? 1.0
                         : 2.0 * static_cast<double>(span_matches) /
                               static_cast<double>(gold_spans + pred_spans);
    record["token_accuracy"] = tokens ? static_cast<double>(correct) / tokens : 0.0;
    record["ambiguous_token_accuracy"] = ambig ? static_cast<double>(ambig_correct) / ambig : 0.0;
    record["span_f1"] = span_f1;
  } else if (tcfg.task == "nli") {
    const std::vector<std::string>& labels = nli_label_set();
    std::ofstream out = open_out(paths.predictions_tsv("nli"));
    std::size_t total = 0, correct = 0;
    for (const PairExample& ex : corpus.nli_test) {
      std::vector<std::size_t> p_ids = corpus.encode(ex.premise);
      std::vector<std::size_t> h_ids = corpus.encode(ex.hypothesis);
      Tensor fp = model.fused_states(p_ids, memory.memory_for(p_ids, corpus));
      Tensor fh = model.fused_states(h_ids, memory.memory_for(h_ids, corpus));
      Tensor logits = pair_logits(fp, fh, model.pair);
      std::string pred = labels[argmax_row(logits.data(), 0, labels.size())];
      out << ex.id << '\t' << ex.label << '\t' << pred << '\n';
      ++total;
      if (pred == ex.label) ++correct;
    }
    record["accuracy"] = total ? static_cast<double>(correct) / total : 0.0;
  } else {
    std::ofstream out = open_out(paths.predictions_tsv("copy"));
    std::size_t tokens = 0, correct = 0, sequences = 0, exact = 0;
    for (const SeqExample& ex : corpus.copy_test) {
      std::vector<std::size_t> src = corpus.encode(ex.source);
      Tensor fused = model.fused_states(src, memory.memory_for(src, corpus));
      DecodeResult res =
          greedy_decode(fused, model.dec, Vocab::kBos, Vocab::kEos, tcfg.max_len);
      std::vector<std::string> pred;
      for (std::size_t id : res.tokens) pred.push_back(corpus.vocab.tokens[id]);

      out << ex.id << '\t';
      for (std::size_t i = 0; i < ex.source.size(); ++i) out << (i ? " " : "") << ex.source[i];
      out << '\t';
      for (std::size_t i = 0; i < ex.target.size(); ++i) out << (i ? " " : "") << ex.target[i];
      out << '\t';
      for (std::size_t i = 0; i < pred.size(); ++i) out << (i ? " " : "") << pred[i];
      out << '\n';

      tokens += ex.target.size();
      for (std::size_t i = 0; i < ex.target.size(); ++i) {
        if (i < pred.size() && pred[i] == ex.target[i]) ++correct;
      }
      ++sequences;
      if (pred == ex.target) ++exact;
    }
    record["token_accuracy"] = tokens ? static_cast<double>(correct) / tokens : 0.0;
    record["sequence_accuracy"] = sequences ? static_cast<double>(exact) / sequences : 0.0;
  }

  write_eval_json(paths.eval_json(tcfg.task), record);
  MetricsWriter metrics(paths.metrics("evaluate"), "evaluate", tcfg.seed);
  for (const auto& [key, value] : record.items()) {
    metrics.record(key, value.get<double>());
  }
  return {record};
}

GradcheckSummary cmd_gradcheck(const RunConfig& cfg) {
  GradcheckSummary summary;
  summary.reports = gradcheck_suite(cfg.seed);
  summary.pass = true;
  for (const GradCheckReport& report : summary.reports) {
    summary.max_rel_err = std::max(summary.max_rel_err, report.max_rel_err);
    if (!report.pass) summary.pass = false;
  }

  ensure_dir(cfg.out_dir);
  RunPaths paths{cfg.out_dir};
  MetricsWriter metrics(paths.metrics("gradcheck"), "gradcheck", cfg.seed);
  for (const GradCheckReport& report : summary.reports) {
    metrics.record("rel_err." + report.name, report.max_rel_err);
  }
  metrics.record("max_rel_err", summary.max_rel_err);
  metrics.record("checks", static_cast<double>(summary.reports.size()));
  return summary;
}

}  // namespace visaw
