#include "visaw/corpus.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "visaw/errors.hpp"
#include "visaw/rng.hpp"

namespace visaw {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::Parse, file + ":" + std::to_string(line) + ": bad number \"" + s + "\"");
  }
  if (used != s.size()) {
    fail(ErrorKind::Parse, file + ":" + std::to_string(line) + ": bad number \"" + s + "\"");
  }
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "corpus: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string zero_pad(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05zu", prefix, n);
  return buf;
}

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

// Topic words come from [word_lo, word_hi) of the topic's sub-vocabulary;
// ambiguous words are shared across topics and carry the topic tag.
Sentence make_sentence(const RunConfig& cfg, std::size_t topic, std::size_t word_lo,
                       std::size_t word_hi, Rng& rng,
                       std::vector<std::size_t>* chosen_words = nullptr) {
  std::size_t n_t = static_cast<std::size_t>(
      rng.range(static_cast<long>(cfg.caption_topic_min), static_cast<long>(cfg.caption_topic_max)));
  std::size_t n_a = static_cast<std::size_t>(
      rng.range(static_cast<long>(cfg.caption_ambig_min), static_cast<long>(cfg.caption_ambig_max)));

  std::vector<std::pair<std::string, std::string>> items;
  std::vector<std::size_t> picks = rng.sample_without_replacement(word_hi - word_lo, n_t);
  for (std::size_t p : picks) {
    std::size_t w = word_lo + p;
    if (chosen_words) chosen_words->push_back(w);
    items.emplace_back("t" + std::to_string(topic) + "w" + std::to_string(w), "O");
  }
  std::vector<std::size_t> ambigs = rng.sample_without_replacement(cfg.ambig_vocab, n_a);
  for (std::size_t a : ambigs) {
    items.emplace_back("amb" + std::to_string(a), topic_tag(topic));
  }
  rng.shuffle(items);

  Sentence s;
  for (auto& [tok, tag] : items) {
    s.tokens.push_back(tok);
    s.tags.push_back(tag);
  }
  return s;
}

}  // namespace

std::string topic_tag(std::size_t topic) { return "T" + std::to_string(topic); }

std::size_t Vocab::add(const std::string& token) {
  auto [it, fresh] = ids.emplace(token, tokens.size());
  if (fresh) tokens.push_back(token);
  return it->second;
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = ids.find(token);
  if (it == ids.end()) fail(ErrorKind::Vocab, "vocab: unknown token \"" + token + "\"");
  return it->second;
}

void Corpus::reindex() {
  text_pos.clear();
  image_pos.clear();
  for (std::size_t i = 0; i < texts.size(); ++i) text_pos[texts[i].first] = i;
  for (std::size_t i = 0; i < images.size(); ++i) image_pos[images[i].first] = i;
}

const std::vector<std::string>& Corpus::text(const std::string& id) const {
  auto it = text_pos.find(id);
  if (it == text_pos.end()) fail(ErrorKind::Referential, "corpus: no text with id \"" + id + "\"");
  return texts[it->second].second;
}

const Tensor& Corpus::image(const std::string& id) const {
  auto it = image_pos.find(id);
  if (it == image_pos.end()) {
    fail(ErrorKind::Referential, "corpus: no image with id \"" + id + "\"");
  }
  return images[it->second].second;
}

std::vector<std::size_t> Corpus::encode(const std::vector<std::string>& toks) const {
  std::vector<std::size_t> out;
  out.reserve(toks.size());
  for (const std::string& t : toks) out.push_back(vocab.id(t));
  return out;
}

Corpus generate_corpus(const RunConfig& cfg) {
  Corpus c;
  c.vocab.add("<bos>");
  c.vocab.add("<eos>");
  for (std::size_t a = 0; a < cfg.ambig_vocab; ++a) c.vocab.add("amb" + std::to_string(a));
  for (std::size_t j = 0; j < cfg.copy_vocab; ++j) c.vocab.add("c" + std::to_string(j));
  for (std::size_t k = 0; k < cfg.topics; ++k) {
    for (std::size_t j = 0; j < cfg.topic_vocab; ++j) {
      c.vocab.add("t" + std::to_string(k) + "w" + std::to_string(j));
    }
  }

  // Cluster centers and per-word attribute directions in image-feature
  // space. A caption's image signal is its topic center plus the mean
  // attribute of its topic words, so captions are informative about their
  // specific image, not just its topic.
  Rng geo = Rng::for_name(cfg.seed, "gen.geometry");
  std::vector<std::vector<double>> centers(cfg.topics, std::vector<double>(cfg.d_img));
  for (auto& center : centers) {
    for (double& v : center) v = geo.normal(0.0, 1.0);
  }
  std::vector<std::vector<std::vector<double>>> attrs(
      cfg.topics, std::vector<std::vector<double>>(cfg.topic_vocab, std::vector<double>(cfg.d_img)));
  for (auto& per_topic : attrs) {
    for (auto& attr : per_topic) {
      for (double& v : attr) v = geo.normal(0.0, cfg.attr_scale);
    }
  }

  Rng pair_rng = Rng::for_name(cfg.seed, "gen.pairs");
  const std::size_t total = cfg.n_pairs + cfg.n_heldout;
  const std::size_t signal_rows = cfg.regions - cfg.background_regions;
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t topic = pair_rng.index(cfg.topics);
    std::vector<std::size_t> words;
    Sentence sent = make_sentence(cfg, topic, 0, cfg.topic_vocab, pair_rng, &words);

    std::vector<double> signal = centers[topic];
    for (std::size_t w : words) {
      for (std::size_t j = 0; j < cfg.d_img; ++j) {
        signal[j] += attrs[topic][w][j] / static_cast<double>(words.size());
      }
    }
    std::vector<double> regions(cfg.regions * cfg.d_img);
    for (std::size_t r = 0; r < cfg.regions; ++r) {
      for (std::size_t j = 0; j < cfg.d_img; ++j) {
        regions[r * cfg.d_img + j] =
            r < signal_rows ? signal[j] + pair_rng.normal(0.0, cfg.signal_noise)
                            : pair_rng.normal(0.0, cfg.background_noise);
      }
    }

    std::string text_id = zero_pad("t", i);
    std::string image_id = zero_pad("i", i);
    c.texts.emplace_back(text_id, sent.tokens);
    c.images.emplace_back(image_id,
                          Tensor::from_data({cfg.regions, cfg.d_img}, std::move(regions)));
    if (i < cfg.n_pairs) {
      c.pairs.emplace_back(text_id, image_id);
    } else {
      c.heldout_pairs.emplace_back(text_id, image_id);
    }
  }

  // Task splits: training sentences use the first half of each topic's
  // words, test sentences the second half, so test topics are invisible to
  // a text-only model while the full-vocabulary retrieval corpus above
  // still covers them.
  const std::size_t half = cfg.topic_vocab / 2;
  Rng tag_rng = Rng::for_name(cfg.seed, "gen.tag");
  for (std::size_t i = 0; i < cfg.tag_train + cfg.tag_test; ++i) {
    bool train = i < cfg.tag_train;
    std::size_t topic = tag_rng.index(cfg.topics);
    Sentence s = train ? make_sentence(cfg, topic, 0, half, tag_rng)
                       : make_sentence(cfg, topic, half, cfg.topic_vocab, tag_rng);
    TagExample ex{zero_pad("g", i), s.tokens, s.tags};
    (train ? c.tag_train : c.tag_test).push_back(std::move(ex));
  }

  Rng nli_rng = Rng::for_name(cfg.seed, "gen.nli");
  const char* labels[3] = {"entailment", "neutral", "contradiction"};
  for (std::size_t i = 0; i < cfg.nli_train + cfg.nli_test; ++i) {
    bool train = i < cfg.nli_train;
    std::size_t label = nli_rng.index(3);
    std::size_t p_topic = nli_rng.index(cfg.topics);
    std::size_t h_topic;
    if (label == 0) {
      h_topic = p_topic;
    } else if (label == 1) {
      h_topic = (p_topic + (nli_rng.index(2) ? 1 : cfg.topics - 1)) % cfg.topics;
    } else {
      // any topic at ring distance >= 2
      std::size_t hop = 2 + nli_rng.index(cfg.topics - 3);
      h_topic = (p_topic + hop) % cfg.topics;
    }
    std::size_t lo = train ? 0 : half;
    std::size_t hi = train ? half : cfg.topic_vocab;
    Sentence prem = make_sentence(cfg, p_topic, lo, hi, nli_rng);
    Sentence hyp = make_sentence(cfg, h_topic, lo, hi, nli_rng);
    PairExample ex{zero_pad("n", i), prem.tokens, hyp.tokens, labels[label]};
    (train ? c.nli_train : c.nli_test).push_back(std::move(ex));
  }

  Rng copy_rng = Rng::for_name(cfg.seed, "gen.copy");
  for (std::size_t i = 0; i < cfg.copy_train + cfg.copy_test; ++i) {
    bool train = i < cfg.copy_train;
    std::size_t len = 1 + copy_rng.index(cfg.copy_len_max);
    std::vector<std::string> toks(len);
    for (std::string& t : toks) t = "c" + std::to_string(copy_rng.index(cfg.copy_vocab));
    SeqExample ex{zero_pad("s", i), toks, toks};
    (train ? c.copy_train : c.copy_test).push_back(std::move(ex));
  }

  c.reindex();
  return c;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir + "/" + name, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "corpus: cannot write " + dir + "/" + name);
    return out;
  };

  {
    std::ofstream out = open("vocab.tsv");
    for (const std::string& t : corpus.vocab.tokens) out << t << '\n';
  }
  {
    std::ofstream out = open("texts.tsv");
    for (const auto& [id, toks] : corpus.texts) out << id << '\t' << join(toks, ' ') << '\n';
  }
  {
    std::ofstream out = open("images.txt");
    for (const auto& [id, regions] : corpus.images) {
      const std::size_t r = regions.dim(0), d = regions.dim(1);
      out << id << '\t' << r << '\n';
      const auto& rv = regions.data();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          if (j) out << ',';
          out << format_double(rv[i * d + j]);
        }
        out << '\n';
      }
    }
  }
  {
    std::ofstream out = open("pairs.tsv");
    for (const auto& [t, i] : corpus.pairs) out << t << '\t' << i << '\n';
  }
  {
    std::ofstream out = open("pairs_heldout.tsv");
    for (const auto& [t, i] : corpus.heldout_pairs) out << t << '\t' << i << '\n';
  }
  auto write_tags = [&](const std::string& name, const std::vector<TagExample>& xs) {
    std::ofstream out = open(name);
    for (const TagExample& x : xs) {
      out << x.id << '\t' << join(x.tokens, ' ') << '\t' << join(x.tags, ' ') << '\n';
    }
  };
  write_tags("tag_train.tsv", corpus.tag_train);
  write_tags("tag_test.tsv", corpus.tag_test);
  auto write_nli = [&](const std::string& name, const std::vector<PairExample>& xs) {
    std::ofstream out = open(name);
    for (const PairExample& x : xs) {
      out << x.id << '\t' << join(x.premise, ' ') << '\t' << join(x.hypothesis, ' ') << '\t'
          << x.label << '\n';
    }
  };
  write_nli("nli_train.tsv", corpus.nli_train);
  write_nli("nli_test.tsv", corpus.nli_test);
  auto write_copy = [&](const std::string& name, const std::vector<SeqExample>& xs) {
    std::ofstream out = open(name);
    for (const SeqExample& x : xs) {
      out << x.id << '\t' << join(x.source, ' ') << '\t' << join(x.target, ' ') << '\n';
    }
  };
  write_copy("copy_train.tsv", corpus.copy_train);
  write_copy("copy_test.tsv", corpus.copy_test);
}

Corpus load_corpus(const std::string& dir) {
  Corpus c;

  {
    std::vector<std::string> lines = read_lines(dir + "/vocab.tsv");
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) {
        fail(ErrorKind::Parse, dir + "/vocab.tsv:" + std::to_string(i + 1) + ": empty token");
      }
      if (c.vocab.ids.count(lines[i])) {
        fail(ErrorKind::Parse, dir + "/vocab.tsv:" + std::to_string(i + 1) +
                                   ": duplicate token \"" + lines[i] + "\"");
      }
      c.vocab.add(lines[i]);
    }
    if (c.vocab.size() < 2 || c.vocab.tokens[0] != "<bos>" || c.vocab.tokens[1] != "<eos>") {
      fail(ErrorKind::Parse, dir + "/vocab.tsv: must begin with <bos> and <eos>");
    }
  }

  auto check_tokens = [&](const std::vector<std::string>& toks, const std::string& file,
                          std::size_t line) {
    for (const std::string& t : toks) {
      if (!c.vocab.ids.count(t)) {
        fail(ErrorKind::Vocab,
             file + ":" + std::to_string(line) + ": token \"" + t + "\" is not in the vocabulary");
      }
    }
  };

  {
    const std::string file = dir + "/texts.tsv";
    std::vector<std::string> lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::vector<std::string> cols = split(lines[i], '\t');
      if (cols.size() != 2 || cols[0].empty()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) + ": expected id<TAB>tokens");
      }
      std::vector<std::string> toks = split(cols[1], ' ');
      if (toks.empty() || toks[0].empty()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) + ": empty token sequence");
      }
      check_tokens(toks, file, i + 1);
      if (c.text_pos.count(cols[0])) {
        fail(ErrorKind::Ingestion, file + ":" + std::to_string(i + 1) + ": duplicate text id \"" +
                                       cols[0] + "\"");
      }
      c.text_pos[cols[0]] = c.texts.size();
      c.texts.emplace_back(cols[0], std::move(toks));
    }
  }

  {
    const std::string file = dir + "/images.txt";
    std::vector<std::string> lines = read_lines(file);
    std::size_t d_img = 0;
    std::size_t i = 0;
    while (i < lines.size()) {
      std::vector<std::string> header = split(lines[i], '\t');
      if (header.size() != 2 || header[0].empty()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) + ": expected id<TAB>rows");
      }
      std::size_t rows = 0;
      try {
        rows = std::stoul(header[1]);
      } catch (const std::exception&) {
        rows = 0;
      }
      if (rows == 0) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) + ": bad row count \"" +
                                   header[1] + "\"");
      }
      if (i + 1 + rows > lines.size()) {
        fail(ErrorKind::Parse, file + ": truncated region block for \"" + header[0] + "\"");
      }
      std::vector<double> data;
      for (std::size_t r = 0; r < rows; ++r) {
        std::vector<std::string> cells = split(lines[i + 1 + r], ',');
        if (d_img == 0) d_img = cells.size();
        if (cells.size() != d_img || d_img == 0) {
          fail(ErrorKind::Parse, file + ":" + std::to_string(i + 2 + r) + ": expected " +
                                     std::to_string(d_img) + " values");
        }
        for (const std::string& cell : cells) {
          data.push_back(parse_double(cell, file, i + 2 + r));
        }
      }
      if (c.image_pos.count(header[0])) {
        fail(ErrorKind::Ingestion, file + ":" + std::to_string(i + 1) +
                                       ": duplicate image id \"" + header[0] + "\"");
      }
      c.image_pos[header[0]] = c.images.size();
      c.images.emplace_back(header[0], Tensor::from_data({rows, d_img}, std::move(data)));
      i += 1 + rows;
    }
  }

  auto load_pairs = [&](const std::string& name,
                        std::vector<std::pair<std::string, std::string>>& out) {
    const std::string file = dir + "/" + name;
    std::vector<std::string> lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::vector<std::string> cols = split(lines[i], '\t');
      if (cols.size() != 2) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) +
                                   ": expected text_id<TAB>image_id");
      }
      if (!c.text_pos.count(cols[0])) {
        fail(ErrorKind::Referential, file + ":" + std::to_string(i + 1) +
                                         ": unknown text id \"" + cols[0] + "\"");
      }
      if (!c.image_pos.count(cols[1])) {
        fail(ErrorKind::Referential, file + ":" + std::to_string(i + 1) +
                                         ": unknown image id \"" + cols[1] + "\"");
      }
      out.emplace_back(cols[0], cols[1]);
    }
  };
  load_pairs("pairs.tsv", c.pairs);
  load_pairs("pairs_heldout.tsv", c.heldout_pairs);

  auto load_tags = [&](const std::string& name, std::vector<TagExample>& out) {
    const std::string file = dir + "/" + name;
    std::vector<std::string> lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::vector<std::string> cols = split(lines[i], '\t');
      if (cols.size() != 3 || cols[0].empty()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) +
                                   ": expected id<TAB>tokens<TAB>tags");
      }
      TagExample ex;
      ex.id = cols[0];
      ex.tokens = split(cols[1], ' ');
      ex.tags = split(cols[2], ' ');
      if (ex.tokens.empty() || ex.tokens.size() != ex.tags.size()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) +
                                   ": token/tag counts disagree");
      }
      check_tokens(ex.tokens, file, i + 1);
      out.push_back(std::move(ex));
    }
  };
  load_tags("tag_train.tsv", c.tag_train);
  load_tags("tag_test.tsv", c.tag_test);

  auto load_nli = [&](const std::string& name, std::vector<PairExample>& out) {
    const std::string file = dir + "/" + name;
    std::vector<std::string> lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::vector<std::string> cols = split(lines[i], '\t');
      if (cols.size() != 4 || cols[0].empty()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) +
                                   ": expected id<TAB>premise<TAB>hypothesis<TAB>label");
      }
      PairExample ex;
      ex.id = cols[0];
      ex.premise = split(cols[1], ' ');
      ex.hypothesis = split(cols[2], ' ');
      ex.label = cols[3];
      if (ex.premise.empty() || ex.hypothesis.empty()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) + ": empty sentence");
      }
      if (ex.label != "entailment" && ex.label != "neutral" && ex.label != "contradiction") {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) + ": unknown label \"" +
                                   ex.label + "\"");
      }
      check_tokens(ex.premise, file, i + 1);
      check_tokens(ex.hypothesis, file, i + 1);
      out.push_back(std::move(ex));
    }
  };
  load_nli("nli_train.tsv", c.nli_train);
  load_nli("nli_test.tsv", c.nli_test);

  auto load_copy = [&](const std::string& name, std::vector<SeqExample>& out) {
    const std::string file = dir + "/" + name;
    std::vector<std::string> lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::vector<std::string> cols = split(lines[i], '\t');
      if (cols.size() != 3 || cols[0].empty()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) +
                                   ": expected id<TAB>source<TAB>target");
      }
      SeqExample ex;
      ex.id = cols[0];
      ex.source = split(cols[1], ' ');
      ex.target = split(cols[2], ' ');
      if (ex.source.empty() || ex.target.empty()) {
        fail(ErrorKind::Parse, file + ":" + std::to_string(i + 1) + ": empty sequence");
      }
      check_tokens(ex.source, file, i + 1);
      check_tokens(ex.target, file, i + 1);
      out.push_back(std::move(ex));
    }
  };
  load_copy("copy_train.tsv", c.copy_train);
  load_copy("copy_test.tsv", c.copy_test);

  return c;
}

}  // namespace visaw
