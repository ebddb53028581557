// Copyright 2026 The ctalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ctalign: command-line front end. Results go to stdout, diagnostics and the
// resolved configuration to stderr. Exit codes: 0 ok, 1 usage, 2 data error.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctalign/corpus.hpp"
#include "ctalign/efm.hpp"
#include "ctalign/embed.hpp"
#include "ctalign/gradcheck.hpp"
#include "ctalign/labeler.hpp"
#include "ctalign/losses.hpp"
#include "ctalign/metrics.hpp"
#include "ctalign/retrieval.hpp"
#include "ctalign/toytrain.hpp"
#include "json.hpp"

namespace {

using namespace ctalign;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

Level log_level() {
  static const Level level = [] {
    const char* env = std::getenv("CTALIGN_LOG_LEVEL");
    const std::string v = env ? env : "info";
    if (v == "error") return Level::kError;
    if (v == "warn") return Level::kWarn;
    if (v == "debug") return Level::kDebug;
    return Level::kInfo;
  }();
  return level;
}

void log(Level level, const std::string& msg) {
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  if (level <= log_level()) std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << msg << "\n";
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

// Writes to the named file, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw Error("cannot open " + path + " for writing");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string closest(const std::string& word, const std::vector<std::string>& names) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& n : names) {
    const auto d = edit_distance(word, n);
    if (d < best_d) best_d = d, best = n;
  }
  return best;
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

struct Args {
  // shared
  std::string corpus, out = "-", keywords;
  std::uint64_t seed = 0;
  bool entropy = false;
  double temperature = 0.07;
  // retrieve / zeroshot
  std::string queries, gallery, images, positive, negative, render;
  std::string positive_template{PromptPair::kDefaultPositive}, negative_template{PromptPair::kDefaultNegative};
  std::size_t k = 1;
  double zs_temperature = 1.0;
  // roco / distill
  std::string img, txt, positives_path, student, teacher, grad_out, reduction = "sum";
  bool symmetric = false;
  // mask
  std::string lexicon, mask_token = "[MASK]";
  double entity_rate = 0.5, random_rate = 0.15, max_fraction = 0.30;
  // eval
  std::string generated, reference, format = "tsv";
  // train-toy
  std::string config;
  // gradcheck
  std::string loss;
  std::size_t rows = 8, cols = 16;
  double step = 1e-5;
  // hu-normalize
  std::vector<double> values;
  std::string raw_in;
  double hu_low = -1150.0, hu_high = 350.0;
  // emb-info
  std::string file;
};

int cmd_retrieve(const Args& a) {
  const auto results = retrieve(read_embeddings(a.queries), read_embeddings(a.gallery), a.k);
  Output out(a.out);
  auto& os = out.stream();
  os << "query_index\tmatched_index\tscore" << (a.k > 1 ? "\ttop_k" : "") << "\n";
  for (const auto& r : results) {
    os << r.query_index << "\t" << r.matched_index << "\t" << num(r.score);
    if (a.k > 1) {
      os << "\t";
      for (std::size_t j = 0; j < r.top_k.size(); ++j) {
        os << (j ? "," : "") << r.top_k[j].index << ":" << num(r.top_k[j].score);
      }
    }
    os << "\n";
  }
  return 0;
}

int cmd_zeroshot(const Args& a) {
  const PromptPair prompts(a.positive_template, a.negative_template);
  if (!a.render.empty()) {
    const auto r = render_prompts(prompts, a.render);
    for (const auto& w : r.warnings) log(Level::kWarn, w);
    std::cout << "positive\t" << r.positive << "\nnegative\t" << r.negative << "\n";
    return 0;
  }
  if (a.images.empty() || a.positive.empty() || a.negative.empty()) {
    throw CLI::ValidationError("zeroshot needs --images, --positive and --negative (or --render)");
  }
  const auto img = read_embeddings(a.images);
  const auto pos = read_embeddings(a.positive);
  const auto neg = read_embeddings(a.negative);
  if (pos.rows() != neg.rows()) {
    throw DimensionMismatchError("positive and negative prompt files have " + std::to_string(pos.rows()) +
                                 " and " + std::to_string(neg.rows()) + " rows");
  }
  Output out(a.out);
  auto& os = out.stream();
  os << "image_index\tprompt_index\tprobability\tpresent\n";
  for (std::size_t i = 0; i < img.rows(); ++i) {
    for (std::size_t p = 0; p < pos.rows(); ++p) {
      const double prob = zero_shot_probability(img.row(i), pos.row(p), neg.row(p), a.zs_temperature);
      os << i << "\t" << p << "\t" << num(prob) << "\t" << (zero_shot_present(prob) ? 1 : 0) << "\n";
    }
  }
  return 0;
}

int cmd_roco(const Args& a) {
  const auto img = read_embeddings(a.img);
  const auto txt = read_embeddings(a.txt);
  const auto positives =
      a.positives_path.empty() ? PositiveSetMap::singletons(img.rows()) : PositiveSetMap::load(a.positives_path);
  const auto loss = roco_loss(img, txt, positives, RocoOptions{a.temperature, a.symmetric});
  std::cout << num(loss.value) << "\n";
  if (!a.grad_out.empty()) {
    write_embeddings(EmbeddingMatrix(loss.gradients[0]), a.grad_out + ".img.emb");
    write_embeddings(EmbeddingMatrix(loss.gradients[1]), a.grad_out + ".txt.emb");
  }
  return 0;
}

int cmd_distill(const Args& a) {
  const auto loss = distill_loss(read_embeddings(a.student), read_embeddings(a.teacher),
                                 a.reduction == "mean" ? Reduction::kMean : Reduction::kSum);
  std::cout << "loss\tpairwise\trelation\n"
            << num(loss.value) << "\t" << num(loss.pairwise) << "\t" << num(loss.relation) << "\n";
  if (!a.grad_out.empty()) write_embeddings(EmbeddingMatrix(loss.gradients[0]), a.grad_out);
  return 0;
}

KeywordTable keyword_table(const Args& a) {
  return a.keywords.empty() ? KeywordTable::defaults() : KeywordTable::load(a.keywords);
}

int cmd_label(const Args& a) {
  const auto corpus = load_corpus(a.corpus);
  const auto table = keyword_table(a);
  Output out(a.out);
  auto& os = out.stream();
  os << "id";
  for (auto name : kPathologyNames) os << "\t" << name;
  os << "\tnegated\n";
  for (const auto& r : corpus) {
    const auto labels = extract_labels(r, table);
    os << r.id();
    std::vector<std::string> negated;
    for (Pathology p : kAllPathologies) {
      os << "\t" << (labels[p] ? 1 : 0);
      for (const auto& ev : labels.evidence[index_of(p)]) {
        if (ev.negated) negated.push_back(ev.keyword);
      }
    }
    os << "\t";
    if (negated.empty()) os << "-";
    for (std::size_t j = 0; j < negated.size(); ++j) os << (j ? "," : "") << negated[j];
    os << "\n";
  }
  return 0;
}

int cmd_healthy(const Args& a) {
  const auto corpus = load_corpus(a.corpus);
  Output out(a.out);
  auto& os = out.stream();
  os << "id\thealthy\n";
  for (const auto& r : corpus) os << r.id() << "\t" << (is_healthy_report(r) ? 1 : 0) << "\n";
  return 0;
}

int cmd_positives(const Args& a) {
  Output out(a.out);
  out.stream() << build_positive_sets(load_corpus(a.corpus)).to_json().dump() << "\n";
  return 0;
}

int cmd_mask(const Args& a) {
  const auto corpus = load_corpus(a.corpus);
  const auto lex = a.lexicon.empty() ? PhraseLexicon::defaults() : PhraseLexicon::load(a.lexicon);
  const MaskRates rates{a.entity_rate, a.random_rate, a.max_fraction};
  const std::uint64_t base = a.entropy ? entropy_seed() : a.seed;
  if (a.entropy) log(Level::kInfo, "entropy seed " + std::to_string(base));
  std::ofstream masked(a.out), sidecar(a.out + ".plan.jsonl");
  if (!masked || !sidecar) throw Error("cannot open " + a.out + " for writing");
  std::size_t total = 0, hidden = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto tokens = token_texts(corpus[i].tokens());
    const auto plan = plan_mask(tokens, lex, rates, base + i);
    const auto out_tokens = apply_mask(tokens, plan, a.mask_token);
    for (std::size_t j = 0; j < out_tokens.size(); ++j) masked << (j ? " " : "") << out_tokens[j];
    masked << "\n";
    sidecar << nlohmann::json{{"id", corpus[i].id()}, {"plan", plan.to_json()}}.dump() << "\n";
    total += tokens.size();
    hidden += plan.masked_count();
  }
  std::cout << "reports\t" << corpus.size() << "\ntokens\t" << total << "\nmasked\t" << hidden << "\n";
  return 0;
}

int cmd_eval_report(const Args& a) {
  const auto ev = eval_reports(load_corpus(a.generated), load_corpus(a.reference), keyword_table(a));
  auto undefined = [](const Prf& p) {
    std::string s;
    if (p.precision_undefined) s += "P";
    if (p.recall_undefined) s += "R";
    if (p.f1_undefined) s += "F";
    return s.empty() ? std::string("-") : s;
  };
  if (a.format == "text") {
    std::printf("%-18s %5s %5s %5s %5s %11s %11s %11s\n", "entity", "tp", "fp", "fn", "tn", "precision", "recall",
                "f1");
    for (Pathology p : kAllPathologies) {
      const auto& c = ev.counts[p];
      const auto& s = ev.scores.per_entity[index_of(p)];
      std::printf("%-18s %5zu %5zu %5zu %5zu %11.9f %11.9f %11.9f%s\n", std::string(name_of(p)).c_str(), c.tp, c.fp,
                  c.fn, c.tn, s.precision, s.recall, s.f1, s.any_undefined() ? " *" : "");
    }
    const auto& m = ev.scores.macro;
    std::printf("%-18s %5s %5s %5s %5s %11.9f %11.9f %11.9f\n", "macro", "", "", "", "", m.precision, m.recall,
                m.f1);
    std::printf("* a 0/0 ratio was reported as 0\n");
    return 0;
  }
  std::cout << "entity\ttp\tfp\tfn\ttn\tprecision\trecall\tf1\tundefined\n";
  for (Pathology p : kAllPathologies) {
    const auto& c = ev.counts[p];
    const auto& s = ev.scores.per_entity[index_of(p)];
    std::cout << name_of(p) << "\t" << c.tp << "\t" << c.fp << "\t" << c.fn << "\t" << c.tn << "\t"
              << num(s.precision) << "\t" << num(s.recall) << "\t" << num(s.f1) << "\t" << undefined(s) << "\n";
  }
  const auto& m = ev.scores.macro;
  std::cout << "macro\t-\t-\t-\t-\t" << num(m.precision) << "\t" << num(m.recall) << "\t" << num(m.f1) << "\t"
            << undefined(m) << "\n";
  return 0;
}

int cmd_eval_nlp(const Args& a) {
  const auto s = eval_nlp(load_corpus(a.generated), load_corpus(a.reference));
  if (s.cider_degenerate) log(Level::kWarn, "CIDEr-D document frequencies come from fewer than 2 references");
  if (s.inexact_meteor) log(Level::kWarn, std::to_string(s.inexact_meteor) + " METEOR alignments were truncated");
  if (s.empty_candidates) log(Level::kWarn, std::to_string(s.empty_candidates) + " generated reports are empty");
  std::cout << "metric\tvalue\n"
            << "BLEU-4\t" << num(s.bleu4) << "\nROUGE-L\t" << num(s.rouge_l) << "\nCIDEr-D\t" << num(s.cider)
            << "\nMETEOR\t" << num(s.meteor) << "\n";
  return 0;
}

int cmd_train_toy(const Args& a) {
  toy::ToyRunConfig cfg;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw Error("cannot open config " + a.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + a.config + ": " + e.what());
    }
    cfg = toy::ToyRunConfig::from_json(j);
  }
  namespace fs = std::filesystem;
  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << cfg.to_json().dump(2) << "\n";

  const auto ds = toy::make_synthetic(cfg.data);
  const auto teacher = toy::make_teacher(ds, cfg.train.embed_dim, cfg.train.seed);
  const auto result = toy::train(ds, teacher, cfg.train);
  {
    std::ofstream tsv(dir / "loss.tsv");
    tsv << "epoch\ttotal\tcontrastive\tdistill\n";
    for (const auto& e : result.trace) {
      tsv << e.epoch << "\t" << num(e.total) << "\t" << num(e.contrastive) << "\t" << num(e.distill) << "\n";
    }
  }
  write_embeddings(toy::encode(result.image_encoder, ds.image_features), (dir / "image.emb").string());
  write_embeddings(toy::encode(result.text_encoder, ds.text_features), (dir / "text.emb").string());
  write_embeddings(teacher, (dir / "teacher.emb").string());

  const auto rows = toy::run_ablation(cfg.data, cfg.train, cfg.ablation_seeds);
  std::size_t wins = 0;
  {
    std::ofstream tsv(dir / "ablation.tsv");
    tsv << "seed\trecall_roco\trecall_infonce\tmargin\n";
    for (const auto& r : rows) {
      wins += r.recall_roco > r.recall_infonce;
      tsv << r.seed << "\t" << num(r.recall_roco) << "\t" << num(r.recall_infonce) << "\t"
          << num(r.recall_roco - r.recall_infonce) << "\n";
    }
  }
  std::cout << "loss_initial\t" << num(result.trace.front().total) << "\nloss_final\t"
            << num(result.trace.back().total) << "\nrecall_before\t" << num(result.recall_before)
            << "\nrecall_after\t" << num(result.recall_after) << "\nrelation_distance_before\t"
            << num(result.relation_distance_before) << "\nrelation_distance_after\t"
            << num(result.relation_distance_after) << "\nablation_roco_wins\t" << wins << "/" << rows.size() << "\n";
  return 0;
}

int cmd_gradcheck(const Args& a) {
  toy::GradcheckOptions opt;
  opt.rows = a.rows;
  opt.cols = a.cols;
  opt.seed = a.seed;
  opt.step = a.step;
  opt.temperature = a.temperature;
  const auto r = toy::gradcheck(a.loss, opt);
  std::cout << "loss\tmax_relative_error\tmax_absolute_error\tentries\n"
            << a.loss << "\t" << num(r.max_relative_error) << "\t" << num(r.max_absolute_error) << "\t" << r.entries
            << "\n";
  return 0;
}

int cmd_hu_normalize(const Args& a) {
  const HUWindow w(a.hu_low, a.hu_high);
  if (!a.raw_in.empty()) {
    const auto bytes = read_file_bytes(a.raw_in);
    if (bytes.size() % sizeof(float) != 0) {
      throw ParseError(ParseError::Kind::kTruncated, bytes.size(), a.raw_in + ": size is not a multiple of 4");
    }
    std::vector<float> voxels(bytes.size() / sizeof(float));
    std::memcpy(voxels.data(), bytes.data(), bytes.size());
    hu_normalize(std::span<float>(voxels), w);
    if (a.out == "-") throw CLI::ValidationError("--raw needs --out");
    std::ofstream out(a.out, std::ios::binary);
    out.write(reinterpret_cast<const char*>(voxels.data()), static_cast<std::streamsize>(bytes.size()));
    std::cout << "voxels\t" << voxels.size() << "\n";
    return 0;
  }
  for (double v : a.values) std::cout << num(hu_normalize(v, w)) << "\n";
  return 0;
}

int cmd_emb_info(const Args& a) {
  const auto e = read_embeddings(a.file);
  std::cout << "rows\t" << e.rows() << "\ndim\t" << e.dim() << "\nnormalized\t" << (e.normalized() ? "true" : "false")
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctalign: CT/report alignment toolkit"};
  app.require_subcommand(1);
  Args a;

  auto* retrieve_cmd = app.add_subcommand("retrieve", "nearest gallery row for every query by cosine");
  retrieve_cmd->add_option("--queries", a.queries, "query embeddings")->required();
  retrieve_cmd->add_option("--gallery", a.gallery, "gallery embeddings")->required();
  retrieve_cmd->add_option("-k", a.k, "neighbours to list")->capture_default_str()->check(CLI::PositiveNumber);
  retrieve_cmd->add_option("--out", a.out, "TSV output, - for stdout")->capture_default_str();

  auto* zs = app.add_subcommand("zeroshot", "presence probability from positive/negative prompt embeddings");
  zs->add_option("--images", a.images, "image embeddings");
  zs->add_option("--positive", a.positive, "positive prompt embeddings, one row per entity");
  zs->add_option("--negative", a.negative, "negative prompt embeddings, one row per entity");
  zs->add_option("-t,--temperature", a.zs_temperature, "softmax temperature")->capture_default_str();
  zs->add_option("--render", a.render, "print the prompt pair for an entity and exit");
  zs->add_option("--positive-template", a.positive_template)->capture_default_str();
  zs->add_option("--negative-template", a.negative_template)->capture_default_str();
  zs->add_option("--out", a.out, "TSV output, - for stdout")->capture_default_str();

  auto* roco = app.add_subcommand("roco", "robust contrastive loss");
  roco->add_option("--img", a.img, "image embeddings")->required();
  roco->add_option("--txt", a.txt, "text embeddings")->required();
  roco->add_option("--positives", a.positives_path, "positive sets JSON; default: own pair only");
  roco->add_option("-t,--temperature", a.temperature)->capture_default_str();
  roco->add_flag("--symmetric", a.symmetric, "average both retrieval directions");
  roco->add_option("--grad-out", a.grad_out, "write gradients to PREFIX.img.emb and PREFIX.txt.emb");

  auto* distill = app.add_subcommand("distill", "dual distillation loss");
  distill->add_option("--student", a.student)->required();
  distill->add_option("--teacher", a.teacher)->required();
  distill->add_option("--reduction", a.reduction)->capture_default_str()->check(CLI::IsMember({"sum", "mean"}));
  distill->add_option("--grad-out", a.grad_out, "write the student gradient as embeddings");

  auto* label = app.add_subcommand("label", "keyword pathology labels per report");
  label->add_option("--corpus", a.corpus)->required();
  label->add_option("--keywords", a.keywords, "keyword table JSON");
  label->add_option("--out", a.out)->capture_default_str();

  auto* healthy = app.add_subcommand("healthy", "flag reports whose conclusion states health");
  healthy->add_option("--corpus", a.corpus)->required();
  healthy->add_option("--out", a.out)->capture_default_str();

  auto* positives = app.add_subcommand("positives", "positive sets after false-negative correction");
  positives->add_option("--corpus", a.corpus)->required();
  positives->add_option("--out", a.out)->capture_default_str();

  auto* mask = app.add_subcommand("mask", "entity-focused masking");
  mask->add_option("--corpus", a.corpus)->required();
  mask->add_option("--lexicon", a.lexicon, "phrase lexicon JSON");
  mask->add_option("--seed", a.seed, "base seed; report i uses seed + i")->capture_default_str();
  mask->add_flag("--entropy", a.entropy, "draw the base seed from the system entropy source");
  mask->add_option("--entity-rate", a.entity_rate)->capture_default_str();
  mask->add_option("--random-rate", a.random_rate)->capture_default_str();
  mask->add_option("--max-fraction", a.max_fraction)->capture_default_str();
  mask->add_option("--mask-token", a.mask_token)->capture_default_str();
  mask->add_option("--out", a.out, "masked lines; plans go to OUT.plan.jsonl")->required();

  auto* eval_report = app.add_subcommand("eval-report", "per-entity precision/recall/F1");
  eval_report->add_option("--generated", a.generated)->required();
  eval_report->add_option("--reference", a.reference)->required();
  eval_report->add_option("--keywords", a.keywords, "keyword table JSON");
  eval_report->add_option("--format", a.format)->capture_default_str()->check(CLI::IsMember({"tsv", "text"}));

  auto* eval_nlp_cmd = app.add_subcommand("eval-nlp", "BLEU-4, ROUGE-L, CIDEr-D and METEOR");
  eval_nlp_cmd->add_option("--generated", a.generated)->required();
  eval_nlp_cmd->add_option("--reference", a.reference)->required();

  auto* train_toy = app.add_subcommand("train-toy", "train linear encoders on synthetic data");
  train_toy->add_option("--config", a.config, "JSON config; missing keys keep defaults");
  train_toy->add_option("--out", a.out, "output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  gc->add_option("--loss", a.loss)->required()->check(CLI::IsMember({"roco", "infonce", "distill"}));
  gc->add_option("--seed", a.seed)->capture_default_str();
  gc->add_option("--rows", a.rows)->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("--cols", a.cols)->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("-t,--temperature", a.temperature)->capture_default_str();
  gc->add_option("--step", a.step)->capture_default_str();

  auto* hu = app.add_subcommand("hu-normalize", "clamp HU values to the window and map to [-1, 1]");
  hu->add_option("values", a.values, "HU values");
  hu->add_option("--raw", a.raw_in, "little-endian float32 volume");
  hu->add_option("--out", a.out, "output for --raw")->capture_default_str();
  hu->add_option("--low", a.hu_low)->capture_default_str();
  hu->add_option("--high", a.hu_high)->capture_default_str();

  auto* info = app.add_subcommand("emb-info", "print rows, dim and normalized flag");
  info->add_option("file", a.file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (argc > 1 && argv[1][0] != '-') {
      std::vector<std::string> names;
      bool known = false;
      for (const auto* sub : app.get_subcommands({})) {
        names.push_back(sub->get_name());
        known = known || sub->get_name() == argv[1];
      }
      if (!known) std::cerr << "unknown subcommand '" << argv[1] << "'; did you mean '" << closest(argv[1], names) << "'?\n";
    }
    std::cerr << "run with --help for usage\n";
    return kExitUsage;
  }

  const auto* cmd = app.get_subcommands().front();
  {
    std::string echo = cmd->config_to_str(true, false);
    log(Level::kInfo, "subcommand " + cmd->get_name() + "\n" + echo);
  }
  try {
    const std::string& name = cmd->get_name();
    if (name == "retrieve") return cmd_retrieve(a);
    if (name == "zeroshot") return cmd_zeroshot(a);
    if (name == "roco") return cmd_roco(a);
    if (name == "distill") return cmd_distill(a);
    if (name == "label") return cmd_label(a);
    if (name == "healthy") return cmd_healthy(a);
    if (name == "positives") return cmd_positives(a);
    if (name == "mask") return cmd_mask(a);
    if (name == "eval-report") return cmd_eval_report(a);
    if (name == "eval-nlp") return cmd_eval_nlp(a);
    if (name == "train-toy") return cmd_train_toy(a);
    if (name == "gradcheck") return cmd_gradcheck(a);
    if (name == "hu-normalize") return cmd_hu_normalize(a);
    if (name == "emb-info") return cmd_emb_info(a);
  } catch (const CLI::Error& e) {
    log(Level::kError, e.what());
    return kExitUsage;
  } catch (const ctalign::Error& e) {
    log(Level::kError, e.what());
    return kExitData;
  } catch (const std::exception& e) {
    log(Level::kError, e.what());
    return kExitData;
  }
  return kExitUsage;
}
