// Copyright 2026 The nestterm Authors.
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

// nestterm command-line tool.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "nestterm/nestterm.hpp"

namespace fs = std::filesystem;
using namespace nestterm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  uint64_t seed = 0;
  std::string config;
  bool quiet = false;
  bool lenient = false;
};

void report_error(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

std::string config_path(const Globals& g) {
  if (!g.config.empty()) return g.config;
  if (const char* env = std::getenv("NESTTERM_CONFIG"); env && *env) return env;
  return {};
}

// Config file: ExperimentConfig keys plus an optional "lemma_table" path,
// resolved relative to the config file.
ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig cfg;
  const std::string path = config_path(g);
  if (path.empty()) return cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("config '" + path + "': " + e.what());
  }
  if (j.contains("lemma_table")) {
    fs::path table = j["lemma_table"].get<std::string>();
    if (table.is_relative()) table = fs::path(path).parent_path() / table;
    cfg.lemma_table = LemmaTable::load(table);
    j.erase("lemma_table");
  }
  return experiment_config_from_json(j, cfg);
}

TaggerSpec load_tagger(const std::string& path, const ExperimentConfig& cfg) {
  if (path.empty()) return cfg.tagger;
  try {
    return tagger_spec_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error("tagger config '" + path + "': " + e.what());
  }
}

LoadOptions load_options(const Globals& g) { return LoadOptions{!g.lenient}; }

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
  } else {
    write_file_atomic(out, content);
  }
}

std::string corpus_text(const Corpus& c) {
  std::ostringstream buf;
  write_corpus(c, buf);
  return buf.str();
}

void note(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested term extraction from flat span annotations"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Root seed; stages derive their own seeds from it");
  app.add_option("--config", g.config, "Experiment config JSON (default: $NESTTERM_CONFIG)");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");
  app.add_flag("--lenient", g.lenient, "Snap mid-token entity boundaries outward instead of rejecting them");

  std::string input, output;

  auto* stats = app.add_subcommand("stats", "Nesting statistics of a corpus");
  stats->add_option("--input", input, "Corpus JSONL")->required();
  stats->add_option("--out", output, "Report JSON (default stdout)");

  auto* flatten_cmd = app.add_subcommand("flatten", "Outermost projection of a corpus");
  flatten_cmd->add_option("--input", input, "Corpus JSONL")->required();
  flatten_cmd->add_option("--out", output, "Flat corpus JSONL (default stdout)");

  std::string mode = "surface", lemma_table, hits_out;
  auto* incl = app.add_subcommand("inclusions", "Label repeats of flat terms inside other flat terms");
  incl->add_option("--input", input, "Flat corpus JSONL")->required();
  incl->add_option("--out", output, "Merged corpus JSONL (default stdout)");
  incl->add_option("--mode", mode, "surface or lemma")->check(CLI::IsMember({"surface", "lemma"}));
  incl->add_option("--lemma-table", lemma_table, "Suffix rule file (default: config or built-in Russian rules)");
  incl->add_option("--hits", hits_out, "Write hit audit records as JSONL");

  size_t k = 5;
  std::string dmg_mode = "early", tagger_cfg, records_out, policy;
  auto* dcv = app.add_subcommand("damage-cv", "Damaged cross-prediction pseudo-labels");
  dcv->add_option("--input", input, "Flat corpus JSONL")->required();
  dcv->add_option("--out", output, "Merged corpus JSONL")->required();
  dcv->add_option("--k", k, "Number of folds")->check(CLI::PositiveNumber);
  dcv->add_option("--mode", dmg_mode, "early or late")->check(CLI::IsMember({"early", "late"}));
  dcv->add_option("--tagger", tagger_cfg, "Tagger config JSON");
  dcv->add_option("--records", records_out, "Damage records JSONL (default: damage_records.jsonl next to --out)");
  dcv->add_option("--policy", policy, "same-length, mask or vocabulary")
      ->check(CLI::IsMember({"same-length", "mask", "vocabulary"}));
  dcv->add_option("--seed", g.seed, "Root seed");

  std::string model_path, descriptions;
  auto* train_cmd = app.add_subcommand("train", "Train the bi-encoder tagger");
  train_cmd->add_option("--input", input, "Training corpus JSONL")->required();
  train_cmd->add_option("--model", model_path, "Output model (.json text, anything else CBOR)")->required();
  train_cmd->add_option("--tagger", tagger_cfg, "Tagger config JSON");

  auto* predict_cmd = app.add_subcommand("predict", "Tag documents with a trained model");
  predict_cmd->add_option("--model", model_path, "Model file")->required();
  predict_cmd->add_option("--input", input, "Documents JSONL; entities are ignored")->required();
  predict_cmd->add_option("--out", output, "Predicted corpus JSONL (default stdout)");

  std::string gold, pred, weights, partition = "all", json_out, text_out, format = "text";
  int track = 1;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against gold");
  eval_cmd->add_option("--gold", gold, "Gold corpus JSONL")->required();
  eval_cmd->add_option("--pred", pred, "Predicted corpus JSONL")->required();
  eval_cmd->add_option("--track", track, "1: class-agnostic, 2/3: class-aware weighted")->check(CLI::Range(1, 3));
  eval_cmd->add_option("--weights", weights, "Class weights JSON");
  eval_cmd->add_option("--partition", partition, "overall, inner, outer or all")
      ->check(CLI::IsMember({"overall", "inner", "outer", "all"}));
  eval_cmd->add_option("--json", json_out, "Write the JSON report here");
  eval_cmd->add_option("--text", text_out, "Write the text table here");
  eval_cmd->add_option("--format", format, "stdout format: text or json")->check(CLI::IsMember({"text", "json"}));

  std::string preset, train_path, dev_path, runs_root = "runs", run_dir, manifest;
  auto* exp = app.add_subcommand("experiment", "Run one preset end to end");
  std::vector<std::string> preset_names;
  for (const auto& p : presets()) preset_names.push_back(p.name);
  exp->add_option("--preset", preset, "Preset name")->check(CLI::IsMember(preset_names));
  exp->add_option("--train", train_path, "Nested gold training corpus JSONL");
  exp->add_option("--dev", dev_path, "Nested gold dev corpus JSONL");
  exp->add_option("--lemma-table", lemma_table, "Suffix rule file");
  exp->add_option("--runs-root", runs_root, "Parent of timestamped run directories");
  exp->add_option("--run-dir", run_dir, "Exact run directory");
  exp->add_option("--manifest", manifest, "Replay a recorded manifest");
  exp->add_option("--seed", g.seed, "Root seed");

  std::string kind = "benchmark", out_dir;
  size_t docs = 300, dev_docs = 100;
  auto* gen = app.add_subcommand("generate", "Write a synthetic nested corpus");
  gen->add_option("--kind", kind, "benchmark or fit")->check(CLI::IsMember({"benchmark", "fit"}));
  gen->add_option("--out-dir", out_dir, "Output directory")->required();
  gen->add_option("--docs", docs, "Training documents");
  gen->add_option("--dev-docs", dev_docs, "Dev documents (benchmark only)");
  gen->add_option("--seed", g.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  }

  try {
    if (*stats) {
      const auto report = corpus_stats(load_corpus(input, load_options(g)));
      emit(output, to_json(report).dump(2) + "\n");
    } else if (*flatten_cmd) {
      emit(output, corpus_text(flatten(load_corpus(input, load_options(g)))));
    } else if (*incl) {
      const ExperimentConfig cfg = load_config(g);
      const Corpus corpus = load_corpus(input, load_options(g));
      std::vector<InclusionHit> hits;
      if (mode == "surface") {
        hits = find_inclusions(corpus);
      } else {
        hits = find_lemmatized_inclusions(corpus, lemma_table.empty() ? cfg.lemma_table : LemmaTable::load(lemma_table));
      }
      auto merged = merge_pseudo(corpus, to_candidates(hits));
      if (!hits_out.empty()) {
        std::string rows;
        for (const auto& h : hits) rows += to_json(h).dump() + "\n";
        write_file_atomic(hits_out, rows);
      }
      emit(output, corpus_text(merged.corpus));
      note(g, std::to_string(hits.size()) + " hits, " + std::to_string(merged.added) + " added");
    } else if (*dcv) {
      const ExperimentConfig cfg = load_config(g);
      const Corpus corpus = load_corpus(input, load_options(g));
      CrossPredictionOptions opts;
      opts.k = k;
      opts.mode = parse_damage_mode(dmg_mode);
      opts.seed = derive_seed(g.seed, "damage-cv");
      opts.min_word_len = cfg.min_word_len;
      opts.policy = policy.empty() ? cfg.policy : parse_replacement_policy(policy);
      auto cv = run_cross_prediction(corpus, opts, make_trainer(load_tagger(tagger_cfg, cfg)));
      auto merged = harvest_and_merge(corpus, cv.predictions);
      std::string rows;
      for (const auto& r : cv.records) rows += to_json(r).dump() + "\n";
      const fs::path rec = records_out.empty() ? fs::path(output).parent_path() / "damage_records.jsonl"
                                               : fs::path(records_out);
      write_file_atomic(rec, rows);
      write_file_atomic(output, corpus_text(merged.corpus));
      note(g, std::to_string(cv.predictions.size()) + " predictions, " + std::to_string(merged.added) + " added");
    } else if (*train_cmd) {
      const ExperimentConfig cfg = load_config(g);
      TaggerSpec spec = load_tagger(tagger_cfg, cfg);
      if (spec.kind != TaggerSpec::Kind::biencoder) throw UsageError("train supports the biencoder tagger only");
      spec.config.seed = derive_seed(g.seed, "train");
      TrainTrace trace;
      const auto model = nestterm::train(load_corpus(input, load_options(g)), spec.descriptions, spec.config, &trace);
      save_model(model, model_path);
      if (!trace.epoch_loss.empty()) note(g, "final epoch loss " + std::to_string(trace.epoch_loss.back()));
    } else if (*predict_cmd) {
      const auto model = load_model(model_path);
      const Corpus docs = load_corpus(input, load_options(g));
      emit(output, corpus_text(predict_corpus([&](const Document& d) { return predict(model, d); }, docs)));
    } else if (*eval_cmd) {
      const Corpus g_docs = load_corpus(gold, load_options(g));
      const Corpus p_docs = load_corpus(pred, load_options(g));
      std::optional<std::map<TermClass, double>> w;
      if (!weights.empty()) w = weights_from_json(nlohmann::json::parse(read_file(weights)));
      std::vector<EvalReport> reports;
      std::vector<Partition> parts;
      if (partition == "all") parts = {Partition::overall, Partition::inner, Partition::outer};
      else parts = {parse_partition(partition)};
      for (Partition p : parts) reports.push_back(report(g_docs, p_docs, {track != 1, p, track == 1 ? std::nullopt : w}));
      const Scoreboard sb = scoreboard(g_docs, p_docs, track, w);
      nlohmann::ordered_json j;
      j["track"] = track;
      j["primary"] = sb.primary;
      if (sb.class_agnostic_f1) j["class_agnostic_f1"] = *sb.class_agnostic_f1;
      j["reports"] = nlohmann::ordered_json::array();
      for (const auto& r : reports) j["reports"].push_back(to_json(r));
      std::ostringstream text;
      text << "track " << track << "  primary " << detail::pct(sb.primary) << "\n\n" << render_text(reports);
      if (!json_out.empty()) write_file_atomic(json_out, j.dump(2) + "\n");
      if (!text_out.empty()) write_file_atomic(text_out, text.str());
      std::cout << (format == "json" ? j.dump(2) + "\n" : text.str());
    } else if (*exp) {
      RunRequest req;
      if (!manifest.empty()) {
        if (!preset.empty() || !train_path.empty() || !dev_path.empty()) {
          throw UsageError("--manifest cannot be combined with --preset, --train or --dev");
        }
        const auto m = nlohmann::json::parse(read_file(manifest));
        const std::string name = m.value("preset", std::string());
        req = request_from_manifest(m, run_dir.empty() ? timestamped_run_dir(runs_root, name) : fs::path(run_dir));
      } else {
        if (preset.empty() || train_path.empty() || dev_path.empty()) {
          throw UsageError("experiment needs --preset, --train and --dev (or --manifest)");
        }
        find_preset(preset);
        req.preset = preset;
        req.seed = g.seed;
        req.train = train_path;
        req.dev = dev_path;
        req.config = load_config(g);
        if (!lemma_table.empty()) req.config.lemma_table = LemmaTable::load(lemma_table);
        req.load = load_options(g);
        req.run_dir = run_dir.empty() ? timestamped_run_dir(runs_root, preset) : fs::path(run_dir);
      }
      note(g, "running " + req.preset + " into " + req.run_dir.string());
      run_and_record(req);
      std::cout << (req.run_dir / "manifest.json").string() << "\n";
      if (!g.quiet) std::cerr << read_file(req.run_dir / "report.txt");
    } else if (*gen) {
      fs::create_directories(out_dir);
      const fs::path dir = out_dir;
      if (kind == "fit") {
        write_file_atomic(dir / "train.jsonl", corpus_text(synthetic::make_fit_corpus(docs, g.seed)));
      } else {
        const auto bm = synthetic::make_benchmark(g.seed, docs, dev_docs);
        write_file_atomic(dir / "train.jsonl", corpus_text(bm.train));
        write_file_atomic(dir / "dev.jsonl", corpus_text(bm.dev));
        write_file_atomic(dir / "lemma_table.tsv", synthetic::lemma_table_text());
      }
    }
  } catch (const UsageError& e) {
    report_error("usage", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("data", e.what());
    return 1;
  }
  return 0;
}
