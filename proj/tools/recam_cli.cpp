#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recam/checkpoint.hpp"
#include "recam/corpus.hpp"
#include "recam/ensemble_eval.hpp"
#include "recam/mcscorer.hpp"
#include "recam/probe.hpp"
#include "recam/run_config.hpp"
#include "recam/tapt.hpp"
#include "recam/textprep.hpp"

namespace fs = std::filesystem;
using namespace recam;

namespace {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kIo = 3,
    kParse = 4,
    kData = 5,
    kNumeric = 6,
};

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return kUsage;
        case ErrorKind::Io: return kIo;
        case ErrorKind::Parse: return kParse;
        case ErrorKind::Data: return kData;
        case ErrorKind::Numeric: return kNumeric;
    }
    return kInternal;
}

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

RunConfig resolve_config(const Common& common) {
    RunConfig config;
    std::string path = common.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    }
    if (!path.empty()) config = RunConfig::from_file(path);
    for (const auto& kv : common.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--set expects key=value, got '" + kv + "'");
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (common.seed) config.set("seed", std::to_string(*common.seed));
    return config;
}

TaskTag task_of(const std::string& text) { return parse_task_tag(text); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

class ManifestScope {
public:
    ManifestScope(std::string command, const RunConfig& config) {
        manifest_.command = std::move(command);
        manifest_.config = config.values();
        manifest_.seed = config.get_u64("seed");
        manifest_.started_at = utc_timestamp();
    }
    void input(const fs::path& path) { manifest_.add_input(path); }
    void output(const fs::path& path) { manifest_.outputs.push_back(path.string()); }
    void finish(const fs::path& artifact) {
        manifest_.finished_at = utc_timestamp();
        write_manifest(manifest_, artifact);
    }

private:
    RunManifest manifest_;
};

std::unique_ptr<Tokenizer> tokenizer_from_config(const RunConfig& config, const std::vector<const DatasetSplit*>& splits) {
    const auto& kind = config.get("tokenizer");
    if (kind == "bpe") {
        if (config.get("bpe_vocab").empty() || config.get("bpe_merges").empty()) {
            throw Error(ErrorKind::InvalidArgument, "tokenizer = bpe needs bpe_vocab and bpe_merges");
        }
        auto tok = ByteLevelBpeTokenizer::from_files(config.get("bpe_vocab"), config.get("bpe_merges"));
        return std::make_unique<ByteLevelBpeTokenizer>(std::move(tok));
    }
    if (kind != "whitespace") throw Error(ErrorKind::InvalidArgument, "tokenizer must be whitespace or bpe");
    std::vector<std::string> texts;
    for (const auto* split : splits) {
        for (const auto& inst : split->instances) {
            texts.push_back(inst.passage);
            texts.push_back(inst.question);
            for (const auto& c : inst.candidates) texts.push_back(c);
        }
    }
    return std::make_unique<WhitespaceTokenizer>(WhitespaceTokenizer::from_texts(texts));
}

DatasetSplit load(const fs::path& path, const std::string& task) { return load_jsonl(path, task_of(task)); }

std::string history_json(const TrainHistory& history, const std::vector<MlmEpochRecord>& tapt) {
    nlohmann::ordered_json j;
    auto epochs = nlohmann::ordered_json::array();
    for (const auto& e : history.epochs) {
        nlohmann::ordered_json r;
        r["epoch"] = e.epoch;
        r["train_loss"] = e.train_loss;
        r["train_accuracy"] = e.train_accuracy;
        r["dev_accuracy"] = e.dev_accuracy ? nlohmann::ordered_json(*e.dev_accuracy) : nlohmann::ordered_json();
        r["improved"] = e.improved;
        epochs.push_back(r);
    }
    j["epochs"] = epochs;
    j["best_epoch"] = history.best_epoch;
    j["best_dev_accuracy"] =
        history.best_dev_accuracy ? nlohmann::ordered_json(*history.best_dev_accuracy) : nlohmann::ordered_json();
    j["updates"] = history.updates;
    auto mlm = nlohmann::ordered_json::array();
    for (const auto& e : tapt) mlm.push_back({{"epoch", e.epoch}, {"loss", e.loss}});
    j["tapt"] = mlm;
    return j.dump(2) + "\n";
}

// ---- commands ---------------------------------------------------------------

struct IngestArgs {
    std::vector<std::string> data;
    std::string task = "subtask1";
    std::string out;
};

int run_ingest(const IngestArgs& a, const RunConfig& config) {
    ManifestScope manifest("ingest", config);
    nlohmann::ordered_json report = nlohmann::ordered_json::array();
    std::cout << std::left << std::setw(28) << "file" << std::right << std::setw(8) << "split" << std::setw(10)
              << "accepted" << std::setw(10) << "rejected" << std::setw(12) << "avg_tokens" << std::setw(12)
              << "avg_words" << '\n';
    for (const auto& file : a.data) {
        auto result = load_jsonl_with_report(file, task_of(a.task));
        manifest.input(file);
        const auto tok = tokenizer_from_config(config, {&result.split});
        std::optional<SplitStats> stats;
        if (!result.split.empty()) stats = split_stats(result.split, *tok);
        std::cout << std::left << std::setw(28) << fs::path(file).filename().string() << std::right << std::setw(8)
                  << to_string(result.split.name) << std::setw(10) << result.report.accepted << std::setw(10)
                  << result.report.rejected << std::fixed << std::setprecision(1) << std::setw(12)
                  << (stats ? stats->avg_passage_tokens : 0.0) << std::setw(12)
                  << (stats ? stats->avg_passage_words : 0.0) << '\n';
        for (const auto& r : result.report.rejections) {
            std::cerr << "  rejected line " << r.line << " (" << r.id << "):";
            for (const auto& issue : r.issues) std::cerr << ' ' << to_string(issue.code);
            std::cerr << '\n';
        }
        nlohmann::ordered_json entry;
        entry["file"] = file;
        entry["split"] = to_string(result.split.name);
        entry["task"] = to_string(result.split.task);
        entry["total"] = result.report.total;
        entry["accepted"] = result.report.accepted;
        entry["rejected"] = result.report.rejected;
        if (stats) {
            entry["avg_passage_tokens"] = stats->avg_passage_tokens;
            entry["avg_passage_words"] = stats->avg_passage_words;
        }
        report.push_back(entry);
    }
    if (!a.out.empty()) {
        write_text(a.out, report.dump(2) + "\n");
        manifest.output(a.out);
        manifest.finish(a.out);
    }
    return kOk;
}

struct ProbeArgs {
    std::string data;
    std::string model;
    std::string task = "subtask1";
    std::string out;
};

int run_probe(const ProbeArgs& a, const RunConfig& config) {
    ManifestScope manifest("probe", config);
    const auto split = load(a.data, a.task);
    const auto ckpt = load_checkpoint(a.model);
    manifest.input(a.data);
    manifest.input(a.model);
    const auto similarity = parse_similarity(config.get("similarity"));
    const int max_len = std::min(config.get_int("max_len"), ckpt.encoder->max_positions());

    std::ostringstream lines;
    std::size_t labeled = 0, correct = 0;
    for (const auto& inst : split.instances) {
        const auto ranked = zero_shot_rank(inst, *ckpt.encoder, *ckpt.tokenizer, similarity, max_len);
        nlohmann::ordered_json j;
        j["id"] = inst.id;
        auto order = nlohmann::ordered_json::array();
        auto scores = nlohmann::ordered_json::array();
        for (const auto& r : ranked) {
            order.push_back(r.index);
            scores.push_back(r.score);
        }
        j["ranking"] = order;
        j["scores"] = scores;
        lines << j.dump() << '\n';
        if (inst.gold_index) {
            ++labeled;
            if (ranked.front().index == *inst.gold_index) ++correct;
        }
    }
    if (labeled) {
        std::cout << "zero-shot accuracy (" << to_string(similarity) << "): "
                  << static_cast<double>(correct) / static_cast<double>(labeled) << " (" << correct << "/" << labeled
                  << ")\n";
    }
    if (!a.out.empty()) {
        write_text(a.out, lines.str());
        manifest.output(a.out);
        manifest.finish(a.out);
    }
    return kOk;
}

struct AugmentArgs {
    std::string data;
    std::string model;
    std::string task = "subtask1";
    std::string out;
};

int run_augment(const AugmentArgs& a, const RunConfig& config) {
    ManifestScope manifest("augment", config);
    const auto split = load(a.data, a.task);
    const auto ckpt = load_checkpoint(a.model);
    manifest.input(a.data);
    manifest.input(a.model);
    const int max_len = std::min(config.get_int("max_len"), ckpt.encoder->max_positions());
    const auto augmented = augment_split(split, *ckpt.encoder, *ckpt.tokenizer, max_len);
    std::size_t skipped = 0, overlap = 0;
    for (const auto& inst : augmented.instances) {
        if (inst.nal->skipped_gold) ++skipped;
        if (inst.nal->matches_distractor) ++overlap;
    }
    save_jsonl(augmented, a.out);
    manifest.output(a.out);
    manifest.finish(a.out);
    std::cout << "augmented " << augmented.size() << " instances; gold was top-1 for " << skipped
              << "; mined word already a distractor for " << overlap << '\n';
    return kOk;
}

struct TaptArgs {
    std::vector<std::string> data;
    std::string model;
    std::string task = "subtask1";
    std::string mode = "within-task";
    std::string out;
    std::string labels;
};

int run_tapt_gen(const TaptArgs& a, const RunConfig& config) {
    ManifestScope manifest("tapt-gen", config);
    std::vector<DatasetSplit> splits;
    for (const auto& file : a.data) {
        splits.push_back(load(file, a.task));
        manifest.input(file);
    }
    std::unique_ptr<Tokenizer> owned;
    Checkpoint ckpt;
    const Tokenizer* tok = nullptr;
    if (!a.model.empty()) {
        ckpt = load_checkpoint(a.model);
        manifest.input(a.model);
        tok = ckpt.tokenizer.get();
    } else {
        std::vector<const DatasetSplit*> ptrs;
        for (const auto& s : splits) ptrs.push_back(&s);
        owned = tokenizer_from_config(config, ptrs);
        tok = owned.get();
    }
    const int max_len = config.get_int("max_len");
    const auto seed = config.get_u64("seed");
    const double rate = config.get_double("tapt_mask_rate");

    std::vector<MlmExample> examples;
    if (a.mode == "within-task") {
        std::vector<std::vector<TokenId>> seqs;
        for (const auto& s : splits) {
            for (auto& seq : gen_within_task(s, *tok, max_len, config.get_int("stride"))) seqs.push_back(std::move(seq));
        }
        examples = mask_sequences(seqs, *tok, rate, seed);
    } else if (a.mode == "in-domain" || a.mode == "nsp") {
        std::vector<std::string> docs;
        for (const auto& s : splits) {
            for (const auto& inst : s.instances) docs.push_back(inst.passage);
        }
        if (a.mode == "nsp") {
            std::ostringstream os;
            for (const auto& p : gen_nsp_pairs(docs, *tok, seed)) {
                os << (p.is_next ? 1 : 0) << '\t';
                for (std::size_t i = 0; i < p.segment_a.size(); ++i) os << (i ? " " : "") << p.segment_a[i];
                os << '\t';
                for (std::size_t i = 0; i < p.segment_b.size(); ++i) os << (i ? " " : "") << p.segment_b[i];
                os << '\n';
            }
            write_text(a.out, os.str());
            manifest.output(a.out);
            manifest.finish(a.out);
            return kOk;
        }
        examples = gen_in_domain_mlm(docs, *tok, rate, seed, max_len);
    } else {
        throw Error(ErrorKind::InvalidArgument, "--mode must be within-task, in-domain or nsp");
    }
    const fs::path labels = a.labels.empty() ? fs::path(a.out + ".labels") : fs::path(a.labels);
    write_mlm_examples(examples, a.out, labels);
    manifest.output(a.out);
    manifest.output(labels);
    manifest.finish(a.out);
    std::cout << "wrote " << examples.size() << " masked-LM examples\n";
    return kOk;
}

struct TrainArgs {
    std::string train;
    std::string dev;
    std::string init;
    std::string task = "subtask1";
    std::string out;
    std::string history;
};

int run_train(const TrainArgs& a, const RunConfig& config) {
    ManifestScope manifest("train", config);
    const auto train_split = load(a.train, a.task);
    manifest.input(a.train);
    DatasetSplit dev_split;
    if (!a.dev.empty()) {
        dev_split = load(a.dev, a.task);
        manifest.input(a.dev);
    }
    const auto tc = config.train_config();

    std::unique_ptr<ReferenceEncoder> encoder;
    std::unique_ptr<Tokenizer> tokenizer;
    std::unique_ptr<ScoringHead> head;
    if (!a.init.empty()) {
        auto ckpt = load_checkpoint(a.init);
        manifest.input(a.init);
        encoder = std::move(ckpt.encoder);
        tokenizer = std::move(ckpt.tokenizer);
        head = std::move(ckpt.head);
    } else {
        tokenizer = tokenizer_from_config(config, {&train_split, &dev_split});
        encoder = std::make_unique<ReferenceEncoder>(
            config.encoder_config(static_cast<int>(tokenizer->vocab_size()), tokenizer->specials().mask));
    }
    if (!head) head = std::make_unique<ScoringHead>(encoder->dim(), tc.seed, config.get_double("init_std"));

    std::vector<MlmEpochRecord> tapt_history;
    const auto mlm = config.tapt_config();
    if (mlm.epochs > 0) {
        const auto seqs = gen_within_task(train_split, *tokenizer, tc.max_len, tc.stride);
        const auto examples = mask_sequences(seqs, *tokenizer, config.get_double("tapt_mask_rate"), tc.seed);
        tapt_history = train_mlm(examples, *encoder, mlm);
    }
    const auto history = train(train_split, dev_split, *encoder, *head, *tokenizer, tc);
    for (const auto& e : history.epochs) {
        std::cerr << "epoch " << e.epoch << " loss " << e.train_loss << " train_acc " << e.train_accuracy;
        if (e.dev_accuracy) std::cerr << " dev_acc " << *e.dev_accuracy;
        std::cerr << (e.improved ? " *" : "") << '\n';
    }

    nlohmann::ordered_json meta;
    meta["best_epoch"] = history.best_epoch;
    meta["updates"] = history.updates;
    save_checkpoint(a.out, *encoder, head.get(), *tokenizer, meta.dump());
    manifest.output(a.out);
    const fs::path history_path = a.history.empty() ? fs::path(a.out + ".history.json") : fs::path(a.history);
    write_text(history_path, history_json(history, tapt_history));
    manifest.output(history_path);
    manifest.finish(a.out);
    if (history.best_dev_accuracy) std::cout << "best dev accuracy " << *history.best_dev_accuracy << '\n';
    return kOk;
}

struct PredictArgs {
    std::string model;
    std::string data;
    std::string task = "subtask1";
    std::string out;
    std::string model_id;
};

int run_predict(const PredictArgs& a, const RunConfig& config) {
    ManifestScope manifest("predict", config);
    const auto ckpt = load_checkpoint(a.model);
    if (!ckpt.head) throw Error(ErrorKind::Data, a.model + " has no scoring head; train it first");
    const auto split = load(a.data, a.task);
    manifest.input(a.model);
    manifest.input(a.data);
    auto tc = config.train_config();
    tc.max_len = std::min(tc.max_len, ckpt.encoder->max_positions());
    const auto id = a.model_id.empty() ? fs::path(a.model).stem().string() : a.model_id;
    const auto preds = predict(split, *ckpt.encoder, *ckpt.head, *ckpt.tokenizer, tc, id);
    write_predictions(preds, a.out);
    manifest.output(a.out);
    manifest.finish(a.out);
    return kOk;
}

struct EnsembleArgs {
    std::vector<std::string> preds;
    std::string out;
};

int run_ensemble(const EnsembleArgs& a, const RunConfig& config) {
    ManifestScope manifest("ensemble", config);
    std::vector<Predictions> members;
    for (const auto& p : a.preds) {
        members.push_back(read_predictions(p));
        manifest.input(p);
    }
    write_predictions(ensemble(members), a.out);
    manifest.output(a.out);
    manifest.finish(a.out);
    return kOk;
}

struct EvaluateArgs {
    std::string pred;
    std::string model;
    std::string data;
    std::string task = "subtask1";
    std::string source_task;
    std::string out;
};

int run_evaluate(const EvaluateArgs& a, const RunConfig& config) {
    const auto split = load(a.data, a.task);
    if (!a.model.empty()) {
        ManifestScope manifest("evaluate", config);
        const auto ckpt = load_checkpoint(a.model);
        if (!ckpt.head) throw Error(ErrorKind::Data, a.model + " has no scoring head");
        manifest.input(a.model);
        manifest.input(a.data);
        auto tc = config.train_config();
        tc.max_len = std::min(tc.max_len, ckpt.encoder->max_positions());
        const auto report = transfer_eval(*ckpt.encoder, *ckpt.head, *ckpt.tokenizer, split, tc,
                                          a.source_task.empty() ? "unknown" : a.source_task);
        std::cout << report.accuracy << '\n';
        if (!a.out.empty()) {
            write_predictions(report.predictions, a.out);
            manifest.output(a.out);
            manifest.finish(a.out);
        }
        return kOk;
    }
    if (a.pred.empty()) throw Error(ErrorKind::InvalidArgument, "evaluate needs --pred or --model");
    const auto preds = read_predictions(a.pred);
    std::cout << accuracy(preds, split) << '\n';
    return kOk;
}

struct LengthArgs {
    std::string pred;
    std::string data;
    std::string model;
    std::string task = "subtask1";
    std::string format = "table";
    std::string out;
};

int run_analyze_length(const LengthArgs& a, const RunConfig& config) {
    ManifestScope manifest("analyze-length", config);
    const auto split = load(a.data, a.task);
    const auto preds = read_predictions(a.pred);
    manifest.input(a.data);
    manifest.input(a.pred);
    std::unique_ptr<Tokenizer> tok;
    if (!a.model.empty()) {
        tok = std::move(load_checkpoint(a.model).tokenizer);
        manifest.input(a.model);
    } else {
        tok = tokenizer_from_config(config, {&split});
    }
    const auto report = length_buckets(preds, split, *tok, config.get_long_list("bucket_edges"));
    std::string text;
    if (a.format == "table") {
        text = bucket_table(report);
    } else if (a.format == "csv") {
        text = bucket_csv(report);
    } else if (a.format == "json") {
        text = bucket_json(report) + "\n";
    } else {
        throw Error(ErrorKind::InvalidArgument, "--format must be table, csv or json");
    }
    if (a.out.empty()) {
        std::cout << text;
    } else {
        write_text(a.out, text);
        manifest.output(a.out);
        manifest.finish(a.out);
    }
    return kOk;
}

struct ErrorsArgs {
    std::string pred;
    std::string data;
    std::string augmented;
    std::string task = "subtask1";
    std::string format = "text";
    std::string out;
};

int run_report_errors(const ErrorsArgs& a, const RunConfig& config) {
    ManifestScope manifest("report-errors", config);
    const auto split = load(a.data, a.task);
    const auto preds = read_predictions(a.pred);
    manifest.input(a.data);
    manifest.input(a.pred);
    std::optional<DatasetSplit> aug;
    if (!a.augmented.empty()) {
        aug = load(a.augmented, a.task);
        manifest.input(a.augmented);
    }
    const auto cases = error_report(preds, split, aug ? &*aug : nullptr);
    std::string text;
    if (a.format == "text") {
        text = error_report_text(cases);
    } else if (a.format == "json") {
        text = error_report_json(cases) + "\n";
    } else {
        throw Error(ErrorKind::InvalidArgument, "--format must be text or json");
    }
    if (a.out.empty()) {
        std::cout << text;
    } else {
        write_text(a.out, text);
        manifest.output(a.out);
        manifest.finish(a.out);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cloze-style multiple-choice reading comprehension pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kPipelineVersion));

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path,
                        std::string("key = value config file (default: $") + kConfigEnvVar + ")");
        sub->add_option("--set", common.overrides, "override a config key, key=value (repeatable)");
        sub->add_option("--seed", common.seed, "shortcut for --set seed=N");
    };
    const std::vector<std::string> tasks{"subtask1", "subtask2", "synthetic"};
    auto add_task = [&](CLI::App* sub, std::string& task) {
        sub->add_option("--task", task, "task tag")->check(CLI::IsMember(tasks));
    };

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "validate data files and print split statistics");
    c_ingest->add_option("--data", ingest.data, "JSON-Lines files")->required()->check(CLI::ExistingFile);
    c_ingest->add_option("--out", ingest.out, "write the report as JSON");
    add_task(c_ingest, ingest.task);

    ProbeArgs probe;
    auto* c_probe = app.add_subcommand("probe", "zero-shot masked-LM candidate ranking");
    c_probe->add_option("--data", probe.data)->required()->check(CLI::ExistingFile);
    c_probe->add_option("--model", probe.model, "checkpoint")->required()->check(CLI::ExistingFile);
    c_probe->add_option("--out", probe.out, "per-instance rankings (JSON-Lines)");
    add_task(c_probe, probe.task);

    AugmentArgs augment;
    auto* c_augment = app.add_subcommand("augment", "append the model's most probable non-gold word as a candidate");
    c_augment->add_option("--data", augment.data)->required()->check(CLI::ExistingFile);
    c_augment->add_option("--model", augment.model)->required()->check(CLI::ExistingFile);
    c_augment->add_option("--out", augment.out)->required();
    add_task(c_augment, augment.task);

    TaptArgs tapt;
    auto* c_tapt = app.add_subcommand("tapt-gen", "generate task-adaptive pretraining data");
    c_tapt->add_option("--data", tapt.data)->required()->check(CLI::ExistingFile);
    c_tapt->add_option("--model", tapt.model, "take the tokenizer from this checkpoint")->check(CLI::ExistingFile);
    c_tapt->add_option("--mode", tapt.mode, "within-task | in-domain | nsp")
        ->check(CLI::IsMember({"within-task", "in-domain", "nsp"}));
    c_tapt->add_option("--out", tapt.out, "token-sequence file")->required();
    c_tapt->add_option("--labels", tapt.labels, "mask-label sidecar (default: <out>.labels)");
    add_task(c_tapt, tapt.task);

    TrainArgs train_args;
    auto* c_train = app.add_subcommand("train", "fine-tune the reference encoder and scoring head");
    c_train->add_option("--train", train_args.train)->required()->check(CLI::ExistingFile);
    c_train->add_option("--dev", train_args.dev)->check(CLI::ExistingFile);
    c_train->add_option("--init", train_args.init, "start from this checkpoint")->check(CLI::ExistingFile);
    c_train->add_option("--out", train_args.out, "checkpoint path")->required();
    c_train->add_option("--history", train_args.history, "history JSON (default: <out>.history.json)");
    add_task(c_train, train_args.task);

    PredictArgs predict_args;
    auto* c_predict = app.add_subcommand("predict", "write per-instance candidate probabilities");
    c_predict->add_option("--model", predict_args.model)->required()->check(CLI::ExistingFile);
    c_predict->add_option("--data", predict_args.data)->required()->check(CLI::ExistingFile);
    c_predict->add_option("--out", predict_args.out)->required();
    c_predict->add_option("--model-id", predict_args.model_id);
    add_task(c_predict, predict_args.task);

    EnsembleArgs ens;
    auto* c_ensemble = app.add_subcommand("ensemble", "average prediction files");
    c_ensemble->add_option("--pred", ens.preds)->required()->check(CLI::ExistingFile);
    c_ensemble->add_option("--out", ens.out)->required();

    EvaluateArgs eval;
    auto* c_eval = app.add_subcommand("evaluate", "print accuracy of predictions (or of a model on a split)");
    c_eval->add_option("--pred", eval.pred)->check(CLI::ExistingFile);
    c_eval->add_option("--model", eval.model, "evaluate a checkpoint directly (transfer)")->check(CLI::ExistingFile);
    c_eval->add_option("--data", eval.data)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--source-task", eval.source_task);
    c_eval->add_option("--out", eval.out, "predictions written when --model is used");
    add_task(c_eval, eval.task);

    LengthArgs len;
    auto* c_len = app.add_subcommand("analyze-length", "accuracy by passage length bucket");
    c_len->add_option("--pred", len.pred)->required()->check(CLI::ExistingFile);
    c_len->add_option("--data", len.data)->required()->check(CLI::ExistingFile);
    c_len->add_option("--model", len.model, "take the tokenizer from this checkpoint")->check(CLI::ExistingFile);
    c_len->add_option("--format", len.format)->check(CLI::IsMember({"table", "csv", "json"}));
    c_len->add_option("--out", len.out);
    add_task(c_len, len.task);

    ErrorsArgs errs;
    auto* c_errs = app.add_subcommand("report-errors", "list wrong predictions, most confident first");
    c_errs->add_option("--pred", errs.pred)->required()->check(CLI::ExistingFile);
    c_errs->add_option("--data", errs.data)->required()->check(CLI::ExistingFile);
    c_errs->add_option("--augmented", errs.augmented, "augmented split for NAL words")->check(CLI::ExistingFile);
    c_errs->add_option("--format", errs.format)->check(CLI::IsMember({"text", "json"}));
    c_errs->add_option("--out", errs.out);
    add_task(c_errs, errs.task);

    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        const auto config = resolve_config(common);
        if (c_ingest->parsed()) return run_ingest(ingest, config);
        if (c_probe->parsed()) return run_probe(probe, config);
        if (c_augment->parsed()) return run_augment(augment, config);
        if (c_tapt->parsed()) return run_tapt_gen(tapt, config);
        if (c_train->parsed()) return run_train(train_args, config);
        if (c_predict->parsed()) return run_predict(predict_args, config);
        if (c_ensemble->parsed()) return run_ensemble(ens, config);
        if (c_eval->parsed()) return run_evaluate(eval, config);
        if (c_len->parsed()) return run_analyze_length(len, config);
        if (c_errs->parsed()) return run_report_errors(errs, config);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}
