#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "doseguard/corpus.hpp"
#include "doseguard/cv.hpp"
#include "doseguard/errors.hpp"
#include "doseguard/experiments.hpp"
#include "doseguard/features.hpp"
#include "doseguard/gbdt.hpp"
#include "doseguard/metrics.hpp"
#include "doseguard/sparse_matrix.hpp"
#include "doseguard/tune.hpp"
#include "probs_csv.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace doseguard::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
    }
}

void emit(const ordered_json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<int> labels_from(const fs::path& corpus, std::uint64_t expected_rows) {
    auto labels = labels_of(load_corpus(corpus));
    if (labels.size() != expected_rows) {
        throw DataError(fmt::format("--labels-from: corpus has {} records but the feature matrix has {} rows",
                                    labels.size(), expected_rows));
    }
    return labels;
}

/// Options shared by every command that runs cross-validated training.
struct TrainingInputs {
    std::string features;
    std::string labels;
    std::string config;
    int folds = 5;
    std::uint64_t seed = 0;
    int threads = 1;
    std::optional<double> scale_pos_weight;

    /// With `required` false the caller must call require() itself; used by
    /// commands whose subcommands take over the same flags.
    void add_to(CLI::App* cmd, bool required = true) {
        cmd->add_option("--features", features, "Feature matrix (FMX1 with registry sidecar)")
            ->required(required)
            ->check(CLI::ExistingFile);
        cmd->add_option("--labels-from", labels, "Corpus JSONL supplying the labels")
            ->required(required)
            ->check(CLI::ExistingFile);
        cmd->add_option("--config", config, "Training config JSON (TrainConfig field names)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--folds", folds, "Number of stratified folds")->check(CLI::Range(2, 1000));
        cmd->add_option("--seed", seed, "Seed for folds and training");
        cmd->add_option("--threads", threads, "Folds trained in parallel")->check(CLI::Range(1, 256));
        cmd->add_option("--scale-pos-weight", scale_pos_weight,
                        "Positive class weight (default: negatives/positives of the labels)")
            ->check(CLI::PositiveNumber);
    }

    void require() const {
        if (features.empty()) throw ConfigError("--features is required");
        if (labels.empty()) throw ConfigError("--labels-from is required");
    }

    struct Loaded {
        LoadedMatrix data;
        std::vector<int> y;
        TrainConfig config;
        FoldPlan plan;
        CvOptions options;
    };

    Loaded load() const {
        Loaded l;
        l.data = load_matrix(features);
        l.y = labels_from(labels, l.data.matrix.n_rows);
        bool explicit_weight = false;
        if (!config.empty()) {
            const auto j = read_json(config);
            try {
                l.config = TrainConfig::from_json(j);
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("--config: {}", e.what()));
            }
            explicit_weight = j.contains("scale_pos_weight");
            if (!j.contains("seed")) l.config.seed = seed;
        } else {
            l.config.seed = seed;
        }
        if (scale_pos_weight) {
            l.config.scale_pos_weight = *scale_pos_weight;
        } else if (!explicit_weight) {
            l.config.scale_pos_weight = scale_pos_weight_from(l.y);
        }
        l.plan = make_folds(l.y, folds, seed);
        l.options.threads = threads;
        return l;
    }
};

std::vector<int> parse_int_list(const std::string& text, const char* flag) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("{}: '{}' is not an integer", flag, item));
        }
    }
    if (out.empty()) throw ConfigError(fmt::format("{}: empty list", flag));
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("{}: '{}' is not a number", flag, item));
        }
        if (!(out.back() >= 0.0 && out.back() <= 1.0)) {
            throw ConfigError(fmt::format("{}: threshold {} outside [0, 1]", flag, item));
        }
    }
    if (out.empty()) throw ConfigError(fmt::format("{}: empty list", flag));
    return out;
}

fs::path model_path(const fs::path& dir, std::size_t fold) { return dir / fmt::format("model_fold{}.json", fold); }

std::vector<GbdtModel> load_models(const fs::path& dir) {
    std::vector<GbdtModel> models;
    for (std::size_t f = 0; fs::exists(model_path(dir, f)); ++f) models.push_back(load_model(model_path(dir, f)));
    if (models.empty()) throw DataError(fmt::format("--models: no model_fold*.json files in '{}'", dir.string()));
    return models;
}

// ---------------------------------------------------------------- synth

void add_synth(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        std::size_t n = 2000;
        std::uint64_t seed = 0;
        double rate = 0.046;
        double strength = 1.0;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("synth", "Generate a synthetic narrative corpus (JSONL)");
    cmd->add_option("--n", o->n, "Number of records")->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    cmd->add_option("--seed", o->seed, "Random seed");
    cmd->add_option("--positive-rate", o->rate, "Fraction of positive records")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--strength", o->strength, "Probability that a positive carries a deviation phrase")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--out", o->out, "Output JSONL path")->required();
    cmd->callback([&action, o] {
        action = [o] {
            const auto records = generate_synthetic_corpus(o->n, o->rate, o->strength, o->seed);
            if (fs::path(o->out).has_parent_path()) fs::create_directories(fs::path(o->out).parent_path());
            write_corpus(o->out, records);
            const auto stats = corpus_stats(concatenate_all(records));
            emit({{"schema_version", 1}, {"out", o->out}, {"n_docs", stats.n_docs}, {"n_positive", stats.n_positive}});
        };
    });
}

// ---------------------------------------------------------------- corpus stats

void add_corpus(CLI::App& app, std::function<void()>& action) {
    auto corpus_path = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand("corpus", "Corpus utilities");
    cmd->require_subcommand(1);
    auto* stats = cmd->add_subcommand("stats", "Print record counts and text-length quantiles as JSON");
    stats->add_option("--corpus", *corpus_path, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    stats->callback([&action, corpus_path] {
        action = [corpus_path] { emit(to_json(corpus_stats(concatenate_all(load_corpus(*corpus_path))))); };
    });
}

// ---------------------------------------------------------------- extract

void add_extract(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        std::string corpus;
        std::string out;
        std::string embeddings;
        std::string scores;
        std::string vectorizers;
        std::string save_vectorizers;
        std::size_t word_features = VectorizerConfig::word_defaults().max_features;
        std::size_t char_features = VectorizerConfig::char_defaults().max_features;
        std::size_t min_df = VectorizerConfig::word_defaults().min_df;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("extract", "Build the feature matrix and its registry from a corpus");
    cmd->add_option("--corpus", o->corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o->out, "Output matrix (.fmx); the registry is written next to it")->required();
    cmd->add_option("--embeddings", o->embeddings, "Precomputed embedding block (FMX1)")->check(CLI::ExistingFile);
    cmd->add_option("--scores", o->scores, "Precomputed transformer score block (FMX1)")->check(CLI::ExistingFile);
    auto* load_opt = cmd->add_option("--vectorizers", o->vectorizers, "Reuse fitted vectorizers (JSON)")
                         ->check(CLI::ExistingFile);
    cmd->add_option("--save-vectorizers", o->save_vectorizers, "Write the fitted vectorizers (JSON)");
    auto* wf = cmd->add_option("--word-features", o->word_features, "Word TF-IDF vocabulary size")
                   ->check(CLI::Range(std::size_t{1}, std::size_t{10000000}));
    auto* cf = cmd->add_option("--char-features", o->char_features, "Character n-gram vocabulary size")
                   ->check(CLI::Range(std::size_t{1}, std::size_t{10000000}));
    auto* md = cmd->add_option("--min-df", o->min_df, "Minimum document frequency for both vectorizers")
                   ->check(CLI::Range(std::size_t{1}, std::size_t{1000000000}));
    wf->excludes(load_opt);
    cf->excludes(load_opt);
    md->excludes(load_opt);
    cmd->callback([&action, o] {
        action = [o] {
            const auto records = load_corpus(o->corpus);
            FittedVectorizers vec;
            if (!o->vectorizers.empty()) {
                vec = FittedVectorizers::from_json(read_json(o->vectorizers));
            } else {
                auto word = VectorizerConfig::word_defaults();
                auto chr = VectorizerConfig::char_defaults();
                word.max_features = o->word_features;
                chr.max_features = o->char_features;
                word.min_df = o->min_df;
                chr.min_df = o->min_df;
                vec = fit_vectorizers(concatenate_all(records), word, chr);
            }
            const auto external = [&](const std::string& path, FeatureCategory cat,
                                      const char* flag) -> std::optional<FeatureBlock> {
                if (path.empty()) return std::nullopt;
                if (fs::exists(registry_sidecar_path(path))) {
                    auto loaded = load_matrix(path);
                    if (loaded.matrix.n_rows != records.size()) {
                        throw DataError(fmt::format("{}: {} rows but the corpus has {} records", flag,
                                                    loaded.matrix.n_rows, records.size()));
                    }
                    return external_block(cat, std::move(loaded.matrix), &loaded.registry);
                }
                auto m = read_fmx(path);
                if (m.n_rows != records.size()) {
                    throw DataError(fmt::format("{}: {} rows but the corpus has {} records", flag, m.n_rows,
                                                records.size()));
                }
                return external_block(cat, std::move(m));
            };
            auto features = extract_features(records, vec,
                                             external(o->embeddings, FeatureCategory::embedding, "--embeddings"),
                                             external(o->scores, FeatureCategory::transformer_score, "--scores"));
            if (fs::path(o->out).has_parent_path()) fs::create_directories(fs::path(o->out).parent_path());
            save_matrix(o->out, features.matrix, features.registry);
            if (!o->save_vectorizers.empty()) write_text(o->save_vectorizers, vec.to_json().dump(1) + "\n");
            ordered_json widths;
            for (auto c : features.registry.categories()) {
                widths[std::string(category_name(c))] = features.registry.width_of(c);
            }
            emit({{"schema_version", 1},
                  {"out", o->out},
                  {"registry", registry_sidecar_path(o->out).string()},
                  {"n_rows", features.matrix.n_rows},
                  {"n_cols", features.matrix.n_cols},
                  {"nnz", features.matrix.nnz()},
                  {"widths", widths}});
        };
    });
}

// ---------------------------------------------------------------- train

void add_train(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        TrainingInputs in;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("train", "Cross-validated training with out-of-fold predictions");
    o->in.add_to(cmd);
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->callback([&action, o] {
        action = [o] {
            auto l = o->in.load();
            const fs::path dir = o->out;
            fs::create_directories(dir);
            CvOptions options = l.options;
            const CvResult cv = cv_train(l.data.matrix, l.y, l.config, l.plan, options);

            for (std::size_t f = 0; f < cv.models.size(); ++f) save_model(model_path(dir, f), cv.models[f]);
            write_text(dir / "folds.json", l.plan.to_json().dump() + "\n");
            write_text(dir / "registry.json", read_text(registry_sidecar_path(o->in.features)));
            ProbabilityTable oof;
            for (const auto& r : load_corpus(o->in.labels)) oof.ids.push_back(r.id);
            oof.probs = cv.oof.probs;
            write_probs_csv(dir / "oof.csv", oof);

            const double oof_auc = cv.oof_auc(l.y);
            const auto choice = optimize_threshold(l.y, cv.oof.probs);
            const auto importance = aggregate_importance(cv.models, l.data.registry);
            const auto dynamics = training_dynamics(cv.models, cv.oof.per_fold_auc);

            ordered_json report;
            report["schema_version"] = 1;
            report["n_rows"] = l.data.matrix.n_rows;
            report["n_features"] = l.data.matrix.n_cols;
            report["folds"] = l.plan.k;
            report["seed"] = o->in.seed;
            report["config"] = l.config.to_json();
            report["oof_auc"] = oof_auc;
            report["mean_fold_auc"] = cv.mean_auc();
            report["std_fold_auc"] = cv.std_auc();
            report["per_fold_auc"] = cv.oof.per_fold_auc;
            report["f1_threshold"] = choice.threshold;
            report["oof_report"] = choice.report.to_json();
            report["dynamics"] = dynamics.to_json();
            write_text(dir / "report.json", report.dump(2) + "\n");
            write_text(dir / "importance.json", importance.to_json(l.data.registry).dump(2) + "\n");
            write_text(dir / "importance.md", importance.markdown());

            emit({{"schema_version", 1},
                  {"out", dir.string()},
                  {"oof_auc", oof_auc},
                  {"mean_fold_auc", cv.mean_auc()},
                  {"std_fold_auc", cv.std_auc()},
                  {"best_iterations", dynamics.best_iterations},
                  {"f1_threshold", choice.threshold}});
        };
    });
}

// ---------------------------------------------------------------- tune

void add_tune(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        TrainingInputs in;
        int trials = 50;
        std::string sampler = "tpe";
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("tune", "Hyperparameter search with a cross-validated objective");
    o->in.add_to(cmd, false);
    cmd->add_option("--trials,--n-trials", o->trials, "Total number of trials")->check(CLI::Range(1, 100000));
    cmd->add_option("--sampler", o->sampler, "tpe or random")->check(CLI::IsMember({"tpe", "random"}));
    cmd->add_option("--out", o->out, "History JSONL; existing trials are resumed");
    auto* replay = cmd->add_subcommand("replay", "Evaluate one configuration without sampling");
    cmd->callback([&action, o, replay] {
        if (replay->parsed()) return;
        action = [o] {
            o->in.require();
            if (o->out.empty()) throw ConfigError("--out is required");
            auto l = o->in.load();
            SearchOptions opts;
            opts.n_trials = o->trials;
            opts.sampler = parse_sampler(o->sampler);
            opts.seed = o->in.seed;
            opts.base = l.config;
            opts.history_path = o->out;
            const auto result = run_search(cv_objective(l.data.matrix, l.y, l.plan, l.options), SearchSpace{}, opts);
            ordered_json j;
            j["schema_version"] = 1;
            j["history"] = o->out;
            j["n_trials"] = result.history.size();
            std::size_t failed = 0;
            for (const auto& t : result.history) failed += t.ok ? 0 : 1;
            j["failed_trials"] = failed;
            if (result.best) {
                auto best = result.best->to_json();
                best.erase("wall_time");
                j["best"] = best;
            } else {
                j["best"] = nullptr;
            }
            emit(j);
        };
    });

    auto r = std::make_shared<TrainingInputs>();
    r->add_to(replay);
    replay->get_option("--config")->required();
    replay->callback([&action, r] {
        action = [r] {
            auto l = r->load();
            std::vector<std::string> warnings;
            const auto rec = replay_config(l.config, cv_objective(l.data.matrix, l.y, l.plan, l.options),
                                           SearchSpace{}, &warnings);
            for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
            if (!rec.ok) throw TrainingError(rec.error);
            auto j = rec.to_json();
            j.erase("wall_time");
            j["schema_version"] = 1;
            j["warnings"] = warnings;
            emit(j);
        };
    });
}

// ---------------------------------------------------------------- predict

void add_predict(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        std::string models;
        std::string features;
        std::string out;
        std::string ids_from;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("predict", "Average the fold models' probabilities on a feature matrix");
    cmd->add_option("--models", o->models, "Directory written by train")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--features", o->features, "Feature matrix (FMX1)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o->out, "Output CSV")->required();
    cmd->add_option("--ids-from", o->ids_from, "Corpus JSONL whose ids label the rows")->check(CLI::ExistingFile);
    cmd->callback([&action, o] {
        action = [o] {
            const auto models = load_models(o->models);
            const auto data = load_matrix(o->features);
            const fs::path train_registry = fs::path(o->models) / "registry.json";
            if (fs::exists(train_registry) && !(read_registry(train_registry) == data.registry)) {
                throw DataError("--features: registry differs from the one the models were trained on");
            }
            ProbabilityTable table;
            table.probs = ensemble_predict(models, data.matrix);
            if (!o->ids_from.empty()) {
                for (const auto& r : load_corpus(o->ids_from)) table.ids.push_back(r.id);
                if (table.ids.size() != table.probs.size()) {
                    throw DataError(fmt::format("--ids-from: {} records for {} rows", table.ids.size(),
                                                table.probs.size()));
                }
            }
            if (fs::path(o->out).has_parent_path()) fs::create_directories(fs::path(o->out).parent_path());
            write_probs_csv(o->out, table);
            emit({{"schema_version", 1}, {"out", o->out}, {"n_rows", table.probs.size()}, {"n_models", models.size()}});
        };
    });
}

// ---------------------------------------------------------------- evaluate

void add_evaluate(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        std::string probs;
        std::string labels;
        std::optional<double> threshold;
        bool optimize_f1 = false;
        std::string sweep;
        std::string sweep_out;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("evaluate", "Threshold metrics, F1-optimal threshold and sweeps");
    cmd->add_option("--probs", o->probs, "Probability CSV from predict or train")->required()->check(CLI::ExistingFile);
    cmd->add_option("--labels-from", o->labels, "Corpus JSONL supplying the labels")
        ->required()
        ->check(CLI::ExistingFile);
    auto* t = cmd->add_option("--threshold", o->threshold, "Decision threshold (predict 1 iff p >= t)")
                  ->check(CLI::Range(0.0, 1.0));
    auto* f = cmd->add_flag("--optimize-f1", o->optimize_f1, "Pick the F1-maximizing threshold");
    t->excludes(f);
    cmd->add_option("--sweep", o->sweep, "Comma-separated thresholds to report");
    cmd->add_option("--sweep-out", o->sweep_out, "Write the sweep as CSV");
    cmd->add_option("--out", o->out, "Also write the JSON report to this file");
    cmd->callback([&action, o] {
        action = [o] {
            const auto table = read_probs_csv(o->probs);
            const auto records = load_corpus(o->labels);
            if (records.size() != table.probs.size()) {
                throw DataError(fmt::format("--labels-from: {} records but --probs has {} rows", records.size(),
                                            table.probs.size()));
            }
            if (!table.ids.empty()) {
                for (std::size_t i = 0; i < records.size(); ++i) {
                    if (records[i].id != table.ids[i]) {
                        throw DataError(fmt::format("--probs: row {} has id '{}' but the corpus has '{}'", i + 1,
                                                    table.ids[i], records[i].id));
                    }
                }
            }
            const auto y = labels_of(records);
            ordered_json j;
            j["schema_version"] = 1;
            j["n"] = y.size();
            EvalReport report;
            if (o->optimize_f1) {
                const auto choice = optimize_threshold(y, table.probs);
                j["threshold_rule"] = "optimize_f1";
                report = choice.report;
            } else {
                j["threshold_rule"] = o->threshold ? "fixed" : "default";
                report = confusion_at(y, table.probs, o->threshold.value_or(0.5));
            }
            j["report"] = report.to_json();
            if (!o->sweep.empty()) {
                const auto thresholds = parse_double_list(o->sweep, "--sweep");
                const auto sweep = threshold_sweep(y, table.probs, thresholds);
                auto arr = ordered_json::array();
                for (const auto& r : sweep) arr.push_back(r.to_json());
                j["sweep"] = std::move(arr);
                if (!o->sweep_out.empty()) write_text(o->sweep_out, sweep_csv(sweep));
            }
            if (!o->out.empty()) write_text(o->out, j.dump(2) + "\n");
            emit(j);
        };
    });
}

// ---------------------------------------------------------------- ablate

void add_ablate(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        TrainingInputs in;
        std::vector<std::string> drop;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("ablate", "Retrain without each feature group on identical folds");
    o->in.add_to(cmd);
    cmd->add_option("--drop", o->drop, "Groups to remove: text, embedding, medical, transformer_score")
        ->delimiter(',')
        ->check(CLI::IsMember({"text", "embedding", "medical", "transformer_score"}));
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->callback([&action, o] {
        action = [o] {
            auto l = o->in.load();
            std::vector<std::string> drop = o->drop;
            if (drop.empty()) {
                for (const auto& g : standard_groups()) {
                    const auto width = g.columns(l.data.registry).size();
                    if (width > 0 && width < l.data.registry.size()) drop.push_back(g.key);
                }
            }
            const auto table = run_ablation(l.data.matrix, l.y, l.data.registry, drop, l.config, l.plan, l.options);
            const fs::path dir = o->out;
            write_text(dir / "ablation.json", table.to_json().dump(2) + "\n");
            write_text(dir / "ablation.md", table.markdown());
            write_text(dir / "ablation.csv", table.csv());
            emit(table.to_json());
        };
    });
}

// ---------------------------------------------------------------- select-topk

void add_select_topk(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        TrainingInputs in;
        std::string ks = "10,25,50,100,200,500,1000,2000,3000";
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("select-topk", "Retrain on the top-k features by baseline gain");
    o->in.add_to(cmd);
    cmd->add_option("--ks", o->ks, "Comma-separated feature counts");
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->callback([&action, o] {
        action = [o] {
            const auto ks = parse_int_list(o->ks, "--ks");
            auto l = o->in.load();
            for (int k : ks) {
                if (k <= 0 || static_cast<std::size_t>(k) > l.data.registry.size()) {
                    throw ConfigError(fmt::format("--ks: {} is outside [1, {}]", k, l.data.registry.size()));
                }
            }
            const auto table = topk_experiment(l.data.matrix, l.y, l.data.registry, ks, l.config, l.plan, l.options);
            const fs::path dir = o->out;
            write_text(dir / "topk.json", table.to_json(l.data.registry).dump(2) + "\n");
            write_text(dir / "topk.md", table.markdown());
            write_text(dir / "topk.csv", table.csv());
            auto summary = table.to_json(l.data.registry);
            for (auto& row : summary["rows"]) {
                row.erase("selected_columns");
                row.erase("selected_names");
            }
            emit(summary);
        };
    });
}

// ---------------------------------------------------------------- importance

void add_importance(CLI::App& app, std::function<void()>& action) {
    struct Opts {
        std::string models;
        std::string registry;
        std::string out;
        std::size_t top = 50;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("importance", "Gain importance averaged across fold models");
    cmd->add_option("--models", o->models, "Directory written by train")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--registry", o->registry, "Registry JSON (default: the one saved by train)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--top", o->top, "Number of top features listed");
    cmd->add_option("--out", o->out, "Output directory for JSON, Markdown and CSV tables");
    cmd->callback([&action, o] {
        action = [o] {
            const auto models = load_models(o->models);
            const fs::path reg_path = o->registry.empty() ? fs::path(o->models) / "registry.json" : fs::path(o->registry);
            const auto registry = read_registry(reg_path);
            const auto report = aggregate_importance(models, registry);
            const auto j = report.to_json(registry, o->top);
            if (!o->out.empty()) {
                const fs::path dir = o->out;
                write_text(dir / "importance.json", j.dump(2) + "\n");
                write_text(dir / "importance.md", report.markdown());
                write_text(dir / "importance.csv", report.csv());
            }
            emit(j);
        };
    });
}

}  // namespace

void register_commands(CLI::App& app, std::function<void()>& action) {
    add_synth(app, action);
    add_corpus(app, action);
    add_extract(app, action);
    add_train(app, action);
    add_tune(app, action);
    add_predict(app, action);
    add_evaluate(app, action);
    add_ablate(app, action);
    add_select_topk(app, action);
    add_importance(app, action);
}

}  // namespace doseguard::cli
