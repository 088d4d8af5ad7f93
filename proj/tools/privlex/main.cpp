// privlex command-line tool. Exit codes: 0 success, 2 validation error, 1 runtime error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "privlex/bias.hpp"
#include "privlex/datasets.hpp"
#include "privlex/embed.hpp"
#include "privlex/error.hpp"
#include "privlex/explain.hpp"
#include "privlex/lrmodel.hpp"
#include "privlex/matrix.hpp"
#include "privlex/metrics.hpp"
#include "privlex/pipeline.hpp"
#include "privlex/score.hpp"
#include "privlex/tune.hpp"
#include "privlex/vocab.hpp"
#include "privlex/zeroshot.hpp"

namespace fs = std::filesystem;
using namespace privlex;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string cache_dir;
    std::vector<std::string> argv;
};

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void warn(const std::string& msg) { std::cerr << "privlex: warning: " << msg << "\n"; }

void write_stdout_or_file(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw RuntimeError("cannot write " + out);
    f << text;
}

std::vector<std::string> present_ids(const std::vector<std::string>& wanted, const ScoreMatrix& s, const std::string& what) {
    std::unordered_set<std::string_view> have(s.image_ids().begin(), s.image_ids().end());
    std::vector<std::string> out;
    for (const auto& id : wanted)
        if (have.contains(id)) out.push_back(id);
    if (out.size() != wanted.size())
        warn(std::to_string(wanted.size() - out.size()) + " " + what + " id(s) have no score row");
    return out;
}

// Scores and labels restricted to `ids` (or all aligned rows), in score order.
std::pair<ScoreMatrix, LabeledDataset> restrict(const ScoreMatrix& s, const LabeledDataset& labels,
                                                const std::vector<std::string>* ids, SplitTag tag, const std::string& what) {
    const auto base = ids ? s.select_rows(present_ids(*ids, s, what)) : s;
    auto a = align(base, labels);
    if (!a.unmatched_scores.empty()) warn(std::to_string(a.unmatched_scores.size()) + " " + what + " score row(s) have no label");
    LabeledDataset d;
    d.image_ids = a.scores.image_ids();
    d.labels = a.labels;
    d.split = tag;
    return {std::move(a.scores), std::move(d)};
}

struct LabelArgs {
    std::string path;
    std::string schema = "binary";
    std::string safe_attribute = "safe";

    void add(CLI::App* cmd) {
        cmd->add_option("--labels", path, "labels file (CSV image_id,label or VISPR JSON Lines)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--schema", schema, "binary | vispr")->capture_default_str();
        cmd->add_option("--safe-attribute", safe_attribute, "VISPR attribute marking public images")->capture_default_str();
    }
    LabeledDataset load() const { return load_binary_labels(path, parse_label_schema(schema), safe_attribute); }
};

// Normalized scores for training: raw inputs get a normalizer fitted on the training rows.
Normalizer resolve_normalizer(const ScoreMatrix& scores, const ScoreMatrix& train_rows, const std::string& normalizer_path,
                              const std::string& mode) {
    if (!normalizer_path.empty()) return load_normalizer(normalizer_path);
    if (scores.normalized())
        throw ValidationError("normalized scores need --normalizer (or pass raw scores to fit one on the training rows)");
    return fit_normalizer(train_rows, mode == "global" ? NormalizerMode::Global : NormalizerMode::PerConcept);
}

ScoreMatrix ensure_normalized(const ScoreMatrix& s, const Normalizer& n) { return s.normalized() ? s : apply_normalizer(n, s); }

}  // namespace

int main(int argc, char** argv) {
    Globals g;
    g.argv.assign(argv, argv + argc);

    CLI::App app{"privlex: interpretable image privacy classification over personal-data concepts"};
    app.set_version_flag("--version", std::string(tool_version()));
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", g.seed, "top-level random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads")->capture_default_str();
    app.add_option("--cache-dir", g.cache_dir, "stage cache directory for `run`");

    std::function<void()> action;
    auto on = [&](CLI::App* cmd, std::function<void()> fn) { cmd->callback([&action, fn] { action = fn; }); };

    // vocab ---------------------------------------------------------------
    auto* vocab = app.add_subcommand("vocab", "concept vocabulary tools");
    vocab->require_subcommand(1);
    struct {
        std::string in, out, tmpl = "description", mode = "hierarchy", tag;
    } va;
    auto* vcompile = vocab->add_subcommand("compile", "select bottleneck concepts and compile prompt sentences");
    vcompile->add_option("--in", va.in, "vocabulary JSON Lines")->required()->check(CLI::ExistingFile);
    vcompile->add_option("--template", va.tmpl, "description | information-about | description-examples")->capture_default_str();
    vcompile->add_option("--mode", va.mode, "hierarchy | flat")->capture_default_str();
    vcompile->add_option("--source-tag", va.tag, "vocabulary source tag (default: file stem)");
    vcompile->add_option("--out", va.out, "prompt list (JSON Lines)")->required();
    on(vcompile, [&] {
        Timer t;
        const auto v = load_vocabulary(va.in, parse_template_style(va.tmpl),
                                       va.tag.empty() ? std::nullopt : std::optional<std::string>(va.tag));
        const auto active = select_bottleneck(v, parse_selection_mode(va.mode));
        const auto prompts = compile_prompts(active);
        save_prompts(prompts, va.out);
        std::cout << prompts.size() << " concepts, vocab hash " << hash_prompts(prompts) << "\n";
        pipeline::write_command_manifest(g.argv, g.seed, g.threads, {va.in}, {va.out}, t.seconds());
    });

    // embed ---------------------------------------------------------------
    auto* embed = app.add_subcommand("embed", "run a frozen encoder");
    embed->require_subcommand(1);
    struct {
        std::string model, in, out;
        std::size_t batch = 32;
    } ea;
    for (const char* kind : {"images", "texts"}) {
        auto* sub = embed->add_subcommand(kind, std::string("embed ") + kind);
        sub->add_option("--model", ea.model, "ONNX graph with <model>.manifest.json")->required()->check(CLI::ExistingFile);
        sub->add_option("--in", ea.in, std::string(kind) == "images" ? "image list" : "prompt list (JSON Lines)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", ea.out, "PVX1 output")->required();
        sub->add_option("--batch-size", ea.batch)->capture_default_str();
        const bool images = std::string(kind) == "images";
        on(sub, [&, images] {
            Timer t;
            const EncoderHandle enc(ea.model);
            EmbedResult res = images ? embed_images(enc, load_image_list(ea.in), ea.batch)
                                     : embed_texts(enc, load_prompts(ea.in), ea.batch);
            for (const auto& s : res.skipped) warn("skipped " + s.id + " (" + s.path + "): " + s.reason);
            save_matrix(res.matrix, ea.out);
            std::cout << res.matrix.rows() << " x " << res.matrix.dim() << " -> " << ea.out << "\n";
            pipeline::write_command_manifest(g.argv, g.seed, g.threads,
                                             {ea.model, manifest_path_for(ea.model), ea.in},
                                             {ea.out, pvx1::ids_sidecar(ea.out)}, t.seconds());
        });
    }

    // score ---------------------------------------------------------------
    auto* score = app.add_subcommand("score", "cosine concept scores");
    struct {
        std::string images, concepts, out, prompts;
    } sa;
    score->add_option("--images", sa.images, "image embeddings (PVX1)")->required()->check(CLI::ExistingFile);
    score->add_option("--concepts", sa.concepts, "concept embeddings (PVX1)")->required()->check(CLI::ExistingFile);
    score->add_option("--prompts", sa.prompts, "compiled prompt list; stamps the vocabulary hash")->check(CLI::ExistingFile);
    score->add_option("--out", sa.out, "score matrix (PVX1)")->required();
    on(score, [&] {
        Timer t;
        const auto images = load_matrix(sa.images);
        const auto concepts = load_matrix(sa.concepts);
        std::string hash;
        if (!sa.prompts.empty()) {
            const auto p = load_prompts(sa.prompts);
            std::vector<std::string> ids;
            for (const auto& s : p) ids.push_back(s.concept_id);
            if (ids != concepts.ids()) throw ValidationError("concept embedding ids do not match " + sa.prompts);
            hash = hash_prompts(p);
        }
        const auto s = cosine_scores(images, concepts, hash, g.threads);
        save_scores(s, sa.out);
        std::cout << s.rows() << " x " << s.cols() << " -> " << sa.out << "\n";
        pipeline::write_command_manifest(g.argv, g.seed, g.threads, {sa.images, sa.concepts, sa.prompts},
                                         {sa.out, pvx1::ids_sidecar(sa.out), concepts_sidecar(sa.out)}, t.seconds());
    });

    // normalize -----------------------------------------------------------
    auto* normalize = app.add_subcommand("normalize", "fit and apply min-max concept normalization");
    struct {
        std::string fit, apply, norm_out, out, mode = "per-concept", norm_in;
    } na;
    normalize->add_option("--fit", na.fit, "training scores to fit on")->check(CLI::ExistingFile);
    normalize->add_option("--normalizer", na.norm_in, "existing normalizer instead of --fit")->check(CLI::ExistingFile);
    normalize->add_option("--apply", na.apply, "scores to normalize")->check(CLI::ExistingFile);
    normalize->add_option("--norm-out", na.norm_out, "normalizer JSON output");
    normalize->add_option("--out", na.out, "normalized scores (default: <apply>.norm.pvx1)");
    normalize->add_option("--mode", na.mode, "per-concept | global")->capture_default_str();
    on(normalize, [&] {
        Timer t;
        if (na.fit.empty() == na.norm_in.empty()) throw ValidationError("give exactly one of --fit or --normalizer");
        const auto norm = !na.fit.empty()
                              ? fit_normalizer(load_scores(na.fit), na.mode == "global" ? NormalizerMode::Global
                                                                                        : NormalizerMode::PerConcept)
                              : load_normalizer(na.norm_in);
        std::vector<fs::path> outs;
        if (!na.norm_out.empty()) {
            save_normalizer(norm, na.norm_out);
            outs.emplace_back(na.norm_out);
        }
        if (!na.apply.empty()) {
            fs::path out = na.out;
            if (out.empty()) out = fs::path(na.apply).replace_extension(".norm.pvx1");
            save_scores(apply_normalizer(norm, load_scores(na.apply)), out);
            outs.push_back(out);
        }
        if (outs.empty()) throw ValidationError("nothing to do: give --norm-out and/or --apply");
        pipeline::write_command_manifest(g.argv, g.seed, g.threads, {na.fit, na.norm_in, na.apply}, outs, t.seconds());
    });

    // train ---------------------------------------------------------------
    auto* trainc = app.add_subcommand("train", "fit the sparse logistic regression");
    LabelArgs tl;
    struct {
        std::string scores, split, normalizer, out, tag, mode = "per-concept";
        double C = 1.0;
        int max_iter = 100;
    } ta;
    trainc->add_option("--scores", ta.scores, "raw or normalized scores")->required()->check(CLI::ExistingFile);
    tl.add(trainc);
    trainc->add_option("--split", ta.split, "split spec; trains on its train ids")->check(CLI::ExistingFile);
    trainc->add_option("--normalizer", ta.normalizer, "normalizer for already-normalized scores")->check(CLI::ExistingFile);
    trainc->add_option("--normalizer-mode", ta.mode, "per-concept | global (raw scores)")->capture_default_str();
    trainc->add_option("--C", ta.C, "inverse L1 strength in (0, 1]")->capture_default_str();
    trainc->add_option("--max-iter", ta.max_iter)->capture_default_str();
    trainc->add_option("--dataset-tag", ta.tag);
    trainc->add_option("--out", ta.out, "model JSON")->required();
    on(trainc, [&] {
        Timer t;
        const auto scores = load_scores(ta.scores);
        std::optional<SplitSpec> sp;
        if (!ta.split.empty()) sp = load_split_spec(ta.split);
        const auto [rows, data] = restrict(scores, tl.load(), sp ? &sp->train : nullptr, SplitTag::Train, "train");
        const auto norm = resolve_normalizer(scores, rows, ta.normalizer, ta.mode);
        std::string tag = ta.tag;
        if (tag.empty() && sp) tag = sp->dataset_tag;
        const auto model = train(ensure_normalized(rows, norm), data, norm, {ta.C, ta.max_iter, g.seed}, tag);
        save_model(model, ta.out);
        std::cout << "objective " << model.meta.objective_value << ", " << model.meta.nonzero_count << "/"
                  << model.weights.size() << " nonzero weights\n";
        pipeline::write_command_manifest(g.argv, g.seed, g.threads, {ta.scores, tl.path, ta.split, ta.normalizer},
                                         {ta.out}, t.seconds());
    });

    // tune ----------------------------------------------------------------
    auto* tunec = app.add_subcommand("tune", "hyperparameter search on the validation split");
    LabelArgs ul;
    struct {
        std::string scores, split, normalizer, out, strategy = "random", mode = "per-concept";
        int budget = 100;
    } ua;
    tunec->add_option("--scores", ua.scores, "raw or normalized scores")->required()->check(CLI::ExistingFile);
    ul.add(tunec);
    tunec->add_option("--split", ua.split, "split spec with train and val ids")->required()->check(CLI::ExistingFile);
    tunec->add_option("--normalizer", ua.normalizer)->check(CLI::ExistingFile);
    tunec->add_option("--normalizer-mode", ua.mode)->capture_default_str();
    tunec->add_option("--budget", ua.budget)->capture_default_str();
    tunec->add_option("--strategy", ua.strategy, "random | tpe")->capture_default_str();
    tunec->add_option("--out", ua.out, "search log JSON")->required();
    on(tunec, [&] {
        Timer t;
        const auto scores = load_scores(ua.scores);
        const auto sp = load_split_spec(ua.split);
        const auto all = ul.load();
        const auto [tr_rows, tr] = restrict(scores, all, &sp.train, SplitTag::Train, "train");
        const auto [va_rows, va] = restrict(scores, all, &sp.val, SplitTag::Val, "val");
        const auto norm = resolve_normalizer(scores, tr_rows, ua.normalizer, ua.mode);
        const auto res = tune::search(ensure_normalized(tr_rows, norm), tr, ensure_normalized(va_rows, norm), va, norm,
                                      {ua.budget, tune::parse_strategy(ua.strategy), g.seed, g.threads});
        tune::save_search(res, ua.out);
        std::cout << "best trial " << res.best.trial_index << ": C=" << res.best.C << " max_iter=" << res.best.max_iter
                  << " val F1-macro=" << res.best.val_f1_macro << "\n";
        pipeline::write_command_manifest(g.argv, g.seed, g.threads, {ua.scores, ul.path, ua.split, ua.normalizer},
                                         {ua.out}, t.seconds());
    });

    // evaluate ------------------------------------------------------------
    auto* evalc = app.add_subcommand("evaluate", "binary metrics of a trained model");
    LabelArgs el;
    struct {
        std::string model, scores, split, split_name = "test", out;
    } ev;
    evalc->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
    evalc->add_option("--scores", ev.scores, "raw or normalized scores")->required()->check(CLI::ExistingFile);
    el.add(evalc);
    evalc->add_option("--split", ev.split)->check(CLI::ExistingFile);
    evalc->add_option("--split-name", ev.split_name, "train | val | test")->capture_default_str();
    evalc->add_option("--out", ev.out, "report JSON (default: stdout)");
    on(evalc, [&] {
        Timer t;
        const auto scores = load_scores(ev.scores);
        const auto model = load_model(ev.model, scores.vocab_hash());
        std::optional<SplitSpec> sp;
        const std::vector<std::string>* ids = nullptr;
        if (!ev.split.empty()) {
            sp = load_split_spec(ev.split);
            ids = ev.split_name == "train" ? &sp->train : ev.split_name == "val" ? &sp->val : &sp->test;
        }
        const auto [rows, data] = restrict(scores, el.load(), ids, SplitTag::Test, ev.split_name);
        const auto pred = predict_labels(predict_proba(model, ensure_normalized(rows, model.normalizer)));
        const auto counts = metrics::confusion(pred, data.labels);
        const auto tag = model.meta.dataset_tag;
        if (ev.out.empty()) {
            std::cout << render_evaluation_report(counts, tag, ev.split_name);
        } else {
            save_evaluation_report(counts, tag, ev.split_name, ev.out);
            pipeline::write_command_manifest(g.argv, g.seed, g.threads, {ev.model, ev.scores, el.path, ev.split},
                                             {ev.out}, t.seconds());
        }
    });

    // explain -------------------------------------------------------------
    auto* explainc = app.add_subcommand("explain", "per-image concept explanations");
    struct {
        std::string model, scores, labels, schema = "binary", safe = "safe", format = "text", out, target = "raw";
        double tau = kDefaultTau;
    } xa;
    explainc->add_option("--model", xa.model)->required()->check(CLI::ExistingFile);
    explainc->add_option("--images,--scores", xa.scores, "raw score matrix of the images to explain")
        ->required()
        ->check(CLI::ExistingFile);
    explainc->add_option("--tau", xa.tau, "raw-score threshold")->capture_default_str();
    explainc->add_option("--target", xa.target, "raw | normalized: which scores tau applies to")->capture_default_str();
    explainc->add_option("--format", xa.format, "text | json | html")->capture_default_str();
    explainc->add_option("--labels", xa.labels, "optional ground truth")->check(CLI::ExistingFile);
    explainc->add_option("--schema", xa.schema)->capture_default_str();
    explainc->add_option("--safe-attribute", xa.safe)->capture_default_str();
    explainc->add_option("--out", xa.out, "report file (default: stdout)");
    on(explainc, [&] {
        Timer t;
        const auto raw = load_scores(xa.scores);
        if (raw.normalized()) throw ValidationError("explain needs raw scores; tau is defined on cosine similarities");
        const auto model = load_model(xa.model, raw.vocab_hash());
        const auto norm = apply_normalizer(model.normalizer, raw);
        const auto target = xa.target == "normalized" ? ThresholdTarget::Normalized : ThresholdTarget::Raw;
        if (xa.target != "raw" && xa.target != "normalized") throw ValidationError("--target must be raw or normalized");
        const auto exps = explain_all(model, raw, norm, xa.tau, target);
        std::optional<LabeledDataset> truth;
        if (!xa.labels.empty()) truth = load_binary_labels(xa.labels, parse_label_schema(xa.schema), xa.safe);
        write_stdout_or_file(render_report(exps, truth ? &*truth : nullptr, parse_report_format(xa.format)), xa.out);
        if (!xa.out.empty() && xa.out != "-")
            pipeline::write_command_manifest(g.argv, g.seed, g.threads, {xa.model, xa.scores, xa.labels}, {xa.out},
                                             t.seconds());
    });

    // zeroshot ------------------------------------------------------------
    auto* zs = app.add_subcommand("zeroshot", "per-concept threshold detection");
    zs->require_subcommand(1);
    struct {
        std::string scores, annotations, thresholds, out, style, split, a, b;
    } za;
    auto* zcal = zs->add_subcommand("calibrate", "fit best-BA thresholds on training images");
    zcal->add_option("--scores", za.scores, "raw scores")->required()->check(CLI::ExistingFile);
    zcal->add_option("--annotations", za.annotations, "JSON Lines {image_id, concepts}")->required()->check(CLI::ExistingFile);
    zcal->add_option("--split", za.split, "restrict to the split's train ids")->check(CLI::ExistingFile);
    zcal->add_option("--style", za.style, "description style tag recorded with the thresholds");
    zcal->add_option("--out", za.out)->required();
    on(zcal, [&] {
        Timer t;
        auto raw = load_scores(za.scores);
        if (!za.split.empty()) raw = raw.select_rows(present_ids(load_split_spec(za.split).train, raw, "train"));
        const auto ann = zeroshot::load_annotations(za.annotations, &raw.concept_ids());
        const auto table = zeroshot::calibrate_thresholds(raw, ann, za.style);
        for (const auto& s : table.skipped) warn("concept " + s.concept_id + " skipped: " + s.reason);
        zeroshot::save_thresholds(table, za.out);
        pipeline::write_command_manifest(g.argv, g.seed, g.threads, {za.scores, za.annotations, za.split}, {za.out},
                                         t.seconds());
    });
    auto* zdet = zs->add_subcommand("detect", "list detected concepts per image");
    zdet->add_option("--scores", za.scores)->required()->check(CLI::ExistingFile);
    zdet->add_option("--thresholds", za.thresholds)->required()->check(CLI::ExistingFile);
    zdet->add_option("--out", za.out, "JSON Lines output (default: stdout)");
    on(zdet, [&] {
        const auto raw = load_scores(za.scores);
        const auto table = zeroshot::load_thresholds(za.thresholds);
        std::string text;
        std::vector<std::string> missing;
        for (std::size_t i = 0; i < raw.rows(); ++i) {
            const auto found = zeroshot::detect(raw.row(i), raw.concept_ids(), table, i == 0 ? &missing : nullptr);
            std::string line = "{\"image_id\": \"" + raw.image_ids()[i] + "\", \"concepts\": [";
            bool first = true;
            for (const auto& c : found) {
                line += (first ? "\"" : ", \"") + c + "\"";
                first = false;
            }
            text += line + "]}\n";
        }
        if (!missing.empty()) warn(std::to_string(missing.size()) + " concept(s) have no threshold and were ignored");
        write_stdout_or_file(text, za.out);
    });
    auto* zev = zs->add_subcommand("evaluate", "per-concept BA on annotated test images");
    zev->add_option("--scores", za.scores)->required()->check(CLI::ExistingFile);
    zev->add_option("--annotations", za.annotations)->required()->check(CLI::ExistingFile);
    zev->add_option("--thresholds", za.thresholds)->required()->check(CLI::ExistingFile);
    zev->add_option("--split", za.split, "restrict to the split's test ids")->check(CLI::ExistingFile);
    zev->add_option("--out", za.out)->required();
    on(zev, [&] {
        Timer t;
        auto raw = load_scores(za.scores);
        if (!za.split.empty()) raw = raw.select_rows(present_ids(load_split_spec(za.split).test, raw, "test"));
        const auto ann = zeroshot::load_annotations(za.annotations, &raw.concept_ids());
        const auto eval = zeroshot::evaluate_detection(raw, ann, zeroshot::load_thresholds(za.thresholds));
        zeroshot::save_evaluation(eval, za.out);
        std::cout << eval.per_concept.size() << " concepts, mean BA " << eval.mean_ba << ", median BA " << eval.median_ba
                  << "\n";
        pipeline::write_command_manifest(g.argv, g.seed, g.threads, {za.scores, za.annotations, za.thresholds, za.split},
                                         {za.out}, t.seconds());
    });
    auto* zcmp = zs->add_subcommand("compare", "per-concept BA differences between two description styles");
    zcmp->add_option("--a", za.a, "evaluation JSON of style A")->required()->check(CLI::ExistingFile);
    zcmp->add_option("--b", za.b, "evaluation JSON of style B")->required()->check(CLI::ExistingFile);
    zcmp->add_option("--out", za.out)->required();
    on(zcmp, [&] {
        auto read_eval = [](const std::string& p) { return zeroshot::load_evaluation(p); };
        const auto cmp = zeroshot::compare_styles(read_eval(za.a), read_eval(za.b));
        zeroshot::save_comparison(cmp, za.out);
        std::cout << "median delta " << cmp.median_delta << ", median |delta| " << cmp.median_abs_delta << "\n";
    });

    // bias ----------------------------------------------------------------
    auto* biasc = app.add_subcommand("bias", "compare scaled weights across datasets");
    struct {
        std::vector<std::string> models;
        std::string out, svg;
    } ba;
    biasc->add_option("--models", ba.models, "model JSON files")->required()->expected(2, -1)->check(CLI::ExistingFile);
    biasc->add_option("--out", ba.out, "comparison CSV")->required();
    biasc->add_option("--svg", ba.svg, "bar chart of scaled weights");
    on(biasc, [&] {
        Timer t;
        std::vector<bias::BiasProfile> profiles;
        for (const auto& m : ba.models) profiles.push_back(bias::scale_weights(load_model(m)));
        const auto cmp = bias::compare(profiles);
        write_stdout_or_file(bias::to_csv(cmp), ba.out);
        std::vector<fs::path> outs{ba.out};
        if (!ba.svg.empty()) {
            write_stdout_or_file(bias::to_svg(cmp), ba.svg);
            outs.emplace_back(ba.svg);
        }
        std::vector<fs::path> ins(ba.models.begin(), ba.models.end());
        pipeline::write_command_manifest(g.argv, g.seed, g.threads, ins, outs, t.seconds());
    });

    // run -----------------------------------------------------------------
    auto* runc = app.add_subcommand("run", "run the pipeline described by a TOML config");
    std::string config;
    runc->add_option("--config", config, "pipeline.toml")->required()->check(CLI::ExistingFile);
    on(runc, [&] {
        pipeline::RunOptions opts;
        opts.command_line = g.argv;
        if (app.count("--seed")) opts.seed = g.seed;
        if (app.count("--threads")) opts.threads = g.threads;
        if (!g.cache_dir.empty()) opts.cache_dir = g.cache_dir;
        const auto cfg = pipeline::load_config(config, opts);
        const auto man = pipeline::run_pipeline(cfg, opts);
        for (const auto& s : man.stages)
            std::cout << s.name << ": " << (s.status == pipeline::StageStatus::Cached ? "cached" : "ran") << "\n";
        for (const auto& w : man.warnings) warn(w);
        std::cout << "outputs in " << cfg.out_dir.string() << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (g.threads == 0) throw ValidationError("--threads must be >= 1");
        if (action) action();
        return 0;
    } catch (const Error& e) {
        std::cerr << "privlex: error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Validation ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "privlex: error: " << e.what() << "\n";
        return 1;
    }
}
