#include "privlex/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <functional>
#include <set>
#include <unordered_set>

#include "jsonio.hpp"
#include "privlex/bias.hpp"
#include "privlex/embed.hpp"
#include "privlex/error.hpp"
#include "privlex/hashing.hpp"
#include "privlex/lrmodel.hpp"
#include "privlex/matrix.hpp"
#include "privlex/zeroshot.hpp"
#include "toml.hpp"

#ifndef PRIVLEX_VERSION
#define PRIVLEX_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace privlex {

std::string_view tool_version() noexcept { return PRIVLEX_VERSION; }

std::string render_evaluation_report(const metrics::ConfusionCounts& counts, const std::string& dataset_tag,
                                     const std::string& split_name) {
    const auto r = metrics::report(counts);
    jsonio::json doc = {
        {"dataset_tag", dataset_tag},
        {"split", split_name},
        {"n_images", counts.total()},
        {"confusion", {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}}},
        {"overall", {{"acc", r.acc}, {"ba", r.ba}, {"f1_macro", r.f1_macro}}},
        {"private", {{"precision", r.p_priv}, {"recall", r.r_priv}, {"f1", r.f1_priv}}},
        {"public", {{"precision", r.p_pub}, {"recall", r.r_pub}, {"f1", r.f1_pub}}},
        {"undefined", r.undefined},
    };
    return jsonio::canonical(doc);
}

void save_evaluation_report(const metrics::ConfusionCounts& counts, const std::string& dataset_tag,
                            const std::string& split_name, const fs::path& path) {
    jsonio::write_text(path, render_evaluation_report(counts, dataset_tag, split_name));
}

}  // namespace privlex

namespace privlex::pipeline {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

std::string_view status_name(StageStatus s) { return s == StageStatus::Cached ? "cached" : "ran"; }

jsonio::json manifest_json(const RunManifest& m) {
    jsonio::json stages = jsonio::json::array();
    for (const auto& s : m.stages)
        stages.push_back({{"name", s.name},
                          {"status", std::string(status_name(s.status))},
                          {"cache_key", s.cache_key},
                          {"inputs", s.inputs},
                          {"outputs", s.outputs}});
    return {{"tool_version", m.tool_version},
            {"command_line", m.command_line},
            {"config", {{"path", m.config_path}, {"sha256", m.config_hash}}},
            {"seed", m.seed},
            {"threads", m.threads},
            {"inputs", m.input_hashes},
            {"outputs", m.output_hashes},
            {"stages", stages},
            {"warnings", m.warnings},
            {"started_utc", m.started_utc},
            {"wall_seconds", m.wall_seconds}};
}

}  // namespace

void save_run_manifest(const RunManifest& manifest, const fs::path& path) {
    jsonio::write_file(path, manifest_json(manifest));
}

void write_command_manifest(const std::vector<std::string>& command_line, std::uint64_t seed, unsigned threads,
                            const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                            double wall_seconds) {
    if (outputs.empty()) return;
    RunManifest m;
    m.command_line = command_line;
    m.tool_version = std::string(tool_version());
    m.seed = seed;
    m.threads = threads;
    m.started_utc = utc_timestamp();
    m.wall_seconds = wall_seconds;
    for (const auto& p : inputs)
        if (fs::is_regular_file(p)) m.input_hashes[p.string()] = sha256_file(p);
    for (const auto& p : outputs)
        if (fs::is_regular_file(p)) m.output_hashes[p.string()] = sha256_file(p);
    fs::path target = outputs.front();
    target += ".run.json";
    save_run_manifest(m, target);
}

// ---------------------------------------------------------------------------
// Config

namespace {

using Table = toml::table;

const std::map<std::string, std::set<std::string>, std::less<>> kAllowedKeys = {
    {"run", {"seed", "threads", "out_dir", "cache_dir", "cache", "stages"}},
    {"vocab", {"path", "prompts", "template", "mode"}},
    {"embed", {"image_model", "text_model", "images", "batch_size", "image_embeddings", "concept_embeddings"}},
    {"score", {"normalizer"}},
    {"data", {"labels", "schema", "safe_attribute", "split", "dataset_tag"}},
    {"tune", {"budget", "strategy"}},
    {"train", {"C", "max_iter"}},
    {"evaluate", {}},
    {"explain", {"tau", "target", "formats"}},
    {"zeroshot", {"annotations"}},
    {"bias", {"models"}},
};

class ConfigReader {
public:
    ConfigReader(const Table& root, fs::path base, std::string where)
        : root_(root), base_(std::move(base)), where_(std::move(where)) {}

    const Table* table(std::string_view name) const { return root_[name].as_table(); }

    template <class T>
    std::optional<T> get(std::string_view section, std::string_view key) const {
        const auto node = root_[section][key];
        if (!node) return std::nullopt;
        if constexpr (std::is_same_v<T, double>) {
            if (auto v = node.value<double>()) return *v;
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (auto v = node.value<std::int64_t>()) return static_cast<T>(*v);
        } else {
            if (auto v = node.value<T>()) return *v;
        }
        throw ValidationError(where_ + ": [" + std::string(section) + "] " + std::string(key) + " has the wrong type");
    }

    std::optional<fs::path> path(std::string_view section, std::string_view key, bool must_exist = true) const {
        auto s = get<std::string>(section, key);
        if (!s) return std::nullopt;
        fs::path p(*s);
        if (p.is_relative()) p = base_ / p;
        p = p.lexically_normal();
        if (must_exist && !fs::exists(p))
            throw ValidationError(where_ + ": [" + std::string(section) + "] " + std::string(key) + " = '" + *s +
                                  "' does not exist");
        return p;
    }

    std::vector<std::string> strings(std::string_view section, std::string_view key) const {
        std::vector<std::string> out;
        const auto node = root_[section][key];
        if (!node) return out;
        const auto* arr = node.as_array();
        if (!arr) throw ValidationError(where_ + ": [" + std::string(section) + "] " + std::string(key) + " must be an array");
        for (const auto& el : *arr) {
            auto v = el.value<std::string>();
            if (!v)
                throw ValidationError(where_ + ": [" + std::string(section) + "] " + std::string(key) +
                                      " must contain strings");
            out.push_back(*v);
        }
        return out;
    }

    const std::string& where() const { return where_; }

private:
    const Table& root_;
    fs::path base_;
    std::string where_;
};

NormalizerMode parse_normalizer_mode(std::string_view s) {
    if (s == "per-concept") return NormalizerMode::PerConcept;
    if (s == "global") return NormalizerMode::Global;
    throw ValidationError("unknown normalizer '" + std::string(s) + "' (expected per-concept or global)");
}

ThresholdTarget parse_target(std::string_view s) {
    if (s == "raw") return ThresholdTarget::Raw;
    if (s == "normalized") return ThresholdTarget::Normalized;
    throw ValidationError("unknown tau target '" + std::string(s) + "' (expected raw or normalized)");
}

std::string_view format_extension(ReportFormat f) {
    switch (f) {
        case ReportFormat::Text: return "txt";
        case ReportFormat::Json: return "json";
        case ReportFormat::Html: return "html";
    }
    return "txt";
}

}  // namespace

PipelineConfig load_config(const fs::path& path, const RunOptions& options) {
    const std::string where = path.string();
    if (!fs::is_regular_file(path)) throw ValidationError(where + ": config file not found");
    Table root;
    try {
        root = toml::parse_file(path.string());
    } catch (const toml::parse_error& e) {
        const auto& pos = e.source().begin;
        throw ValidationError(where + ":" + std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " +
                              std::string(e.description()));
    }
    for (const auto& [key, node] : root) {
        auto it = kAllowedKeys.find(key.str());
        if (it == kAllowedKeys.end()) throw ValidationError(where + ": unknown section [" + std::string(key.str()) + "]");
        const auto* t = node.as_table();
        if (!t) throw ValidationError(where + ": '" + std::string(key.str()) + "' must be a table");
        for (const auto& [sub, _] : *t)
            if (!it->second.contains(std::string(sub.str())))
                throw ValidationError(where + ": unknown key '" + std::string(sub.str()) + "' in [" +
                                      std::string(key.str()) + "]");
    }

    const fs::path base = fs::absolute(path).parent_path();
    const ConfigReader r(root, base, where);
    PipelineConfig c;
    c.config_path = fs::absolute(path).lexically_normal();

    c.seed = r.get<std::uint64_t>("run", "seed").value_or(0);
    c.threads = r.get<unsigned>("run", "threads").value_or(1);
    c.out_dir = r.path("run", "out_dir", false).value_or(base / "out");
    c.cache_dir = r.path("run", "cache_dir", false).value_or(base / ".privlex-cache");
    c.cache = r.get<bool>("run", "cache").value_or(true);
    if (options.seed) c.seed = *options.seed;
    if (options.threads) c.threads = *options.threads;
    if (options.cache_dir) c.cache_dir = fs::absolute(*options.cache_dir);
    if (c.threads == 0) c.threads = 1;

    c.vocab_path = r.path("vocab", "path");
    c.prompts_path = r.path("vocab", "prompts");
    if (auto s = r.get<std::string>("vocab", "template")) c.template_style = parse_template_style(*s);
    if (auto s = r.get<std::string>("vocab", "mode")) c.selection = parse_selection_mode(*s);

    c.image_model = r.path("embed", "image_model");
    c.text_model = r.path("embed", "text_model");
    c.image_list = r.path("embed", "images");
    c.image_embeddings = r.path("embed", "image_embeddings");
    c.concept_embeddings = r.path("embed", "concept_embeddings");
    if (auto b = r.get<std::int64_t>("embed", "batch_size")) {
        if (*b < 1) throw ValidationError(where + ": [embed] batch_size must be >= 1");
        c.batch_size = static_cast<std::size_t>(*b);
    }

    if (auto s = r.get<std::string>("score", "normalizer")) c.normalizer_mode = parse_normalizer_mode(*s);

    c.labels_path = r.path("data", "labels");
    if (auto s = r.get<std::string>("data", "schema")) c.label_schema = parse_label_schema(*s);
    c.safe_attribute = r.get<std::string>("data", "safe_attribute").value_or("safe");
    c.split_path = r.path("data", "split");
    c.dataset_tag = r.get<std::string>("data", "dataset_tag").value_or("");
    if (c.dataset_tag.empty() && c.split_path) c.dataset_tag = load_split_spec(*c.split_path).dataset_tag;
    if (c.dataset_tag.empty() && c.labels_path) c.dataset_tag = c.labels_path->stem().string();

    if (auto b = r.get<int>("tune", "budget")) c.budget = *b;
    if (auto s = r.get<std::string>("tune", "strategy")) c.strategy = tune::parse_strategy(*s);

    c.C = r.get<double>("train", "C");
    c.max_iter = r.get<int>("train", "max_iter");
    if (c.C.has_value() != c.max_iter.has_value())
        throw ValidationError(where + ": [train] needs both C and max_iter, or neither");
    if (c.C && !(*c.C > 0.0 && *c.C <= 1.0)) throw ValidationError(where + ": [train] C must lie in (0, 1]");
    if (c.max_iter && *c.max_iter < 1) throw ValidationError(where + ": [train] max_iter must be >= 1");

    c.tau = r.get<double>("explain", "tau").value_or(kDefaultTau);
    if (auto s = r.get<std::string>("explain", "target")) c.tau_target = parse_target(*s);
    if (auto fmts = r.strings("explain", "formats"); !fmts.empty()) {
        c.report_formats.clear();
        for (const auto& f : fmts) c.report_formats.push_back(parse_report_format(f));
    }

    c.annotations_path = r.path("zeroshot", "annotations");
    for (const auto& m : r.strings("bias", "models")) {
        fs::path p(m);
        if (p.is_relative()) p = base / p;
        if (!fs::exists(p)) throw ValidationError(where + ": [bias] model '" + m + "' does not exist");
        c.bias_models.push_back(p.lexically_normal());
    }

    // Stage selection: explicit list, or every configured stage.
    auto requested = r.strings("run", "stages");
    if (requested.empty()) {
        for (auto s : kStageOrder) {
            const std::string name(s);
            bool on = r.table(name) != nullptr;
            if (name == "vocab") on = c.vocab_path.has_value();
            if (name == "embed") on = c.image_model || c.text_model;
            if (on) requested.push_back(name);
        }
    }
    for (const auto& s : requested)
        if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end())
            throw ValidationError(where + ": unknown stage '" + s + "'");
    for (auto s : kStageOrder)
        if (std::find(requested.begin(), requested.end(), s) != requested.end()) c.stages.emplace_back(s);
    if (c.stages.empty()) throw ValidationError(where + ": no stages requested");

    auto wants = [&](std::string_view s) { return std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end(); };
    auto need = [&](bool ok, std::string_view stage, const std::string& what) {
        if (!ok) throw ValidationError(where + ": stage '" + std::string(stage) + "' requires " + what);
    };
    if (wants("vocab")) need(c.vocab_path.has_value(), "vocab", "[vocab] path");
    if (wants("embed")) {
        need(c.image_model || c.text_model, "embed", "[embed] image_model or text_model");
        if (c.image_model) need(c.image_list.has_value(), "embed", "[embed] images");
    }
    for (auto s : {"tune", "train", "evaluate"})
        if (wants(s)) need(c.labels_path && c.split_path, s, "[data] labels and split");
    if (wants("tune")) need(c.budget >= 1, "tune", "[tune] budget >= 1");
    if (wants("zeroshot")) need(c.annotations_path && c.split_path, "zeroshot", "[zeroshot] annotations and [data] split");
    if (wants("bias")) need(!c.bias_models.empty(), "bias", "[bias] models");
    if (wants("explain") && !(c.tau > 0.0 && c.tau < 1.0)) throw ValidationError(where + ": [explain] tau must lie in (0, 1)");
    return c;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct StageIO {
    jsonio::json params = jsonio::json::object();
    std::vector<std::pair<std::string, fs::path>> inputs;  // logical name, file
    std::map<std::string, std::string> extra_hashes;       // logical name, precomputed digest
    std::vector<std::string> outputs;                      // file names in out_dir
};

std::vector<std::string> matrix_files(const std::string& name, bool scores) {
    std::vector<std::string> out{name, name + ".ids.json"};
    if (scores) out.push_back(name + ".concepts.json");
    return out;
}

void add_matrix_inputs(StageIO& io, const std::string& logical, const fs::path& p, bool scores) {
    io.inputs.emplace_back(logical, p);
    io.inputs.emplace_back(logical + ".ids", pvx1::ids_sidecar(p));
    if (scores) io.inputs.emplace_back(logical + ".concepts", concepts_sidecar(p));
}

// Model graph, manifest and any files the manifest references.
void add_encoder_inputs(StageIO& io, const std::string& logical, const fs::path& model) {
    io.inputs.emplace_back(logical, model);
    const auto manifest_path = manifest_path_for(model);
    io.inputs.emplace_back(logical + ".manifest", manifest_path);
    const auto m = load_encoder_manifest(manifest_path);
    if (m.modality == Modality::Text) {
        io.inputs.emplace_back(logical + ".vocab", m.text.vocab_path);
        io.inputs.emplace_back(logical + ".merges", m.text.merges_path);
        if (m.text.input_kind == TextInputKind::TokenEmbeddings)
            add_matrix_inputs(io, logical + ".token_embeddings", m.text.token_embeddings_path, false);
    }
}

// One digest over every listed image's id and content; missing files hash as "missing".
std::string image_set_digest(const std::vector<ImageInput>& images) {
    Sha256 h;
    for (const auto& img : images) {
        h.update(img.id).update("\t");
        h.update(fs::is_regular_file(img.path) ? sha256_file(img.path) : std::string("missing")).update("\n");
    }
    return h.digest();
}

struct SplitData {
    ScoreMatrix scores;
    LabeledDataset labels;
};

class Runner {
public:
    Runner(const PipelineConfig& cfg, RunManifest& man) : cfg_(cfg), man_(man) {}

    void run() {
        fs::create_directories(cfg_.out_dir);
        for (const auto& s : cfg_.stages) {
            try {
                dispatch(s);
            } catch (const ValidationError& e) {
                throw ValidationError("stage '" + s + "': " + e.what());
            } catch (const Error& e) {
                throw RuntimeError("stage '" + s + "': " + e.what());
            } catch (const std::exception& e) {
                throw RuntimeError("stage '" + s + "': " + e.what());
            }
        }
    }

private:
    fs::path out(const std::string& name) const { return cfg_.out_dir / name; }
    bool wants(std::string_view s) const {
        return std::find(cfg_.stages.begin(), cfg_.stages.end(), s) != cfg_.stages.end();
    }

    fs::path prompts_file() const { return cfg_.prompts_path.value_or(out("prompts.jsonl")); }
    bool have_prompts() const { return cfg_.prompts_path || wants("vocab") || fs::exists(out("prompts.jsonl")); }
    fs::path image_emb_file() const { return cfg_.image_embeddings.value_or(out("image_embeddings.pvx1")); }
    fs::path concept_emb_file() const { return cfg_.concept_embeddings.value_or(out("concept_embeddings.pvx1")); }

    void dispatch(const std::string& s) {
        if (s == "vocab") stage_vocab();
        else if (s == "embed") stage_embed();
        else if (s == "score") stage_score();
        else if (s == "tune") stage_tune();
        else if (s == "train") stage_train();
        else if (s == "evaluate") stage_evaluate();
        else if (s == "explain") stage_explain();
        else if (s == "zeroshot") stage_zeroshot();
        else if (s == "bias") stage_bias();
    }

    // Hash inputs, try the cache, otherwise run `body` and store its outputs.
    void execute(const std::string& name, const StageIO& io, const std::function<void()>& body) {
        StageRecord rec;
        rec.name = name;
        for (const auto& [logical, p] : io.inputs) {
            if (!fs::is_regular_file(p))
                throw ValidationError("missing input " + logical + " (" + p.string() + ")");
            const auto digest = sha256_file(p);
            rec.inputs[logical] = digest;
            man_.input_hashes[p.string()] = digest;
        }
        for (const auto& [logical, digest] : io.extra_hashes) rec.inputs[logical] = digest;
        const jsonio::json key_doc = {
            {"stage", name}, {"tool_version", std::string(tool_version())}, {"params", io.params}, {"inputs", rec.inputs}};
        rec.cache_key = sha256_hex(jsonio::canonical(key_doc));

        const fs::path entry = cfg_.cache_dir / name / rec.cache_key;
        if (cfg_.cache && fs::is_regular_file(entry / "entry.json")) {
            restore(entry, io.outputs, rec);
            rec.status = StageStatus::Cached;
        } else {
            body();
            for (const auto& f : io.outputs) rec.outputs[f] = sha256_file(out(f));
            if (cfg_.cache) store(entry, rec.outputs);
            rec.status = StageStatus::Ran;
        }
        for (const auto& [f, digest] : rec.outputs) man_.output_hashes[f] = digest;
        man_.stages.push_back(std::move(rec));
    }

    void restore(const fs::path& entry, const std::vector<std::string>& outputs, StageRecord& rec) {
        const auto doc = jsonio::read_file(entry / "entry.json");
        std::map<std::string, std::string> recorded;
        try {
            recorded = doc.at("outputs").get<std::map<std::string, std::string>>();
        } catch (const jsonio::json::exception& e) {
            throw RuntimeError("cache entry " + entry.string() + " is malformed: " + e.what());
        }
        for (const auto& f : outputs) {
            auto it = recorded.find(f);
            const fs::path cached = entry / f;
            if (it == recorded.end() || !fs::is_regular_file(cached))
                throw RuntimeError("cache entry " + entry.string() + " lacks " + f);
            if (sha256_file(cached) != it->second)
                throw RuntimeError("hash mismatch in cached artifact " + cached.string());
            fs::copy_file(cached, out(f), fs::copy_options::overwrite_existing);
            rec.outputs[f] = it->second;
        }
    }

    void store(const fs::path& entry, const std::map<std::string, std::string>& outputs) {
        fs::path tmp = entry;
        tmp += ".partial";
        fs::remove_all(tmp);
        fs::create_directories(tmp);
        for (const auto& [f, _] : outputs) fs::copy_file(out(f), tmp / f, fs::copy_options::overwrite_existing);
        jsonio::write_file(tmp / "entry.json", {{"outputs", outputs}});
        fs::remove_all(entry);
        fs::rename(tmp, entry);
    }

    // -- data helpers -------------------------------------------------------

    LabeledDataset labels() const { return load_binary_labels(*cfg_.labels_path, cfg_.label_schema, cfg_.safe_attribute); }
    SplitSpec split() const { return load_split_spec(*cfg_.split_path); }

    void add_data_inputs(StageIO& io) const {
        io.inputs.emplace_back("labels", *cfg_.labels_path);
        io.inputs.emplace_back("split", *cfg_.split_path);
        io.params["schema"] = cfg_.label_schema == LabelSchema::DirectBinary ? "binary" : "vispr";
        io.params["safe_attribute"] = cfg_.safe_attribute;
    }

    // Ids of `wanted` that have both a score row and (when given) a label, in split order.
    std::vector<std::string> usable_ids(const std::vector<std::string>& wanted, const ScoreMatrix& scores,
                                        const LabeledDataset* labels, const std::string& split_name) {
        std::unordered_set<std::string_view> in_scores(scores.image_ids().begin(), scores.image_ids().end());
        std::unordered_set<std::string_view> in_labels;
        if (labels) in_labels.insert(labels->image_ids.begin(), labels->image_ids.end());
        std::vector<std::string> ids;
        std::size_t dropped = 0;
        for (const auto& id : wanted) {
            if (in_scores.contains(id) && (!labels || in_labels.contains(id))) ids.push_back(id);
            else ++dropped;
        }
        if (dropped > 0)
            man_.warnings.push_back(std::to_string(dropped) + " " + split_name +
                                    " image(s) lack a score row or label and were left out");
        return ids;
    }

    SplitData subset(const ScoreMatrix& scores, const LabeledDataset& labels, const std::vector<std::string>& wanted,
                     SplitTag tag, const std::string& split_name) {
        const auto ids = usable_ids(wanted, scores, &labels, split_name);
        if (ids.empty()) throw ValidationError("no " + split_name + " images have both scores and labels");
        return {scores.select_rows(ids), labels.select(ids, tag)};
    }

    // -- stages ---------------------------------------------------------------

    void stage_vocab() {
        StageIO io;
        io.inputs.emplace_back("vocabulary", *cfg_.vocab_path);
        io.params = {{"template", std::string(to_string(cfg_.template_style))},
                     {"mode", cfg_.selection == SelectionMode::Flat ? "flat" : "hierarchy"}};
        io.outputs = {"prompts.jsonl"};
        execute("vocab", io, [&] {
            const auto vocab = load_vocabulary(*cfg_.vocab_path, cfg_.template_style);
            const auto active = select_bottleneck(vocab, cfg_.selection);
            save_prompts(compile_prompts(active), out("prompts.jsonl"));
        });
    }

    void stage_embed() {
        StageIO io;
        io.params = {{"batch_size", cfg_.batch_size}};
        std::vector<ImageInput> images;
        if (cfg_.image_model) {
            add_encoder_inputs(io, "image_model", *cfg_.image_model);
            io.inputs.emplace_back("image_list", *cfg_.image_list);
            images = load_image_list(*cfg_.image_list);
            io.extra_hashes["images"] = image_set_digest(images);
            for (const auto& f : matrix_files("image_embeddings.pvx1", false)) io.outputs.push_back(f);
            io.outputs.push_back("embed_skipped.json");
        }
        if (cfg_.text_model) {
            add_encoder_inputs(io, "text_model", *cfg_.text_model);
            io.inputs.emplace_back("prompts", prompts_file());
            for (const auto& f : matrix_files("concept_embeddings.pvx1", false)) io.outputs.push_back(f);
        }
        execute("embed", io, [&] {
            if (cfg_.image_model) {
                const EncoderHandle enc(*cfg_.image_model);
                if (enc.modality() != Modality::Image)
                    throw ValidationError(cfg_.image_model->string() + " is not an image encoder");
                const auto res = embed_images(enc, images, cfg_.batch_size);
                save_matrix(res.matrix, out("image_embeddings.pvx1"));
                jsonio::json skipped = jsonio::json::array();
                for (const auto& s : res.skipped)
                    skipped.push_back({{"image_id", s.id}, {"path", s.path}, {"reason", s.reason}});
                jsonio::write_file(out("embed_skipped.json"), skipped);
            }
            if (cfg_.text_model) {
                const EncoderHandle enc(*cfg_.text_model);
                if (enc.modality() != Modality::Text)
                    throw ValidationError(cfg_.text_model->string() + " is not a text encoder");
                save_matrix(embed_texts(enc, load_prompts(prompts_file()), cfg_.batch_size).matrix,
                            out("concept_embeddings.pvx1"));
            }
        });
        if (cfg_.image_model) {
            const auto skipped = jsonio::read_file(out("embed_skipped.json"));
            if (!skipped.empty())
                man_.warnings.push_back(std::to_string(skipped.size()) + " image(s) could not be decoded; see embed_skipped.json");
        }
    }

    void stage_score() {
        StageIO io;
        add_matrix_inputs(io, "image_embeddings", image_emb_file(), false);
        add_matrix_inputs(io, "concept_embeddings", concept_emb_file(), false);
        const bool prompts = have_prompts();
        if (prompts) io.inputs.emplace_back("prompts", prompts_file());
        if (cfg_.split_path) io.inputs.emplace_back("split", *cfg_.split_path);
        io.params = {{"normalizer", cfg_.normalizer_mode == NormalizerMode::Global ? "global" : "per-concept"}};
        for (const auto& f : matrix_files("scores_raw.pvx1", true)) io.outputs.push_back(f);
        io.outputs.push_back("normalizer.json");
        for (const auto& f : matrix_files("scores_norm.pvx1", true)) io.outputs.push_back(f);
        execute("score", io, [&] {
            const auto images = load_matrix(image_emb_file());
            const auto concepts = load_matrix(concept_emb_file());
            std::string vocab_hash;
            if (prompts) {
                const auto list = load_prompts(prompts_file());
                std::vector<std::string> ids;
                for (const auto& p : list) ids.push_back(p.concept_id);
                if (ids != concepts.ids())
                    throw ValidationError("concept embedding ids do not match the compiled prompt list");
                vocab_hash = hash_prompts(list);
            }
            const auto raw = cosine_scores(images, concepts, vocab_hash, cfg_.threads);
            std::vector<std::string> fit_ids = raw.image_ids();
            if (cfg_.split_path) {
                fit_ids = usable_ids(split().train, raw, nullptr, "train");
                if (fit_ids.empty()) throw ValidationError("no train images have scores; cannot fit the normalizer");
            }
            const auto norm = fit_normalizer(raw.select_rows(fit_ids), cfg_.normalizer_mode);
            save_scores(raw, out("scores_raw.pvx1"));
            save_normalizer(norm, out("normalizer.json"));
            save_scores(apply_normalizer(norm, raw), out("scores_norm.pvx1"));
        });
    }

    void stage_tune() {
        StageIO io;
        add_matrix_inputs(io, "scores_norm", out("scores_norm.pvx1"), true);
        io.inputs.emplace_back("normalizer", out("normalizer.json"));
        add_data_inputs(io);
        io.params.update({{"budget", cfg_.budget}, {"strategy", std::string(tune::to_string(cfg_.strategy))},
                          {"seed", cfg_.seed}});
        io.outputs = {"search.json"};
        execute("tune", io, [&] {
            const auto scores = load_scores(out("scores_norm.pvx1"));
            const auto norm = load_normalizer(out("normalizer.json"));
            const auto all = labels();
            const auto sp = split();
            const auto tr = subset(scores, all, sp.train, SplitTag::Train, "train");
            const auto va = subset(scores, all, sp.val, SplitTag::Val, "val");
            const auto res = tune::search(tr.scores, tr.labels, va.scores, va.labels, norm,
                                          {cfg_.budget, cfg_.strategy, cfg_.seed, cfg_.threads});
            tune::save_search(res, out("search.json"));
        });
    }

    void stage_train() {
        StageIO io;
        add_matrix_inputs(io, "scores_norm", out("scores_norm.pvx1"), true);
        io.inputs.emplace_back("normalizer", out("normalizer.json"));
        add_data_inputs(io);
        if (!cfg_.C) io.inputs.emplace_back("search", out("search.json"));
        io.params.update({{"seed", cfg_.seed}, {"dataset_tag", cfg_.dataset_tag}});
        if (cfg_.C) io.params.update({{"C", *cfg_.C}, {"max_iter", *cfg_.max_iter}});
        io.outputs = {"model.json"};
        execute("train", io, [&] {
            Hyperparameters hyper;
            if (cfg_.C) {
                hyper = {*cfg_.C, *cfg_.max_iter, cfg_.seed};
            } else {
                const auto best = tune::load_search(out("search.json")).best;
                hyper = {best.C, best.max_iter, best.seed};
            }
            const auto scores = load_scores(out("scores_norm.pvx1"));
            const auto tr = subset(scores, labels(), split().train, SplitTag::Train, "train");
            const auto model = train(tr.scores, tr.labels, load_normalizer(out("normalizer.json")), hyper, cfg_.dataset_tag);
            save_model(model, out("model.json"));
        });
    }

    void stage_evaluate() {
        StageIO io;
        io.inputs.emplace_back("model", out("model.json"));
        add_matrix_inputs(io, "scores_norm", out("scores_norm.pvx1"), true);
        add_data_inputs(io);
        io.params["dataset_tag"] = cfg_.dataset_tag;
        io.outputs = {"report.json"};
        execute("evaluate", io, [&] {
            const auto scores = load_scores(out("scores_norm.pvx1"));
            const auto model = load_model(out("model.json"), scores.vocab_hash());
            const auto te = subset(scores, labels(), split().test, SplitTag::Test, "test");
            const auto pred = predict_labels(predict_proba(model, te.scores));
            save_evaluation_report(metrics::confusion(pred, te.labels.labels), cfg_.dataset_tag, "test", out("report.json"));
        });
    }

    void stage_explain() {
        StageIO io;
        io.inputs.emplace_back("model", out("model.json"));
        add_matrix_inputs(io, "scores_raw", out("scores_raw.pvx1"), true);
        add_matrix_inputs(io, "scores_norm", out("scores_norm.pvx1"), true);
        if (cfg_.labels_path) io.inputs.emplace_back("labels", *cfg_.labels_path);
        if (cfg_.split_path) io.inputs.emplace_back("split", *cfg_.split_path);
        jsonio::json formats = jsonio::json::array();
        for (auto f : cfg_.report_formats) {
            formats.push_back(std::string(format_extension(f)));
            io.outputs.push_back("explanations." + std::string(format_extension(f)));
        }
        io.params = {{"tau", cfg_.tau},
                     {"target", cfg_.tau_target == ThresholdTarget::Raw ? "raw" : "normalized"},
                     {"formats", formats}};
        execute("explain", io, [&] {
            auto raw = load_scores(out("scores_raw.pvx1"));
            auto norm = load_scores(out("scores_norm.pvx1"));
            const auto model = load_model(out("model.json"), raw.vocab_hash());
            std::optional<LabeledDataset> truth;
            if (cfg_.labels_path) truth = labels();
            if (cfg_.split_path) {
                const auto ids = usable_ids(split().test, raw, nullptr, "test");
                if (ids.empty()) throw ValidationError("no test images have scores");
                raw = raw.select_rows(ids);
                norm = norm.select_rows(ids);
            }
            const auto explanations = explain_all(model, raw, norm, cfg_.tau, cfg_.tau_target);
            for (auto f : cfg_.report_formats)
                jsonio::write_text(out("explanations." + std::string(format_extension(f))),
                                   render_report(explanations, truth ? &*truth : nullptr, f));
        });
    }

    void stage_zeroshot() {
        StageIO io;
        add_matrix_inputs(io, "scores_raw", out("scores_raw.pvx1"), true);
        io.inputs.emplace_back("annotations", *cfg_.annotations_path);
        io.inputs.emplace_back("split", *cfg_.split_path);
        const std::string style(to_string(cfg_.template_style));
        io.params = {{"style", style}};
        io.outputs = {"zeroshot_thresholds.json", "zeroshot_eval.json"};
        execute("zeroshot", io, [&] {
            const auto raw = load_scores(out("scores_raw.pvx1"));
            const auto ann = zeroshot::load_annotations(*cfg_.annotations_path, &raw.concept_ids());
            const auto sp = split();
            const auto train_ids = usable_ids(sp.train, raw, nullptr, "train");
            const auto test_ids = usable_ids(sp.test, raw, nullptr, "test");
            if (train_ids.empty() || test_ids.empty()) throw ValidationError("train and test splits need scored images");
            const auto table = zeroshot::calibrate_thresholds(raw.select_rows(train_ids), ann, style);
            zeroshot::save_thresholds(table, out("zeroshot_thresholds.json"));
            zeroshot::save_evaluation(zeroshot::evaluate_detection(raw.select_rows(test_ids), ann, table),
                                      out("zeroshot_eval.json"));
        });
    }

    void stage_bias() {
        StageIO io;
        const bool own = wants("train") || fs::exists(out("model.json"));
        std::vector<fs::path> models;
        if (own) models.push_back(out("model.json"));
        models.insert(models.end(), cfg_.bias_models.begin(), cfg_.bias_models.end());
        if (models.size() < 2) throw ValidationError("bias needs at least two models");
        for (std::size_t i = 0; i < models.size(); ++i) io.inputs.emplace_back("model" + std::to_string(i), models[i]);
        io.outputs = {"bias.csv", "bias.svg"};
        execute("bias", io, [&] {
            std::vector<bias::BiasProfile> profiles;
            for (const auto& m : models) profiles.push_back(bias::scale_weights(load_model(m)));
            const auto cmp = bias::compare(profiles);
            jsonio::write_text(out("bias.csv"), bias::to_csv(cmp));
            jsonio::write_text(out("bias.svg"), bias::to_svg(cmp));
        });
    }

    const PipelineConfig& cfg_;
    RunManifest& man_;
};

}  // namespace

RunManifest run_pipeline(const PipelineConfig& config, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest man;
    man.command_line = options.command_line;
    man.tool_version = std::string(tool_version());
    man.seed = config.seed;
    man.threads = config.threads;
    man.config_path = config.config_path.string();
    if (fs::is_regular_file(config.config_path)) man.config_hash = sha256_file(config.config_path);
    man.started_utc = utc_timestamp();
    Runner(config, man).run();
    man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_run_manifest(man, config.out_dir / "run_manifest.json");
    return man;
}

RunManifest run_pipeline(const fs::path& config_path, const RunOptions& options) {
    return run_pipeline(load_config(config_path, options), options);
}

}  // namespace privlex::pipeline
