#include "privlex/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "jsonio.hpp"
#include "privlex/error.hpp"

namespace privlex {

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

LabeledDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    LabeledDataset data;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        const std::string loc = path.string() + ":" + std::to_string(lineno);
        if (!header) {
            if (line != "image_id,label") throw ValidationError(loc + ": expected header 'image_id,label'");
            header = true;
            continue;
        }
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw ValidationError(loc + ": expected '<image_id>,<label>'");
        std::string id = trim(line.substr(0, comma));
        const std::string label = trim(line.substr(comma + 1));
        if (id.empty()) throw ValidationError(loc + ": empty image id");
        if (label != "0" && label != "1") throw ValidationError(loc + ": label '" + label + "' outside {0,1}");
        if (!seen.insert(id).second) throw ValidationError(loc + ": duplicate image id '" + id + "'");
        data.image_ids.push_back(std::move(id));
        data.labels.push_back(label == "1" ? 1 : 0);
    }
    if (!header) throw ValidationError(path.string() + ": empty labels file");
    return data;
}

LabeledDataset load_vispr(const std::filesystem::path& path, const std::string& safe_attribute) {
    LabeledDataset data;
    std::set<std::string> seen;
    jsonio::for_each_line(path, [&](const jsonio::json& rec, std::size_t lineno) {
        const std::string loc = path.string() + ":" + std::to_string(lineno);
        if (!rec.is_object() || !rec.contains("image_id") || !rec.contains("attributes") ||
            !rec["image_id"].is_string() || !rec["attributes"].is_array())
            throw ValidationError(loc + ": record does not match the VISPR attribute schema "
                                        "{image_id, attributes:[...]}");
        std::string id = rec["image_id"].get<std::string>();
        bool safe = false;
        for (const auto& a : rec["attributes"]) {
            if (!a.is_string()) throw ValidationError(loc + ": attribute names must be strings");
            safe = safe || a.get<std::string>() == safe_attribute;
        }
        if (!seen.insert(id).second) throw ValidationError(loc + ": duplicate image id '" + id + "'");
        data.image_ids.push_back(std::move(id));
        data.labels.push_back(safe ? 0 : 1);
    });
    return data;
}

}  // namespace

LabeledDataset LabeledDataset::select(const std::vector<std::string>& ids, SplitTag tag) const {
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < image_ids.size(); ++i) index.emplace(image_ids[i], i);
    LabeledDataset out;
    out.split = tag;
    for (const auto& id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw ValidationError("no label for image '" + id + "'");
        out.image_ids.push_back(id);
        out.labels.push_back(labels[it->second]);
    }
    return out;
}

LabelSchema parse_label_schema(std::string_view name) {
    if (name == "binary" || name == "direct") return LabelSchema::DirectBinary;
    if (name == "vispr" || name == "vispr-safe") return LabelSchema::VisprSafeAttribute;
    throw ValidationError("unknown label schema '" + std::string(name) + "' (expected binary or vispr)");
}

LabeledDataset load_binary_labels(const std::filesystem::path& path, LabelSchema schema,
                                  const std::string& safe_attribute) {
    return schema == LabelSchema::DirectBinary ? load_csv(path) : load_vispr(path, safe_attribute);
}

void save_binary_labels(const LabeledDataset& data, const std::filesystem::path& path) {
    std::string text = "image_id,label\n";
    for (std::size_t i = 0; i < data.size(); ++i)
        text += data.image_ids[i] + "," + (data.labels[i] ? "1" : "0") + "\n";
    jsonio::write_text(path, text);
}

Alignment align(const ScoreMatrix& scores, const LabeledDataset& labels) {
    std::unordered_map<std::string_view, std::size_t> by_id;
    for (std::size_t i = 0; i < labels.size(); ++i) by_id.emplace(labels.image_ids[i], i);

    Alignment out;
    std::vector<std::string> keep;
    std::set<std::string_view> matched;
    for (const auto& id : scores.image_ids()) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            out.unmatched_scores.push_back(id);
            continue;
        }
        keep.push_back(id);
        out.labels.push_back(labels.labels[it->second]);
        matched.insert(it->first);
    }
    for (const auto& id : labels.image_ids)
        if (!matched.contains(id)) out.unmatched_labels.push_back(id);
    if (keep.empty()) throw ValidationError("align: score matrix and labels share no image ids");
    out.scores = keep.size() == scores.rows() ? scores : scores.select_rows(keep);
    return out;
}

void validate_split_spec(const SplitSpec& split) {
    if (split.train.empty()) throw ValidationError("split spec: train split is empty");
    if (split.test.empty()) throw ValidationError("split spec: test split is empty");
    std::map<std::string_view, const char*> owner;
    auto claim = [&](const std::vector<std::string>& ids, const char* name) {
        std::set<std::string_view> local;
        for (const auto& id : ids) {
            if (!local.insert(id).second)
                throw ValidationError(std::string("split spec: duplicate id '") + id + "' in " + name);
            if (auto [it, fresh] = owner.emplace(id, name); !fresh)
                throw ValidationError("split spec: id '" + id + "' appears in both " + it->second + " and " + name);
        }
    };
    claim(split.train, "train");
    claim(split.val, "val");
    claim(split.test, "test");
}

SplitSpec load_split_spec(const std::filesystem::path& path) {
    const auto doc = jsonio::read_file(path);
    SplitSpec s;
    try {
        s.dataset_tag = doc.value("dataset_tag", path.stem().string());
        s.train = doc.at("train").get<std::vector<std::string>>();
        s.val = doc.value("val", std::vector<std::string>{});
        s.test = doc.at("test").get<std::vector<std::string>>();
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(path.string() + ": malformed split spec: " + e.what());
    }
    validate_split_spec(s);
    return s;
}

void save_split_spec(const SplitSpec& split, const std::filesystem::path& path) {
    jsonio::json doc = {{"dataset_tag", split.dataset_tag}, {"train", split.train}, {"val", split.val}, {"test", split.test}};
    jsonio::write_file(path, doc);
}

}  // namespace privlex
