#include "privlex/embed.hpp"

#include <opencv2/dnn.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "jsonio.hpp"
#include "privlex/error.hpp"

namespace privlex {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Manifest

fs::path manifest_path_for(const fs::path& model_path) { return fs::path(model_path.string() + ".manifest.json"); }

EncoderManifest load_encoder_manifest(const fs::path& manifest_path) {
    const auto doc = jsonio::read_file(manifest_path);
    const fs::path base = manifest_path.parent_path();
    const std::string where = manifest_path.string();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    EncoderManifest m;
    try {
        const auto modality = doc.at("modality").get<std::string>();
        if (modality == "image")
            m.modality = Modality::Image;
        else if (modality == "text")
            m.modality = Modality::Text;
        else
            throw ValidationError(where + ": unknown modality '" + modality + "'");
        m.reported_dim = doc.at("reported_dim").get<std::size_t>();
        m.checkpoint = doc.value("checkpoint", "");
        m.input_name = doc.value("input_name", "");
        m.output_name = doc.value("output_name", "");

        if (m.modality == Modality::Image) {
            const auto& img = doc.at("image");
            m.image.resize_shortest = img.at("resize_shortest").get<int>();
            m.image.crop = img.at("crop").get<int>();
            m.image.interpolation = img.value("interpolation", "bicubic");
            m.image.rescale = img.value("rescale", 1.0 / 255.0);
            m.image.mean = img.at("mean").get<std::array<double, 3>>();
            m.image.std = img.at("std").get<std::array<double, 3>>();
            if (m.image.crop <= 0 || m.image.resize_shortest < m.image.crop)
                throw ValidationError(where + ": image.resize_shortest must be >= image.crop > 0");
        } else {
            const auto& txt = doc.at("text");
            const auto& tok = txt.at("tokenizer");
            if (tok.value("type", "clip-bpe") != "clip-bpe")
                throw ValidationError(where + ": unsupported tokenizer type '" + tok.value("type", "") + "'");
            m.text.vocab_path = resolve(tok.at("vocab").get<std::string>());
            m.text.merges_path = resolve(tok.at("merges").get<std::string>());
            m.text.context_length = txt.value("context_length", 77);
            m.text.pad_id = txt.value("pad_id", 0);
            const auto kind = txt.value("input_kind", "token_ids");
            if (kind == "token_ids")
                m.text.input_kind = TextInputKind::TokenIds;
            else if (kind == "token_embeddings")
                m.text.input_kind = TextInputKind::TokenEmbeddings;
            else
                throw ValidationError(where + ": unknown text.input_kind '" + kind + "'");
            if (m.text.input_kind == TextInputKind::TokenEmbeddings)
                m.text.token_embeddings_path = resolve(txt.at("token_embeddings").get<std::string>());
            const auto pooling = txt.value("pooling", "none");
            if (pooling == "none")
                m.text.pooling = TextPooling::None;
            else if (pooling == "eot")
                m.text.pooling = TextPooling::EndOfText;
            else
                throw ValidationError(where + ": unknown text.pooling '" + pooling + "'");
            if (m.text.context_length < 2) throw ValidationError(where + ": text.context_length must be >= 2");
        }
    } catch (const jsonio::json::exception& e) {
        throw ValidationError(where + ": malformed manifest: " + e.what());
    }
    if (m.reported_dim == 0) throw ValidationError(where + ": reported_dim must be positive");
    return m;
}

// ---------------------------------------------------------------------------
// CLIP BPE tokenizer

namespace {

std::string utf8(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

// Decodes UTF-8 into (codepoint, byte-offset) pairs; invalid bytes decode as U+FFFD.
std::vector<std::pair<char32_t, std::size_t>> decode_utf8(const std::string& s) {
    std::vector<std::pair<char32_t, std::size_t>> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b = static_cast<unsigned char>(s[i]);
        std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
        if (len == 0 || i + len > s.size()) {
            out.emplace_back(0xFFFD, i);
            ++i;
            continue;
        }
        char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
        for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        out.emplace_back(cp, i);
        i += len;
    }
    return out;
}

bool is_space(char32_t c) {
    return c == ' ' || (c >= '\t' && c <= '\r') || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

bool is_number(char32_t c) {
    return (c >= '0' && c <= '9') || c == 0xB2 || c == 0xB3 || c == 0xB9 || (c >= 0xBC && c <= 0xBE) ||
           (c >= 0x0660 && c <= 0x0669) || (c >= 0x2070 && c <= 0x2079) || (c >= 0x2080 && c <= 0x2089) ||
           (c >= 0x2150 && c <= 0x218B) || (c >= 0x2460 && c <= 0x249B) || (c >= 0xFF10 && c <= 0xFF19);
}

// ASCII is exact; outside ASCII, anything that is not a known space, digit, symbol or
// punctuation block counts as a letter.
bool is_letter(char32_t c) {
    if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (is_space(c) || is_number(c)) return false;
    if (c <= 0xBF) return c == 0xAA || c == 0xB5 || c == 0xBA;
    if (c == 0xD7 || c == 0xF7) return false;
    if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows, math, boxes
    if (c >= 0x3000 && c <= 0x303F) return false;  // CJK punctuation
    if (c >= 0xFE30 && c <= 0xFE4F) return false;
    if (c >= 0xFF00 && c <= 0xFF0F) return false;
    if (c >= 0xFF1A && c <= 0xFF20) return false;
    if (c >= 0x1F000 && c <= 0x1FAFF) return false;  // emoji and pictographs
    if (c == 0xFFFD) return false;
    return true;
}

const std::array<std::string, 256>& byte_encoder() {
    static const std::array<std::string, 256> table = [] {
        std::array<std::string, 256> t;
        std::array<bool, 256> direct{};
        for (int b = '!'; b <= '~'; ++b) direct[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
        int n = 0;
        for (int b = 0; b < 256; ++b) t[b] = utf8(direct[b] ? static_cast<char32_t>(b) : static_cast<char32_t>(256 + n++));
        return t;
    }();
    return table;
}

std::string clean_text(const std::string& text) {
    std::string out;
    bool pending_space = false;
    for (auto [cp, off] : decode_utf8(text)) {
        (void)off;
        if (is_space(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
        out += utf8(cp);
    }
    return out;
}

// Splits cleaned text the way CLIP's regex does: special markers, contractions,
// letter runs, single digits, and runs of other non-space characters.
std::vector<std::string> pretokenize(const std::string& text) {
    static const std::array<std::string_view, 9> kFixed = {"<|startoftext|>", "<|endoftext|>", "'s", "'t", "'re",
                                                           "'ve", "'m", "'ll", "'d"};
    const auto cps = decode_utf8(text);
    auto offset = [&](std::size_t k) { return k < cps.size() ? cps[k].second : text.size(); };
    std::vector<std::string> out;
    std::size_t k = 0;
    while (k < cps.size()) {
        const std::string_view rest(text.data() + offset(k), text.size() - offset(k));
        bool fixed = false;
        for (auto f : kFixed) {
            if (rest.substr(0, f.size()) == f) {
                out.emplace_back(f);
                std::size_t end = offset(k) + f.size();
                while (k < cps.size() && cps[k].second < end) ++k;
                fixed = true;
                break;
            }
        }
        if (fixed) continue;
        const char32_t c = cps[k].first;
        std::size_t j = k + 1;
        if (is_space(c)) {
            k = j;
            continue;
        }
        if (is_letter(c)) {
            while (j < cps.size() && is_letter(cps[j].first)) ++j;
        } else if (!is_number(c)) {
            while (j < cps.size() && !is_space(cps[j].first) && !is_letter(cps[j].first) && !is_number(cps[j].first))
                ++j;
        }
        out.push_back(text.substr(offset(k), offset(j) - offset(k)));
        k = j;
    }
    return out;
}

}  // namespace

ClipTokenizer::ClipTokenizer(const fs::path& vocab_json, const fs::path& merges_txt) {
    const auto vocab = jsonio::read_file(vocab_json);
    if (!vocab.is_object()) throw ValidationError(vocab_json.string() + ": expected a token->id JSON object");
    for (const auto& [tok, id] : vocab.items()) encoder_.emplace(tok, id.get<std::int32_t>());

    std::ifstream in(merges_txt);
    if (!in) throw ValidationError("cannot open " + merges_txt.string());
    std::string line;
    int rank = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind("#version", 0) == 0) continue;
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw ValidationError(merges_txt.string() + ": malformed merge '" + line + "'");
        merge_ranks_.emplace(std::make_pair(line.substr(0, sp), line.substr(sp + 1)), rank++);
    }
    auto special = [&](const char* name) {
        auto it = encoder_.find(name);
        if (it == encoder_.end()) throw ValidationError(vocab_json.string() + ": missing special token " + name);
        return it->second;
    };
    start_id_ = special("<|startoftext|>");
    end_id_ = special("<|endoftext|>");
}

std::vector<std::string> ClipTokenizer::bpe(const std::string& token) const {
    std::vector<std::string> word;
    for (auto [cp, off] : decode_utf8(token)) {
        (void)off;
        word.push_back(utf8(cp));
    }
    if (word.empty()) return {};
    word.back() += "</w>";
    while (word.size() > 1) {
        int best = -1;
        std::pair<std::string, std::string> best_pair;
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            auto it = merge_ranks_.find({word[i], word[i + 1]});
            if (it != merge_ranks_.end() && (best < 0 || it->second < best)) {
                best = it->second;
                best_pair = it->first;
            }
        }
        if (best < 0) break;
        std::vector<std::string> merged;
        for (std::size_t i = 0; i < word.size();) {
            if (i + 1 < word.size() && word[i] == best_pair.first && word[i + 1] == best_pair.second) {
                merged.push_back(word[i] + word[i + 1]);
                i += 2;
            } else {
                merged.push_back(word[i]);
                ++i;
            }
        }
        word = std::move(merged);
    }
    return word;
}

std::vector<std::int32_t> ClipTokenizer::encode(const std::string& text) const {
    std::vector<std::int32_t> ids;
    const auto& bytes = byte_encoder();
    for (const auto& piece : pretokenize(clean_text(text))) {
        if (piece == "<|startoftext|>" || piece == "<|endoftext|>") {
            ids.push_back(encoder_.at(piece));
            continue;
        }
        std::string mapped;
        for (unsigned char b : piece) mapped += bytes[b];
        for (const auto& sub : bpe(mapped)) {
            auto it = encoder_.find(sub);
            ids.push_back(it == encoder_.end() ? end_id_ : it->second);
        }
    }
    return ids;
}

std::vector<std::int32_t> ClipTokenizer::encode_padded(const std::string& text, int context_length,
                                                       std::int32_t pad_id) const {
    auto body = encode(text);
    const auto room = static_cast<std::size_t>(std::max(context_length - 2, 0));
    if (body.size() > room) body.resize(room);
    std::vector<std::int32_t> out;
    out.reserve(static_cast<std::size_t>(context_length));
    out.push_back(start_id_);
    out.insert(out.end(), body.begin(), body.end());
    out.push_back(end_id_);
    out.resize(static_cast<std::size_t>(context_length), pad_id);
    return out;
}

// ---------------------------------------------------------------------------
// Encoder

struct EncoderHandle::Backend {
    mutable std::mutex mutex;
    mutable cv::dnn::Net net;
    std::unique_ptr<ClipTokenizer> tokenizer;
    EmbeddingMatrix token_table;
};

EncoderHandle::EncoderHandle(const fs::path& model_path)
    : model_path_(model_path), manifest_(load_encoder_manifest(manifest_path_for(model_path))),
      backend_(std::make_unique<Backend>()) {
    if (!fs::exists(model_path)) throw ValidationError("encoder graph not found: " + model_path.string());
    try {
        backend_->net = cv::dnn::readNetFromONNX(model_path.string());
    } catch (const cv::Exception& e) {
        throw RuntimeError("cannot load encoder graph " + model_path.string() + ": " + e.what());
    }
    backend_->net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    backend_->net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
    if (manifest_.modality == Modality::Text) {
        backend_->tokenizer = std::make_unique<ClipTokenizer>(manifest_.text.vocab_path, manifest_.text.merges_path);
        if (manifest_.text.input_kind == TextInputKind::TokenEmbeddings) {
            backend_->token_table = load_matrix(manifest_.text.token_embeddings_path);
            if (backend_->token_table.rows() < backend_->tokenizer->vocab_size())
                throw ValidationError("token embedding table has fewer rows than the tokenizer vocabulary");
        }
    }
}

EncoderHandle::~EncoderHandle() = default;

const ClipTokenizer& EncoderHandle::tokenizer() const {
    if (!backend_->tokenizer) throw ValidationError("encoder has no tokenizer (not a text encoder)");
    return *backend_->tokenizer;
}
EncoderHandle::EncoderHandle(EncoderHandle&&) noexcept = default;
EncoderHandle& EncoderHandle::operator=(EncoderHandle&&) noexcept = default;

namespace {

std::vector<float> run_net(cv::dnn::Net& net, const cv::Mat& input, const EncoderManifest& m) {
    try {
        net.setInput(input, m.input_name);
        cv::Mat out = m.output_name.empty() ? net.forward() : net.forward(m.output_name);
        if (!out.isContinuous()) out = out.clone();
        if (out.type() != CV_32F) out.convertTo(out, CV_32F);
        std::vector<float> flat(out.total());
        std::copy_n(out.ptr<float>(), flat.size(), flat.begin());
        return flat;
    } catch (const cv::Exception& e) {
        throw RuntimeError("encoder inference failed: " + std::string(e.what()));
    }
}

void check_width(std::size_t total, std::size_t rows, std::size_t dim, const char* what) {
    if (rows == 0 || total % rows != 0 || total / rows != dim)
        throw RuntimeError(std::string(what) + " encoder produced " + std::to_string(rows ? total / rows : 0) +
                           " values per row; manifest reported_dim is " + std::to_string(dim));
}

}  // namespace

std::vector<float> EncoderHandle::forward_images(const std::vector<float>& nchw, std::size_t batch) const {
    if (manifest_.modality != Modality::Image) throw ValidationError("encoder is not an image encoder");
    const int crop = manifest_.image.crop;
    const int shape[] = {static_cast<int>(batch), 3, crop, crop};
    cv::Mat input(4, shape, CV_32F, const_cast<float*>(nchw.data()));
    std::lock_guard lock(backend_->mutex);
    auto out = run_net(backend_->net, input, manifest_);
    check_width(out.size(), batch, manifest_.reported_dim, "image");
    return out;
}

std::vector<float> EncoderHandle::forward_tokens(const std::vector<std::int32_t>& ids, std::size_t batch) const {
    if (manifest_.modality != Modality::Text) throw ValidationError("encoder is not a text encoder");
    const auto& t = manifest_.text;
    const int ctx = t.context_length;
    cv::Mat input;
    if (t.input_kind == TextInputKind::TokenIds) {
        const int shape[] = {static_cast<int>(batch), ctx};
        input.create(2, shape, CV_32F);
        auto* dst = input.ptr<float>();
        for (std::size_t i = 0; i < ids.size(); ++i) dst[i] = static_cast<float>(ids[i]);
    } else {
        const auto& table = backend_->token_table;
        const int width = static_cast<int>(table.dim());
        const int shape[] = {static_cast<int>(batch), ctx, width};
        input.create(3, shape, CV_32F);
        auto* dst = input.ptr<float>();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto id = static_cast<std::size_t>(ids[i]);
            if (id >= table.rows()) throw RuntimeError("token id " + std::to_string(id) + " outside embedding table");
            auto row = table.row(id);
            std::copy(row.begin(), row.end(), dst + i * table.dim());
        }
    }
    std::vector<float> out;
    {
        std::lock_guard lock(backend_->mutex);
        out = run_net(backend_->net, input, manifest_);
    }
    const std::size_t dim = manifest_.reported_dim;
    if (t.pooling == TextPooling::None) {
        check_width(out.size(), batch, dim, "text");
        return out;
    }
    check_width(out.size(), batch * static_cast<std::size_t>(ctx), dim, "text");
    std::vector<float> pooled(batch * dim);
    const auto end_id = backend_->tokenizer->end_id();
    for (std::size_t b = 0; b < batch; ++b) {
        const auto* row_ids = ids.data() + b * static_cast<std::size_t>(ctx);
        const auto pos = static_cast<std::size_t>(std::find(row_ids, row_ids + ctx, end_id) - row_ids);
        const auto at = std::min(pos, static_cast<std::size_t>(ctx - 1));
        std::copy_n(out.data() + (b * static_cast<std::size_t>(ctx) + at) * dim, dim, pooled.data() + b * dim);
    }
    return pooled;
}

std::vector<float> preprocess_image(const fs::path& path, const ImagePreprocessing& spec) {
    cv::Mat bgr;
    try {
        bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    } catch (const cv::Exception&) {
        return {};
    }
    if (bgr.empty()) return {};
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);

    const int interp = spec.interpolation == "bilinear" ? cv::INTER_LINEAR
                       : spec.interpolation == "area"    ? cv::INTER_AREA
                       : spec.interpolation == "nearest" ? cv::INTER_NEAREST
                                                         : cv::INTER_CUBIC;
    // Long side truncates and crop offsets round half to even, as torchvision does.
    const int w = rgb.cols, h = rgb.rows, s = spec.resize_shortest;
    const int nw = w <= h ? s : static_cast<int>(static_cast<long long>(s) * w / h);
    const int nh = h <= w ? s : static_cast<int>(static_cast<long long>(s) * h / w);
    cv::Mat resized;
    if (nw == w && nh == h)
        resized = rgb;
    else
        cv::resize(rgb, resized, cv::Size(nw, nh), 0, 0, interp);

    const int top = static_cast<int>(std::nearbyint((nh - spec.crop) / 2.0));
    const int left = static_cast<int>(std::nearbyint((nw - spec.crop) / 2.0));
    cv::Mat crop = resized(cv::Rect(left, top, spec.crop, spec.crop));

    const std::size_t plane = static_cast<std::size_t>(spec.crop) * spec.crop;
    std::vector<float> chw(3 * plane);
    for (int y = 0; y < spec.crop; ++y) {
        const auto* px = crop.ptr<cv::Vec3b>(y);
        for (int x = 0; x < spec.crop; ++x)
            for (int c = 0; c < 3; ++c)
                chw[c * plane + static_cast<std::size_t>(y) * spec.crop + x] =
                    static_cast<float>((px[x][c] * spec.rescale - spec.mean[c]) / spec.std[c]);
    }
    return chw;
}

EmbedResult embed_images(const EncoderHandle& handle, const std::vector<ImageInput>& images, std::size_t batch_size) {
    if (handle.modality() != Modality::Image) throw ValidationError("embed_images needs an image encoder");
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    const auto& spec = handle.manifest().image;
    const std::size_t dim = handle.reported_dim();
    const std::size_t item = 3 * static_cast<std::size_t>(spec.crop) * spec.crop;

    EmbedResult result;
    std::vector<std::string> ids;
    std::vector<float> data;
    std::vector<float> batch;
    std::vector<std::string> batch_ids;
    auto flush = [&] {
        if (batch_ids.empty()) return;
        auto out = handle.forward_images(batch, batch_ids.size());
        data.insert(data.end(), out.begin(), out.end());
        ids.insert(ids.end(), batch_ids.begin(), batch_ids.end());
        batch.clear();
        batch_ids.clear();
    };
    for (const auto& img : images) {
        auto chw = preprocess_image(img.path, spec);
        if (chw.size() != item) {
            result.skipped.push_back({img.id, img.path.string(), "undecodable image"});
            continue;
        }
        batch.insert(batch.end(), chw.begin(), chw.end());
        batch_ids.push_back(img.id);
        if (batch_ids.size() == batch_size) flush();
    }
    flush();
    result.matrix = EmbeddingMatrix(std::move(ids), dim, std::move(data));
    return result;
}

EmbedResult embed_texts(const EncoderHandle& handle, const std::vector<PromptSentence>& prompts, std::size_t batch_size) {
    if (handle.modality() != Modality::Text) throw ValidationError("embed_texts needs a text encoder");
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    const auto& t = handle.manifest().text;
    const ClipTokenizer& tokenizer = handle.tokenizer();
    const std::size_t dim = handle.reported_dim();

    std::vector<std::string> ids;
    std::vector<float> data;
    for (std::size_t start = 0; start < prompts.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, prompts.size() - start);
        std::vector<std::int32_t> tokens;
        tokens.reserve(n * static_cast<std::size_t>(t.context_length));
        for (std::size_t i = 0; i < n; ++i) {
            auto row = tokenizer.encode_padded(prompts[start + i].text, t.context_length, t.pad_id);
            tokens.insert(tokens.end(), row.begin(), row.end());
            ids.push_back(prompts[start + i].concept_id);
        }
        auto out = handle.forward_tokens(tokens, n);
        data.insert(data.end(), out.begin(), out.end());
    }
    return {EmbeddingMatrix(std::move(ids), dim, std::move(data)), {}};
}

std::vector<ImageInput> load_image_list(const fs::path& list_path) {
    std::ifstream in(list_path);
    if (!in) throw ValidationError("cannot open " + list_path.string());
    const fs::path base = list_path.parent_path();
    std::vector<ImageInput> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        ImageInput item;
        if (auto tab = line.find('\t'); tab != std::string::npos) {
            item.id = line.substr(0, tab);
            item.path = line.substr(tab + 1);
        } else {
            item.path = line;
            item.id = item.path.stem().string();
        }
        if (item.path.is_relative()) item.path = base / item.path;
        if (!seen.insert(item.id).second)
            throw ValidationError(list_path.string() + ":" + std::to_string(lineno) + ": duplicate image id '" +
                                  item.id + "'");
        out.push_back(std::move(item));
    }
    return out;
}

}  // namespace privlex
