#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "privlex/matrix.hpp"
#include "privlex/vocab.hpp"

namespace privlex {

enum class Modality { Image, Text };

struct ImagePreprocessing {
    int resize_shortest = 224;          // shortest side after resize
    int crop = 224;                     // centre crop, square
    std::string interpolation = "bicubic";  // bicubic | bilinear | area | nearest
    double rescale = 1.0 / 255.0;
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> std{1.0, 1.0, 1.0};
};

enum class TextInputKind { TokenIds, TokenEmbeddings };
enum class TextPooling { None, EndOfText };

struct TextPreprocessing {
    std::filesystem::path vocab_path;   // CLIP BPE vocab.json
    std::filesystem::path merges_path;  // CLIP BPE merges.txt
    int context_length = 77;
    TextInputKind input_kind = TextInputKind::TokenIds;
    std::filesystem::path token_embeddings_path;  // PVX1 table, row t = embedding of token id t
    TextPooling pooling = TextPooling::None;
    std::int32_t pad_id = 0;
};

/// Contents of `<model>.manifest.json`. Relative paths are resolved against the manifest directory.
struct EncoderManifest {
    Modality modality = Modality::Image;
    std::size_t reported_dim = 0;
    std::string checkpoint;
    std::string input_name;
    std::string output_name;
    ImagePreprocessing image;
    TextPreprocessing text;
};

EncoderManifest load_encoder_manifest(const std::filesystem::path& manifest_path);
std::filesystem::path manifest_path_for(const std::filesystem::path& model_path);

/// CLIP byte-level BPE tokenizer (lower-cased, whitespace-collapsed input).
class ClipTokenizer {
public:
    ClipTokenizer(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt);

    /// Token ids without start/end markers.
    [[nodiscard]] std::vector<std::int32_t> encode(const std::string& text) const;
    /// <|startoftext|> + tokens + <|endoftext|>, truncated and padded to `context_length`.
    [[nodiscard]] std::vector<std::int32_t> encode_padded(const std::string& text, int context_length,
                                                          std::int32_t pad_id) const;
    [[nodiscard]] std::int32_t start_id() const noexcept { return start_id_; }
    [[nodiscard]] std::int32_t end_id() const noexcept { return end_id_; }
    [[nodiscard]] std::size_t vocab_size() const noexcept { return encoder_.size(); }

private:
    [[nodiscard]] std::vector<std::string> bpe(const std::string& token) const;

    std::map<std::string, std::int32_t, std::less<>> encoder_;
    std::map<std::pair<std::string, std::string>, int> merge_ranks_;
    std::int32_t start_id_ = 0;
    std::int32_t end_id_ = 0;
};

struct SkippedItem {
    std::string id;
    std::string path;
    std::string reason;
};

struct EmbedResult {
    EmbeddingMatrix matrix;
    std::vector<SkippedItem> skipped;
};

struct ImageInput {
    std::string id;
    std::filesystem::path path;
};

/// Frozen encoder loaded from an ONNX graph and its sidecar manifest. Immutable after
/// construction; concurrent embed calls serialise on the inference backend.
class EncoderHandle {
public:
    explicit EncoderHandle(const std::filesystem::path& model_path);
    ~EncoderHandle();
    EncoderHandle(EncoderHandle&&) noexcept;
    EncoderHandle& operator=(EncoderHandle&&) noexcept;

    [[nodiscard]] Modality modality() const noexcept { return manifest_.modality; }
    [[nodiscard]] std::size_t reported_dim() const noexcept { return manifest_.reported_dim; }
    [[nodiscard]] const EncoderManifest& manifest() const noexcept { return manifest_; }
    [[nodiscard]] const std::filesystem::path& model_path() const noexcept { return model_path_; }
    /// Text encoders only.
    [[nodiscard]] const ClipTokenizer& tokenizer() const;

    /// Runs the graph on a prepared NCHW (image) or token tensor batch; returns rows x reported_dim.
    [[nodiscard]] std::vector<float> forward_images(const std::vector<float>& nchw, std::size_t batch) const;
    [[nodiscard]] std::vector<float> forward_tokens(const std::vector<std::int32_t>& ids, std::size_t batch) const;

private:
    struct Backend;
    std::filesystem::path model_path_;
    EncoderManifest manifest_;
    std::unique_ptr<Backend> backend_;
};

/// Decodes, resizes (shortest side), centre-crops and normalises one image into CHW floats.
/// Returns an empty vector if the file cannot be decoded.
std::vector<float> preprocess_image(const std::filesystem::path& path, const ImagePreprocessing& spec);

/// Undecodable images are skipped and listed; a dimension mismatch with the manifest is fatal.
EmbedResult embed_images(const EncoderHandle& handle, const std::vector<ImageInput>& images, std::size_t batch_size);
EmbedResult embed_texts(const EncoderHandle& handle, const std::vector<PromptSentence>& prompts, std::size_t batch_size);

/// Image list file: one entry per line, either `<path>` (id = file stem) or `<id>\t<path>`.
/// Relative paths resolve against the list file's directory.
std::vector<ImageInput> load_image_list(const std::filesystem::path& list_path);

}  // namespace privlex
