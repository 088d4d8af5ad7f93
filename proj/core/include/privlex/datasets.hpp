#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "privlex/score.hpp"

namespace privlex {

enum class SplitTag { Train, Val, Test, Unspecified };

/// Binary privacy labels: 1 = private, 0 = public.
struct LabeledDataset {
    std::vector<std::string> image_ids;
    std::vector<std::uint8_t> labels;
    SplitTag split = SplitTag::Unspecified;

    [[nodiscard]] std::size_t size() const noexcept { return image_ids.size(); }
    /// Subset in the order of `ids`; every id must be present.
    [[nodiscard]] LabeledDataset select(const std::vector<std::string>& ids, SplitTag tag) const;
    bool operator==(const LabeledDataset&) const = default;
};

enum class LabelSchema {
    DirectBinary,        // CSV with header image_id,label
    VisprSafeAttribute,  // JSON Lines {image_id, attributes:[...]}; public iff the safe attribute is present
};

LabelSchema parse_label_schema(std::string_view name);

LabeledDataset load_binary_labels(const std::filesystem::path& path, LabelSchema schema,
                                  const std::string& safe_attribute = "safe");
void save_binary_labels(const LabeledDataset& data, const std::filesystem::path& path);

struct Alignment {
    ScoreMatrix scores;                        // matched rows, score-matrix order
    std::vector<std::uint8_t> labels;          // aligned with scores rows
    std::vector<std::string> unmatched_scores; // score rows without a label
    std::vector<std::string> unmatched_labels; // labels without a score row
};

/// Inner join on image id preserving score-matrix order.
Alignment align(const ScoreMatrix& scores, const LabeledDataset& labels);

struct SplitSpec {
    std::string dataset_tag;
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// JSON {"dataset_tag": "...", "train": [...], "val": [...], "test": [...]}.
/// Splits must be pairwise disjoint; train and test non-empty.
SplitSpec load_split_spec(const std::filesystem::path& path);
void save_split_spec(const SplitSpec& split, const std::filesystem::path& path);
void validate_split_spec(const SplitSpec& split);

}  // namespace privlex
