#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace privlex {

/// Row-major float32 matrix with one string id per row.
/// Rows are finite, ids unique, and data.size() == ids.size() * dim.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim, std::vector<float> data);

    [[nodiscard]] std::size_t rows() const noexcept { return ids_.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return ids_; }
    [[nodiscard]] const std::vector<float>& data() const noexcept { return data_; }
    [[nodiscard]] std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    /// SHA-256 over (ids, dim, raw payload bytes).
    [[nodiscard]] std::string content_hash() const;

    bool operator==(const EmbeddingMatrix&) const = default;

private:
    std::vector<std::string> ids_;
    std::size_t dim_ = 0;
    std::vector<float> data_;
};

namespace pvx1 {

inline constexpr char kMagic[4] = {'P', 'V', 'X', '1'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;

struct RawMatrix {
    std::uint32_t rows = 0;
    std::uint32_t dim = 0;
    std::vector<float> data;
};

/// Binary container only (no sidecars): magic, u16 version, u8 dtype, u32 rows, u32 dim,
/// then little-endian float32 payload.
void write(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t dim, std::span<const float> data);
RawMatrix read(const std::filesystem::path& path);

std::filesystem::path ids_sidecar(const std::filesystem::path& path);

}  // namespace pvx1

/// Writes the PVX1 file plus `<file>.ids.json`.
void save_matrix(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix load_matrix(const std::filesystem::path& path);

std::vector<std::string> read_id_list(const std::filesystem::path& path);
void write_id_list(const std::vector<std::string>& ids, const std::filesystem::path& path);

}  // namespace privlex
