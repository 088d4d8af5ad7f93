#include "privlex/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "jsonio.hpp"
#include "privlex/error.hpp"
#include "privlex/hashing.hpp"

namespace privlex {

static_assert(std::endian::native == std::endian::little, "PVX1 I/O assumes a little-endian host");

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim, std::vector<float> data)
    : ids_(std::move(ids)), dim_(dim), data_(std::move(data)) {
    if (data_.size() != ids_.size() * dim_)
        throw ValidationError("embedding matrix: " + std::to_string(data_.size()) + " values for " +
                              std::to_string(ids_.size()) + " rows of dim " + std::to_string(dim_));
    if (dim_ == 0 && !ids_.empty()) throw ValidationError("embedding matrix: dim must be positive");
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!seen.insert(ids_[i]).second) throw ValidationError("embedding matrix: duplicate id '" + ids_[i] + "'");
        for (float v : row(i))
            if (!std::isfinite(v)) throw ValidationError("embedding matrix: non-finite value in row '" + ids_[i] + "'");
    }
}

std::string EmbeddingMatrix::content_hash() const {
    Sha256 h;
    for (const auto& id : ids_) h.update(id).update(std::string_view("\0", 1));
    const std::uint64_t d = dim_;
    h.update(std::span(reinterpret_cast<const unsigned char*>(&d), sizeof d));
    h.update(std::span(reinterpret_cast<const unsigned char*>(data_.data()), data_.size() * sizeof(float)));
    return h.digest();
}

namespace pvx1 {

namespace {
constexpr std::size_t kHeaderSize = 4 + 2 + 1 + 4 + 4;

template <typename T>
void put(std::string& buf, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buf.append(bytes, sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t offset) {
    T value;
    std::memcpy(&value, buf.data() + offset, sizeof(T));
    return value;
}
}  // namespace

void write(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t dim, std::span<const float> data) {
    if (data.size() != static_cast<std::size_t>(rows) * dim)
        throw RuntimeError("pvx1: payload size does not match rows*dim");
    std::string buf;
    buf.reserve(kHeaderSize + data.size_bytes());
    buf.append(kMagic, 4);
    put(buf, kVersion);
    put(buf, kDtypeF32);
    put(buf, rows);
    put(buf, dim);
    buf.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
    jsonio::write_text(path, buf);
}

RawMatrix read(const std::filesystem::path& path) {
    const std::string buf = jsonio::read_text(path);
    const std::string where = path.string();
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw ValidationError(where + ": not a PVX1 file (bad magic)");
    if (buf.size() < kHeaderSize) throw ValidationError(where + ": truncated PVX1 header");
    const auto version = get<std::uint16_t>(buf, 4);
    if (version != kVersion)
        throw ValidationError(where + ": unsupported PVX1 version " + std::to_string(version));
    const auto dtype = get<std::uint8_t>(buf, 6);
    if (dtype != kDtypeF32) throw ValidationError(where + ": unsupported PVX1 dtype code " + std::to_string(dtype));
    RawMatrix m;
    m.rows = get<std::uint32_t>(buf, 7);
    m.dim = get<std::uint32_t>(buf, 11);
    const std::size_t expected = static_cast<std::size_t>(m.rows) * m.dim * sizeof(float);
    const std::size_t payload = buf.size() - kHeaderSize;
    if (payload < expected)
        throw ValidationError(where + ": truncated PVX1 payload (" + std::to_string(payload) + " of " +
                              std::to_string(expected) + " bytes)");
    if (payload > expected) throw ValidationError(where + ": trailing bytes after PVX1 payload");
    m.data.resize(static_cast<std::size_t>(m.rows) * m.dim);
    std::memcpy(m.data.data(), buf.data() + kHeaderSize, expected);
    return m;
}

std::filesystem::path ids_sidecar(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".ids.json");
}

}  // namespace pvx1

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
    const auto doc = jsonio::read_file(path);
    if (!doc.is_array()) throw ValidationError(path.string() + ": expected a JSON array of id strings");
    try {
        return doc.get<std::vector<std::string>>();
    } catch (const jsonio::json::exception&) {
        throw ValidationError(path.string() + ": expected a JSON array of id strings");
    }
}

void write_id_list(const std::vector<std::string>& ids, const std::filesystem::path& path) {
    jsonio::write_text(path, jsonio::json(ids).dump() + "\n");
}

void save_matrix(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
    pvx1::write(path, static_cast<std::uint32_t>(matrix.rows()), static_cast<std::uint32_t>(matrix.dim()),
                matrix.data());
    write_id_list(matrix.ids(), pvx1::ids_sidecar(path));
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path) {
    auto raw = pvx1::read(path);
    auto ids = read_id_list(pvx1::ids_sidecar(path));
    if (ids.size() != raw.rows)
        throw ValidationError(path.string() + ": id sidecar lists " + std::to_string(ids.size()) +
                              " ids but the matrix has " + std::to_string(raw.rows) + " rows");
    return EmbeddingMatrix(std::move(ids), raw.dim, std::move(raw.data));
}

}  // namespace privlex
