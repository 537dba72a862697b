#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <json.hpp>

#include "doseguard/errors.hpp"
#include "doseguard/sparse_matrix.hpp"

namespace doseguard {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'X', '1'};
constexpr int kRegistrySchemaVersion = 1;

template <typename T>
void put_le(std::vector<char>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::span<const char> bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        if (bytes_.size() - pos_ < sizeof(U)) {
            throw TruncatedFileError(fmt::format("FMX1 truncated while reading {} at byte {}", what, pos_));
        }
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return std::bit_cast<T>(bits);
    }

    void require(std::uint64_t n_bytes, const char* what) const {
        if (bytes_.size() - pos_ < n_bytes) {
            throw TruncatedFileError(fmt::format("FMX1 truncated in {} (need {} bytes, have {})", what,
                                                 n_bytes, bytes_.size() - pos_));
        }
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const char> bytes_;
    std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace

std::vector<char> encode_fmx(const SparseMatrix& m) {
    m.validate();
    std::vector<char> out;
    out.reserve(4 + 4 + 24 + 8 * m.row_ptr.size() + 8 * m.nnz());
    for (char c : kMagic) out.push_back(c);
    put_le(out, kFmxVersion);
    put_le(out, m.n_rows);
    put_le(out, m.n_cols);
    put_le(out, m.nnz());
    for (auto v : m.row_ptr) put_le(out, v);
    for (auto v : m.col_idx) put_le(out, v);
    for (auto v : m.values) put_le(out, v);
    return out;
}

SparseMatrix decode_fmx(std::span<const char> bytes) {
    if (bytes.size() < 4) throw TruncatedFileError("FMX1 file shorter than its magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagicError("not an FMX1 file (bad magic)");
    Reader in(bytes.subspan(4));
    const auto version = in.get<std::uint32_t>("version");
    if (version != kFmxVersion) {
        throw UnsupportedVersionError(fmt::format("FMX1 version {} unsupported (expected {})", version, kFmxVersion));
    }
    SparseMatrix m;
    m.n_rows = in.get<std::uint64_t>("n_rows");
    m.n_cols = in.get<std::uint64_t>("n_cols");
    const auto nnz = in.get<std::uint64_t>("nnz");
    // Sizes are checked against the remaining bytes before allocating.
    if (m.n_rows >= in.remaining() / 8) throw TruncatedFileError("FMX1 truncated in row_ptr");
    in.require((m.n_rows + 1) * 8, "row_ptr");
    m.row_ptr.resize(m.n_rows + 1);
    for (auto& v : m.row_ptr) v = in.get<std::uint64_t>("row_ptr");
    if (nnz > in.remaining() / 8) throw TruncatedFileError("FMX1 truncated in col_idx/values");
    in.require(nnz * 8, "col_idx/values");
    m.col_idx.resize(nnz);
    for (auto& v : m.col_idx) v = in.get<std::uint32_t>("col_idx");
    m.values.resize(nnz);
    for (auto& v : m.values) v = in.get<float>("values");
    if (in.remaining() != 0) throw FormatError("FMX1 has trailing bytes");
    m.validate();
    return m;
}

void write_fmx(const std::filesystem::path& path, const SparseMatrix& m) {
    write_file(path, encode_fmx(m));
}

SparseMatrix read_fmx(const std::filesystem::path& path) { return decode_fmx(read_file(path)); }

std::filesystem::path registry_sidecar_path(const std::filesystem::path& matrix_path) {
    auto p = matrix_path;
    p.replace_extension(".registry.json");
    return p;
}

void write_registry(const std::filesystem::path& path, const FeatureRegistry& registry) {
    nlohmann::ordered_json j;
    j["schema_version"] = kRegistrySchemaVersion;
    j["n_cols"] = registry.size();
    auto& features = j["features"] = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < registry.size(); ++c) {
        features.push_back({{"index", c},
                            {"name", registry.entries[c].name},
                            {"category", category_name(registry.entries[c].category)}});
    }
    const std::string text = j.dump(1) + "\n";
    write_file(path, text);
}

FeatureRegistry read_registry(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    FeatureRegistry reg;
    try {
        const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
        if (j.at("schema_version").get<int>() != kRegistrySchemaVersion) {
            throw UnsupportedVersionError(fmt::format("registry '{}' has unsupported schema_version", path.string()));
        }
        const auto& features = j.at("features");
        for (std::size_t c = 0; c < features.size(); ++c) {
            const auto& f = features[c];
            if (f.at("index").get<std::size_t>() != c) {
                throw FormatError(fmt::format("registry '{}': entry {} has index {}", path.string(), c,
                                              f.at("index").get<std::size_t>()));
            }
            reg.entries.push_back({f.at("name").get<std::string>(),
                                   parse_category(f.at("category").get<std::string>())});
        }
        if (j.at("n_cols").get<std::size_t>() != reg.size()) {
            throw FormatError(fmt::format("registry '{}': n_cols disagrees with feature list", path.string()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("registry '{}' is malformed: {}", path.string(), e.what()));
    } catch (const ConfigError& e) {
        throw FormatError(fmt::format("registry '{}': {}", path.string(), e.what()));
    }
    reg.validate();
    return reg;
}

void save_matrix(const std::filesystem::path& path, const SparseMatrix& m,
                 const FeatureRegistry& registry) {
    if (registry.size() != m.n_cols) {
        throw DataError(fmt::format("registry has {} entries but matrix has {} columns", registry.size(), m.n_cols));
    }
    write_fmx(path, m);
    write_registry(registry_sidecar_path(path), registry);
}

LoadedMatrix load_matrix(const std::filesystem::path& path) {
    LoadedMatrix out{read_fmx(path), read_registry(registry_sidecar_path(path))};
    if (out.registry.size() != out.matrix.n_cols) {
        throw FormatError(fmt::format("registry for '{}' has {} entries but matrix has {} columns",
                                      path.string(), out.registry.size(), out.matrix.n_cols));
    }
    return out;
}

}  // namespace doseguard
