#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace doseguard {

/// Compressed sparse row matrix with float32 values.
///
/// Invariants (checked by validate()): row_ptr has n_rows + 1 non-decreasing
/// entries starting at 0 and ending at nnz; column indices are strictly
/// increasing within a row and < n_cols; no stored value is zero or NaN.
struct SparseMatrix {
    std::uint64_t n_rows = 0;
    std::uint64_t n_cols = 0;
    std::vector<std::uint64_t> row_ptr{0};
    std::vector<std::uint32_t> col_idx;
    std::vector<float> values;

    std::uint64_t nnz() const { return values.size(); }

    struct RowView {
        std::span<const std::uint32_t> cols;
        std::span<const float> vals;
    };
    RowView row(std::uint64_t r) const {
        const auto b = row_ptr[r];
        const auto e = row_ptr[r + 1];
        return {{col_idx.data() + b, e - b}, {values.data() + b, e - b}};
    }

    /// Value at (r, c), zero when not stored.
    float at(std::uint64_t r, std::uint32_t c) const;

    /// Throws FormatError describing the first violated invariant.
    void validate() const;

    /// Builds a row-major dense copy; only for small matrices and tests.
    std::vector<float> to_dense() const;

    static SparseMatrix empty(std::uint64_t n_rows, std::uint64_t n_cols);

    /// Drops exact zeros. `dense` is row-major n_rows x n_cols.
    static SparseMatrix from_dense(std::span<const float> dense, std::uint64_t n_rows,
                                   std::uint64_t n_cols);

    SparseMatrix select_rows(std::span<const std::size_t> rows) const;
    /// `cols` must be strictly increasing; output column j is input column cols[j].
    SparseMatrix select_columns(std::span<const std::uint32_t> cols) const;

    bool operator==(const SparseMatrix&) const = default;
};

/// Incrementally appends rows to a CSR matrix with a fixed column count.
class SparseMatrixBuilder {
public:
    explicit SparseMatrixBuilder(std::uint64_t n_cols) { m_.n_cols = n_cols; }

    /// Entries must be given in strictly increasing column order. Zeros are dropped.
    void push(std::uint32_t col, float value);
    void end_row();
    SparseMatrix finish() &&;

private:
    SparseMatrix m_;
};

enum class FeatureCategory { medical, word, char_ngram, embedding, transformer_score };

inline constexpr std::array<FeatureCategory, 5> kCategoryOrder = {
    FeatureCategory::medical, FeatureCategory::word, FeatureCategory::char_ngram,
    FeatureCategory::embedding, FeatureCategory::transformer_score};

std::string_view category_name(FeatureCategory c);
FeatureCategory parse_category(std::string_view name);

/// Column-aligned names and categories of an assembled design matrix.
struct FeatureRegistry {
    struct Entry {
        std::string name;
        FeatureCategory category;
        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries;  // entries[j] describes column j

    std::size_t size() const { return entries.size(); }
    std::vector<std::uint32_t> columns_of(FeatureCategory c) const;
    std::size_t width_of(FeatureCategory c) const { return columns_of(c).size(); }
    bool has(FeatureCategory c) const { return width_of(c) > 0; }
    std::vector<FeatureCategory> categories() const;  // present ones, in block order

    /// Throws FormatError if category blocks are not contiguous.
    void validate() const;

    FeatureRegistry select(std::span<const std::uint32_t> cols) const;

    bool operator==(const FeatureRegistry&) const = default;
};

inline constexpr std::uint32_t kFmxVersion = 1;

/// FMX1 container: "FMX1", u32 version, u64 n_rows, u64 n_cols, u64 nnz,
/// u64[n_rows+1] row_ptr, u32[nnz] col_idx, f32[nnz] values; little-endian.
void write_fmx(const std::filesystem::path& path, const SparseMatrix& m);
SparseMatrix read_fmx(const std::filesystem::path& path);
std::vector<char> encode_fmx(const SparseMatrix& m);
SparseMatrix decode_fmx(std::span<const char> bytes);

/// "<dir>/<stem>.registry.json" next to a matrix file.
std::filesystem::path registry_sidecar_path(const std::filesystem::path& matrix_path);
void write_registry(const std::filesystem::path& path, const FeatureRegistry& registry);
FeatureRegistry read_registry(const std::filesystem::path& path);

/// Matrix plus its registry sidecar.
void save_matrix(const std::filesystem::path& path, const SparseMatrix& m,
                 const FeatureRegistry& registry);
struct LoadedMatrix {
    SparseMatrix matrix;
    FeatureRegistry registry;
};
LoadedMatrix load_matrix(const std::filesystem::path& path);

}  // namespace doseguard
