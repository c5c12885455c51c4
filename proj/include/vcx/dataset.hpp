#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vcx {

using CsvRow = std::vector<std::string>;

/// Comma-separated text with double-quoted fields ("" escapes a quote).
/// Quoted fields may span lines. A UTF-8 byte order mark is skipped.
std::vector<CsvRow> parse_csv(const std::string& text);
std::string format_csv_row(const CsvRow& row);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);
/// Whole-string finite number parse; throws kParse.
double parse_number(const std::string& text, const std::string& what);

struct ManifestRow {
    std::string image_id;
    std::string image_path;  ///< as written; relative paths resolve against the manifest directory
    std::optional<double> complexity;
    std::optional<std::int64_t> num_seg;
    std::optional<std::int64_t> num_class;
    std::optional<double> surprise;

    bool operator==(const ManifestRow&) const = default;
};

struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestRow> rows;

    std::filesystem::path resolve(const ManifestRow& row) const;
    /// Row index by id; throws kNotFound.
    std::size_t index_of(const std::string& image_id) const;
    /// Throws kInvalidArgument on duplicate or empty ids and empty paths.
    void validate() const;
    bool operator==(const Manifest& other) const { return rows == other.rows; }
};

/// Columns image_id and image_path are required; complexity, num_seg,
/// num_class and surprise are optional and may be blank per row. Other
/// columns are ignored.
Manifest read_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, std::filesystem::path base_dir = {});
/// Writes the optional columns that are set on at least one row.
std::string format_manifest(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// image_id plus named numeric columns.
struct FeatureTable {
    std::vector<std::string> columns;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> values;  ///< one row per id

    std::optional<std::size_t> column_index(const std::string& name) const;
    bool operator==(const FeatureTable&) const = default;
};

FeatureTable parse_feature_table(const std::string& text);
FeatureTable read_feature_table(const std::filesystem::path& path);
std::string format_feature_table(const FeatureTable& table);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace vcx
