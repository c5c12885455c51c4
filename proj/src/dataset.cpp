#include "vcx/dataset.hpp"

#include "vcx/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace vcx {

std::vector<CsvRow> parse_csv(const std::string& text) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    if (text.rfind("\xEF\xBB\xBF", 0) == 0) i = 3;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        // A blank line is a single empty field; drop it.
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
        row.clear();
    };

    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_row();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) fail(ErrorCode::kParse, "unterminated quoted field in CSV");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::string format_csv_row(const CsvRow& row) {
    std::string out;
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (k) out += ',';
        const std::string& f = row[k];
        if (f.find_first_of(",\"\r\n") == std::string::npos) {
            out += f;
            continue;
        }
        out += '"';
        for (char c : f) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
    }
    out += '\n';
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kNotFound, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return {buf, res.ptr};
}

double parse_number(const std::string& text, const std::string& what) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    if (first < last && *first == '+') ++first;
    double v = 0.0;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
        fail(ErrorCode::kParse, "invalid number '" + text + "' in " + what);
    }
    return v;
}

// ---------------------------------------------------------------------------

std::filesystem::path Manifest::resolve(const ManifestRow& row) const {
    const std::filesystem::path p(row.image_path);
    return p.is_absolute() ? p : base_dir / p;
}

std::size_t Manifest::index_of(const std::string& image_id) const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].image_id == image_id) return i;
    }
    fail(ErrorCode::kNotFound, "image id not in manifest: " + image_id);
}

void Manifest::validate() const {
    std::set<std::string> seen;
    for (const auto& r : rows) {
        if (r.image_id.empty()) fail(ErrorCode::kInvalidArgument, "manifest row with empty image_id");
        if (r.image_path.empty()) fail(ErrorCode::kInvalidArgument, "manifest row " + r.image_id + " has no image_path");
        if (!seen.insert(r.image_id).second) fail(ErrorCode::kInvalidArgument, "duplicate image_id " + r.image_id);
        for (const auto* count : {&r.num_seg, &r.num_class}) {
            if (*count && **count < 0) fail(ErrorCode::kInvalidArgument, "negative count for " + r.image_id);
        }
    }
}

namespace {

std::int64_t parse_count(const std::string& text, const std::string& what) {
    const double v = parse_number(text, what);
    if (v < 0 || v != std::floor(v) || v > 9e15) {
        fail(ErrorCode::kInvalidArgument, what + " must be a nonnegative integer, got '" + text + "'");
    }
    return static_cast<std::int64_t>(v);
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t") == std::string::npos; }

}  // namespace

Manifest parse_manifest(const std::string& text, std::filesystem::path base_dir) {
    const auto rows = parse_csv(text);
    if (rows.empty()) fail(ErrorCode::kInvalidArgument, "manifest has no header row");
    const CsvRow& header = rows[0];
    std::map<std::string, std::size_t> col;
    for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
    for (const char* required : {"image_id", "image_path"}) {
        if (!col.contains(required)) fail(ErrorCode::kInvalidArgument, std::string("manifest lacks column ") + required);
    }

    Manifest m;
    m.base_dir = std::move(base_dir);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const CsvRow& fields = rows[r];
        auto get = [&](const char* name) -> std::optional<std::string> {
            const auto it = col.find(name);
            if (it == col.end() || it->second >= fields.size() || blank(fields[it->second])) return std::nullopt;
            return fields[it->second];
        };
        const std::string where = "manifest row " + std::to_string(r + 1);
        ManifestRow row;
        row.image_id = get("image_id").value_or("");
        row.image_path = get("image_path").value_or("");
        if (auto v = get("complexity")) row.complexity = parse_number(*v, where + " complexity");
        if (auto v = get("surprise")) row.surprise = parse_number(*v, where + " surprise");
        if (auto v = get("num_seg")) row.num_seg = parse_count(*v, where + " num_seg");
        if (auto v = get("num_class")) row.num_class = parse_count(*v, where + " num_class");
        m.rows.push_back(std::move(row));
    }
    m.validate();
    return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::kNotFound, "manifest not found: " + path.string());
    return parse_manifest(read_text_file(path), path.parent_path());
}

std::string format_manifest(const Manifest& manifest) {
    bool has_c = false, has_seg = false, has_cls = false, has_s = false;
    for (const auto& r : manifest.rows) {
        has_c |= r.complexity.has_value();
        has_seg |= r.num_seg.has_value();
        has_cls |= r.num_class.has_value();
        has_s |= r.surprise.has_value();
    }
    CsvRow header{"image_id", "image_path"};
    if (has_c) header.push_back("complexity");
    if (has_seg) header.push_back("num_seg");
    if (has_cls) header.push_back("num_class");
    if (has_s) header.push_back("surprise");
    std::string out = format_csv_row(header);
    for (const auto& r : manifest.rows) {
        CsvRow row{r.image_id, r.image_path};
        if (has_c) row.push_back(r.complexity ? format_number(*r.complexity) : "");
        if (has_seg) row.push_back(r.num_seg ? std::to_string(*r.num_seg) : "");
        if (has_cls) row.push_back(r.num_class ? std::to_string(*r.num_class) : "");
        if (has_s) row.push_back(r.surprise ? format_number(*r.surprise) : "");
        out += format_csv_row(row);
    }
    return out;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    write_text_file(path, format_manifest(manifest));
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> FeatureTable::column_index(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (columns[k] == name) return k;
    }
    return std::nullopt;
}

FeatureTable parse_feature_table(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "image_id") {
        fail(ErrorCode::kInvalidArgument, "feature table must start with an image_id column");
    }
    FeatureTable t;
    t.columns.assign(rows[0].begin() + 1, rows[0].end());
    std::set<std::string> names(t.columns.begin(), t.columns.end());
    if (names.size() != t.columns.size()) fail(ErrorCode::kInvalidArgument, "duplicate feature column names");
    std::set<std::string> ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const CsvRow& f = rows[r];
        if (f.size() != rows[0].size()) {
            fail(ErrorCode::kParse, "feature table row " + std::to_string(r + 1) + " has " + std::to_string(f.size()) +
                                        " fields, expected " + std::to_string(rows[0].size()));
        }
        if (!ids.insert(f[0]).second) fail(ErrorCode::kInvalidArgument, "duplicate image_id in features: " + f[0]);
        t.ids.push_back(f[0]);
        std::vector<double> v;
        for (std::size_t k = 1; k < f.size(); ++k) {
            v.push_back(parse_number(f[k], "feature table row " + std::to_string(r + 1)));
        }
        t.values.push_back(std::move(v));
    }
    return t;
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::kNotFound, "feature table not found: " + path.string());
    return parse_feature_table(read_text_file(path));
}

std::string format_feature_table(const FeatureTable& table) {
    CsvRow header{"image_id"};
    header.insert(header.end(), table.columns.begin(), table.columns.end());
    std::string out = format_csv_row(header);
    for (std::size_t r = 0; r < table.ids.size(); ++r) {
        CsvRow row{table.ids[r]};
        for (double v : table.values[r]) {
            if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "non-finite feature for " + table.ids[r]);
            row.push_back(format_number(v));
        }
        out += format_csv_row(row);
    }
    return out;
}

}  // namespace vcx
