#include "mobdrf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "mobdrf/rng.hpp"

namespace mobdrf {

std::string role_name(Role r) {
    switch (r) {
        case Role::Partitioning: return "partition";
        case Role::Regression: return "regress";
        case Role::Target: return "target";
        case Role::Ignored: return "ignore";
    }
    return "?";
}

std::string kind_name(ColumnKind k) {
    return k == ColumnKind::Numeric ? "num" : "cat";
}

std::string format_double(double v) {
    // shortest decimal digits that reparse to the same double
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        auto [p, ec] = std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
        (void)p;
        if (ec == std::errc() && back == v) break;
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Column
// ---------------------------------------------------------------------------

int Column::code_of(std::string_view level) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == level) return static_cast<int>(i);
    return -1;
}

Column Column::numeric(std::string name, std::vector<double> values) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::Numeric;
    c.num = std::move(values);
    return c;
}

Column Column::categorical(std::string name, std::vector<int> codes,
                           std::vector<std::string> levels) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::Categorical;
    c.codes = std::move(codes);
    c.levels = std::move(levels);
    for (int code : c.codes)
        if (code < 0 || code >= static_cast<int>(c.levels.size()))
            throw InternalError("categorical column '" + c.name + "': code out of range");
    return c;
}

Column Column::categorical_from_strings(std::string name,
                                        const std::vector<std::string>& values) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::Categorical;
    c.codes.reserve(values.size());
    std::unordered_map<std::string, int> index;
    for (const auto& v : values) {
        auto it = index.find(v);
        if (it == index.end()) {
            it = index.emplace(v, static_cast<int>(c.levels.size())).first;
            c.levels.push_back(v);
        }
        c.codes.push_back(it->second);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

const SchemaEntry* Schema::find(std::string_view name) const {
    for (const auto& [n, e] : entries)
        if (n == name) return &e;
    return nullptr;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

Role parse_role(const std::string& s, const std::string& where) {
    if (s == "partition") return Role::Partitioning;
    if (s == "regress") return Role::Regression;
    if (s == "target") return Role::Target;
    if (s == "ignore") return Role::Ignored;
    throw DataError(where + ": unknown role '" + s + "' (expected partition|regress|target|ignore)");
}

ColumnKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "num") return ColumnKind::Numeric;
    if (s == "cat") return ColumnKind::Categorical;
    throw DataError(where + ": unknown kind '" + s + "' (expected num|cat)");
}

} // namespace

Schema parse_schema(std::istream& in, const std::string& origin) {
    Schema schema;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError(where + ": expected 'column = role[:kind]'");
        std::string name = trim(t.substr(0, eq));
        std::string rhs = trim(t.substr(eq + 1));
        if (name.empty()) throw DataError(where + ": empty column name");
        SchemaEntry entry;
        auto colon = rhs.find(':');
        if (colon == std::string::npos) {
            entry.role = parse_role(rhs, where);
        } else {
            entry.role = parse_role(trim(rhs.substr(0, colon)), where);
            entry.kind = parse_kind(trim(rhs.substr(colon + 1)), where);
        }
        if (schema.find(name))
            throw DataError(where + ": duplicate schema entry for column '" + name + "'");
        schema.entries.emplace_back(std::move(name), entry);
    }
    return schema;
}

Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);
    return parse_schema(in, path);
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

Dataset::Dataset(std::vector<Column> columns, std::vector<Role> roles)
    : cols_(std::move(columns)), roles_(std::move(roles)) {
    if (cols_.size() != roles_.size())
        throw InternalError("dataset: column/role count mismatch");
    if (cols_.empty()) throw DataError("dataset: no columns");
    n_ = cols_[0].size();
    int targets = 0, partitioning = 0, regression = 0;
    for (std::size_t i = 0; i < cols_.size(); ++i) {
        const Column& c = cols_[i];
        if (c.size() != n_)
            throw DataError("dataset: column '" + c.name + "' has length " +
                            std::to_string(c.size()) + ", expected " + std::to_string(n_));
        if (!by_name_.emplace(c.name, i).second)
            throw DataError("dataset: duplicate column name '" + c.name + "'");
        if (c.kind == ColumnKind::Numeric)
            for (double v : c.num)
                if (!std::isfinite(v))
                    throw DataError("dataset: non-finite value in numeric column '" + c.name + "'");
        switch (roles_[i]) {
            case Role::Target:
                ++targets;
                target_ = i;
                if (c.kind != ColumnKind::Numeric)
                    throw DataError("dataset: target column '" + c.name + "' must be numeric");
                break;
            case Role::Partitioning: ++partitioning; break;
            case Role::Regression: ++regression; break;
            case Role::Ignored: break;
        }
    }
    if (targets != 1)
        throw DataError("dataset: expected exactly one target column, found " +
                        std::to_string(targets));
    if (partitioning < 1) throw DataError("dataset: need at least one partitioning column");
    if (regression < 1) throw DataError("dataset: need at least one regression column");
}

std::optional<std::size_t> Dataset::index_of(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

const Column& Dataset::col(std::string_view name) const {
    auto idx = index_of(name);
    if (!idx) throw DataError("dataset: no column named '" + std::string(name) + "'");
    return cols_[*idx];
}

std::vector<std::size_t> Dataset::columns_with_role(Role r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cols_.size(); ++i)
        if (roles_[i] == r) out.push_back(i);
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    std::vector<Column> cols;
    cols.reserve(cols_.size());
    for (const Column& c : cols_) {
        Column s;
        s.name = c.name;
        s.kind = c.kind;
        s.levels = c.levels;
        if (c.kind == ColumnKind::Numeric) {
            s.num.reserve(rows.size());
            for (std::size_t r : rows) s.num.push_back(c.num[r]);
        } else {
            s.codes.reserve(rows.size());
            for (std::size_t r : rows) s.codes.push_back(c.codes[r]);
        }
        cols.push_back(std::move(s));
    }
    return Dataset(std::move(cols), roles_);
}

bool Dataset::value_equal(const Dataset& other) const {
    if (n_ != other.n_ || cols_.size() != other.cols_.size()) return false;
    for (std::size_t i = 0; i < cols_.size(); ++i) {
        const Column& a = cols_[i];
        const Column& b = other.cols_[i];
        if (a.name != b.name || a.kind != b.kind || roles_[i] != other.roles_[i]) return false;
        if (a.kind == ColumnKind::Numeric) {
            if (a.num != b.num) return false;
        } else {
            for (std::size_t r = 0; r < n_; ++r)
                if (a.level_of(r) != b.level_of(r)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

// One CSV record, honoring quoted fields that may span lines.
bool read_record(std::istream& in, std::vector<std::string>& fields, int& lineno) {
    fields.clear();
    int c = in.get();
    if (c == EOF) return false;
    std::string field;
    bool quoted = false;
    ++lineno;
    for (;;) {
        if (c == EOF) {
            fields.push_back(field);
            return true;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                int peek = in.peek();
                if (peek == '"') {
                    in.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++lineno;
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else if (ch == '\r') {
            // swallow; newline handling below
        } else if (ch == '\n') {
            fields.push_back(field);
            return true;
        } else {
            field.push_back(ch);
        }
        c = in.get();
    }
}

double parse_numeric(const std::string& token, const std::string& column, int row) {
    double v = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto [p, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || p != end)
        throw DataError("row " + std::to_string(row) + ", column '" + column +
                        "': non-numeric token '" + token + "'");
    if (!std::isfinite(v))
        throw DataError("row " + std::to_string(row) + ", column '" + column +
                        "': non-finite value '" + token + "'");
    return v;
}

} // namespace

Dataset load_csv(std::istream& in, const Schema& schema, const std::string& origin,
                 LoadReport* report) {
    std::vector<std::string> header;
    int lineno = 0;
    if (!read_record(in, header, lineno))
        throw DataError(origin + ": empty file (header row required)");
    std::unordered_set<std::string> seen;
    for (const auto& h : header)
        if (!seen.insert(h).second)
            throw DataError(origin + ": duplicate header column '" + h + "'");
    for (const auto& h : header)
        if (!schema.find(h))
            throw DataError(origin + ": column '" + h + "' is not listed in the schema");
    for (const auto& [name, entry] : schema.entries) {
        (void)entry;
        if (std::find(header.begin(), header.end(), name) == header.end())
            throw DataError(origin + ": schema column '" + name + "' not present in the file");
    }

    // keep only non-ignored columns, in file order
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (schema.find(header[i])->role != Role::Ignored) used.push_back(i);
    if (used.empty()) throw DataError(origin + ": every column is ignored");

    std::vector<std::vector<std::string>> cells(used.size());
    std::vector<std::string> record;
    std::size_t rows_read = 0, dropped = 0;
    while (read_record(in, record, lineno)) {
        if (record.size() == 1 && record[0].empty()) continue;  // trailing blank line
        if (record.size() != header.size())
            throw DataError(origin + " row " + std::to_string(rows_read + 1) + ": has " +
                            std::to_string(record.size()) + " fields, header has " +
                            std::to_string(header.size()));
        ++rows_read;
        bool missing = false;
        for (std::size_t u : used)
            if (record[u].empty()) { missing = true; break; }
        if (missing) {
            ++dropped;
            continue;
        }
        for (std::size_t k = 0; k < used.size(); ++k)
            cells[k].push_back(record[used[k]]);
    }
    if (report) {
        report->rows_read = rows_read;
        report->rows_dropped = dropped;
    }
    if (cells[0].empty()) throw DataError(origin + ": zero usable rows after dropping missing values");

    std::vector<Column> columns;
    std::vector<Role> roles;
    for (std::size_t k = 0; k < used.size(); ++k) {
        const std::string& name = header[used[k]];
        const SchemaEntry& entry = *schema.find(name);
        if (entry.kind == ColumnKind::Numeric) {
            std::vector<double> values;
            values.reserve(cells[k].size());
            for (std::size_t r = 0; r < cells[k].size(); ++r)
                values.push_back(parse_numeric(cells[k][r], name, static_cast<int>(r + 1)));
            columns.push_back(Column::numeric(name, std::move(values)));
        } else {
            columns.push_back(Column::categorical_from_strings(name, cells[k]));
        }
        roles.push_back(entry.role);
    }
    return Dataset(std::move(columns), std::move(roles));
}

Dataset load_csv(const std::string& csv_path, const std::string& schema_path,
                 LoadReport* report) {
    Schema schema = load_schema(schema_path);
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw DataError("cannot open CSV file: " + csv_path);
    return load_csv(in, schema, csv_path, report);
}

namespace {

void write_field(std::ostream& out, const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        out << s;
        return;
    }
    out << '"';
    for (char c : s) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

} // namespace

void write_csv(const Dataset& ds, std::ostream& out) {
    for (std::size_t i = 0; i < ds.n_cols(); ++i) {
        if (i) out << ',';
        write_field(out, ds.col(i).name);
    }
    out << '\n';
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        for (std::size_t i = 0; i < ds.n_cols(); ++i) {
            if (i) out << ',';
            const Column& c = ds.col(i);
            if (c.kind == ColumnKind::Numeric)
                out << format_double(c.num[r]);
            else
                write_field(out, c.level_of(r));
        }
        out << '\n';
    }
}

void write_csv_file(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write CSV file: " + path);
    write_csv(ds, out);
    if (!out) throw DataError("failed writing CSV file: " + path);
}

void write_schema(const Dataset& ds, std::ostream& out) {
    for (std::size_t i = 0; i < ds.n_cols(); ++i) {
        const Column& c = ds.col(i);
        out << c.name << " = " << role_name(ds.role(i)) << ":" << kind_name(c.kind) << '\n';
    }
}

void write_schema_file(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write schema file: " + path);
    write_schema(ds, out);
    if (!out) throw DataError("failed writing schema file: " + path);
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("split: train fraction must lie strictly between 0 and 1");
    const std::size_t n = ds.n_rows();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, stream::kSplit));
    rng.shuffle(order);
    // the smaller part always comes off the front of the shuffled order, so
    // splitting with f and 1-f on the same seed yields complementary parts
    std::size_t cut;
    bool train_first;
    if (train_fraction <= 0.5) {
        cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
        train_first = true;
    } else {
        cut = static_cast<std::size_t>(
            std::llround((1.0 - train_fraction) * static_cast<double>(n)));
        train_first = false;
    }
    std::vector<std::size_t> head(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<std::size_t> tail(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
    if (train_first) return {ds.subset(head), ds.subset(tail)};
    return {ds.subset(tail), ds.subset(head)};
}

} // namespace mobdrf
