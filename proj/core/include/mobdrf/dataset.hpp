#pragma once
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mobdrf/errors.hpp"

namespace mobdrf {

enum class ColumnKind { Numeric, Categorical };
enum class Role { Partitioning, Regression, Target, Ignored };

std::string role_name(Role r);
std::string kind_name(ColumnKind k);

// One column of a dataset. Numeric columns hold finite doubles, categorical
// columns hold codes into `levels`. Level order is the serialization
// contract: CSV ingestion orders levels by first appearance, rule encoding
// orders them R_1..R_j.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<double> num;           // kind == Numeric
    std::vector<int> codes;            // kind == Categorical
    std::vector<std::string> levels;   // kind == Categorical

    std::size_t size() const {
        return kind == ColumnKind::Numeric ? num.size() : codes.size();
    }
    const std::string& level_of(std::size_t row) const { return levels[static_cast<std::size_t>(codes[row])]; }
    // -1 when the level string is not one of this column's levels
    int code_of(std::string_view level) const;

    static Column numeric(std::string name, std::vector<double> values);
    static Column categorical(std::string name, std::vector<int> codes,
                              std::vector<std::string> levels);
    // builds codes/levels from raw strings, levels ordered by first appearance
    static Column categorical_from_strings(std::string name,
                                           const std::vector<std::string>& values);
};

struct SchemaEntry {
    Role role = Role::Ignored;
    ColumnKind kind = ColumnKind::Numeric;
};

// Parsed schema file: `column = role[:kind]` lines, one per used column.
struct Schema {
    std::vector<std::pair<std::string, SchemaEntry>> entries;
    const SchemaEntry* find(std::string_view name) const;
};

Schema load_schema(const std::string& path);
Schema parse_schema(std::istream& in, const std::string& origin);

// Immutable columnar table. Construction validates the role invariants
// (exactly one numeric target, at least one partitioning and one regression
// column, unique names, equal lengths), after which the dataset is safe to
// share read-only across threads.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<Column> columns, std::vector<Role> roles);

    std::size_t n_rows() const { return n_; }
    std::size_t n_cols() const { return cols_.size(); }
    const Column& col(std::size_t i) const { return cols_[i]; }
    Role role(std::size_t i) const { return roles_[i]; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    const Column& col(std::string_view name) const;

    std::size_t target_index() const { return target_; }
    const std::vector<double>& target() const { return cols_[target_].num; }
    const std::string& target_name() const { return cols_[target_].name; }

    std::vector<std::size_t> columns_with_role(Role r) const;

    Dataset subset(std::span<const std::size_t> rows) const;

    // value-wise equality: names, kinds, roles and per-row values; categorical
    // cells compare by level string, so two datasets with differently ordered
    // level lists can still be equal
    bool value_equal(const Dataset& other) const;

private:
    std::vector<Column> cols_;
    std::vector<Role> roles_;
    std::unordered_map<std::string, std::size_t> by_name_;
    std::size_t n_ = 0;
    std::size_t target_ = 0;
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
};

// CSV ingestion: comma-delimited, RFC-4180 double-quote escaping, header row
// required, "." decimal point. An empty field is a missing value; rows with
// a missing value in any non-ignored column are dropped and counted.
// Columns mapped to `ignore` are not carried into the Dataset.
Dataset load_csv(const std::string& csv_path, const std::string& schema_path,
                 LoadReport* report = nullptr);
Dataset load_csv(std::istream& in, const Schema& schema,
                 const std::string& origin, LoadReport* report = nullptr);

void write_csv(const Dataset& ds, std::ostream& out);
void write_csv_file(const Dataset& ds, const std::string& path);
void write_schema(const Dataset& ds, std::ostream& out);
void write_schema_file(const Dataset& ds, const std::string& path);

// Seeded 70/30-style split: train takes round(train_fraction * n) rows of a
// uniformly shuffled order. Half-integer products round away from zero.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  std::uint64_t seed);

// shortest decimal representation that parses back to exactly the same double
std::string format_double(double v);

} // namespace mobdrf
