#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace callplan {

/// One diagnostic emitted while loading a file. Rejected rows are reported
/// here rather than aborting the load; --strict promotes them to hard errors.
struct CsvIssue {
    std::string file;
    int line = 0;
    std::string message;

    std::string to_string() const;
};

struct CsvRow {
    int line = 0;
    std::vector<std::string> fields;
};

/// A parsed CSV file: header plus rows, with source line numbers retained.
/// Lines starting with '#' (provenance headers) are skipped.
struct CsvFile {
    std::string path;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Column index for a header name; throws DataError if missing.
    std::size_t column(const std::string &name) const;
};

CsvFile read_csv(const std::filesystem::path &path);

/// Typed field accessors; throw DataError with a field-specific message.
std::int64_t field_int(const CsvRow &row, std::size_t col, const std::string &name);
double field_double(const CsvRow &row, std::size_t col, const std::string &name);

/// Writes rows to a CSV file. `provenance`, when non-empty, is emitted first
/// as a '#'-prefixed comment line.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path &path, const std::vector<std::string> &header,
              const std::string &provenance = "");
    ~CsvWriter();

    CsvWriter(const CsvWriter &) = delete;
    CsvWriter &operator=(const CsvWriter &) = delete;

    void write_row(const std::vector<std::string> &fields);

  private:
    std::FILE *out_;
    std::size_t n_columns_;
    std::string path_;
};

/// Deterministic textual form of a double: shortest representation that
/// round-trips, so identical values always print identically.
std::string format_double(double v);

} // namespace callplan
