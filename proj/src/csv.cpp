#include "callplan/csv.hpp"

#include "callplan/error.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>

namespace callplan {

namespace {

std::vector<std::string> split_fields(const std::string &line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

std::string CsvIssue::to_string() const {
    return file + ":" + std::to_string(line) + ": " + message;
}

std::size_t CsvFile::column(const std::string &name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw DataError(path + ": missing required column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

CsvFile read_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    CsvFile file;
    file.path = path.string();
    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!have_header) {
            file.header = split_fields(line);
            have_header = true;
        } else {
            file.rows.push_back(CsvRow{line_no, split_fields(line)});
        }
    }
    if (!have_header) {
        throw DataError(path.string() + ": empty file (no header)");
    }
    return file;
}

std::int64_t field_int(const CsvRow &row, std::size_t col, const std::string &name) {
    if (col >= row.fields.size()) {
        throw DataError("missing field '" + name + "'");
    }
    const std::string &s = row.fields[col];
    errno = 0;
    char *end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw DataError("field '" + name + "': '" + s + "' is not an integer");
    }
    return v;
}

double field_double(const CsvRow &row, std::size_t col, const std::string &name) {
    if (col >= row.fields.size()) {
        throw DataError("missing field '" + name + "'");
    }
    const std::string &s = row.fields[col];
    errno = 0;
    char *end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw DataError("field '" + name + "': '" + s + "' is not a number");
    }
    return v;
}

CsvWriter::CsvWriter(const std::filesystem::path &path, const std::vector<std::string> &header,
                     const std::string &provenance)
    : out_(nullptr), n_columns_(header.size()), path_(path.string()) {
    out_ = std::fopen(path.string().c_str(), "wb");
    if (!out_) {
        throw DataError("cannot write " + path.string() + ": " + std::strerror(errno));
    }
    if (!provenance.empty()) {
        std::fprintf(out_, "# %s\n", provenance.c_str());
    }
    write_row(header);
}

CsvWriter::~CsvWriter() {
    if (out_) {
        std::fclose(out_);
    }
}

void CsvWriter::write_row(const std::vector<std::string> &fields) {
    if (fields.size() != n_columns_) {
        throw Error(path_ + ": row has " + std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(n_columns_));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
        std::fputs(fields[i].c_str(), out_);
        std::fputc(i + 1 == fields.size() ? '\n' : ',', out_);
    }
}

std::string format_double(double v) {
    char buf[40];
    // Shortest form that parses back to the same double.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

} // namespace callplan
