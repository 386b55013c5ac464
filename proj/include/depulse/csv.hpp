#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace depulse {

// Minimal CSV support for the diagnostic dumps: one '#' comment line with
// tool version and seed, one header row, then numeric rows.
class CsvWriter {
public:
    CsvWriter(const std::string& path, uint64_t seed, const std::vector<std::string>& columns);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<double>& values);
    void close();

private:
    struct Impl;
    Impl* impl_;
};

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const;  // -1 if absent
};

// Parses a file written by CsvWriter (or anything shaped like it).
// Comment lines start with '#'. Throws FormatError on ragged rows or
// non-numeric fields, IoError if the file cannot be read.
CsvTable read_csv(const std::string& path);

}  // namespace depulse
