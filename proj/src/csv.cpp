#include "depulse/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "depulse/errors.hpp"
#include "depulse/version.hpp"

namespace depulse {

struct CsvWriter::Impl {
    std::ofstream out;
    std::size_t ncols = 0;
    std::string path;
};

CsvWriter::CsvWriter(const std::string& path, uint64_t seed,
                     const std::vector<std::string>& columns)
    : impl_(new Impl) {
    impl_->path = path;
    impl_->ncols = columns.size();
    impl_->out.open(path, std::ios::trunc);
    if (!impl_->out) {
        delete impl_;
        throw IoError("cannot open " + path + " for writing");
    }
    impl_->out << "# depulse " << kVersion << " seed=" << seed << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
        impl_->out << columns[i] << (i + 1 < columns.size() ? "," : "\n");
}

CsvWriter::~CsvWriter() {
    close();
    delete impl_;
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != impl_->ncols)
        throw DimensionError("csv row has " + std::to_string(values.size()) + " fields, expected " +
                             std::to_string(impl_->ncols));
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", values[i]);
        impl_->out << buf << (i + 1 < values.size() ? "," : "\n");
    }
}

void CsvWriter::close() {
    if (impl_->out.is_open()) {
        impl_->out.flush();
        if (!impl_->out) throw IoError("write failed: " + impl_->path);
        impl_->out.close();
    }
}

int CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (!have_header) {
            t.columns = fields;
            have_header = true;
            continue;
        }
        if (fields.size() != t.columns.size())
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.columns.size()) + " fields, got " +
                              std::to_string(fields.size()));
        std::vector<double> row(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            std::size_t pos = 0;
            try {
                row[i] = std::stod(fields[i], &pos);
            } catch (const std::exception&) {
                throw FormatError(path + ":" + std::to_string(lineno) + ": non-numeric field '" +
                                  fields[i] + "'");
            }
            if (pos != fields[i].size())
                throw FormatError(path + ":" + std::to_string(lineno) + ": non-numeric field '" +
                                  fields[i] + "'");
        }
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw FormatError(path + ": no header row");
    return t;
}

}  // namespace depulse
