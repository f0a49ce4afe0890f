#include "agfra/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace agfra {

std::string csv_format(const CsvField& field) {
    if (const auto* i = std::get_if<long long>(&field)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&field)) {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof(buf), *d);
        return std::string(buf, res.ptr);
    }
    return std::get<std::string>(field);
}

struct CsvWriter::Impl {
    std::ofstream out;
    std::size_t columns;
};

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : impl_(new Impl{std::ofstream(path), header.size()}) {
    if (!impl_->out) {
        delete impl_;
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    for (std::size_t i = 0; i < header.size(); ++i)
        impl_->out << (i ? "," : "") << header[i];
    impl_->out << '\n';
}

void CsvWriter::row(const std::vector<CsvField>& fields) {
    if (fields.size() != impl_->columns)
        throw std::invalid_argument("csv row width does not match header");
    for (std::size_t i = 0; i < fields.size(); ++i)
        impl_->out << (i ? "," : "") << csv_format(fields[i]);
    impl_->out << '\n';
}

CsvWriter::~CsvWriter() { delete impl_; }

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw std::out_of_range("csv column not found: " + name);
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    const std::string& cell = rows.at(row).at(column(name));
    double value = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc{}) throw std::runtime_error("csv cell is not numeric: " + cell);
    return value;
}

const std::string& CsvTable::text(std::size_t row, const std::string& name) const {
    return rows.at(row).at(column(name));
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

}  // namespace agfra
