#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace agfra {

// Comma-separated, one header row, dot decimal. Doubles are written with
// shortest round-trip precision so re-parsing yields identical values.
using CsvField = std::variant<long long, double, std::string>;

std::string csv_format(const CsvField& field);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<CsvField>& fields);
    ~CsvWriter();

private:
    struct Impl;
    Impl* impl_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // throws if absent
    double number(std::size_t row, const std::string& name) const;
    const std::string& text(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace agfra
