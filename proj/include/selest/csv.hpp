#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "selest/common.hpp"

namespace selest::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 style reader: quoted fields may contain separators, doubled quotes
/// and line breaks; CRLF and LF line endings are both accepted. Row numbers in
/// errors are 1-based data rows (the header is row 0).
inline Table parse(std::string_view text, char sep = ',') {
    Table table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool have_record = false;
    std::size_t record_index = 0;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (record_index == 0) {
            table.header = std::move(record);
        } else {
            // a completely blank line is skipped; a lone "" is an empty value
            if (have_record || !(record.size() == 1 && record[0].empty())) {
                if (record.size() != table.header.size()) {
                    throw Error("parse", "ragged row " + std::to_string(record_index) + ": expected " +
                                             std::to_string(table.header.size()) + " fields, found " +
                                             std::to_string(record.size()));
                }
                table.rows.push_back(std::move(record));
            }
        }
        record.clear();
        ++record_index;
        have_record = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
            have_record = true;
        } else if (c == sep) {
            end_field();
            have_record = true;
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
        } else if (c == '\n') {
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
            have_record = true;
        }
    }
    if (in_quotes) throw Error("parse", "unterminated quoted field in row " + std::to_string(record_index));
    if (have_record || !field.empty()) end_record();
    if (table.header.empty()) throw Error("parse", "missing header row");
    return table;
}

inline Table read_file(const std::string& path, char sep = ',') {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), sep);
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string format_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line.push_back(',');
        line += fields.size() == 1 && fields[i].empty() ? "\"\"" : quote(fields[i]);
    }
    line.push_back('\n');
    return line;
}

}  // namespace selest::csv
