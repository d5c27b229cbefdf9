#include "cxr/dataset/csv.hpp"

#include "cxr/core/errors.hpp"

namespace cxr {

std::vector<CsvRow> read_delimited(std::istream& in, char delimiter) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool quoted = false;
    bool row_has_content = false;
    char ch;
    while (in.get(ch)) {
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"') {
            quoted = true;
            row_has_content = true;
        } else if (ch == delimiter) {
            row.push_back(std::move(field));
            field.clear();
            row_has_content = true;
        } else if (ch == '\r') {
            // swallowed; '\n' ends the row
        } else if (ch == '\n') {
            if (row_has_content || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            row_has_content = false;
        } else {
            field += ch;
            row_has_content = true;
        }
    }
    if (quoted) throw DataError("unterminated quoted field in delimited file");
    if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace cxr
