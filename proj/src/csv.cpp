#include "fieldsel/csv.hpp"

#include "fieldsel/errors.hpp"

namespace fieldsel::csv {

std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k != 0) out << ',';
        out << quote(fields[k]);
    }
    out << "\r\n";
}

bool read_row(std::istream& in, std::vector<std::string>& fields, std::size_t& line, const std::string& source) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    ++line;
    const std::size_t start_line = line;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    for (;;) {
        const int ch = in.get();
        if (ch == std::char_traits<char>::eof()) {
            if (quoted) throw ParseError(source, start_line, "unterminated quoted field");
            fields.push_back(std::move(field));
            return true;
        }
        const char c = static_cast<char>(ch);
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    quoted = false;
                    after_quote = true;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            after_quote = false;
        } else if (c == '\r' && in.peek() == '\n') {
            in.get();
            fields.push_back(std::move(field));
            return true;
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else if (c == '"' && field.empty() && !after_quote) {
            quoted = true;
        } else {
            if (after_quote) throw ParseError(source, start_line, "characters after closing quote");
            field += c;
        }
    }
}

} // namespace fieldsel::csv
