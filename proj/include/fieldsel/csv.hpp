// Minimal RFC-4180 reader/writer: comma separated, fields quoted when they
// contain a comma, quote, CR or LF, quotes doubled inside quoted fields.
#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace fieldsel::csv {

std::string quote(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Returns false at end of input. Throws ParseError on an unterminated quote.
bool read_row(std::istream& in, std::vector<std::string>& fields, std::size_t& line, const std::string& source);

} // namespace fieldsel::csv
