#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace geoloceval::csv {

/// Splits one record, honoring double-quoted fields. Returns false on an
/// unterminated quote.
bool split(std::string_view line, char delim, std::vector<std::string>& out);

/// Quotes a field when it contains the delimiter, a quote or a line break.
std::string escape(std::string_view field, char delim);

/// Splits text into lines, accepting \n and \r\n; skips blank lines.
std::vector<std::string_view> lines(std::string_view text);

}  // namespace geoloceval::csv
