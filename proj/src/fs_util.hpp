#pragma once

#include <string>
#include <string_view>

namespace geoloceval {

/// Writes to a sibling temp file, then renames over `path`. Throws IoError.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace geoloceval
