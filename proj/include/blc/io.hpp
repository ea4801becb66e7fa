// JSON encodings of data, reports and optimizer results.
#pragma once

#include "blc/core.hpp"

#include <json.hpp>

#include <string>

namespace blc::io {

using Json = nlohmann::json;

/// Datum document: { "n": int, "maps": [ { "p": x, "rows": [[...], ...] }, ... ] }.
/// Rejects non-finite numbers, ragged rows and unknown keys.
BLDatum datum_from_json(const Json& doc);
BLDatum parse_datum(const std::string& text);
BLDatum load_datum(const std::string& path);
Json datum_to_json(const BLDatum& datum);

Matrix matrix_from_json(const Json& rows, const std::string& what);
Json matrix_to_json(const Matrix& m);

/// Shortest decimal form that reads back to the same double, independent of locale.
std::string format_number(double x);

}  // namespace blc::io
