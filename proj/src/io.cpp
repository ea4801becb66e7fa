#include "blc/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace blc::io {

namespace {

double finite_number(const Json& v, const std::string& what) {
  if (!v.is_number()) throw StructuralError(what + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw StructuralError(what + ": number is not finite");
  return x;
}

void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed,
                         const std::string& what) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) throw StructuralError(what + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace

Matrix matrix_from_json(const Json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty())
    throw StructuralError(what + ": expected a non-empty array of rows");
  const std::size_t r = rows.size();
  if (!rows[0].is_array() || rows[0].empty())
    throw StructuralError(what + ": rows must be non-empty arrays");
  const std::size_t c = rows[0].size();
  Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < r; ++i) {
    if (!rows[i].is_array() || rows[i].size() != c)
      throw StructuralError(what + ": ragged rows");
    for (std::size_t k = 0; k < c; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          finite_number(rows[i][k], what);
  }
  return m;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

BLDatum datum_from_json(const Json& doc) {
  if (!doc.is_object()) throw StructuralError("datum: expected a JSON object");
  reject_unknown_keys(doc, {"n", "maps"}, "datum");
  if (!doc.contains("n") || !doc["n"].is_number_integer())
    throw StructuralError("datum: 'n' must be an integer");
  const int n = doc["n"].get<int>();
  if (!doc.contains("maps") || !doc["maps"].is_array())
    throw StructuralError("datum: 'maps' must be an array");
  std::vector<LinearMap> maps;
  std::vector<double> p;
  for (std::size_t j = 0; j < doc["maps"].size(); ++j) {
    const Json& entry = doc["maps"][j];
    const std::string what = "datum map " + std::to_string(j);
    if (!entry.is_object()) throw StructuralError(what + ": expected an object");
    reject_unknown_keys(entry, {"p", "rows"}, what);
    if (!entry.contains("p") || !entry.contains("rows"))
      throw StructuralError(what + ": needs 'p' and 'rows'");
    p.push_back(finite_number(entry["p"], what + " exponent"));
    maps.emplace_back(matrix_from_json(entry["rows"], what));
  }
  return BLDatum(n, std::move(maps), std::move(p));
}

BLDatum parse_datum(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw StructuralError(std::string("datum: malformed JSON: ") + e.what());
  }
  return datum_from_json(doc);
}

BLDatum load_datum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open datum file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_datum(ss.str());
}

Json datum_to_json(const BLDatum& datum) {
  Json maps = Json::array();
  for (int j = 0; j < datum.m(); ++j)
    maps.push_back({{"p", datum.p(j)}, {"rows", matrix_to_json(datum.map(j).rows())}});
  return {{"n", datum.n()}, {"maps", maps}};
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace blc::io
