#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "errors.hpp"
#include "robust.hpp"
#include "system.hpp"

namespace monobil {

// Contents of a system description file.
struct SystemFile {
    BilinearPositiveSystem system;
    std::optional<UncertaintySpec> uncertainty;

    friend bool operator==(const SystemFile&, const SystemFile&) = default;
};

namespace io {

using json = nlohmann::json;

inline const json& require_field(const json& doc, const std::string& name, const std::string& where = "") {
    if (!doc.is_object()) throw ParseError(where + (where.empty() ? "" : ": ") + "expected a JSON object");
    const auto it = doc.find(name);
    if (it == doc.end()) throw ParseError("missing field '" + where + (where.empty() ? "" : ".") + name + "'");
    return *it;
}

inline Index parse_dimension(const json& doc, const std::string& name) {
    const auto& v = require_field(doc, name);
    if (!v.is_number_integer() || v.get<long long>() < 1)
        throw ParseError("field '" + name + "': expected a positive integer");
    return static_cast<Index>(v.get<long long>());
}

inline double parse_number(const json& v, const std::string& field, Index i, Index j) {
    if (!v.is_number()) {
        std::ostringstream os;
        os << "field '" << field << "': entry (" << i + 1 << "," << j + 1 << ") is not a number";
        throw ParseError(os.str());
    }
    return v.get<double>();
}

/// Row-major nested array with the given shape.
inline Matrix parse_matrix(const json& v, const std::string& field, Index rows, Index cols) {
    if (!v.is_array()) throw ParseError("field '" + field + "': expected an array of rows");
    if (static_cast<Index>(v.size()) != rows)
        throw ParseError("field '" + field + "': expected " + std::to_string(rows) + " rows, got " +
                         std::to_string(v.size()));
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = v[static_cast<std::size_t>(i)];
        if (!row.is_array())
            throw ParseError("field '" + field + "': row " + std::to_string(i + 1) + " is not an array");
        if (static_cast<Index>(row.size()) != cols)
            throw ParseError("field '" + field + "': row " + std::to_string(i + 1) + " has " +
                             std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
        for (Index j = 0; j < cols; ++j) M(i, j) = parse_number(row[static_cast<std::size_t>(j)], field, i, j);
    }
    return M;
}

inline Vector parse_vector(const json& v, const std::string& field, Index size) {
    if (!v.is_array()) throw ParseError("field '" + field + "': expected an array");
    if (static_cast<Index>(v.size()) != size)
        throw ParseError("field '" + field + "': expected " + std::to_string(size) + " entries, got " +
                         std::to_string(v.size()));
    Vector out(size);
    for (Index i = 0; i < size; ++i) out(i) = parse_number(v[static_cast<std::size_t>(i)], field, i, 0);
    return out;
}

inline json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline SystemFile parse_system(const json& doc) {
    if (!doc.is_object()) throw ParseError("system description must be a JSON object");
    const Index n = parse_dimension(doc, "n");
    const Index m = parse_dimension(doc, "m");
    const Index q = parse_dimension(doc, "q");

    SystemFile out;
    auto& sys = out.system;
    sys.A = parse_matrix(require_field(doc, "A"), "A", n, n);
    sys.B = parse_matrix(require_field(doc, "B"), "B", n, q);
    sys.Q = parse_matrix(require_field(doc, "Q"), "Q", n, n);
    sys.R = parse_matrix(require_field(doc, "R"), "R", m, m);
    sys.D_u = parse_matrix(require_field(doc, "D_u"), "D_u", n, m);

    if (const auto it = doc.find("uncertainty"); it != doc.end() && !it->is_null()) {
        UncertaintySpec unc;
        unc.A_tilde = parse_matrix(require_field(*it, "A_tilde", "uncertainty"), "uncertainty.A_tilde", n, n);
        unc.beta = parse_vector(require_field(*it, "beta", "uncertainty"), "uncertainty.beta", m);
        out.uncertainty = std::move(unc);
    }
    return out;
}

inline SystemFile parse_system_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    return parse_system(doc);
}

inline json to_json(const SystemFile& file) {
    const auto& sys = file.system;
    json doc;
    doc["n"] = sys.n();
    doc["m"] = sys.m();
    doc["q"] = sys.q();
    doc["A"] = matrix_to_json(sys.A);
    doc["B"] = matrix_to_json(sys.B);
    doc["Q"] = matrix_to_json(sys.Q);
    doc["R"] = matrix_to_json(sys.R);
    doc["D_u"] = matrix_to_json(sys.D_u);
    if (file.uncertainty) {
        doc["uncertainty"] = {{"A_tilde", matrix_to_json(file.uncertainty->A_tilde)},
                              {"beta", vector_to_json(file.uncertainty->beta)}};
    }
    return doc;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SystemFile read_system_file(const std::filesystem::path& path) {
    try {
        return parse_system_text(read_text(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline void write_system_file(const std::filesystem::path& path, const SystemFile& file) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    out << to_json(file).dump(2) << '\n';
}

}  // namespace io
}  // namespace monobil
