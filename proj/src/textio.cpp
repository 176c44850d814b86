#include "piecewise/textio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pw {

namespace {

std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Vec load_vec_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("load_vec_text: cannot open '" + path + "'");
    Vec v;
    double x;
    while (in >> x) v.push_back(x);
    if (!in.eof()) throw DomainError("load_vec_text: malformed number in '" + path + "'");
    return v;
}

void save_vec_text(const std::string& path, const Vec& v) {
    std::ofstream out(path);
    if (!out) throw DomainError("save_vec_text: cannot open '" + path + "' for writing");
    for (double x : v) out << format_full(x) << '\n';
    if (!out) throw NumericalError("save_vec_text: write failed for '" + path + "'");
}

Matrix load_matrix_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("load_matrix_text: cannot open '" + path + "'");
    std::vector<Vec> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        Vec row;
        double x;
        while (ls >> x) row.push_back(x);
        if (!ls.eof()) throw DomainError("load_matrix_text: malformed number in '" + path + "'");
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DomainError("load_matrix_text: no rows in '" + path + "'");
    const std::size_t cols = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != cols)
            throw DomainError("load_matrix_text: ragged rows in '" + path + "'");
    }
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = rows[r][c];
    return m;
}

void save_matrix_text(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw DomainError("save_matrix_text: cannot open '" + path + "' for writing");
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c) out << ' ';
            out << format_full(m.at(r, c));
        }
        out << '\n';
    }
    if (!out) throw NumericalError("save_matrix_text: write failed for '" + path + "'");
}

}  // namespace pw
