#pragma once

// CSV and JSON artifacts. Numbers are written with std::to_chars (shortest
// round-trip form, '.' decimal, no locale), rows end in LF, nothing carries a
// timestamp, so equal inputs give byte-identical files.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ncwave/born.hpp"
#include "ncwave/errors.hpp"
#include "ncwave/kernels.hpp"
#include "ncwave/lattice.hpp"

namespace ncwave::io {

using json = nlohmann::json;

class IoError : public Error {
public:
    using Error::Error;
};

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_number(std::string_view s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw IoError("not a number: '" + std::string(s) + "'");
    return v;
}

using Cell = std::variant<double, long long, std::string>;

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<Cell> row) {
        if (row.size() != header_.size()) throw IoError("csv row width does not match header");
        rows_.push_back(std::move(row));
    }

    std::size_t size() const { return rows_.size(); }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header_);
        std::vector<std::string> cells;
        for (const auto& row : rows_) {
            cells.clear();
            for (const auto& c : row) cells.push_back(to_text(c));
            line(cells);
        }
        return out;
    }

    void write(const std::filesystem::path& path) const;

private:
    static std::string to_text(const Cell& c) {
        if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
        if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
        const auto& s = std::get<std::string>(c);
        if (s.find_first_of(",\"\n") != std::string::npos) throw IoError("csv cell needs quoting: " + s);
        return s;
    }

    std::vector<std::string> header_;
    std::vector<std::vector<Cell>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

inline void CsvTable::write(const std::filesystem::path& path) const { write_text(path, str()); }

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline json grid_metadata(const SpacetimeGrid& g) {
    return {{"n_time", g.n_time}, {"n_space", g.n_space}, {"dt", g.dt}, {"dx", g.dx},
            {"t0", g.t0},         {"x0", g.x0},           {"components", g.components}};
}

inline SpacetimeGrid grid_from_metadata(const json& m) {
    try {
        return make_grid(m.at("n_time").get<int>(), m.at("n_space").get<int>(), m.at("dt").get<double>(),
                         m.at("dx").get<double>(), m.at("t0").get<double>(), m.at("x0").get<double>(),
                         m.at("components").get<int>());
    } catch (const json::exception& e) {
        throw IoError(std::string("grid metadata: ") + e.what());
    }
}

/// One row per lattice point: t, x, Re f_0, Im f_0, Re f_1, ...
inline CsvTable grid_function_table(const GridFunction& f) {
    const auto& g = f.grid();
    std::vector<std::string> header{"t", "x"};
    for (int a = 0; a < g.components; ++a) {
        header.push_back("re_" + std::to_string(a));
        header.push_back("im_" + std::to_string(a));
    }
    CsvTable t(header);
    for (int j = 0; j < g.n_time; ++j)
        for (int k = 0; k < g.n_space; ++k) {
            std::vector<Cell> row{g.t(j), g.x(k)};
            for (const auto& v : f.point(j, k)) {
                row.emplace_back(v.real());
                row.emplace_back(v.imag());
            }
            t.add(std::move(row));
        }
    return t;
}

/// <stem>.csv plus <stem>.json with the lattice parameters.
inline void write_grid_function(const std::filesystem::path& dir, const std::string& stem, const GridFunction& f) {
    grid_function_table(f).write(dir / (stem + ".csv"));
    json meta{{"grid", grid_metadata(f.grid())},
              {"layout", "row per (t, x) point, time-major: t, x, then re/im per component"}};
    write_json(dir / (stem + ".json"), meta);
}

inline GridFunction read_grid_function(const std::filesystem::path& dir, const std::string& stem) {
    const auto meta = json::parse(read_text(dir / (stem + ".json")));
    const auto g = grid_from_metadata(meta.at("grid"));
    GridFunction f(g);
    std::istringstream is(read_text(dir / (stem + ".csv")));
    std::string line;
    std::getline(is, line);  // header
    const std::size_t width = 2 + 2 * static_cast<std::size_t>(g.components);
    std::vector<double> cells;
    for (int j = 0; j < g.n_time; ++j)
        for (int k = 0; k < g.n_space; ++k) {
            if (!std::getline(is, line)) throw IoError("grid function csv is truncated");
            cells.clear();
            std::size_t pos = 0;
            while (true) {
                const auto comma = line.find(',', pos);
                cells.push_back(parse_number(std::string_view(line).substr(pos, comma - pos)));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
            if (cells.size() != width) throw IoError("grid function csv row has wrong width");
            auto p = f.point(j, k);
            for (int a = 0; a < g.components; ++a) p[a] = {cells[2 + 2 * a], cells[3 + 2 * a]};
        }
    return f;
}

/// Nonzero entries of the dense kernel over K (indices in the K ordering:
/// time-major points, components innermost) and a header with the box.
inline void write_dense_kernel(const std::filesystem::path& dir, const std::string& stem, const KernelPotential& W,
                               double theta0) {
    const auto D = W.to_dense();
    const auto& d = D.dense_data();
    CsvTable t({"i_x", "i_y", "re", "im"});
    if (d.is_diagonal()) {
        for (Eigen::Index i = 0; i < d.diagonal.size(); ++i)
            if (d.diagonal[i] != cplx{0.0, 0.0})
                t.add({static_cast<long long>(i), static_cast<long long>(i), d.diagonal[i].real(), d.diagonal[i].imag()});
    } else {
        for (Eigen::Index i = 0; i < d.w.rows(); ++i)
            for (Eigen::Index l = 0; l < d.w.cols(); ++l)
                if (d.w(i, l) != cplx{0.0, 0.0})
                    t.add({static_cast<long long>(i), static_cast<long long>(l), d.w(i, l).real(), d.w(i, l).imag()});
    }
    t.write(dir / (stem + ".csv"));
    const auto& K = W.support_box();
    json meta{{"grid", grid_metadata(W.grid())},
              {"K", {{"j0", K.j0}, {"j1", K.j1}, {"k0", K.k0}, {"k1", K.k1}}},
              {"theta0", theta0},
              {"dimension", D.box_dim()},
              {"ordering", "index = ((j - j0) * (k1 - k0 + 1) + (k - k0)) * components + component"},
              {"weight", "(W f)(x) = sum_y w(x, y) f(y) dt dx"}};
    write_json(dir / (stem + ".json"), meta);
}

inline CsvTable pole_scan_table(const PoleScanResult& r) {
    CsvTable t({"lambda_re", "lambda_im", "det_re", "det_im"});
    for (const auto& s : r.samples) t.add({s.lambda.real(), s.lambda.imag(), s.det.real(), s.det.imag()});
    return t;
}

}  // namespace ncwave::io
