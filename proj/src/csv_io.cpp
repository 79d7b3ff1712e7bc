#include "rydlock/csv_io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "rydlock/errors.hpp"

namespace rydlock::io {
namespace {

void write_row(std::ostream& os, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << ',';
        os << format_double(values[i]);
    }
    os << '\n';
}

double parse_number(const std::string& cell) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && *first == ' ') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr == first) throw ConfigError("non-numeric matrix cell '" + cell + "'");
    return v;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

void write_metadata(std::ostream& os, const Metadata& meta) {
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
}

void write_trajectory(std::ostream& os, const Trajectory& traj, const Metadata& meta) {
    write_metadata(os, meta);
    os << "t,n_r,n_s,re_sigma_gr,im_sigma_gr,re_sigma_gs,im_sigma_gs,re_sigma_rs,im_sigma_rs,observable\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& s = traj.states[i];
        write_row(os, {traj.times[i], s.n_r, s.n_s, s.sigma_gr.real(), s.sigma_gr.imag(),
                       s.sigma_gs.real(), s.sigma_gs.imag(), s.sigma_rs.real(), s.sigma_rs.imag(),
                       traj.observable[i]});
    }
}

void write_spectrum(std::ostream& os, const Spectrum& s, const Metadata& meta) {
    write_metadata(os, meta);
    os << "freq_hz,asd,amplitude\n";
    for (std::size_t k = 0; k < s.size(); ++k) write_row(os, {s.freqs[k], s.asd[k], s.amplitude[k]});
}

void write_phase_trajectory(std::ostream& os, const adler::PhaseTrajectory& p, const Metadata& meta) {
    write_metadata(os, meta);
    os << "t,phi\n";
    for (std::size_t i = 0; i < p.times.size(); ++i) write_row(os, {p.times[i], p.phase[i]});
}

void write_matrix(std::ostream& os, const Matrix& m) {
    write_metadata(os, m.metadata);
    os << m.corner;
    for (double c : m.cols) os << ',' << format_double(c);
    os << '\n';
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        os << format_double(m.rows[r]);
        for (double v : m.values[r]) os << ',' << format_double(v);
        os << '\n';
    }
}

Matrix read_matrix(std::istream& is) {
    Matrix m;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto start = line.find_first_not_of("# ");
            if (start == std::string::npos) continue;
            const auto body = line.substr(start);
            const auto eq = body.find('=');
            if (eq != std::string::npos) m.metadata.emplace_back(body.substr(0, eq), body.substr(eq + 1));
            continue;
        }
        const auto cells = split(line);
        if (!have_header) {
            if (cells.empty()) throw ConfigError("matrix header row is empty");
            m.corner = cells[0];
            for (std::size_t i = 1; i < cells.size(); ++i) m.cols.push_back(parse_number(cells[i]));
            have_header = true;
            continue;
        }
        if (cells.size() != m.cols.size() + 1) throw ConfigError("ragged matrix row");
        m.rows.push_back(parse_number(cells[0]));
        std::vector<double> row;
        row.reserve(m.cols.size());
        for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(parse_number(cells[i]));
        m.values.push_back(std::move(row));
    }
    if (!have_header) throw ConfigError("matrix file has no header row");
    return m;
}

void write_table(std::ostream& os, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, const Metadata& meta) {
    write_metadata(os, meta);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
        os << '\n';
    }
}

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ConfigError("table has no column '" + name + "'");
}

Table read_table(std::istream& is) {
    Table t;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto start = line.find_first_not_of("# ");
            if (start == std::string::npos) continue;
            const auto body = line.substr(start);
            const auto eq = body.find('=');
            if (eq != std::string::npos) t.metadata.emplace_back(body.substr(0, eq), body.substr(eq + 1));
            continue;
        }
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) throw ConfigError("ragged table row");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_number(c));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw ConfigError("table has no header row");
    return t;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace rydlock::io
