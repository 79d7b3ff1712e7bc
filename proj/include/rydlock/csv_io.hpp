#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rydlock/adler.hpp"
#include "rydlock/integrator.hpp"
#include "rydlock/spectral.hpp"

namespace rydlock::io {

/// Ordered key=value pairs written as '#'-prefixed lines ahead of the data.
using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Shortest round-trip decimal form.
std::string format_double(double v);

void write_metadata(std::ostream& os, const Metadata& meta);

/// Columns: t, n_r, n_s, re/im of sigma_gr, sigma_gs, sigma_rs, observable.
void write_trajectory(std::ostream& os, const Trajectory& traj, const Metadata& meta);
/// Columns: freq_hz, asd, amplitude.
void write_spectrum(std::ostream& os, const Spectrum& s, const Metadata& meta);
/// Columns: t, phi.
void write_phase_trajectory(std::ostream& os, const adler::PhaseTrajectory& p, const Metadata& meta);

/// Dense matrix with coordinate headers: the first row holds `corner` then
/// the column axis; every following row starts with its row coordinate.
struct Matrix {
    std::string corner;  ///< e.g. "field_mv_cm\\freq_hz"
    std::vector<double> rows;
    std::vector<double> cols;
    std::vector<std::vector<double>> values;  ///< [row][col]
    Metadata metadata;
};

void write_matrix(std::ostream& os, const Matrix& m);
/// Inverse of write_matrix. Throws ConfigError on ragged or non-numeric data.
Matrix read_matrix(std::istream& is);

void write_table(std::ostream& os, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, const Metadata& meta);

/// Header plus numeric rows, '#' lines collected as metadata.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    Metadata metadata;
    /// Index of a named column; throws ConfigError if absent.
    std::size_t column(const std::string& name) const;
};
/// Inverse of write_table for all-numeric data. Throws ConfigError on ragged or non-numeric rows.
Table read_table(std::istream& is);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

}  // namespace rydlock::io
