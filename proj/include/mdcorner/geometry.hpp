#ifndef MDCORNER_GEOMETRY_HPP
#define MDCORNER_GEOMETRY_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdc {

enum class MapKind { Range, Doppler, RangeSquared, DopplerSquared };

inline const char* map_kind_name(MapKind k)
{
    switch (k) {
    case MapKind::Range: return "range";
    case MapKind::Doppler: return "doppler";
    case MapKind::RangeSquared: return "range2";
    case MapKind::DopplerSquared: return "doppler2";
    }
    return "?";
}

inline MapKind map_kind_from_name(const std::string& s)
{
    if (s == "range") return MapKind::Range;
    if (s == "doppler") return MapKind::Doppler;
    if (s == "range2") return MapKind::RangeSquared;
    if (s == "doppler2") return MapKind::DopplerSquared;
    throw std::invalid_argument("unknown map kind '" + s + "'");
}

/// Geometry of a vertically squared value axis.
///
/// The source axis has `source_rows` rows with row k at physical value
/// `source_origin + k * source_step` (meters for range, Hz for Doppler).
/// Source row j (counted outward from zero) occupies the block
/// [j^2, (j+1)^2) of the full squared axis; a Doppler axis is split at its
/// zero row into two such halves, the negative one flipped and stacked below
/// the positive one. `rows` is the row count of the stored map, which may be
/// a block-downsampled version of the full squared axis.
struct SquaredAxis {
    MapKind kind = MapKind::RangeSquared;
    double source_origin = 0.0;
    double source_step = 1.0;
    int source_rows = 1;
    int rows = 1;

    /// Rows of one Doppler half, ceil(q/2).
    std::int64_t half_rows() const { return (source_rows + 1) / 2; }

    std::int64_t full_rows() const
    {
        if (kind == MapKind::RangeSquared)
            return std::int64_t(source_rows) * source_rows;
        return 2 * half_rows() * half_rows();
    }

    /// Index of the zero-Doppler source row; it starts the positive half.
    int zero_row() const { return source_rows / 2; }

    /// Fractional pixel-center position on the full squared axis.
    double full_position(double value) const
    {
        const double x = (value - source_origin) / source_step;
        if (kind == MapKind::RangeSquared) {
            const double xc = std::max(x, 0.0);
            return xc * xc + xc;
        }
        const double h2 = double(half_rows() * half_rows());
        const double rel = x - zero_row();
        if (rel >= 0.0) return h2 + rel * rel + rel;
        const double y = -rel - 1.0;
        if (y < 0.0) return h2 + rel;
        return h2 - 1.0 - (y * y + y);
    }

    /// Fractional row on this (possibly downsampled) map.
    double row_of(double value) const
    {
        const double factor = double(full_rows()) / rows;
        return (full_position(value) + 0.5) / factor - 0.5;
    }
};

struct Corner {
    double row = 0.0;
    double col = 0.0;
    double response = 0.0;
    double u = 0.0;  // col / (cols - 1)
    double v = 0.0;  // row / (rows - 1)
    bool padded = false;
};

struct CornerSet {
    std::string map_id;
    std::vector<Corner> corners;
    int clamped = 0;       // points forced onto the map edge
    bool placeholder = false;
};

inline Corner make_corner(double row, double col, int rows, int cols, double response = 0.0, bool padded = false)
{
    Corner c;
    c.row = row;
    c.col = col;
    c.response = response;
    c.u = cols > 1 ? col / (cols - 1) : 0.0;
    c.v = rows > 1 ? row / (rows - 1) : 0.0;
    c.padded = padded;
    return c;
}

/// Deterministic 6x5 grid used where no motion curves exist.
inline std::vector<Corner> uniform_corner_grid(int count, int rows, int cols)
{
    const int gx = 6;
    const int gy = (count + gx - 1) / gx;
    std::vector<Corner> out;
    for (int i = 0; i < count; ++i) {
        const int ix = i % gx, iy = i / gx;
        const double col = (ix + 0.5) / gx * (cols - 1);
        const double row = (iy + 0.5) / gy * (rows - 1);
        out.push_back(make_corner(row, col, rows, cols, 0.0, true));
    }
    return out;
}

}  // namespace mdc

#endif  // MDCORNER_GEOMETRY_HPP
