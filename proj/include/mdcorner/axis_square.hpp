#ifndef MDCORNER_AXIS_SQUARE_HPP
#define MDCORNER_AXIS_SQUARE_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "geometry.hpp"
#include "preprocess.hpp"

namespace mdc {

/// Source row feeding each row of the full squared axis.
///
/// Range: source row j (0-based) fills rows j^2 .. (j+1)^2 - 1.
/// Doppler: rows are split at q/2; the upper half is read outward from the
/// center and stretched the same way, the lower half is read outward,
/// stretched and flipped below it. With odd q the center row belongs to the
/// upper half and the lower half leaves its outermost block empty (-1).
inline std::vector<int> squared_provenance(MapKind kind, int q)
{
    if (kind == MapKind::RangeSquared) {
        if (q < 1) throw std::invalid_argument("range axis needs at least one row");
        std::vector<int> src(std::size_t(q) * q);
        for (int j = 0; j < q; ++j)
            for (int p = j * j; p < (j + 1) * (j + 1); ++p) src[std::size_t(p)] = j;
        return src;
    }
    if (kind != MapKind::DopplerSquared) throw std::invalid_argument("provenance: squared kind expected");
    if (q < 2) throw std::invalid_argument("Doppler axis needs at least two rows");
    const int h = (q + 1) / 2, center = q / 2;
    const std::int64_t h2 = std::int64_t(h) * h;
    std::vector<int> src(std::size_t(2 * h2), -1);
    for (int j = 0; j < h; ++j) {
        const int up = center + j;
        if (up < q)
            for (int k = j * j; k < (j + 1) * (j + 1); ++k) src[std::size_t(h2 + k)] = up;
        const int down = center - 1 - j;
        if (down >= 0)
            for (int k = j * j; k < (j + 1) * (j + 1); ++k) src[std::size_t(h2 - 1 - k)] = down;
    }
    return src;
}

/// Linear operator from source rows to `out_rows` rows of the squared axis.
/// out_rows equal to the full row count gives pure replication; a divisor
/// gives the block average of replicated rows.
inline Eigen::MatrixXd squaring_operator(MapKind kind, int q, std::int64_t out_rows)
{
    const auto src = squared_provenance(kind, q);
    const std::int64_t full = std::int64_t(src.size());
    if (out_rows < 1 || full % out_rows != 0)
        throw std::invalid_argument("render rows must divide the squared row count");
    const std::int64_t f = full / out_rows;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(out_rows, q);
    for (std::int64_t p = 0; p < full; ++p)
        if (src[std::size_t(p)] >= 0) W(p / f, src[std::size_t(p)]) += 1.0 / double(f);
    return W;
}

inline SquaredAxis squared_axis(const ProfileMap& src, MapKind kind, int rows)
{
    SquaredAxis ax;
    ax.kind = kind;
    ax.source_origin = src.axis_origin;
    ax.source_step = src.axis_step;
    ax.source_rows = src.rows();
    ax.rows = rows;
    return ax;
}

namespace detail {

inline ProfileMap square_map(const ProfileMap& src, MapKind kind, std::int64_t out_rows)
{
    if (src.data.size() == 0) throw std::invalid_argument("cannot square an empty map");
    const Eigen::MatrixXd W = squaring_operator(kind, src.rows(), out_rows);
    ProfileMap out;
    out.kind = kind;
    out.axis_origin = src.axis_origin;
    out.axis_step = src.axis_step;
    out.time_step = src.time_step;
    out.squared = squared_axis(src, kind, int(out_rows));
    out.data = normalize(Eigen::MatrixXd(W * src.data));
    out.normalized = true;
    return out;
}

}  // namespace detail

/// R2TM by row replication over the full l^2 axis, then normalization.
inline ProfileMap square_range_axis(const ProfileMap& rtm)
{
    return detail::square_map(rtm, MapKind::RangeSquared, std::int64_t(rtm.rows()) * rtm.rows());
}

/// D2TM over the full 2*ceil(q/2)^2 axis, then normalization.
inline ProfileMap square_doppler_axis(const ProfileMap& dtm)
{
    const std::int64_t h = (dtm.rows() + 1) / 2;
    return detail::square_map(dtm, MapKind::DopplerSquared, 2 * h * h);
}

/// Squared map block-averaged to `render_rows` rows. Equivalent to
/// squaring, then averaging runs of full_rows/render_rows rows, then
/// normalizing.
inline ProfileMap square_render(const ProfileMap& src, MapKind kind, int render_rows)
{
    return detail::square_map(src, kind, render_rows);
}

/// Linear resampling of the value axis to `rows` rows spanning the same
/// physical extent.
inline ProfileMap resample_rows(const ProfileMap& src, int rows)
{
    if (rows < 2 || src.rows() < 2) throw std::invalid_argument("resampling needs at least two rows");
    if (rows == src.rows()) return src;
    ProfileMap out = src;
    const double scale = double(src.rows() - 1) / (rows - 1);
    out.axis_step = src.axis_step * scale;
    out.data.resize(rows, src.cols());
    for (int r = 0; r < rows; ++r) {
        const double x = r * scale;
        const int i0 = std::min(int(std::floor(x)), src.rows() - 2);
        const double a = x - i0;
        out.data.row(r) = (1.0 - a) * src.data.row(i0) + a * src.data.row(i0 + 1);
    }
    return out;
}

struct SquareConfig {
    int range_rows = 128;    // pre-decimation target for the RTM
    int doppler_rows = 128;  // pre-decimation target for the DTM
    int render_rows = 1024;

    void validate() const
    {
        auto fail = [](const std::string& w) { throw std::invalid_argument("square." + w); };
        if (range_rows < 2) fail("range_rows must be >= 2");
        if (doppler_rows < 2) fail("doppler_rows must be >= 2");
        if (render_rows < 1) fail("render_rows must be >= 1");
        const std::int64_t rfull = std::int64_t(range_rows) * range_rows;
        const std::int64_t h = (doppler_rows + 1) / 2;
        if (rfull % render_rows != 0) fail("render_rows must divide range_rows^2");
        if ((2 * h * h) % render_rows != 0) fail("render_rows must divide 2*ceil(doppler_rows/2)^2");
    }
};

struct SquaredMaps {
    ProfileMap r2tm;
    ProfileMap d2tm;
};

/// RTM/DTM to the R2TM/D2TM render grids.
inline SquaredMaps square_profiles(const ProfileMap& rtm, const ProfileMap& dtm, const SquareConfig& cfg = {})
{
    cfg.validate();
    return {square_render(resample_rows(rtm, cfg.range_rows), MapKind::RangeSquared, cfg.render_rows),
            square_render(resample_rows(dtm, cfg.doppler_rows), MapKind::DopplerSquared, cfg.render_rows)};
}

}  // namespace mdc

#endif  // MDCORNER_AXIS_SQUARE_HPP
